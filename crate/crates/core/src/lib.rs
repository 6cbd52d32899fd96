//! Secure-compromised-secure attack-defense dynamics on computer networks.
//!
//! Each node of a strongly connected network is either secure or compromised.
//! An external attacker and lateral infection compromise nodes; prevention and
//! recovery resources push back. The mean-field dynamics have a unique,
//! globally attracting equilibrium `C*`, and the *limit security*
//! `S_L = 1 - mean(C*)` summarizes how secure the network ends up.
//!
//! Modules:
//!
//! * [`graph`]: networks and the six-node tree catalog.
//! * [`model`]: parameters, infection functions, the vector field, bounds.
//! * [`schemes`]: uniform / degree-first / degree-last allocations.
//! * [`dynamics`]: RK4 integration and the Lyapunov diagnostic.
//! * [`equilibrium`]: fixed-point solver with certificates.
//! * [`sensitivity`]: implicit-function sensitivities and a finite-difference oracle.
//! * [`experiment`]: sweeps emitting CSV tables.
//! * [`config`], [`cli`]: JSON configs and the `gscs` command.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod equilibrium;
pub mod experiment;
pub mod format;
pub mod graph;
pub mod model;
pub mod schemes;
pub mod sensitivity;

pub use dynamics::{integrate, lyapunov_v, Trajectory};
pub use equilibrium::{solve, EquilibriumResult, SolverOptions, StartPoint};
pub use graph::{catalog_graph, tree_catalog, Graph};
pub use model::{limit_security, mean_compromise, GscsParams, InfectionFunction, StateVector, TechLevels};
pub use schemes::{SchemeKind, SchemeSpec};
pub use sensitivity::{build_m, sensitivity_wrt, Parameter, SensitivityReport};
