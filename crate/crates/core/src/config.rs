//! JSON configuration formats.
//!
//! Params:
//!
//! ```json
//! {"alpha": 0.05, "beta": 0.01, "gamma": 1, "delta": 1,
//!  "x": {"kind": "uniform", "budget": 1}, "y": [0.1, 0.1, ...], "z": ...,
//!  "graph": "G1", "f": {"kind": "rational"}}
//! ```
//!
//! Scheme vectors are either explicit arrays or `{"kind", "budget"}` specs;
//! the graph is a catalog name or an inline `{"n", "undirected", "edges"}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{catalog_graph, Graph, GraphError, GraphSpec};
use crate::model::{GscsParams, InfectionFunction, ModelError, TechLevels};
use crate::schemes::{SchemeError, SchemeSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphRef {
    Name(String),
    Inline(GraphSpec),
}

impl GraphRef {
    pub fn resolve(&self) -> Result<Graph, GraphError> {
        match self {
            GraphRef::Name(name) => catalog_graph(name),
            GraphRef::Inline(spec) => spec.build(),
        }
    }

    /// Catalog name, or `inline<k>` for the k-th inline graph of a list.
    pub fn label(&self, position: usize) -> String {
        match self {
            GraphRef::Name(name) => name.to_ascii_uppercase(),
            GraphRef::Inline(_) => format!("inline{}", position + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    #[default]
    Rational,
    Identity,
    Saturating { a: f64 },
}

impl FunctionSpec {
    pub fn build(&self) -> Result<InfectionFunction, ModelError> {
        match *self {
            FunctionSpec::Rational => Ok(InfectionFunction::Rational),
            FunctionSpec::Identity => Ok(InfectionFunction::Identity),
            FunctionSpec::Saturating { a } => InfectionFunction::saturating(a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Explicit(Vec<f64>),
    Scheme(SchemeSpec),
}

impl VectorSpec {
    pub fn realize(&self, g: &Graph) -> Result<Vec<f64>, SchemeError> {
        match self {
            VectorSpec::Explicit(v) => Ok(v.clone()),
            VectorSpec::Scheme(spec) => spec.realize(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub x: VectorSpec,
    pub y: VectorSpec,
    pub z: VectorSpec,
    pub graph: GraphRef,
    #[serde(default)]
    pub f: FunctionSpec,
}

impl ParamsConfig {
    pub fn build(&self) -> Result<GscsParams, ConfigError> {
        let graph = self.graph.resolve()?;
        let x = self.x.realize(&graph)?;
        let y = self.y.realize(&graph)?;
        let z = self.z.realize(&graph)?;
        Ok(GscsParams::new(
            TechLevels::new(self.alpha, self.beta, self.gamma, self.delta),
            x,
            y,
            z,
            graph,
            self.f.build()?,
        )?)
    }
}
