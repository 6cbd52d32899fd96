//! Comparative statics of the equilibrium.
//!
//! Writing the equilibrium condition as `F(theta, C*) = 0` with
//!
//! ```text
//! F_i = ax_i - (ax_i + gdy_i z_i) C*_i + (1 - C*_i) f(b sum_j a_ji C*_j)
//! ```
//!
//! the Jacobian `dF/dC*` is the Metzler matrix `M` and the implicit function
//! theorem gives `M dC*/dtheta = -dF/dtheta`. `M` is Hurwitz with a strictly
//! negative inverse on strongly connected graphs, which fixes the sign of
//! every sensitivity.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::equilibrium::{residual, solve, SolveError, SolverOptions};
use crate::model::{mean_compromise, GscsParams, ModelError, StateVector};

/// `rhs` residual above which a vector is not accepted as an equilibrium.
pub const EQUILIBRIUM_GATE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensitivityError {
    #[error("state is not an equilibrium (rhs residual {0:e})")]
    NotAnEquilibrium(f64),
    #[error("matrix M is singular")]
    SingularMatrix,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A scalar parameter of the model. Node indices are 0-based; the text form
/// (`x_3`, `a_1_6`) is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parameter {
    Alpha,
    Beta,
    Gamma,
    Delta,
    X(usize),
    Y(usize),
    Z(usize),
    /// `a_kl`, the weight of edge `k -> l`.
    Edge(usize, usize),
}

impl Parameter {
    /// Sign of `dC*/dtheta` on every component: `+1` or `-1`.
    pub fn expected_sign(self) -> f64 {
        match self {
            Parameter::Alpha | Parameter::Beta | Parameter::X(_) | Parameter::Edge(..) => 1.0,
            Parameter::Gamma | Parameter::Delta | Parameter::Y(_) | Parameter::Z(_) => -1.0,
        }
    }

    pub fn value(self, p: &GscsParams) -> f64 {
        match self {
            Parameter::Alpha => p.alpha(),
            Parameter::Beta => p.beta(),
            Parameter::Gamma => p.gamma(),
            Parameter::Delta => p.delta(),
            Parameter::X(k) => p.x()[k],
            Parameter::Y(k) => p.y()[k],
            Parameter::Z(k) => p.z()[k],
            Parameter::Edge(k, l) => p.edge_weight(k, l),
        }
    }

    pub fn check(self, n: usize) -> Result<(), SensitivityError> {
        let ok = match self {
            Parameter::X(k) | Parameter::Y(k) | Parameter::Z(k) => k < n,
            Parameter::Edge(k, l) => k < n && l < n && k != l,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(SensitivityError::InvalidParameter(format!("{self} on a graph with {n} nodes")))
        }
    }

    /// Copy of `p` with this parameter set to `value`.
    pub fn perturb(self, p: &GscsParams, value: f64) -> Result<GscsParams, SensitivityError> {
        self.check(p.n())?;
        let mut levels = p.levels();
        let (mut x, mut y, mut z) = (p.x().to_vec(), p.y().to_vec(), p.z().to_vec());
        match self {
            Parameter::Alpha => levels.alpha = value,
            Parameter::Beta => levels.beta = value,
            Parameter::Gamma => levels.gamma = value,
            Parameter::Delta => levels.delta = value,
            Parameter::X(k) => x[k] = value,
            Parameter::Y(k) => y[k] = value,
            Parameter::Z(k) => z[k] = value,
            Parameter::Edge(k, l) => return Ok(p.with_edge_weight(k, l, value)),
        }
        Ok(p.with_levels(levels)?.with_schemes(x, y, z)?)
    }

    /// `dF/dtheta` at `c`.
    fn forcing(self, p: &GscsParams, c: &[f64]) -> Vec<f64> {
        let n = p.n();
        let mut g = vec![0.0; n];
        match self {
            Parameter::Alpha => {
                for i in 0..n {
                    g[i] = p.x()[i] * (1.0 - c[i]);
                }
            }
            Parameter::Beta => {
                for i in 0..n {
                    let pressure = p.pressure(c, i);
                    let inflow: f64 = (0..n).map(|j| p.edge_weight(j, i) * c[j]).sum();
                    g[i] = (1.0 - c[i]) * p.infection().deriv(pressure) * inflow;
                }
            }
            Parameter::Gamma => {
                for i in 0..n {
                    g[i] = -p.delta() * p.y()[i] * p.z()[i] * c[i];
                }
            }
            Parameter::Delta => {
                for i in 0..n {
                    g[i] = -p.gamma() * p.y()[i] * p.z()[i] * c[i];
                }
            }
            Parameter::X(k) => g[k] = p.alpha() * (1.0 - c[k]),
            Parameter::Y(k) => g[k] = -p.gamma() * p.delta() * p.z()[k] * c[k],
            Parameter::Z(k) => g[k] = -p.gamma() * p.delta() * p.y()[k] * c[k],
            Parameter::Edge(k, l) => {
                let pressure = p.pressure(c, l);
                g[l] = (1.0 - c[l]) * p.infection().deriv(pressure) * p.beta() * c[k];
            }
        }
        g
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parameter::Alpha => f.write_str("alpha"),
            Parameter::Beta => f.write_str("beta"),
            Parameter::Gamma => f.write_str("gamma"),
            Parameter::Delta => f.write_str("delta"),
            Parameter::X(k) => write!(f, "x_{}", k + 1),
            Parameter::Y(k) => write!(f, "y_{}", k + 1),
            Parameter::Z(k) => write!(f, "z_{}", k + 1),
            Parameter::Edge(k, l) => write!(f, "a_{}_{}", k + 1, l + 1),
        }
    }
}

impl FromStr for Parameter {
    type Err = SensitivityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SensitivityError::InvalidParameter(s.to_string());
        let index = |t: &str| -> Result<usize, SensitivityError> {
            match t.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(k - 1),
                _ => Err(bad()),
            }
        };
        match s {
            "alpha" => return Ok(Parameter::Alpha),
            "beta" => return Ok(Parameter::Beta),
            "gamma" => return Ok(Parameter::Gamma),
            "delta" => return Ok(Parameter::Delta),
            _ => {}
        }
        let (head, rest) = s.split_once('_').ok_or_else(bad)?;
        match head {
            "x" => Ok(Parameter::X(index(rest)?)),
            "y" => Ok(Parameter::Y(index(rest)?)),
            "z" => Ok(Parameter::Z(index(rest)?)),
            "a" => {
                let (k, l) = rest.split_once('_').ok_or_else(bad)?;
                Ok(Parameter::Edge(index(k)?, index(l)?))
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for Parameter {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// The Jacobian of the equilibrium condition at `C*`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetzlerMatrix {
    pub m: DMatrix<f64>,
    pub spectral_abscissa: f64,
    pub c_star: StateVector,
}

impl MetzlerMatrix {
    pub fn inverse(&self) -> Option<DMatrix<f64>> {
        self.m.clone().try_inverse()
    }

    /// Largest off-diagonal entry that is negative, if any (should be none).
    pub fn min_off_diagonal(&self) -> f64 {
        let n = self.m.nrows();
        let mut min = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    min = min.min(self.m[(i, j)]);
                }
            }
        }
        min
    }
}

/// `M = diag(b (1 - C*_i) f'(p_i)) A^T - diag(ax_i + gdy_i z_i + f(p_i))`
/// with `p_i = b sum_j a_ji C*_j`.
pub fn build_m(p: &GscsParams, c_star: &[f64]) -> Result<MetzlerMatrix, SensitivityError> {
    let n = p.n();
    if c_star.len() != n {
        return Err(ModelError::DimensionMismatch { expected: n, found: c_star.len() }.into());
    }
    let (_, rhs) = residual(p, c_star);
    if !(rhs <= EQUILIBRIUM_GATE) {
        return Err(SensitivityError::NotAnEquilibrium(rhs));
    }
    let f = p.infection();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let pressure = p.pressure(c_star, i);
        let coupling = p.beta() * (1.0 - c_star[i]) * f.deriv(pressure);
        for j in 0..n {
            m[(i, j)] = coupling * p.edge_weight(j, i);
        }
        let loss = p.alpha() * p.x()[i] + p.gamma() * p.delta() * p.y()[i] * p.z()[i] + f.eval(pressure);
        m[(i, i)] -= loss;
    }
    let spectral_abscissa = m
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MetzlerMatrix { m, spectral_abscissa, c_star: StateVector::new(c_star.to_vec())? })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub parameter: Parameter,
    /// `dC*/dtheta`
    pub d_c_star: Vec<f64>,
    /// `dS_L/dtheta = -mean(dC*/dtheta)`
    pub d_limit_security: f64,
    /// Relative `inf`-norm gap to the finite-difference oracle, once run.
    pub fd_check: Option<f64>,
    /// Every component has the expected strict sign, and `dS_L` the opposite.
    pub sign_ok: bool,
}

impl SensitivityReport {
    /// Runs the finite-difference oracle and records the relative gap.
    pub fn run_fd_check(&mut self, p: &GscsParams, step: Option<f64>) -> Result<f64, SensitivityError> {
        let fd = finite_difference_oracle(p, self.parameter, step)?;
        let gap = relative_gap(&self.d_c_star, &fd);
        self.fd_check = Some(gap);
        Ok(gap)
    }
}

/// `||a - b||_inf / ||b||_inf`, falling back to the absolute gap when `b` is 0.
pub fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn sensitivity_wrt(p: &GscsParams, c_star: &[f64], theta: Parameter) -> Result<SensitivityReport, SensitivityError> {
    theta.check(p.n())?;
    let metzler = build_m(p, c_star)?;
    sensitivity_with(&metzler, p, theta)
}

/// Like [`sensitivity_wrt`] but reuses an assembled `M`.
pub fn sensitivity_with(metzler: &MetzlerMatrix, p: &GscsParams, theta: Parameter) -> Result<SensitivityReport, SensitivityError> {
    theta.check(p.n())?;
    let forcing = DVector::from_vec(theta.forcing(p, &metzler.c_star));
    let d = metzler.m.clone().lu().solve(&(-forcing)).ok_or(SensitivityError::SingularMatrix)?;
    if d.iter().any(|v| !v.is_finite()) {
        return Err(SensitivityError::SingularMatrix);
    }
    let d_c_star: Vec<f64> = d.iter().copied().collect();
    let d_limit_security = -mean_compromise(&d_c_star);
    let sign = theta.expected_sign();
    let sign_ok = d_c_star.iter().all(|v| sign * v > 0.0) && -sign * d_limit_security > 0.0;
    Ok(SensitivityReport { parameter: theta, d_c_star, d_limit_security, fd_check: None, sign_ok })
}

/// Central difference `(C*(theta + h) - C*(theta - h)) / 2h` with every
/// equilibrium solved to 1e-12. When `theta - h` would be invalid, which
/// includes absent edges (`a_kl = 0`), the second-order one-sided stencil
/// `(-3 C*(theta) + 4 C*(theta + h) - C*(theta + 2h)) / 2h` is used instead.
pub fn finite_difference_oracle(p: &GscsParams, theta: Parameter, step: Option<f64>) -> Result<Vec<f64>, SensitivityError> {
    theta.check(p.n())?;
    let value = theta.value(p);
    let h = step.unwrap_or(1e-5 * value.abs().max(1.0));
    if !(h.is_finite() && h > 0.0) {
        return Err(SensitivityError::InvalidParameter(format!("finite-difference step {h}")));
    }
    let lower_valid = match theta {
        Parameter::Alpha | Parameter::Beta | Parameter::X(_) | Parameter::Edge(..) => value - h >= 0.0,
        _ => value - h > 0.0,
    };
    let opts = SolverOptions { tol: 1e-12, ..SolverOptions::default() };
    let equilibrium = |v: f64| -> Result<Vec<f64>, SensitivityError> {
        let q = theta.perturb(p, v)?;
        Ok(solve(&q, &opts)?.c_star.into_inner())
    };
    if lower_valid {
        let (hi, lo) = rayon::join(|| equilibrium(value + h), || equilibrium(value - h));
        let (hi, lo) = (hi?, lo?);
        return Ok(hi.iter().zip(&lo).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    let (c0, (c1, c2)) =
        rayon::join(|| equilibrium(value), || rayon::join(|| equilibrium(value + h), || equilibrium(value + 2.0 * h)));
    let (c0, c1, c2) = (c0?, c1?, c2?);
    Ok((0..c0.len()).map(|i| (-3.0 * c0[i] + 4.0 * c1[i] - c2[i]) / (2.0 * h)).collect())
}
