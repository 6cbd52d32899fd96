//! Resource allocation schemes: uniform, degree-first and degree-last.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("scheme budget must be positive and finite, got {0}")]
    InvalidBudget(f64),
    #[error("node {} has out-degree 0", .0 + 1)]
    ZeroDegree(usize),
    #[error("unknown scheme kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Uniform,
    DegreeFirst,
    DegreeLast,
}

impl SchemeKind {
    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::Uniform => "uniform",
            SchemeKind::DegreeFirst => "degree_first",
            SchemeKind::DegreeLast => "degree_last",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SchemeKind {
    type Err = SchemeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(SchemeKind::Uniform),
            "degree_first" => Ok(SchemeKind::DegreeFirst),
            "degree_last" => Ok(SchemeKind::DegreeLast),
            other => Err(SchemeError::UnknownKind(other.to_string())),
        }
    }
}

/// A scheme kind with its total resource per unit time (the 1-norm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub budget: f64,
}

impl SchemeSpec {
    pub fn new(kind: SchemeKind, budget: f64) -> Self {
        Self { kind, budget }
    }

    /// Distributes the budget over the nodes of `g`.
    pub fn realize(&self, g: &Graph) -> Result<Vec<f64>, SchemeError> {
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(SchemeError::InvalidBudget(self.budget));
        }
        let n = g.n();
        let shares: Vec<f64> = match self.kind {
            SchemeKind::Uniform => vec![1.0; n],
            SchemeKind::DegreeFirst | SchemeKind::DegreeLast => {
                let mut d = Vec::with_capacity(n);
                for i in 0..n {
                    match g.out_degree(i) {
                        0 => return Err(SchemeError::ZeroDegree(i)),
                        k if self.kind == SchemeKind::DegreeFirst => d.push(k as f64),
                        k => d.push(1.0 / k as f64),
                    }
                }
                d
            }
        };
        let total: f64 = shares.iter().sum();
        Ok(shares.iter().map(|s| self.budget * s / total).collect())
    }
}
