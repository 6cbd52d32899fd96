//! The secure-compromised-secure attack-defense model.
//!
//! Node `i` is compromised with probability `C_i`. Its dynamics are
//!
//! ```text
//! dC_i/dt = ax_i/(dy_i) - (ax_i/(dy_i) + g z_i) C_i + (1 - C_i) f(b * sum_j a_ji C_j) / (dy_i)
//! ```
//!
//! with technical levels `a = alpha`, `b = beta`, `g = gamma`, `d = delta`,
//! attack scheme `x`, prevention scheme `y` and recovery scheme `z`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid technical level {name} = {value}")]
    InvalidLevel { name: &'static str, value: f64 },
    #[error("invalid {scheme} scheme entry at node {}: {value}", .node + 1)]
    InvalidScheme { scheme: &'static str, node: usize, value: f64 },
    #[error("attack scheme must have a positive total")]
    ZeroAttack,
    #[error("state entry {} = {value} lies outside [0, 1]", .node + 1)]
    OutOfDomain { node: usize, value: f64 },
    #[error("invalid infection function: {0}")]
    InvalidFunction(String),
}

/// The generic infection function `f` with its analytic derivative.
///
/// Built-in instances are concave, strictly increasing, `f(0) = 0` and
/// `f(x) <= x`. `Custom` accepts arbitrary function pointers and is meant for
/// experimentation; run [`validate_infection_function`] on it first.
#[derive(Clone)]
pub enum InfectionFunction {
    /// `x / (1 + x)`
    Rational,
    /// `x`
    Identity,
    /// `a (1 - exp(-x / a))`, `a > 0`
    Saturating { a: f64 },
    Custom {
        name: String,
        eval: fn(f64) -> f64,
        deriv: fn(f64) -> f64,
    },
}

impl fmt::Debug for InfectionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl PartialEq for InfectionFunction {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Rational, Self::Rational) | (Self::Identity, Self::Identity) => true,
            (Self::Saturating { a }, Self::Saturating { a: b }) => a == b,
            (Self::Custom { name, .. }, Self::Custom { name: other, .. }) => name == other,
            _ => false,
        }
    }
}

impl InfectionFunction {
    pub fn saturating(a: f64) -> Result<Self, ModelError> {
        if a.is_finite() && a > 0.0 {
            Ok(Self::Saturating { a })
        } else {
            Err(ModelError::InvalidFunction(format!("saturating scale must be positive, got {a}")))
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Rational => x / (1.0 + x),
            Self::Identity => x,
            Self::Saturating { a } => -a * (-x / a).exp_m1(),
            Self::Custom { eval, .. } => eval(x),
        }
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Self::Rational => 1.0 / ((1.0 + x) * (1.0 + x)),
            Self::Identity => 1.0,
            Self::Saturating { a } => (-x / a).exp(),
            Self::Custom { deriv, .. } => deriv(x),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Rational => "rational".into(),
            Self::Identity => "identity".into(),
            Self::Saturating { a } => format!("saturating(a={a})"),
            Self::Custom { name, .. } => name.clone(),
        }
    }
}

/// The four technical levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechLevels {
    /// External attack, `>= 0`.
    pub alpha: f64,
    /// Internal infection, `>= 0`.
    pub beta: f64,
    /// Recovery, `> 0`.
    pub gamma: f64,
    /// Prevention, `> 0`.
    pub delta: f64,
}

impl TechLevels {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Self {
        Self { alpha, beta, gamma, delta }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let nonneg = [("alpha", self.alpha), ("beta", self.beta)];
        let pos = [("gamma", self.gamma), ("delta", self.delta)];
        for (name, value) in nonneg {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::InvalidLevel { name, value });
            }
        }
        for (name, value) in pos {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidLevel { name, value });
            }
        }
        Ok(())
    }
}

/// A validated model instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GscsParams {
    levels: TechLevels,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    graph: Graph,
    f: InfectionFunction,
    /// Row-major `a_ij`. Mirrors `graph` except when an edge weight is
    /// perturbed for finite differences.
    weights: Vec<f64>,
}

impl GscsParams {
    pub fn new(
        levels: TechLevels,
        x: Vec<f64>,
        y: Vec<f64>,
        z: Vec<f64>,
        graph: Graph,
        f: InfectionFunction,
    ) -> Result<Self, ModelError> {
        levels.validate()?;
        let n = graph.n();
        for v in [&x, &y, &z] {
            if v.len() != n {
                return Err(ModelError::DimensionMismatch { expected: n, found: v.len() });
            }
        }
        for (i, &v) in x.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidScheme { scheme: "attack", node: i, value: v });
            }
        }
        if x.iter().sum::<f64>() <= 0.0 {
            return Err(ModelError::ZeroAttack);
        }
        for (scheme, v) in [("prevention", &y), ("recovery", &z)] {
            if let Some((i, &bad)) = v.iter().enumerate().find(|(_, &w)| !(w.is_finite() && w > 0.0)) {
                return Err(ModelError::InvalidScheme { scheme, node: i, value: bad });
            }
        }
        if let InfectionFunction::Saturating { a } = f {
            if !(a.is_finite() && a > 0.0) {
                return Err(ModelError::InvalidFunction(format!("saturating scale must be positive, got {a}")));
            }
        }
        let mut weights = vec![0.0; n * n];
        for (i, j) in graph.edges() {
            weights[i * n + j] = 1.0;
        }
        Ok(Self { levels, x, y, z, graph, f, weights })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }
    pub fn levels(&self) -> TechLevels {
        self.levels
    }
    pub fn alpha(&self) -> f64 {
        self.levels.alpha
    }
    pub fn beta(&self) -> f64 {
        self.levels.beta
    }
    pub fn gamma(&self) -> f64 {
        self.levels.gamma
    }
    pub fn delta(&self) -> f64 {
        self.levels.delta
    }
    pub fn x(&self) -> &[f64] {
        &self.x
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn z(&self) -> &[f64] {
        &self.z
    }
    pub fn graph(&self) -> &Graph {
        &self.graph
    }
    pub fn infection(&self) -> &InfectionFunction {
        &self.f
    }

    /// Effective `a_ij`, which equals the graph's 0/1 entry unless perturbed.
    #[inline]
    pub fn edge_weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n() + j]
    }

    pub fn with_levels(&self, levels: TechLevels) -> Result<Self, ModelError> {
        Self::new(levels, self.x.clone(), self.y.clone(), self.z.clone(), self.graph.clone(), self.f.clone())
    }

    pub fn with_schemes(&self, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(self.levels, x, y, z, self.graph.clone(), self.f.clone())
    }

    /// Treats `a_kl` as a real parameter. Only used for finite differences,
    /// where the adjacency leaves {0, 1}.
    pub(crate) fn with_edge_weight(&self, k: usize, l: usize, w: f64) -> Self {
        let mut p = self.clone();
        let n = p.n();
        p.weights[k * n + l] = w;
        p
    }

    fn check_len(&self, v: &[f64]) -> Result<(), ModelError> {
        if v.len() != self.n() {
            Err(ModelError::DimensionMismatch { expected: self.n(), found: v.len() })
        } else {
            Ok(())
        }
    }

    /// `beta * sum_j a_ji c_j`, the infection pressure on node `i`.
    #[inline]
    pub fn pressure(&self, c: &[f64], i: usize) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for (j, &cj) in c.iter().enumerate() {
            s += self.weights[j * n + i] * cj;
        }
        self.levels.beta * s
    }

    /// `alpha * x_i`
    #[inline]
    fn attack(&self, i: usize) -> f64 {
        self.levels.alpha * self.x[i]
    }

    /// `gamma * delta * y_i * z_i`
    #[inline]
    fn defense(&self, i: usize) -> f64 {
        self.levels.gamma * self.levels.delta * self.y[i] * self.z[i]
    }

    /// `(ax + inf) / (ax + gdyz + inf)`; shared by bounds and H so that they
    /// agree bit for bit.
    #[inline]
    fn balance(&self, i: usize, infection: f64) -> f64 {
        let ax = self.attack(i);
        (ax + infection) / (ax + self.defense(i) + infection)
    }

    /// Right-hand side without dimension checks; used by the integrator.
    pub(crate) fn rhs_into(&self, c: &[f64], out: &mut [f64]) {
        let TechLevels { alpha, gamma, delta, .. } = self.levels;
        for i in 0..self.n() {
            let dy = delta * self.y[i];
            let attack_rate = alpha * self.x[i] / dy;
            let infection = self.f.eval(self.pressure(c, i));
            out[i] = attack_rate - (attack_rate + gamma * self.z[i]) * c[i] + (1.0 - c[i]) * infection / dy;
        }
    }

    /// Vector field of the dynamics at `c`.
    pub fn rhs(&self, c: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_len(c)?;
        let mut out = vec![0.0; self.n()];
        self.rhs_into(c, &mut out);
        Ok(out)
    }

    /// Componentwise bounds `(lower, upper)` on the equilibrium.
    ///
    /// `lower_i = ax_i / (ax_i + gdy_i z_i)` ignores infection entirely;
    /// `upper_i` assumes every in-neighbor is compromised.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let ones = vec![1.0; self.n()];
        let lower = (0..self.n()).map(|i| self.balance(i, 0.0)).collect();
        let upper = (0..self.n())
            .map(|i| self.balance(i, self.f.eval(self.pressure(&ones, i))))
            .collect();
        (lower, upper)
    }

    pub(crate) fn h_map_into(&self, w: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.balance(i, self.f.eval(self.pressure(w, i)));
        }
    }

    /// The map `H` whose fixed points are exactly the equilibria.
    pub fn h_map(&self, w: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_len(w)?;
        let mut out = vec![0.0; self.n()];
        self.h_map_into(w, &mut out);
        Ok(out)
    }

    /// Stable identifier for these parameters (FNV-1a over the numeric content).
    pub fn digest(&self) -> String {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        let TechLevels { alpha, beta, gamma, delta } = self.levels;
        for v in [alpha, beta, gamma, delta] {
            feed(&v.to_bits().to_le_bytes());
        }
        for v in self.x.iter().chain(&self.y).chain(&self.z).chain(&self.weights) {
            feed(&v.to_bits().to_le_bytes());
        }
        feed(self.f.name().as_bytes());
        format!("{h:016x}")
    }
}

/// A point of the unit box: compromise probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(c: Vec<f64>) -> Result<Self, ModelError> {
        if let Some((node, &value)) = c.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ModelError::OutOfDomain { node, value });
        }
        Ok(Self(c))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for StateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Expected fraction of compromised nodes, `(1/N) sum_i c_i`.
pub fn mean_compromise(c: &[f64]) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    c.iter().sum::<f64>() / c.len() as f64
}

/// Limit security `1 - mean(C*)`. The argument is assumed to be an equilibrium.
pub fn limit_security(c_star: &[f64]) -> f64 {
    1.0 - mean_compromise(c_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionProperty {
    ZeroAtOrigin,
    BoundedByIdentity,
    StrictlyIncreasing,
    Concave,
    DerivativeConsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub property: FunctionProperty,
    pub passed: bool,
    /// First grid point where the check failed.
    pub first_failure: Option<f64>,
    /// Largest violation (or discrepancy) observed.
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub function: String,
    pub checks: Vec<PropertyCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, property: FunctionProperty) -> &PropertyCheck {
        self.checks
            .iter()
            .find(|c| c.property == property)
            .expect("all properties are checked")
    }
}

/// 0 to 50 in 1001 uniform points, plus 1e-8 and 1e-4.
pub fn default_validation_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=1000).map(|k| 50.0 * k as f64 / 1000.0).collect();
    grid.extend([1e-8, 1e-4]);
    grid.sort_by(|a, b| a.total_cmp(b));
    grid
}

const IDENTITY_SLACK: f64 = 1e-12;
const DERIVATIVE_TOL: f64 = 1e-6;
const SECANT_SLACK: f64 = 1e-9;
const FD_STEP: f64 = 1e-5;

/// Grid-based check of the properties required of an infection function.
/// Failures are reported, never raised.
pub fn validate_infection_function(f: &InfectionFunction, grid: &[f64]) -> ValidationReport {
    let mut grid: Vec<f64> = grid.iter().copied().filter(|x| x.is_finite() && *x >= 0.0).collect();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let values: Vec<f64> = grid.iter().map(|&x| f.eval(x)).collect();

    let f0 = f.eval(0.0);
    let zero = PropertyCheck {
        property: FunctionProperty::ZeroAtOrigin,
        passed: f0 == 0.0,
        first_failure: (f0 != 0.0).then_some(0.0),
        worst: f0.abs(),
    };

    let mut bounded = Tracker::new(FunctionProperty::BoundedByIdentity);
    for (&x, &fx) in grid.iter().zip(&values) {
        bounded.record(x, fx - x, fx <= x + IDENTITY_SLACK);
    }

    let mut increasing = Tracker::new(FunctionProperty::StrictlyIncreasing);
    let mut concave = Tracker::new(FunctionProperty::Concave);
    let mut prev_slope: Option<f64> = None;
    for k in 1..grid.len() {
        let rise = values[k] - values[k - 1];
        increasing.record(grid[k], -rise, rise > 0.0);
        let slope = rise / (grid[k] - grid[k - 1]);
        if let Some(prev) = prev_slope {
            let excess = slope - prev;
            concave.record(grid[k], excess, excess <= SECANT_SLACK * prev.abs().max(1.0));
        }
        prev_slope = Some(slope);
    }

    let mut derivative = Tracker::new(FunctionProperty::DerivativeConsistent);
    for &x in &grid {
        let h = FD_STEP;
        let numeric = if x >= h {
            (f.eval(x + h) - f.eval(x - h)) / (2.0 * h)
        } else {
            // second-order one-sided near the origin
            (-3.0 * f.eval(x) + 4.0 * f.eval(x + h) - f.eval(x + 2.0 * h)) / (2.0 * h)
        };
        let gap = (f.deriv(x) - numeric).abs();
        derivative.record(x, gap, gap <= DERIVATIVE_TOL);
    }

    ValidationReport {
        function: f.name(),
        checks: vec![zero, bounded.finish(), increasing.finish(), concave.finish(), derivative.finish()],
    }
}

struct Tracker {
    check: PropertyCheck,
}

impl Tracker {
    fn new(property: FunctionProperty) -> Self {
        Self { check: PropertyCheck { property, passed: true, first_failure: None, worst: f64::NEG_INFINITY } }
    }

    fn record(&mut self, x: f64, violation: f64, ok: bool) {
        if violation > self.check.worst || violation.is_nan() {
            self.check.worst = violation;
        }
        if !ok && self.check.passed {
            self.check.passed = false;
            self.check.first_failure = Some(x);
        }
    }

    fn finish(mut self) -> PropertyCheck {
        if self.check.worst == f64::NEG_INFINITY {
            self.check.worst = 0.0;
        }
        self.check
    }
}
