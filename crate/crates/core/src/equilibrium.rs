//! Equilibrium solver.
//!
//! The equilibrium is the unique fixed point of `H` in the box
//! `[lower, upper]` given by [`GscsParams::bounds`]. We iterate
//! `w <- (1 - lambda) w + lambda H(w)`, projecting onto the box after every
//! step. `H` is monotone, so runs started from the two box corners bracket
//! the fixed point from below and above.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{limit_security, GscsParams, ModelError, StateVector};

/// Slack allowed on the bounds certificate.
pub const BOUNDS_SLACK: f64 = 1e-9;
/// Iterations without progress before the damping factor is halved.
const STALL_WINDOW: usize = 50;
const MIN_DAMPING: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no convergence after {max_iter} iterations (last step {last_step:e}, residual {residual:e})")]
    NoConvergence { max_iter: usize, last: Vec<f64>, last_step: f64, residual: f64 },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("damping must lie in (0, 1], got {0}")]
    InvalidDamping(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartPoint {
    /// `(lower + upper) / 2`
    Midpoint,
    Lower,
    Upper,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub start: StartPoint,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100_000, damping: 1.0, start: StartPoint::Midpoint }
    }
}

impl SolverOptions {
    pub fn with_start(mut self, start: StartPoint) -> Self {
        self.start = start;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub c_star: StateVector,
    /// `||C* - H(C*)||_inf`, recomputed after stopping.
    pub residual: f64,
    /// `||rhs(C*)||_inf`
    pub rhs_residual: f64,
    pub iterations: usize,
    /// `lower - 1e-9 <= C* <= upper + 1e-9` and `C* > 0`.
    pub within_bounds: bool,
    pub limit_security: f64,
    /// Damping factor in effect when the iteration stopped.
    pub final_damping: f64,
}

pub fn solve(p: &GscsParams, opts: &SolverOptions) -> Result<EquilibriumResult, SolveError> {
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(SolveError::InvalidTolerance(opts.tol));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(SolveError::InvalidDamping(opts.damping));
    }
    let n = p.n();
    let (lower, upper) = p.bounds();
    let mut w: Vec<f64> = match &opts.start {
        StartPoint::Midpoint => lower.iter().zip(&upper).map(|(a, b)| (a + b) / 2.0).collect(),
        StartPoint::Lower => lower.clone(),
        StartPoint::Upper => upper.clone(),
        StartPoint::Custom(v) => {
            if v.len() != n {
                return Err(ModelError::DimensionMismatch { expected: n, found: v.len() }.into());
            }
            v.clone()
        }
    };
    project(&mut w, &lower, &upper);

    let mut lambda = opts.damping;
    let mut hw = vec![0.0; n];
    let mut best_step = f64::INFINITY;
    let mut stalled = 0;
    let mut step = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        p.h_map_into(&w, &mut hw);
        step = 0.0;
        for i in 0..n {
            let next = ((1.0 - lambda) * w[i] + lambda * hw[i]).clamp(lower[i], upper[i]);
            step = step.max((next - w[i]).abs());
            w[i] = next;
        }
        if step <= opts.tol {
            return Ok(certify(p, w, iter, lambda, &lower, &upper));
        }
        if step < best_step {
            best_step = step;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_WINDOW && lambda > MIN_DAMPING {
                lambda = (lambda / 2.0).max(MIN_DAMPING);
                stalled = 0;
                best_step = f64::INFINITY;
            }
        }
    }
    let (residual, _) = residual(p, &w);
    Err(SolveError::NoConvergence { max_iter: opts.max_iter, last: w, last_step: step, residual })
}

fn project(w: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in w.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn certify(p: &GscsParams, w: Vec<f64>, iterations: usize, lambda: f64, lower: &[f64], upper: &[f64]) -> EquilibriumResult {
    let (fixed, rhs) = residual(p, &w);
    let within_bounds = w
        .iter()
        .zip(lower.iter().zip(upper))
        .all(|(&c, (&lo, &hi))| c > 0.0 && c >= lo - BOUNDS_SLACK && c <= hi + BOUNDS_SLACK);
    let limit_security = limit_security(&w);
    EquilibriumResult {
        c_star: StateVector::new(w).expect("iterates stay inside [lower, upper]"),
        residual: fixed,
        rhs_residual: rhs,
        iterations,
        within_bounds,
        limit_security,
        final_damping: lambda,
    }
}

/// `(||c - H(c)||_inf, ||rhs(c)||_inf)`. Both vanish exactly at equilibria.
pub fn residual(p: &GscsParams, c: &[f64]) -> (f64, f64) {
    let n = p.n();
    assert_eq!(c.len(), n, "state length must match node count");
    let mut buf = vec![0.0; n];
    p.h_map_into(c, &mut buf);
    let fixed = c.iter().zip(&buf).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    p.rhs_into(c, &mut buf);
    let rhs = buf.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    (fixed, rhs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessProbe {
    pub starts: usize,
    /// Largest `inf`-norm distance between any restart and the first solve.
    pub max_spread: f64,
}

/// Solves from `starts` points drawn uniformly in `[lower, upper]` and reports
/// how far apart the results land.
pub fn uniqueness_probe(p: &GscsParams, opts: &SolverOptions, starts: usize, seed: u64) -> Result<UniquenessProbe, SolveError> {
    let (lower, upper) = p.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reference: Option<Vec<f64>> = None;
    let mut max_spread = 0.0_f64;
    for _ in 0..starts {
        let start: Vec<f64> = lower
            .iter()
            .zip(&upper)
            .map(|(&lo, &hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
            .collect();
        let res = solve(p, &opts.clone().with_start(StartPoint::Custom(start)))?;
        match &reference {
            None => reference = Some(res.c_star.into_inner()),
            Some(r) => {
                let d = r.iter().zip(res.c_star.iter()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                max_spread = max_spread.max(d);
            }
        }
    }
    Ok(UniquenessProbe { starts, max_spread })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{catalog_graph, Graph};
    use crate::model::{InfectionFunction, TechLevels};
    use crate::schemes::{SchemeKind, SchemeSpec};

    fn two_cycle(beta: f64) -> GscsParams {
        GscsParams::new(
            TechLevels::new(1.0, beta, 1.0, 1.0),
            vec![1.0; 2],
            vec![1.0; 2],
            vec![1.0; 2],
            Graph::from_edges(2, &[(0, 1), (1, 0)], false).unwrap(),
            InfectionFunction::Rational,
        )
        .unwrap()
    }

    fn star_experiment_one() -> GscsParams {
        // r = 1: ||x|| = 1, ||y|| = ||z|| = 1/2, uniform schemes
        let g = catalog_graph("G1").unwrap();
        let uni = |b| SchemeSpec::new(SchemeKind::Uniform, b).realize(&g).unwrap();
        GscsParams::new(
            TechLevels::new(0.05, 0.01, 1.0, 1.0),
            uni(1.0),
            uni(0.5),
            uni(0.5),
            g.clone(),
            InfectionFunction::Rational,
        )
        .unwrap()
    }

    /// Scalar bisection on `c = (1 + c/(1+c)) / (2 + c/(1+c))`.
    fn bisect_two_cycle() -> f64 {
        let g = |c: f64| {
            let f = c / (1.0 + c);
            (1.0 + f) / (2.0 + f) - c
        };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn no_infection_converges_in_one_iteration() {
        let p = two_cycle(0.0);
        let res = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.c_star.as_slice(), &[0.5, 0.5]);
        assert_eq!(res.residual, 0.0);
        assert_eq!(res.limit_security, 0.5);
    }

    #[test]
    fn two_cycle_matches_bisection() {
        let c = bisect_two_cycle();
        let res = solve(&two_cycle(1.0), &SolverOptions::default()).unwrap();
        for v in res.c_star.iter() {
            assert!((v - c).abs() < 1e-12, "{v} vs {c}");
        }
        assert!(res.within_bounds);
        assert!(res.residual <= 1e-12);
    }

    #[test]
    fn bracketing_starts_agree() {
        let p = star_experiment_one();
        let from_below = solve(&p, &SolverOptions::default().with_start(StartPoint::Lower)).unwrap();
        let from_above = solve(&p, &SolverOptions::default().with_start(StartPoint::Upper)).unwrap();
        for (a, b) in from_below.c_star.iter().zip(from_above.c_star.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn residual_examples() {
        let p = star_experiment_one();
        let res = solve(&p, &SolverOptions::default()).unwrap();
        let (a, b) = residual(&p, &res.c_star);
        assert!(a <= 1e-10 && b <= 1e-10);

        let p0 = two_cycle(0.0);
        let (lo, _) = p0.bounds();
        assert_eq!(residual(&p0, &lo), (0.0, 0.0));

        let (_, rhs) = residual(&p, &[0.0; 6]);
        let min_rate = (0..6).map(|i| p.alpha() * p.x()[i] / (p.delta() * p.y()[i])).fold(f64::INFINITY, f64::min);
        assert!(rhs >= min_rate && min_rate > 0.0);
    }

    #[test]
    fn option_validation() {
        let p = two_cycle(1.0);
        let bad_tol = SolverOptions { tol: 0.0, ..SolverOptions::default() };
        assert_eq!(solve(&p, &bad_tol), Err(SolveError::InvalidTolerance(0.0)));
        let bad_damp = SolverOptions { damping: 1.5, ..SolverOptions::default() };
        assert_eq!(solve(&p, &bad_damp), Err(SolveError::InvalidDamping(1.5)));
        let bad_start = SolverOptions::default().with_start(StartPoint::Custom(vec![0.5]));
        assert!(matches!(solve(&p, &bad_start), Err(SolveError::Model(_))));
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        let p = star_experiment_one();
        let opts = SolverOptions { max_iter: 2, ..SolverOptions::default() };
        match solve(&p, &opts) {
            Err(SolveError::NoConvergence { max_iter, last, residual, .. }) => {
                assert_eq!(max_iter, 2);
                assert_eq!(last.len(), 6);
                assert!(residual > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn damped_iteration_reaches_same_point() {
        let p = star_experiment_one();
        let plain = solve(&p, &SolverOptions::default()).unwrap();
        let damped = solve(&p, &SolverOptions { damping: 0.3, ..SolverOptions::default() }).unwrap();
        for (a, b) in plain.c_star.iter().zip(damped.c_star.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn probe_reports_tiny_spread() {
        let probe = uniqueness_probe(&star_experiment_one(), &SolverOptions::default(), 10, 7).unwrap();
        assert_eq!(probe.starts, 10);
        assert!(probe.max_spread < 1e-8);
    }

    #[test]
    fn equilibrium_grows_with_infection_level() {
        let p = star_experiment_one();
        let before = solve(&p, &SolverOptions::default()).unwrap();
        let mut lv = p.levels();
        lv.beta += 0.01;
        let after = solve(&p.with_levels(lv).unwrap(), &SolverOptions::default()).unwrap();
        for (a, b) in before.c_star.iter().zip(after.c_star.iter()) {
            assert!(b > a);
        }
    }
}
