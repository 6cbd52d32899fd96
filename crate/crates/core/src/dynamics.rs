//! Fixed-step RK4 integration of the compromise dynamics and the Lyapunov
//! diagnostic used to watch convergence to the equilibrium.

use std::io::{self, Write};

use thiserror::Error;

use crate::format::num;
use crate::model::{mean_compromise, GscsParams, ModelError, StateVector};

/// Overshoot past the unit box that is treated as rounding noise and clamped.
pub const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step at t = {time} left the unit box (node {}, value {value}); reduce dt", .node + 1)]
    StepOutOfDomain { time: f64, node: usize, value: f64 },
    #[error("invalid time grid: dt = {dt}, t_end = {t_end}")]
    InvalidTimeGrid { dt: f64, t_end: f64 },
    #[error("equilibrium entry {} = {value} is not positive", .node + 1)]
    NonpositiveEquilibrium { node: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub params_digest: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectories hold at least the initial state")
    }

    /// Mean compromise `C(t_k)` at every recorded step.
    pub fn mean_series(&self) -> Vec<f64> {
        self.states.iter().map(|c| mean_compromise(c)).collect()
    }

    /// Writes `t,C_1,...,C_N,C_mean[,V]`, keeping every `thin`-th row plus the
    /// final one. The `V` column appears when an equilibrium is given.
    pub fn write_csv<W: Write>(&self, mut out: W, c_star: Option<&[f64]>, thin: usize) -> io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut header = String::from("t");
        for i in 1..=n {
            header.push_str(&format!(",C_{i}"));
        }
        header.push_str(",C_mean");
        if c_star.is_some() {
            header.push_str(",V");
        }
        writeln!(out, "{header}")?;
        let thin = thin.max(1);
        let last = self.len().saturating_sub(1);
        for (k, (t, c)) in self.times.iter().zip(&self.states).enumerate() {
            if k % thin != 0 && k != last {
                continue;
            }
            let mut row = num(*t);
            for v in c.iter() {
                row.push(',');
                row.push_str(&num(*v));
            }
            row.push(',');
            row.push_str(&num(mean_compromise(c)));
            if let Some(star) = c_star {
                let v = lyapunov_v(c, star).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
                row.push(',');
                row.push_str(&num(v));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

/// Integrates from `c0` over `[0, t_end]` with classic RK4 at fixed step `dt`.
/// The last step is shortened if `t_end` is not a multiple of `dt`.
pub fn integrate(p: &GscsParams, c0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory, DynamicsError> {
    let n = p.n();
    if c0.len() != n {
        return Err(ModelError::DimensionMismatch { expected: n, found: c0.len() }.into());
    }
    let start = StateVector::new(c0.to_vec())?;
    if !(dt.is_finite() && t_end.is_finite() && dt > 0.0 && t_end > 0.0 && dt <= t_end) {
        return Err(DynamicsError::InvalidTimeGrid { dt, t_end });
    }

    let ratio = t_end / dt;
    let full_steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round() as usize
    } else {
        ratio.floor() as usize
    };
    let partial = t_end - full_steps as f64 * dt;
    let has_partial = partial > 1e-12 * t_end;
    let total = full_steps + usize::from(has_partial);

    let mut times = Vec::with_capacity(total + 1);
    let mut states = Vec::with_capacity(total + 1);
    times.push(0.0);
    states.push(start.clone());

    let mut stepper = Rk4::new(n);
    let mut c = start.into_inner();
    for k in 1..=total {
        let (h, t) = if k <= full_steps {
            (dt, if k == full_steps && !has_partial { t_end } else { k as f64 * dt })
        } else {
            (partial, t_end)
        };
        stepper.step(p, &mut c, h);
        for (i, v) in c.iter_mut().enumerate() {
            if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(v) {
                return Err(DynamicsError::StepOutOfDomain { time: t, node: i, value: *v });
            }
            *v = v.clamp(0.0, 1.0);
        }
        times.push(t);
        states.push(StateVector::new(c.clone())?);
    }

    Ok(Trajectory { times, states, params_digest: p.digest() })
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }

    fn step(&mut self, p: &GscsParams, c: &mut [f64], h: f64) {
        p.rhs_into(c, &mut self.k1);
        offset(&mut self.tmp, c, 0.5 * h, &self.k1);
        p.rhs_into(&self.tmp, &mut self.k2);
        offset(&mut self.tmp, c, 0.5 * h, &self.k2);
        p.rhs_into(&self.tmp, &mut self.k3);
        offset(&mut self.tmp, c, h, &self.k3);
        p.rhs_into(&self.tmp, &mut self.k4);
        for (i, ci) in c.iter_mut().enumerate() {
            *ci += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn offset(out: &mut [f64], c: &[f64], scale: f64, k: &[f64]) {
    for ((o, ci), ki) in out.iter_mut().zip(c).zip(k) {
        *o = ci + scale * ki;
    }
}

/// `V(c) = max(Z - 1, 0) + max(1 - z, 0)` where `Z` and `z` are the largest
/// and smallest ratios `c_i / C*_i`. Zero exactly at the equilibrium and
/// nonincreasing along exact trajectories.
pub fn lyapunov_v(c: &[f64], c_star: &[f64]) -> Result<f64, DynamicsError> {
    if c.len() != c_star.len() {
        return Err(ModelError::DimensionMismatch { expected: c_star.len(), found: c.len() }.into());
    }
    if let Some((node, &value)) = c_star.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(DynamicsError::NonpositiveEquilibrium { node, value });
    }
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for (ci, si) in c.iter().zip(c_star) {
        let r = ci / si;
        hi = hi.max(r);
        lo = lo.min(r);
    }
    Ok((hi - 1.0).max(0.0) + (1.0 - lo).max(0.0))
}
