//! Parameter sweeps over the tree catalog.
//!
//! Three studies are supported:
//!
//! * `rpr_sweep`: fixed attack budget 1, defense budget 1 split between
//!   prevention `r/(1+r)` and recovery `1/(1+r)`.
//! * `scale_sweep`: `||y|| = ||z|| = s` with attack budget `r_AD * 2s`.
//! * `edge_addition`: limit security before and after adding each absent
//!   undirected edge to a tree.
//!
//! Rows are evaluated in parallel on the current rayon pool and always
//! returned in `(graph, combo, grid)` order.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::{ConfigError, FunctionSpec, GraphRef};
use crate::equilibrium::{solve, SolverOptions};
use crate::format::num;
use crate::graph::Graph;
use crate::model::{mean_compromise, GscsParams, TechLevels};
use crate::schemes::{SchemeKind, SchemeSpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("sweep `{0}` cannot run an `{1}` config")]
    WrongExperiment(&'static str, ExperimentKind),
}

impl From<crate::graph::GraphError> for ExperimentError {
    fn from(e: crate::graph::GraphError) -> Self {
        ExperimentError::Config(e.into())
    }
}

impl From<crate::model::ModelError> for ExperimentError {
    fn from(e: crate::model::ModelError) -> Self {
        ExperimentError::Config(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RprSweep,
    ScaleSweep,
    EdgeAddition,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::RprSweep => "rpr_sweep",
            ExperimentKind::ScaleSweep => "scale_sweep",
            ExperimentKind::EdgeAddition => "edge_addition",
        })
    }
}

/// Attack, prevention and recovery scheme kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SchemeCombo {
    pub x: SchemeKind,
    pub y: SchemeKind,
    pub z: SchemeKind,
}

impl SchemeCombo {
    pub const fn new(x: SchemeKind, y: SchemeKind, z: SchemeKind) -> Self {
        Self { x, y, z }
    }
}

impl fmt::Display for SchemeCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.x, self.y, self.z)
    }
}

use SchemeKind::{DegreeFirst as DF, DegreeLast as DL, Uniform as U};

/// Combos (a)-(l) of the prevention/recovery ratio study.
pub const RPR_COMBOS: [SchemeCombo; 12] = [
    SchemeCombo::new(U, U, U),
    SchemeCombo::new(U, U, DF),
    SchemeCombo::new(U, DF, U),
    SchemeCombo::new(U, DF, DF),
    SchemeCombo::new(DF, U, U),
    SchemeCombo::new(DF, U, DF),
    SchemeCombo::new(DF, DF, U),
    SchemeCombo::new(DF, DF, DF),
    SchemeCombo::new(DL, U, U),
    SchemeCombo::new(DL, U, DF),
    SchemeCombo::new(DL, DF, U),
    SchemeCombo::new(DL, DF, DF),
];

/// Scheme combos of the defense-scale study; each is run at every `r_AD`.
pub const SCALE_COMBOS: [SchemeCombo; 4] = [
    SchemeCombo::new(U, U, U),
    SchemeCombo::new(U, DF, DF),
    SchemeCombo::new(DF, U, U),
    SchemeCombo::new(DF, DF, DF),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self { tol: d.tol, max_iter: d.max_iter, damping: d.damping }
    }
}

impl SolverSettings {
    pub fn options(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, max_iter: self.max_iter, damping: self.damping, ..SolverOptions::default() }
    }
}

/// A sweep description. `r_values` is the prevention/recovery ratio grid for
/// `rpr_sweep` and the attack/defense ratio list for `scale_sweep`;
/// `s_values` is the defense scale grid; `budgets` is used only by
/// `edge_addition`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub experiment: ExperimentKind,
    pub graphs: Vec<GraphRef>,
    pub levels: TechLevels,
    pub combos: Vec<SchemeCombo>,
    pub r_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub budgets: Budgets,
    pub f: FunctionSpec,
    pub solver: SolverSettings,
}

fn catalog_refs() -> Vec<GraphRef> {
    (1..=6).map(|k| GraphRef::Name(format!("G{k}"))).collect()
}

impl SweepConfig {
    /// 6 trees x 12 combos x 7 ratios.
    pub fn rpr_default() -> Self {
        Self {
            experiment: ExperimentKind::RprSweep,
            graphs: catalog_refs(),
            levels: TechLevels::new(0.05, 0.01, 1.0, 1.0),
            combos: RPR_COMBOS.to_vec(),
            r_values: vec![0.25, 1.0 / 3.0, 0.5, 1.0, 2.0, 3.0, 4.0],
            s_values: Vec::new(),
            budgets: Budgets { x: 1.0, y: 0.5, z: 0.5 },
            f: FunctionSpec::Rational,
            solver: SolverSettings::default(),
        }
    }

    /// 6 trees x 4 combos x 3 attack/defense ratios x 9 scales.
    pub fn scale_default() -> Self {
        Self {
            experiment: ExperimentKind::ScaleSweep,
            graphs: catalog_refs(),
            levels: TechLevels::new(0.1, 0.05, 0.5, 1.0),
            combos: SCALE_COMBOS.to_vec(),
            r_values: vec![0.5, 1.0, 2.0],
            s_values: (2..=10).map(f64::from).collect(),
            budgets: Budgets { x: 1.0, y: 0.5, z: 0.5 },
            f: FunctionSpec::Rational,
            solver: SolverSettings::default(),
        }
    }

    /// Every absent edge of every tree, at the ratio study's `r = 1` point.
    pub fn edge_addition_default() -> Self {
        Self {
            experiment: ExperimentKind::EdgeAddition,
            combos: vec![SchemeCombo::new(U, U, U)],
            r_values: Vec::new(),
            ..Self::rpr_default()
        }
    }

    pub fn default_for(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::RprSweep => Self::rpr_default(),
            ExperimentKind::ScaleSweep => Self::scale_default(),
            ExperimentKind::EdgeAddition => Self::edge_addition_default(),
        }
    }

    /// Parses a JSON object whose `experiment` key picks the defaults; any
    /// other key present overrides the corresponding default.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let overrides: Value = serde_json::from_str(text)?;
        let Value::Object(fields) = overrides else {
            return Err(ConfigError::Invalid("sweep config must be a JSON object".into()));
        };
        let kind_value = fields
            .get("experiment")
            .cloned()
            .ok_or_else(|| ConfigError::Invalid("sweep config needs an \"experiment\" field".into()))?;
        let kind: ExperimentKind = serde_json::from_value(kind_value)?;
        let mut merged = serde_json::to_value(Self::default_for(kind))?;
        let target = merged.as_object_mut().expect("struct serializes to an object");
        for (k, v) in fields {
            if !target.contains_key(&k) {
                return Err(ConfigError::Invalid(format!("unknown sweep config field {k:?}")));
            }
            target.insert(k, v);
        }
        Ok(serde_json::from_value(merged)?)
    }

    fn resolved_graphs(&self) -> Result<Vec<(String, Graph)>, ExperimentError> {
        self.graphs
            .iter()
            .enumerate()
            .map(|(k, r)| Ok((r.label(k), r.resolve()?)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub experiment: ExperimentKind,
    pub graph: String,
    pub combo: SchemeCombo,
    /// `r_PR` for the ratio study, `r_AD` for the scale study.
    pub r: Option<f64>,
    pub s: Option<f64>,
    pub limit_security: Option<f64>,
    pub c_mean: Option<f64>,
    pub c_star: Vec<f64>,
    pub iterations: usize,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

struct Job {
    graph_index: usize,
    combo: SchemeCombo,
    r: Option<f64>,
    s: Option<f64>,
    budgets: Budgets,
}

fn build_params(cfg: &SweepConfig, g: &Graph, combo: SchemeCombo, b: Budgets) -> Result<GscsParams, String> {
    let realize = |kind, budget| SchemeSpec::new(kind, budget).realize(g).map_err(|e| e.to_string());
    let f = cfg.f.build().map_err(|e| e.to_string())?;
    GscsParams::new(cfg.levels, realize(combo.x, b.x)?, realize(combo.y, b.y)?, realize(combo.z, b.z)?, g.clone(), f)
        .map_err(|e| e.to_string())
}

fn evaluate(cfg: &SweepConfig, graphs: &[(String, Graph)], job: &Job) -> SweepRow {
    let (label, g) = &graphs[job.graph_index];
    let mut row = SweepRow {
        experiment: cfg.experiment,
        graph: label.clone(),
        combo: job.combo,
        r: job.r,
        s: job.s,
        limit_security: None,
        c_mean: None,
        c_star: Vec::new(),
        iterations: 0,
        residual: None,
        error: None,
    };
    let outcome = build_params(cfg, g, job.combo, job.budgets)
        .and_then(|p| solve(&p, &cfg.solver.options()).map_err(|e| e.to_string()));
    match outcome {
        Ok(res) => {
            row.limit_security = Some(res.limit_security);
            row.c_mean = Some(mean_compromise(&res.c_star));
            row.iterations = res.iterations;
            row.residual = Some(res.residual);
            row.c_star = res.c_star.into_inner();
        }
        Err(e) => row.error = Some(e),
    }
    row
}

fn run_jobs(cfg: &SweepConfig, jobs: Vec<Job>) -> Result<Vec<SweepRow>, ExperimentError> {
    let graphs = cfg.resolved_graphs()?;
    cfg.levels.validate()?;
    Ok(jobs.par_iter().map(|job| evaluate(cfg, &graphs, job)).collect())
}

/// Prevention/recovery ratio sweep.
pub fn run_rpr_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    if cfg.experiment != ExperimentKind::RprSweep {
        return Err(ExperimentError::WrongExperiment("rpr_sweep", cfg.experiment));
    }
    if cfg.r_values.is_empty() || cfg.graphs.is_empty() || cfg.combos.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    let mut jobs = Vec::new();
    for graph_index in 0..cfg.graphs.len() {
        for &combo in &cfg.combos {
            for &r in &cfg.r_values {
                let budgets = Budgets { x: 1.0, y: r / (1.0 + r), z: 1.0 / (1.0 + r) };
                jobs.push(Job { graph_index, combo, r: Some(r), s: None, budgets });
            }
        }
    }
    run_jobs(cfg, jobs)
}

/// Defense scale sweep at fixed attack/defense ratios.
pub fn run_scale_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    if cfg.experiment != ExperimentKind::ScaleSweep {
        return Err(ExperimentError::WrongExperiment("scale_sweep", cfg.experiment));
    }
    if cfg.r_values.is_empty() || cfg.s_values.is_empty() || cfg.graphs.is_empty() || cfg.combos.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    let mut jobs = Vec::new();
    for graph_index in 0..cfg.graphs.len() {
        for &combo in &cfg.combos {
            for &r in &cfg.r_values {
                for &s in &cfg.s_values {
                    let budgets = Budgets { x: r * 2.0 * s, y: s, z: s };
                    jobs.push(Job { graph_index, combo, r: Some(r), s: Some(s), budgets });
                }
            }
        }
    }
    run_jobs(cfg, jobs)
}

pub const SWEEP_CSV_HEADER: &str = "experiment,graph,x_scheme,y_scheme,z_scheme,r,s,S_L,C_mean,iters,residual,error";

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.graph,
            r.combo.x,
            r.combo.y,
            r.combo.z,
            opt(r.r),
            opt(r.s),
            opt(r.limit_security),
            opt(r.c_mean),
            r.iterations,
            opt(r.residual),
            quote(r.error.as_deref().unwrap_or("")),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeAdditionRow {
    pub graph: String,
    pub combo: SchemeCombo,
    /// 0-based endpoints of the added undirected edge.
    pub edge: (usize, usize),
    pub before: Option<f64>,
    pub after: Option<f64>,
    /// `after - before`; negative when the new edge hurts security.
    pub delta: Option<f64>,
    pub error: Option<String>,
}

/// Adds each absent undirected edge of every configured graph in turn.
pub fn run_edge_addition(cfg: &SweepConfig) -> Result<Vec<EdgeAdditionRow>, ExperimentError> {
    if cfg.experiment != ExperimentKind::EdgeAddition {
        return Err(ExperimentError::WrongExperiment("edge_addition", cfg.experiment));
    }
    let graphs = cfg.resolved_graphs()?;
    let mut jobs = Vec::new();
    for (gi, (_, g)) in graphs.iter().enumerate() {
        for &combo in &cfg.combos {
            for edge in g.absent_undirected_pairs() {
                jobs.push((gi, combo, edge));
            }
        }
    }
    run_edge_jobs(cfg, &graphs, &jobs)
}

/// Same as [`run_edge_addition`] with an explicit list of 0-based edges,
/// applied to every configured graph.
pub fn run_edge_addition_for(cfg: &SweepConfig, edges: &[(usize, usize)]) -> Result<Vec<EdgeAdditionRow>, ExperimentError> {
    let graphs = cfg.resolved_graphs()?;
    let mut jobs = Vec::new();
    for gi in 0..graphs.len() {
        for &combo in &cfg.combos {
            for &edge in edges {
                jobs.push((gi, combo, edge));
            }
        }
    }
    run_edge_jobs(cfg, &graphs, &jobs)
}

fn run_edge_jobs(
    cfg: &SweepConfig,
    graphs: &[(String, Graph)],
    jobs: &[(usize, SchemeCombo, (usize, usize))],
) -> Result<Vec<EdgeAdditionRow>, ExperimentError> {
    cfg.levels.validate()?;
    let opts = cfg.solver.options();
    let security = |g: &Graph, combo| -> Result<f64, String> {
        let p = build_params(cfg, g, combo, cfg.budgets)?;
        solve(&p, &opts).map(|r| r.limit_security).map_err(|e| e.to_string())
    };
    Ok(jobs
        .par_iter()
        .map(|&(gi, combo, (i, j))| {
            let (label, g) = &graphs[gi];
            let mut row = EdgeAdditionRow {
                graph: label.clone(),
                combo,
                edge: (i, j),
                before: None,
                after: None,
                delta: None,
                error: None,
            };
            let outcome = security(g, combo).and_then(|before| {
                let grown = g.add_edge(i, j, true).map_err(|e| e.to_string())?;
                Ok((before, security(&grown, combo)?))
            });
            match outcome {
                Ok((before, after)) => {
                    row.before = Some(before);
                    row.after = Some(after);
                    row.delta = Some(after - before);
                }
                Err(e) => row.error = Some(e),
            }
            row
        })
        .collect())
}

pub const EDGE_CSV_HEADER: &str =
    "experiment,graph,x_scheme,y_scheme,z_scheme,edge_from,edge_to,S_L_before,S_L_after,delta,error";

pub fn write_edge_csv<W: Write>(rows: &[EdgeAdditionRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{EDGE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "edge_addition,{},{},{},{},{},{},{},{},{},{}",
            r.graph,
            r.combo.x,
            r.combo.y,
            r.combo.z,
            r.edge.0 + 1,
            r.edge.1 + 1,
            opt(r.before),
            opt(r.after),
            opt(r.delta),
            quote(r.error.as_deref().unwrap_or("")),
        )?;
    }
    Ok(())
}
