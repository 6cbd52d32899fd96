//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on domain errors (with a JSON error object on
//! stderr), 2 on usage or configuration errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use crate::config::{ConfigError, FunctionSpec, ParamsConfig};
use crate::dynamics::{integrate, DynamicsError};
use crate::equilibrium::{solve, uniqueness_probe, SolveError, SolverOptions};
use crate::experiment::{
    run_edge_addition, run_rpr_sweep, run_scale_sweep, write_edge_csv, write_sweep_csv, ExperimentError,
    ExperimentKind, SweepConfig,
};
use crate::format::num;
use crate::graph::{tree_catalog, GraphError};
use crate::model::{default_validation_grid, mean_compromise, validate_infection_function, ModelError};
use crate::sensitivity::{build_m, sensitivity_with, Parameter, SensitivityError};

#[derive(Debug, Parser)]
#[command(name = "gscs", version, about = "Attack-defense dynamics on networks: equilibrium, limit security, sensitivities, sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Solver tolerance on successive iterates
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    /// Integration step
    #[arg(long, global = true, default_value_t = 0.01)]
    pub dt: f64,
    /// Integration horizon
    #[arg(long = "t-end", global = true, default_value_t = 500.0)]
    pub t_end: f64,
    /// Seed for the random-restart uniqueness probe of `equilibrium`
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Keep every k-th trajectory row in `simulate` output
    #[arg(long, global = true, default_value_t = 1)]
    pub thin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate the dynamics from `c0` (default: all secure)
    Simulate,
    /// Solve for the equilibrium and limit security
    Equilibrium,
    /// Analytic sensitivities with finite-difference cross-check
    Sensitivity,
    /// Run a parameter sweep (rpr_sweep, scale_sweep, edge_addition)
    Sweep,
    /// List the six trees on six nodes
    Catalog,
    /// Check an infection function's required properties
    ValidateF,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain { kind: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain { .. } => 1,
        }
    }

    fn domain(kind: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Domain { kind, message: e.to_string() }
    }
}

fn graph_kind(e: &GraphError) -> &'static str {
    match e {
        GraphError::TooFewNodes(_) => "TooFewNodes",
        GraphError::InvalidEdge { .. } => "InvalidEdge",
        GraphError::EdgeExists { .. } => "EdgeExists",
        GraphError::NotStronglyConnected { .. } => "NotStronglyConnected",
        GraphError::UnknownCatalogName(_) => "UnknownCatalogName",
    }
}

fn model_kind(e: &ModelError) -> &'static str {
    match e {
        ModelError::DimensionMismatch { .. } => "DimensionMismatch",
        ModelError::InvalidLevel { .. } => "InvalidLevel",
        ModelError::InvalidScheme { .. } => "InvalidScheme",
        ModelError::ZeroAttack => "ZeroAttack",
        ModelError::OutOfDomain { .. } => "OutOfDomain",
        ModelError::InvalidFunction(_) => "InvalidFunction",
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match &e {
            ConfigError::Json(_) | ConfigError::Invalid(_) => CliError::Usage(e.to_string()),
            ConfigError::Graph(g) => CliError::domain(graph_kind(g), &e),
            ConfigError::Model(m) => CliError::domain(model_kind(m), &e),
            ConfigError::Scheme(_) => CliError::domain("InvalidScheme", &e),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match &e {
            SolveError::Model(m) => CliError::domain(model_kind(m), &e),
            SolveError::NoConvergence { .. } => CliError::domain("NoConvergence", &e),
            SolveError::InvalidTolerance(_) | SolveError::InvalidDamping(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match &e {
            DynamicsError::Model(m) => CliError::domain(model_kind(m), &e),
            DynamicsError::StepOutOfDomain { .. } => CliError::domain("StepOutOfDomain", &e),
            DynamicsError::InvalidTimeGrid { .. } => CliError::Usage(e.to_string()),
            DynamicsError::NonpositiveEquilibrium { .. } => CliError::domain("NonpositiveEquilibrium", &e),
        }
    }
}

impl From<SensitivityError> for CliError {
    fn from(e: SensitivityError) -> Self {
        match e {
            SensitivityError::Solve(s) => s.into(),
            SensitivityError::Model(ref m) => CliError::domain(model_kind(m), &e),
            SensitivityError::NotAnEquilibrium(_) => CliError::domain("NotAnEquilibrium", &e),
            SensitivityError::SingularMatrix => CliError::domain("SingularMatrix", &e),
            SensitivityError::InvalidParameter(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("malformed config: {e}"))
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report(&e);
            e.exit_code()
        }
    }
}

fn report(e: &CliError) {
    let body = match e {
        CliError::Usage(message) => json!({ "error": "Usage", "message": message }),
        CliError::Domain { kind, message } => json!({ "error": kind, "message": message }),
    };
    eprintln!("{body}");
}

/// `GSCS_THREADS` caps the rayon pool; 0 or unset means automatic.
fn configure_threads() {
    let threads = std::env::var("GSCS_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let text = match cli.command {
        Command::Simulate => simulate(cli)?,
        Command::Equilibrium => equilibrium(cli)?,
        Command::Sensitivity => sensitivity(cli)?,
        Command::Sweep => sweep(cli)?,
        Command::Catalog => catalog(cli)?,
        Command::ValidateF => validate_f(cli)?,
    };
    emit(cli.out.as_deref(), &text)
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn read_config(cli: &Cli) -> Result<String, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn solver_options(cli: &Cli) -> SolverOptions {
    let mut opts = SolverOptions::default();
    if let Some(tol) = cli.tol {
        opts.tol = tol;
    }
    if let Some(m) = cli.max_iter {
        opts.max_iter = m;
    }
    opts
}

fn to_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

#[derive(Deserialize)]
struct SimulateConfig {
    #[serde(flatten)]
    params: ParamsConfig,
    c0: Option<Vec<f64>>,
}

fn simulate(cli: &Cli) -> Result<String, CliError> {
    let cfg: SimulateConfig = serde_json::from_str(&read_config(cli)?)?;
    let p = cfg.params.build()?;
    let c0 = cfg.c0.unwrap_or_else(|| vec![0.0; p.n()]);
    let traj = integrate(&p, &c0, cli.t_end, cli.dt)?;
    let eq = solve(&p, &solver_options(cli))?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            traj.write_csv(&mut buf, Some(&eq.c_star), cli.thin)?;
            Ok(String::from_utf8(buf).expect("csv is ascii"))
        }
        Format::Json => {
            let thin = cli.thin.max(1);
            let last = traj.len() - 1;
            let keep: Vec<usize> = (0..traj.len()).filter(|k| k % thin == 0 || *k == last).collect();
            Ok(to_json(&json!({
                "params_digest": traj.params_digest,
                "times": keep.iter().map(|&k| traj.times[k]).collect::<Vec<_>>(),
                "states": keep.iter().map(|&k| traj.states[k].as_slice().to_vec()).collect::<Vec<_>>(),
                "c_mean": keep.iter().map(|&k| mean_compromise(&traj.states[k])).collect::<Vec<_>>(),
                "c_star": eq.c_star,
            })))
        }
    }
}

fn equilibrium(cli: &Cli) -> Result<String, CliError> {
    let cfg: ParamsConfig = serde_json::from_str(&read_config(cli)?)?;
    let p = cfg.build()?;
    let opts = solver_options(cli);
    let res = solve(&p, &opts)?;
    let probe = match cli.seed {
        Some(seed) => Some(uniqueness_probe(&p, &opts, 10, seed)?),
        None => None,
    };
    let (lower, upper) = p.bounds();
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = json!({
                "c_star": res.c_star,
                "limit_security": res.limit_security,
                "c_mean": mean_compromise(&res.c_star),
                "residual": res.residual,
                "rhs_residual": res.rhs_residual,
                "iterations": res.iterations,
                "within_bounds": res.within_bounds,
                "lower": lower,
                "upper": upper,
            });
            if let Some(probe) = probe {
                v["uniqueness"] = serde_json::to_value(probe)?;
            }
            Ok(to_json(&v))
        }
        Format::Csv => {
            let mut header = String::from("S_L,C_mean,iters,residual,rhs_residual,within_bounds");
            let mut row = format!(
                "{},{},{},{},{},{}",
                num(res.limit_security),
                num(mean_compromise(&res.c_star)),
                res.iterations,
                num(res.residual),
                num(res.rhs_residual),
                res.within_bounds
            );
            for (i, c) in res.c_star.iter().enumerate() {
                header.push_str(&format!(",C_{}", i + 1));
                row.push(',');
                row.push_str(&num(*c));
            }
            Ok(format!("{header}\n{row}\n"))
        }
    }
}

#[derive(Deserialize)]
struct SensitivityConfig {
    #[serde(flatten)]
    params: ParamsConfig,
    parameters: Option<Vec<String>>,
    #[serde(default = "yes")]
    fd_check: bool,
}

fn yes() -> bool {
    true
}

fn sensitivity(cli: &Cli) -> Result<String, CliError> {
    let cfg: SensitivityConfig = serde_json::from_str(&read_config(cli)?)?;
    let p = cfg.params.build()?;
    let names = cfg
        .parameters
        .unwrap_or_else(|| ["alpha", "beta", "gamma", "delta"].iter().map(|s| s.to_string()).collect());
    let thetas = names.iter().map(|s| s.parse::<Parameter>()).collect::<Result<Vec<_>, _>>()?;
    let eq = solve(&p, &solver_options(cli))?;
    let metzler = build_m(&p, &eq.c_star)?;
    let mut reports = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let mut rep = sensitivity_with(&metzler, &p, theta)?;
        if cfg.fd_check {
            rep.run_fd_check(&p, None)?;
        }
        reports.push(rep);
    }
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("theta,node,dCstar,dSL,fd_rel_err,sign_ok\n");
            for rep in &reports {
                for (i, d) in rep.d_c_star.iter().enumerate() {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        rep.parameter,
                        i + 1,
                        num(*d),
                        num(rep.d_limit_security),
                        rep.fd_check.map(num).unwrap_or_default(),
                        rep.sign_ok
                    ));
                }
            }
            Ok(out)
        }
        Format::Json => Ok(to_json(&json!({
            "c_star": eq.c_star,
            "spectral_abscissa": metzler.spectral_abscissa,
            "reports": reports,
        }))),
    }
}

fn sweep(cli: &Cli) -> Result<String, CliError> {
    let mut cfg = SweepConfig::from_json(&read_config(cli)?)?;
    if let Some(tol) = cli.tol {
        cfg.solver.tol = tol;
    }
    if let Some(m) = cli.max_iter {
        cfg.solver.max_iter = m;
    }
    let format = cli.format.unwrap_or(Format::Csv);
    let mut buf = Vec::new();
    match cfg.experiment {
        ExperimentKind::EdgeAddition => {
            let rows = run_edge_addition(&cfg)?;
            match format {
                Format::Csv => write_edge_csv(&rows, &mut buf)?,
                Format::Json => buf = to_json(&serde_json::to_value(&rows)?).into_bytes(),
            }
        }
        kind => {
            let rows = if kind == ExperimentKind::RprSweep { run_rpr_sweep(&cfg)? } else { run_scale_sweep(&cfg)? };
            match format {
                Format::Csv => write_sweep_csv(&rows, &mut buf)?,
                Format::Json => buf = to_json(&serde_json::to_value(&rows)?).into_bytes(),
            }
        }
    }
    Ok(String::from_utf8(buf).expect("output is utf-8"))
}

fn catalog(cli: &Cli) -> Result<String, CliError> {
    let entries = tree_catalog();
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => {
            let list: Vec<_> = entries
                .iter()
                .map(|(name, g)| {
                    json!({
                        "name": name,
                        "n": g.n(),
                        "undirected": true,
                        "edges": g.to_spec().edges,
                        "degrees": g.degree_multiset(),
                    })
                })
                .collect();
            Ok(to_json(&serde_json::Value::Array(list)))
        }
        Format::Csv => {
            let mut out = String::from("name,edges,degrees\n");
            for (name, g) in &entries {
                let edges: Vec<String> = g.to_spec().edges.iter().map(|[i, j]| format!("{i}-{j}")).collect();
                let degrees: Vec<String> = g.degree_multiset().iter().map(|d| d.to_string()).collect();
                out.push_str(&format!("{name},{},{}\n", edges.join(" "), degrees.join(" ")));
            }
            Ok(out)
        }
    }
}

fn validate_f(cli: &Cli) -> Result<String, CliError> {
    let spec: FunctionSpec = match &cli.config {
        Some(_) => serde_json::from_str(&read_config(cli)?)?,
        None => FunctionSpec::default(),
    };
    let f = spec.build().map_err(|e| CliError::domain(model_kind(&e), &e))?;
    let report = validate_infection_function(&f, &default_validation_grid());
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = serde_json::to_value(&report)?;
            v["passed"] = json!(report.passed());
            Ok(to_json(&v))
        }
        Format::Csv => {
            let mut out = String::from("property,passed,first_failure,worst\n");
            for c in &report.checks {
                let prop = serde_json::to_value(c.property)?;
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    prop.as_str().unwrap_or_default(),
                    c.passed,
                    c.first_failure.map(num).unwrap_or_default(),
                    num(c.worst)
                ));
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("gscs").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_parse_after_subcommand() {
        let cli = parse(&["equilibrium", "--config", "p.json", "--tol", "1e-10", "--format", "csv", "--seed", "3"]);
        assert_eq!(cli.command, Command::Equilibrium);
        assert_eq!(cli.tol, Some(1e-10));
        assert_eq!(cli.format, Some(Format::Csv));
        assert_eq!(cli.seed, Some(3));
        let cli = parse(&["validate-f"]);
        assert_eq!(cli.command, Command::ValidateF);
        assert_eq!(cli.t_end, 500.0);
    }

    #[test]
    fn missing_config_is_usage_error() {
        let err = run(&parse(&["equilibrium"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn catalog_csv_lists_six_trees() {
        let text = catalog(&parse(&["catalog", "--format", "csv"])).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.contains("G1,1-2 1-3 1-4 1-5 1-6,5 1 1 1 1 1"));
    }
}
