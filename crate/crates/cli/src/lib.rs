//! Command-line front end: merges a TOML run configuration with flags,
//! dispatches to the library and renders a report envelope.

pub mod report;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use hamloop::coefficient::{CoefficientPath, CoefficientSpec};
use hamloop::index::{maslov_index_with, IndexOptions};
use hamloop::iteration::check_iteration_inequalities_with;
use hamloop::linking::{linking_gap, LinkingOptions};
use hamloop::models::config::{build_model, ModelConfig};
use hamloop::models::hypotheses::{verify_hypotheses, Grid};
use hamloop::models::Hamiltonian;
use hamloop::solver::{find_critical_point, minimal_period, subharmonic_family, SolutionRecord, SolverOptions};
use hamloop::Error;

use report::{to_json, Envelope, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "hamloop", version, about = "Maslov-type indices and periodic orbits of Hamiltonian systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Index pair of a linear coefficient.
    Index,
    /// Iteration inequalities for the iterates of a coefficient.
    Iterate,
    /// One periodic orbit with certificates.
    Solve,
    /// Orbits for k = 1..kmax with their distinctness matrix.
    Subharmonics,
    /// Sampled linking gap.
    Linking,
    /// Grid checks of the growth hypotheses.
    Hypotheses,
    /// Minimal period of a solved or stored orbit.
    MinimalPeriod,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Index => "index",
            Command::Iterate => "iterate",
            Command::Solve => "solve",
            Command::Subharmonics => "subharmonics",
            Command::Linking => "linking",
            Command::Hypotheses => "hypotheses",
            Command::MinimalPeriod => "minimal-period",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Report destination (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Truncation level (index and iterate: first escalation level).
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Initial integrator steps per period.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Period T (index and iterate: horizon).
    #[arg(long = "T", global = true)]
    pub t: Option<f64>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub kmax: Option<usize>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Zero tolerance (index), residual (solve) or mode threshold
    /// (minimal-period).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub varrho: Option<f64>,
    #[arg(long, global = true)]
    pub nsamples: Option<usize>,
    /// Largest iterate for `iterate`.
    #[arg(long, global = true)]
    pub mmax: Option<usize>,
    /// Stored solve report or solution record for `minimal-period`.
    #[arg(long, global = true)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varrho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nsamples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mmax: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<PathBuf>,
}

/// Contents of a `--config` file after flags have been applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<CoefficientSpec>,
    #[serde(default)]
    pub options: Options,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{message}")]
    NonConvergence { message: String, payload: Value },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 2,
            CliError::NonConvergence { .. } => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::NonConvergence { max_level, spectrum } => CliError::NonConvergence {
                message,
                payload: json!({"kind": "non-convergence", "max_level": max_level, "spectrum": spectrum}),
            },
            Error::NotFound { attempts } => CliError::NonConvergence {
                message,
                payload: json!({"kind": "not-found", "attempts": attempts}),
            },
            Error::Quadrature(_) | Error::Numeric(_) => {
                CliError::NonConvergence { payload: json!({"kind": "numeric", "message": message}), message }
            }
            _ => CliError::Validation(message),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

impl RunConfig {
    pub fn from_toml(src: &str) -> CliResult<Self> {
        toml::from_str(src).map_err(|e| invalid(format!("invalid configuration: {e}")))
    }

    /// Load `flags.config` (if any) and apply the remaining flags on top.
    pub fn resolve(flags: &Flags) -> CliResult<Self> {
        let mut cfg = match &flags.config {
            Some(p) => Self::from_toml(&read(p)?)?,
            None => Self::default(),
        };
        let o = &mut cfg.options;
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { o.$f = flags.$f.clone(); } )* };
        }
        take!(m, steps, t, k, kmax, theta, seed, tol, varrho, nsamples, mmax, record);
        if flags.out.is_some() {
            cfg.out = flags.out.clone();
        }
        if flags.format.is_some() {
            cfg.format = flags.format;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let o = &self.options;
        for (name, v) in [("tol", o.tol), ("T", o.t), ("theta", o.theta), ("varrho", o.varrho)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(format!("{name} must be positive, got {v}")));
                }
            }
        }
        for (name, v) in [("m", o.m), ("k", o.k), ("kmax", o.kmax), ("mmax", o.mmax)] {
            if v == Some(0) {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.options.seed.unwrap_or(0)
    }

    fn model(&self) -> CliResult<Arc<dyn Hamiltonian>> {
        let cfg = self.model.as_ref().ok_or_else(|| invalid("this command needs a [model] table"))?;
        Ok(build_model(cfg)?)
    }

    fn coefficient(&self) -> CliResult<Arc<dyn CoefficientPath>> {
        let spec = self.coefficient.as_ref().ok_or_else(|| invalid("this command needs a [coefficient] table"))?;
        Ok(Arc::new(spec.build()?))
    }

    fn period(&self) -> CliResult<f64> {
        self.options.t.ok_or_else(|| invalid("this command needs T (--T or options.T)"))
    }

    fn solver_options(&self) -> SolverOptions {
        let o = &self.options;
        let mut s = SolverOptions { seed: self.seed(), varrho: o.varrho, ..SolverOptions::default() };
        if let Some(m) = o.m {
            s.m = m;
        }
        if let Some(tol) = o.tol {
            s.residual_tol = tol;
        }
        if let Some(theta) = o.theta {
            s.thetas = vec![theta];
        }
        s
    }
}

/// A rendered report: the JSON envelope and, where supported, a CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub json: String,
    pub csv: Option<String>,
}

fn index_options(cfg: &RunConfig) -> CliResult<IndexOptions> {
    let o = &cfg.options;
    let mut opts = IndexOptions::default();
    if let Some(m) = o.m {
        opts.levels = (0..6).map(|i| m << i).collect();
    }
    if let Some(steps) = o.steps {
        if steps < 16 {
            return Err(invalid("steps must be at least 16"));
        }
        opts.monodromy.initial_steps = steps;
    }
    if let Some(tol) = o.tol {
        opts.zero_tol = tol;
    }
    Ok(opts)
}

fn load_record(path: &Path) -> CliResult<SolutionRecord> {
    let v: Value = serde_json::from_str(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let inner = if v.get("schema_version").is_some() { v["results"].clone() } else { v };
    serde_json::from_value(inner).map_err(|e| invalid(format!("{}: not a solution record: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Run one command against a resolved configuration.
pub fn dispatch(command: Command, cfg: &RunConfig) -> CliResult<(Value, Option<String>)> {
    let o = &cfg.options;
    match command {
        Command::Index => {
            let b = cfg.coefficient()?;
            let tau = o.t.unwrap_or(b.period());
            let r = maslov_index_with(&*b, tau, &index_options(cfg)?)?;
            let mut csv = String::from("position,eigenvalue\n");
            for (i, l) in r.spectrum.iter().enumerate() {
                writeln!(csv, "{i},{l:.16e}").expect("string write");
            }
            let v = json!({"i": r.pair.i, "nu": r.pair.nu, "report": to_value(&r), "horizon": tau});
            Ok((v, Some(csv)))
        }
        Command::Iterate => {
            let b = cfg.coefficient()?;
            let tau = o.t.unwrap_or(b.period());
            let r = check_iteration_inequalities_with(&*b, tau, o.mmax.unwrap_or(5), &index_options(cfg)?)?;
            Ok((to_value(&r), None))
        }
        Command::Solve => {
            let model = cfg.model()?;
            let rec = find_critical_point(&*model, cfg.period()? / (2.0 * PI), o.k.unwrap_or(1), &cfg.solver_options())?;
            Ok((to_value(&rec), None))
        }
        Command::Subharmonics => {
            let model = cfg.model()?;
            let fam = subharmonic_family(&*model, cfg.period()? / (2.0 * PI), o.kmax.unwrap_or(3), &cfg.solver_options())?;
            let mut csv = String::from("k,l,distinct,shift,distance\n");
            for (a, row) in fam.matrix.iter().enumerate() {
                for (b, d) in row.iter().enumerate() {
                    if let Some(d) = d {
                        writeln!(csv, "{},{},{},{},{:.16e}", a + 1, b + 1, d.distinct, d.shift, d.distance)
                            .expect("string write");
                    }
                }
            }
            Ok((to_value(&fam), Some(csv)))
        }
        Command::Linking => {
            let model = cfg.model()?;
            let varrho = o.varrho.ok_or_else(|| invalid("linking needs the scaling exponent varrho (--varrho)"))?;
            let opts = LinkingOptions { nsamples: o.nsamples.unwrap_or(500), seed: cfg.seed(), ..LinkingOptions::new(varrho) };
            let r = linking_gap(&*model, cfg.period()? / (2.0 * PI), o.m.unwrap_or(16), o.theta.unwrap_or(4.0), &opts)?;
            Ok((to_value(&r), None))
        }
        Command::Hypotheses => {
            let model = cfg.model()?;
            let grid = Grid { seed: cfg.seed(), ..Grid::default() };
            let r = verify_hypotheses(&*model, &grid)?;
            Ok((json!({"all_certified": r.all_certified(), "report": to_value(&r)}), None))
        }
        Command::MinimalPeriod => {
            let rec = match &o.record {
                Some(p) => load_record(p)?,
                None => {
                    let model = cfg.model()?;
                    let mut s = cfg.solver_options();
                    s.residual_tol = SolverOptions::default().residual_tol;
                    find_critical_point(&*model, cfg.period()? / (2.0 * PI), o.k.unwrap_or(1), &s)?
                }
            };
            let tol = o.tol.unwrap_or(1e-6);
            let p = minimal_period(&rec, tol)?;
            let v = json!({
                "k": rec.k,
                "period": rec.period,
                "minimal_period": p,
                "ratio": (rec.period / p).round() as u64,
                "active_modes": rec.orbit.active_modes(tol),
            });
            Ok((v, None))
        }
    }
}

/// Result of one invocation: exit status plus whatever should be written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    /// Present on success and on non-convergence (diagnostic payload).
    pub report: Option<Output>,
    pub error: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// Resolve, dispatch and render, without touching the output destination.
pub fn run(cli: &Cli) -> Outcome {
    let failed = |e: CliError, out: Option<PathBuf>, format: Format| Outcome {
        exit_code: e.exit_code(),
        report: None,
        error: Some(e.to_string()),
        out,
        format,
    };
    let cfg = match RunConfig::resolve(&cli.flags) {
        Ok(c) => c,
        Err(e) => return failed(e, None, Format::Json),
    };
    let (out, format) = (cfg.out.clone(), cfg.format.unwrap_or_default());
    let name = cli.command.name();
    if format == Format::Csv && !matches!(cli.command, Command::Index | Command::Subharmonics) {
        return failed(invalid(format!("csv output is only available for index and subharmonics, not {name}")), out, format);
    }
    let (results, csv, exit_code, error) = match dispatch(cli.command, &cfg) {
        Ok((v, csv)) => (v, csv, 0, None),
        Err(CliError::NonConvergence { message, payload }) => {
            (json!({"error": message, "diagnostic": payload}), None, 3, Some(message))
        }
        Err(e) => return failed(e, out, format),
    };
    match render(name, &cfg, results) {
        Ok(json) => Outcome { exit_code, report: Some(Output { json, csv }), error, out, format },
        Err(e) => failed(e, out, format),
    }
}

fn render(command: &str, cfg: &RunConfig, results: Value) -> CliResult<String> {
    let env = Envelope { schema_version: SCHEMA_VERSION, command, config_echo: cfg, seed: cfg.seed(), results };
    to_json(&env).map_err(|e| invalid(format!("cannot render report: {e}")))
}

/// Run and write the report; returns the process exit status.
pub fn execute(cli: &Cli) -> i32 {
    let mut outcome = run(cli);
    if let Some(report) = &outcome.report {
        let text = match (outcome.format, &report.csv) {
            (Format::Csv, Some(csv)) if outcome.exit_code == 0 => csv,
            _ => &report.json,
        };
        let written = match &outcome.out {
            Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
            None => {
                print!("{text}");
                Ok(())
            }
        };
        if let Err(e) = written {
            outcome.exit_code = e.exit_code();
            outcome.error = Some(e.to_string());
        }
    }
    if let Some(msg) = &outcome.error {
        eprintln!("hamloop: {msg}");
    }
    outcome.exit_code
}
