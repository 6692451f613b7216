//! Command-line front end.
//!
//! ```text
//! wave-cascade solve   --config c.json (--x X --t T | --grid x0:x1:nx,t0:t1:nt) [--samples N] [--seed S] [--threads K] [--out PATH] [--format csv|json] [--force]
//! wave-cascade tstar   --config c.json
//! wave-cascade tree    --config c.json --x X --t T [--seed S] [--sample-id I] [--out PATH]
//! wave-cascade oracle  --config c.json --grid x0:x1:nx,0:t1:nt [--out PATH]
//! wave-cascade compare --estimates est.csv --field field.csv [--z 4] [--oracle-tol 1e-3] [--out PATH]
//! wave-cascade probe   --config c.json --x X --t T [--generations 0,1,2,5] [--samples N] [--seed S] [--threads K] [--out PATH] [--format csv|json]
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 point beyond `T*` without
//! `--force`, 4 numeric failure, 5 I/O error.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::branching::{BranchingError, BranchingLaw, ScanSpec};
use crate::cascade::{self, Caps, CascadeError, SpaceTimePoint};
use crate::dalembert::{DalembertError, InitialData, QuadratureSpec};
use crate::estimator::{
    self, read_csv, EstimateRecord, EstimatorError, Problem, RunPlan, RunSettings,
};
use crate::expr::Expression;
use crate::oracle::{self, Field, GridSpec, OracleError, PicardSpec};
use crate::rng::StreamKey;
use crate::series::{PowerSeries, SeriesError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_HORIZON: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;

// ---------------------------------------------------------------------------
// configuration file

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    nonlinearity: RawSeries,
    initial: RawInitial,
    #[serde(default)]
    branching: RawBranching,
    #[serde(default)]
    quadrature: RawQuadrature,
    #[serde(default)]
    caps: RawCaps,
    #[serde(default)]
    defaults: RawDefaults,
    #[serde(default)]
    scan: RawScan,
    #[serde(default)]
    oracle: RawOracle,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum RawSeries {
    #[serde(rename = "poly")]
    Poly { coefficients: Vec<f64> },
    #[serde(rename = "named")]
    Named {
        name: String,
        #[serde(default = "one")]
        scale: f64,
        order: i64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    phi: String,
    psi: String,
    #[serde(default)]
    sup_phi: Option<f64>,
    #[serde(default)]
    sup_psi: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum RawBranching {
    #[default]
    #[serde(rename = "default")]
    Default,
    #[serde(rename = "custom")]
    Custom { p: BTreeMap<String, f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawQuadrature {
    tol: f64,
    max_depth: u32,
}

impl Default for RawQuadrature {
    fn default() -> Self {
        Self {
            tol: QuadratureSpec::DEFAULT_TOL,
            max_depth: QuadratureSpec::DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawCaps {
    max_vertices: u64,
    max_generation: u32,
}

impl Default for RawCaps {
    fn default() -> Self {
        Self {
            max_vertices: Caps::DEFAULT_MAX_VERTICES,
            max_generation: Caps::DEFAULT_MAX_GENERATION,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawDefaults {
    samples: u64,
    seed: u64,
    threads: usize,
}

impl Default for RawDefaults {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawScan {
    step_fraction: f64,
    unbounded_cap: f64,
}

impl Default for RawScan {
    fn default() -> Self {
        let s = ScanSpec::default();
        Self {
            step_fraction: s.step_fraction,
            unbounded_cap: s.unbounded_cap,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOracle {
    max_iter: usize,
    tol: f64,
}

impl Default for RawOracle {
    fn default() -> Self {
        let p = PicardSpec::default();
        Self {
            max_iter: p.max_iter,
            tol: p.tol,
        }
    }
}

/// One semantic problem in a configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// Dotted JSON path of the offending key.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed config at `{path}`: {message}")]
    Json { path: String, message: String },
    #[error("invalid config:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ConfigIssue>),
}

/// A fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub series: PowerSeries,
    pub data: InitialData,
    pub law: BranchingLaw,
    pub quadrature: QuadratureSpec,
    pub caps: Caps,
    pub samples: u64,
    pub seed: u64,
    pub threads: usize,
    pub scan: ScanSpec,
    pub picard: PicardSpec,
}

impl Config {
    pub fn problem(&self) -> Problem {
        Problem {
            law: self.law.clone(),
            data: self.data.clone(),
            quadrature: self.quadrature,
        }
    }

    /// Existence horizon, when the data carries sup bounds.
    pub fn t_star(&self) -> Result<f64, BranchingError> {
        self.law.t_star(&self.data, &self.scan)
    }
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text)
}

/// Parses and validates a configuration. All semantic problems are reported together.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Json {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<Config, ConfigError> {
    let mut issues = Vec::new();
    let mut issue = |path: &str, message: String| {
        issues.push(ConfigIssue {
            path: path.to_owned(),
            message,
        })
    };

    let series = match raw.nonlinearity {
        RawSeries::Poly { coefficients } => PowerSeries::polynomial(coefficients)
            .map_err(|e| issue("nonlinearity.coefficients", e.to_string()))
            .ok(),
        RawSeries::Named { name, scale, order } => {
            match PowerSeries::from_named(&name, scale, order) {
                Ok(s) => Some(s),
                Err(e @ SeriesError::UnknownFamily(_)) => {
                    issue("nonlinearity.name", e.to_string());
                    None
                }
                Err(e @ SeriesError::NegativeOrder(_)) => {
                    issue("nonlinearity.order", e.to_string());
                    None
                }
                Err(e) => {
                    issue("nonlinearity.scale", e.to_string());
                    None
                }
            }
        }
    };

    let phi = Expression::parse(&raw.initial.phi)
        .map_err(|e| issue("initial.phi", e.to_string()))
        .ok();
    let psi = Expression::parse(&raw.initial.psi)
        .map_err(|e| issue("initial.psi", e.to_string()))
        .ok();
    for (path, bound) in [
        ("initial.sup_phi", raw.initial.sup_phi),
        ("initial.sup_psi", raw.initial.sup_psi),
    ] {
        if let Some(b) = bound {
            if !(b >= 0.0 && b.is_finite()) {
                issue(path, format!("must be a non-negative number, got {b}"));
            }
        }
    }
    let data = match (phi, psi) {
        (Some(phi), Some(psi)) => InitialData::new(phi, psi)
            .with_sup_phi(raw.initial.sup_phi)
            .and_then(|d| d.with_sup_psi(raw.initial.sup_psi))
            .ok(),
        _ => None,
    };

    let quadrature = QuadratureSpec::new(raw.quadrature.tol, raw.quadrature.max_depth)
        .map_err(|e| issue("quadrature.tol", e.to_string()))
        .ok();
    let caps = match Caps::new(raw.caps.max_vertices, raw.caps.max_generation) {
        Ok(c) => Some(c),
        Err(_) => {
            if raw.caps.max_vertices == 0 {
                issue("caps.max_vertices", "must be positive".into());
            }
            if raw.caps.max_generation == 0 {
                issue("caps.max_generation", "must be positive".into());
            }
            None
        }
    };
    if raw.defaults.samples == 0 {
        issue("defaults.samples", "must be at least 1".into());
    }
    if raw.defaults.threads == 0 {
        issue("defaults.threads", "must be at least 1".into());
    }
    let scan = ScanSpec {
        step_fraction: raw.scan.step_fraction,
        unbounded_cap: raw.scan.unbounded_cap,
    };
    if !(scan.step_fraction > 0.0 && scan.step_fraction <= 1.0) {
        issue("scan.step_fraction", "must lie in (0, 1]".into());
    }
    if !(scan.unbounded_cap > 0.0 && scan.unbounded_cap.is_finite()) {
        issue("scan.unbounded_cap", "must be positive".into());
    }
    if !(raw.oracle.tol > 0.0 && raw.oracle.tol.is_finite()) {
        issue("oracle.tol", "must be positive".into());
    }
    if raw.oracle.max_iter == 0 {
        issue("oracle.max_iter", "must be at least 1".into());
    }

    let law = match (&series, raw.branching) {
        (None, _) => None,
        (Some(s), RawBranching::Default) => Some(BranchingLaw::build_default(s)),
        (Some(s), RawBranching::Custom { p }) => {
            let mut probabilities = BTreeMap::new();
            let mut keys_ok = true;
            for (key, value) in p {
                match key.parse::<usize>() {
                    Ok(k) => {
                        probabilities.insert(k, value);
                    }
                    Err(_) => {
                        keys_ok = false;
                        issue(
                            &format!("branching.p.{key}"),
                            "keys must be non-negative integers".into(),
                        );
                    }
                }
            }
            if keys_ok {
                BranchingLaw::from_custom(probabilities, s)
                    .map_err(|e| issue("branching.p", e.to_string()))
                    .ok()
            } else {
                None
            }
        }
    };

    match (series, data, law, quadrature, caps) {
        (Some(series), Some(data), Some(law), Some(quadrature), Some(caps))
            if issues.is_empty() =>
        {
            Ok(Config {
                series,
                data,
                law,
                quadrature,
                caps,
                samples: raw.defaults.samples,
                seed: raw.defaults.seed,
                threads: raw.defaults.threads,
                scan,
                picard: PicardSpec {
                    max_iter: raw.oracle.max_iter,
                    tol: raw.oracle.tol,
                },
            })
        }
        _ => Err(ConfigError::Invalid(issues)),
    }
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(
    name = "wave-cascade",
    version,
    about = "Stochastic-cascade Monte Carlo for u_tt - u_xx = F(u)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo estimates at a point or on a grid.
    Solve(SolveArgs),
    /// Report the existence horizon T* and the branching law.
    Tstar(ConfigArg),
    /// Dump one cascade realization as JSON.
    Tree(TreeArgs),
    /// Picard reference field on a grid, as CSV.
    Oracle(OracleArgs),
    /// Compare Monte Carlo estimates with a reference field.
    Compare(CompareArgs),
    /// Fraction of cascades deeper than each generation.
    Probe(ProbeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, requires = "t", allow_hyphen_values = true)]
    pub x: Option<f64>,
    #[arg(long, requires = "x")]
    pub t: Option<f64>,
    /// `x0:x1:nx,t0:t1:nt`
    #[arg(long, conflicts_with_all = ["x", "t"], allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Permit points at or beyond T*; results are marked unvalidated.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub sample_id: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `x0:x1:nx,0:t1:nt`
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub estimates: PathBuf,
    #[arg(long)]
    pub field: PathBuf,
    /// Pass threshold in standard errors.
    #[arg(long, default_value_t = 4.0)]
    pub z: f64,
    /// Absolute allowance for the reference field's discretization error.
    #[arg(long, default_value_t = 1e-3)]
    pub oracle_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,5,10,20,40")]
    pub generations: Vec<u32>,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl fmt::Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(EXIT_CONFIG, e)
    }
}

fn data_failure(e: &DalembertError) -> i32 {
    match e {
        DalembertError::BoundViolated { .. }
        | DalembertError::MissingBounds
        | DalembertError::InvalidBound { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERIC,
    }
}

impl From<CascadeError> for Failure {
    fn from(e: CascadeError) -> Self {
        let code = match &e {
            CascadeError::Data(d) => data_failure(d),
            CascadeError::DegenerateTriangle(_) | CascadeError::InvalidPoint { .. } => EXIT_CONFIG,
            CascadeError::InvalidCaps { .. } => EXIT_CONFIG,
            CascadeError::Boundary { .. } => EXIT_NUMERIC,
        };
        Failure::new(code, e)
    }
}

impl From<EstimatorError> for Failure {
    fn from(e: EstimatorError) -> Self {
        let code = match &e {
            EstimatorError::BeyondHorizon { .. } => EXIT_HORIZON,
            EstimatorError::InvalidPoint(_) | EstimatorError::NoSamples => EXIT_CONFIG,
            EstimatorError::Cascade { source, .. } => Failure::from(source.clone()).code,
            EstimatorError::AllExcluded(_) | EstimatorError::ThreadPool(_) => EXIT_NUMERIC,
        };
        Failure::new(code, e)
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let code = match &e {
            OracleError::InvalidGrid(_)
            | OracleError::Coverage { .. }
            | OracleError::OutOfRange { .. } => EXIT_CONFIG,
            OracleError::Data(d) => data_failure(d),
            OracleError::Parse(_) => EXIT_CONFIG,
            OracleError::NotConverged { .. } | OracleError::Diverged { .. } => EXIT_NUMERIC,
        };
        Failure::new(code, e)
    }
}

impl From<BranchingError> for Failure {
    fn from(e: BranchingError) -> Self {
        let code = match &e {
            BranchingError::Data(d) => data_failure(d),
            _ => EXIT_CONFIG,
        };
        Failure::new(code, e)
    }
}

fn io_failure(what: &str, e: io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("{what}: {e}"))
}

/// `(lo, hi, n)` of one grid axis.
pub type Axis = (f64, f64, usize);

/// Parses `x0:x1:nx,t0:t1:nt` into its two axes.
pub fn parse_grid(spec: &str) -> Result<(Axis, Axis), String> {
    let axis = |part: &str| -> Result<Axis, String> {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 3 {
            return Err(format!("axis `{part}` must be lo:hi:n"));
        }
        let lo: f64 = fields[0]
            .trim()
            .parse()
            .map_err(|e| format!("`{}`: {e}", fields[0]))?;
        let hi: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|e| format!("`{}`: {e}", fields[1]))?;
        let n: usize = fields[2]
            .trim()
            .parse()
            .map_err(|e| format!("`{}`: {e}", fields[2]))?;
        if n == 0 || !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(format!("axis `{part}` needs finite lo <= hi and n >= 1"));
        }
        Ok((lo, hi, n))
    };
    let (xs, ts) = spec
        .split_once(',')
        .ok_or_else(|| format!("grid `{spec}` must be x0:x1:nx,t0:t1:nt"))?;
    Ok((axis(xs)?, axis(ts)?))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn point(x: f64, t: f64) -> Result<SpaceTimePoint, Failure> {
    SpaceTimePoint::new(x, t).map_err(|e| Failure::new(EXIT_CONFIG, e))
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| io_failure(&path.display().to_string(), e))
        }
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| io_failure("stdout", e)),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::new(EXIT_IO, e))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    #[serde(rename = "unvalidated-regime")]
    unvalidated_regime: bool,
    t_star: Option<f64>,
    estimates: &'a [EstimateRecord],
}

fn settings(config: &Config, s: &SamplingArgs) -> Result<RunSettings, Failure> {
    let samples = s.samples.unwrap_or(config.samples);
    let threads = s.threads.unwrap_or(config.threads);
    if samples == 0 {
        return Err(Failure::new(EXIT_CONFIG, "--samples must be at least 1"));
    }
    if threads == 0 {
        return Err(Failure::new(EXIT_CONFIG, "--threads must be at least 1"));
    }
    Ok(RunSettings::new(samples, s.seed.unwrap_or(config.seed))
        .with_threads(threads)
        .with_caps(config.caps))
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Failure> {
    let config = load_config(&args.config)?;
    let points: Vec<SpaceTimePoint> = match (&args.grid, args.x, args.t) {
        (Some(spec), _, _) => {
            let ((x0, x1, nx), (t0, t1, nt)) =
                parse_grid(spec).map_err(|m| Failure::new(EXIT_CONFIG, m))?;
            let mut pts = Vec::with_capacity(nx * nt);
            for t in linspace(t0, t1, nt) {
                for x in linspace(x0, x1, nx) {
                    pts.push(point(x, t)?);
                }
            }
            pts
        }
        (None, Some(x), Some(t)) => vec![point(x, t)?],
        _ => {
            return Err(Failure::new(
                EXIT_CONFIG,
                "give either --x and --t, or --grid",
            ))
        }
    };

    let mut run = settings(&config, &args.sampling)?;
    let t_star = match config.t_star() {
        Ok(t) => Some(t),
        Err(BranchingError::Data(DalembertError::MissingBounds)) if args.force => None,
        Err(BranchingError::Data(DalembertError::MissingBounds)) => {
            return Err(Failure::new(
                EXIT_CONFIG,
                "initial.sup_phi and initial.sup_psi are needed to compute T*; add them or pass --force",
            ))
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(t) = t_star {
        run = run.with_horizon(t, args.force);
    } else {
        run.force = true;
    }
    let unvalidated = match t_star {
        Some(t) => points.iter().any(|p| p.t >= t),
        None => true,
    };

    let estimates = estimator::estimate_grid(
        &config.problem(),
        &RunPlan {
            points,
            settings: run,
        },
    )?;

    let bytes = match args.output.format {
        Format::Csv => {
            let mut buf = Vec::new();
            estimator::write_csv(&mut buf, &estimates).map_err(|e| io_failure("csv", e))?;
            buf
        }
        Format::Json => {
            let records: Vec<EstimateRecord> = estimates.iter().map(EstimateRecord::from).collect();
            to_json(&SolveOutput {
                unvalidated_regime: unvalidated,
                t_star,
                estimates: &records,
            })?
        }
    };
    emit(&args.output.out, &bytes)?;

    let truncated: u64 = estimates.iter().map(|e| e.n_truncated).sum();
    let excluded: u64 = estimates.iter().map(|e| e.n_excluded).sum();
    eprintln!(
        "solved {} point(s), {} samples each, seed {}: {} truncated, {} excluded{}",
        estimates.len(),
        run.samples,
        run.seed,
        truncated,
        excluded,
        if unvalidated {
            " [unvalidated regime: t >= T*]"
        } else {
            ""
        }
    );
    Ok(())
}

fn cmd_tstar(args: &ConfigArg) -> Result<(), Failure> {
    let config = load_config(&args.config)?;
    let law = &config.law;
    let t_star = config.t_star()?;
    let cap = law.horizon_cap(&config.scan);
    let mut text = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(text, "T* = {}", estimator::fmt17(t_star));
    let _ = writeln!(text, "b* = {}", estimator::fmt17(law.b_star()));
    let _ = writeln!(text, "horizon cap = {}", estimator::fmt17(cap));
    let _ = writeln!(
        text,
        "scan step = {}",
        estimator::fmt17(cap * config.scan.step_fraction)
    );
    let _ = writeln!(
        text,
        "mean offspring = {}",
        estimator::fmt17(law.mean_offspring())
    );
    let _ = writeln!(text, "k,p_k,b_k");
    for (k, p) in law.probabilities() {
        let _ = writeln!(
            text,
            "{k},{},{}",
            estimator::fmt17(*p),
            estimator::fmt17(law.b(*k))
        );
    }
    emit(&None, text.as_bytes())
}

fn cmd_tree(args: &TreeArgs) -> Result<(), Failure> {
    let config = load_config(&args.config)?;
    let root = point(args.x, args.t)?;
    let seed = args.seed.unwrap_or(config.seed);
    let mut rng = StreamKey::new(seed, 0, args.sample_id).stream();
    let tree = cascade::sample_tree(&mut rng, &config.law, root, &config.caps)?;
    if tree.truncated {
        eprintln!("tree truncated at {} vertices", tree.vertices.len());
    }
    emit(&args.out, &to_json(&tree)?)
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), Failure> {
    let config = load_config(&args.config)?;
    let ((x0, x1, nx), (t0, t1, nt)) =
        parse_grid(&args.grid).map_err(|m| Failure::new(EXIT_CONFIG, m))?;
    if t0 != 0.0 {
        return Err(Failure::new(
            EXIT_CONFIG,
            "the oracle grid must start at t = 0",
        ));
    }
    let grid = GridSpec::new(x0, x1, nx, t1, nt)?;
    let solution = oracle::picard_solve(
        &config.series,
        &config.data,
        &grid,
        &config.quadrature,
        &config.picard,
    )?;
    let mut buf = Vec::new();
    solution
        .field
        .write_csv(&mut buf)
        .map_err(|e| io_failure("csv", e))?;
    emit(&args.out, &buf)?;
    eprintln!(
        "Picard converged in {} iterations (residual {:e})",
        solution.iterations, solution.residual
    );
    Ok(())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(&path.display().to_string(), e))
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Failure> {
    let estimates = read_csv(&read_text(&args.estimates)?)
        .map_err(|m| Failure::new(EXIT_CONFIG, format!("{}: {m}", args.estimates.display())))?;
    let field = Field::read_csv(&read_text(&args.field)?)?;
    let rows = oracle::compare(&estimates, &field, args.z, args.oracle_tol)?;
    let mut buf = Vec::new();
    oracle::write_comparison_csv(&mut buf, &rows).map_err(|e| io_failure("csv", e))?;
    emit(&args.out, &buf)?;
    let passed = rows.iter().filter(|r| r.pass).count();
    eprintln!(
        "{passed}/{} point(s) within {} stderr + {}",
        rows.len(),
        args.z,
        args.oracle_tol
    );
    Ok(())
}

fn cmd_probe(args: &ProbeArgs) -> Result<(), Failure> {
    let config = load_config(&args.config)?;
    let root = point(args.x, args.t)?;
    let run = settings(&config, &args.sampling)?;
    let rows = estimator::convergence_probe(&config.law, 0, root, &run, &args.generations)?;
    let bytes = match args.output.format {
        Format::Csv => {
            let mut text = String::from("n,fraction,count,samples\n");
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    r.generation,
                    estimator::fmt17(r.fraction),
                    r.count,
                    r.samples
                ));
            }
            text.into_bytes()
        }
        Format::Json => to_json(&rows)?,
    };
    emit(&args.output.out, &bytes)
}

/// Runs one command and returns its exit code. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Tstar(a) => cmd_tstar(a),
        Command::Tree(a) => cmd_tree(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Probe(a) => cmd_probe(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "nonlinearity": {"kind": "poly", "coefficients": [0, -1]},
        "initial": {"phi": "0.4*cos(x)", "psi": "0", "sup_phi": 0.4, "sup_psi": 0}
    }"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.law.p0(), 0.75);
        assert_eq!(c.quadrature, QuadratureSpec::default());
        assert_eq!(c.caps, Caps::default());
        assert_eq!(c.picard, PicardSpec::default());
        assert!((c.t_star().unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn named_series_and_custom_law() {
        let c = parse_config(
            r#"{
            "nonlinearity": {"kind": "named", "name": "sin", "scale": 0.5, "order": 3},
            "initial": {"phi": "0", "psi": "0"},
            "branching": {"kind": "custom", "p": {"0": 0.5, "1": 0.25, "3": 0.25}}
        }"#,
        )
        .unwrap();
        assert_eq!(c.series.coefficient(3), -0.125 / 6.0);
        assert_eq!(c.law.b(1), 2.0);
    }

    #[test]
    fn uncovered_coefficient_cites_condition_ii() {
        let err = parse_config(
            r#"{
            "nonlinearity": {"kind": "poly", "coefficients": [0, 0, 1]},
            "initial": {"phi": "0", "psi": "0"},
            "branching": {"kind": "custom", "p": {"0": 0.5, "1": 0.5}}
        }"#,
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("branching.p"), "{text}");
        assert!(text.contains("condition (ii)"), "{text}");
    }

    #[test]
    fn all_semantic_issues_reported_together() {
        let err = parse_config(
            r#"{
            "nonlinearity": {"kind": "named", "name": "log", "order": 3},
            "initial": {"phi": "cos(x", "psi": "y", "sup_phi": -1},
            "quadrature": {"tol": -1e-3},
            "caps": {"max_vertices": 0}
        }"#,
        )
        .unwrap_err();
        let ConfigError::Invalid(issues) = err else {
            panic!("expected semantic issues");
        };
        let paths: Vec<&str> = issues.iter().map(|i| i.path.as_str()).collect();
        for expected in [
            "nonlinearity.name",
            "initial.phi",
            "initial.psi",
            "initial.sup_phi",
            "quadrature.tol",
            "caps.max_vertices",
        ] {
            assert!(
                paths.contains(&expected),
                "{expected} missing from {paths:?}"
            );
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = parse_config(
            r#"{
            "nonlinearity": {"kind": "poly", "coefficients": [0, -1]},
            "initial": {"phi": "0", "psi": "0", "sup_phy": 1}
        }"#,
        )
        .unwrap_err();
        match err {
            ConfigError::Json { path, message } => {
                assert!(path.starts_with("initial"), "{path}");
                assert!(message.contains("sup_phy"), "{message}");
            }
            other => panic!("{other}"),
        }
        assert!(matches!(parse_config("{"), Err(ConfigError::Json { .. })));
        assert!(matches!(
            parse_config(
                r#"{"nonlinearity": {"kind": "poly", "coefficients": [1]}, "initial": {"phi": "0", "psi": "0"}, "extra": 1}"#
            ),
            Err(ConfigError::Json { .. })
        ));
    }

    #[test]
    fn bad_probability_keys() {
        let err = parse_config(
            r#"{
            "nonlinearity": {"kind": "poly", "coefficients": [0, -1]},
            "initial": {"phi": "0", "psi": "0"},
            "branching": {"kind": "custom", "p": {"zero": 0.5, "1": 0.5}}
        }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("branching.p.zero"));
    }

    #[test]
    fn grid_flag_parsing() {
        let ((x0, x1, nx), (t0, t1, nt)) = parse_grid("-1:1:5,0.1:0.5:3").unwrap();
        assert_eq!((x0, x1, nx, t0, t1, nt), (-1.0, 1.0, 5, 0.1, 0.5, 3));
        assert!(parse_grid("0:1:5").is_err());
        assert!(parse_grid("0:1,0:1:2").is_err());
        assert!(parse_grid("1:0:2,0:1:2").is_err());
        assert_eq!(linspace(0.1, 0.3, 3), vec![0.1, 0.2, 0.3]);
        assert_eq!(linspace(0.5, 0.5, 1), vec![0.5]);
    }

    #[test]
    fn missing_config_file() {
        let err = load_config(Path::new("/nonexistent/config.json")).unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
    }
}
