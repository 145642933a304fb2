//! Command-line front end: configuration files, experiment dispatch,
//! output files and run manifests.

pub mod ini;
pub mod manifest;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wicksync::besov::{besov_norm_p, besov_norm_sup, phi_besov};
use wicksync::experiments::{self, spectral_exactness, Check, ExperimentConfig, ExperimentKind, ExperimentReport};
use wicksync::field::write_atomic;
use wicksync::{BesovParams, Error, Field, SGrid};

pub use ini::{parse_config, render_config, ConfigError};
pub use manifest::{content_hash, OutputFile, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PROPERTY: i32 = 2;

const SPECTRAL_CASES: usize = 200;

#[derive(Debug, Parser)]
#[command(name = "wicksync", version, about = "Synchronization experiments for the renormalized stochastic Allen-Cahn flow on the torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write CSV, summary and manifest.
    Run(RunArgs),
    /// Run the property suites (spectral exactness, norm inequalities, order preservation).
    Check(CheckArgs),
    /// Besov norms of a stored field.
    Norms(NormsArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// sync_rate, coming_down, order, pullback, phi_contraction or lemma_suite.
    #[arg(long)]
    pub experiment: Option<String>,
    /// INI configuration, or a manifest JSON of an earlier run to replay.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Base seed for all member seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ensemble: Option<usize>,
    #[arg(long, env = "SPDE_SYNC_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Also run every experiment with its default configuration.
    #[arg(long)]
    pub full: bool,
    /// Write the outputs of each suite into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "SPDE_SYNC_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct NormsArgs {
    /// Binary field dump with its `.json` sidecar.
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub p: u32,
    #[arg(long, default_value_t = wicksync::besov::DEFAULT_S_POINTS)]
    pub s_points: usize,
}

/// Failure of a command, mapped onto the exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration, I/O or numerical setup.
    Usage(String),
    /// The run finished but asserted properties failed.
    Property(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Property(_) => EXIT_PROPERTY,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Property(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::EnvelopeViolation { .. } => CliError::Property(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit status. Messages go to `out` and `err`.
pub fn main_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => run_command(&args, out),
        Command::Check(args) => check_command(&args, out),
        Command::Norms(args) => norms_command(&args, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn thread_pool(threads: Option<usize>) -> Result<Option<rayon::ThreadPool>, CliError> {
    match threads {
        None => Ok(None),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(Some)
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}"))),
    }
}

/// Runs `task` on `pool` if given, otherwise on the global pool.
fn within<T: Send>(pool: &Option<rayon::ThreadPool>, task: impl FnOnce() -> T + Send) -> T {
    match pool {
        Some(pool) => pool.install(task),
        None => task(),
    }
}

/// Resolves the configuration of a `run` invocation.
pub fn resolve_run_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let kind = args
        .experiment
        .as_deref()
        .map(|name| name.parse::<ExperimentKind>())
        .transpose()?;
    let mut config = match &args.config {
        None => {
            let kind = kind.ok_or_else(|| CliError::Usage("--experiment is required without --config".into()))?;
            ExperimentConfig::new(kind)?
        }
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let ini_text = if path.extension().is_some_and(|x| x == "json") {
                RunManifest::from_json(&text)?.config_ini
            } else {
                text
            };
            parse_config(&ini_text, kind).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(seed) = args.seed {
        config.seed_base = seed;
    }
    if let Some(m) = args.ensemble {
        config.ensemble_size = m;
    }
    config.validate()?;
    Ok(config)
}

fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn failure_text(checks: &[&Check], kind: ExperimentKind) -> String {
    let lines: Vec<String> = checks
        .iter()
        .map(|c| format!("{kind}/{}: value {} threshold {} ({})", c.name, c.value, c.threshold, c.detail))
        .collect();
    format!("failed properties:\n  {}", lines.join("\n  "))
}

/// Writes `<kind>.csv`, `<kind>_summary.json`, `config.ini` and
/// `manifest.json` into `dir` and returns the manifest.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    report: &ExperimentReport,
    started: SystemTime,
    wall_seconds: f64,
    threads: usize,
) -> Result<RunManifest, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let config_ini = render_config(config);
    let summary = serde_json::to_string_pretty(&report.summary(config)).map_err(Error::from)? + "\n";
    let files = [
        (format!("{}.csv", config.kind), report.to_csv()),
        (format!("{}_summary.json", config.kind), summary),
        ("config.ini".to_string(), config_ini.clone()),
    ];
    let mut outputs = Vec::new();
    for (name, text) in &files {
        write_atomic(&dir.join(name), text.as_bytes())?;
        outputs.push(OutputFile {
            file: name.clone(),
            hash: content_hash(text.as_bytes()),
        });
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: config.kind,
        config_ini,
        config: config.clone(),
        seed_base: config.seed_base,
        seed_rule: manifest::SEED_RULE.to_string(),
        seeds: report.seeds.clone(),
        passed: report.passed(),
        started_unix: unix_seconds(started),
        finished_unix: unix_seconds(SystemTime::now()),
        wall_seconds,
        threads,
        outputs,
    };
    write_atomic(&dir.join("manifest.json"), manifest.to_json()?.as_bytes())?;
    Ok(manifest)
}

fn run_command(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = resolve_run_config(args)?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let pool = thread_pool(args.threads)?;
    let (report, threads) = within(&pool, || (experiments::run(&config), rayon::current_num_threads()));
    let report = report?;
    let wall = clock.elapsed().as_secs_f64();
    write_outputs(&args.out, &config, &report, started, wall, threads)?;
    for c in &report.checks {
        writeln!(out, "{} {}/{} value={} threshold={}", if c.passed { "PASS" } else { "FAIL" }, config.kind, c.name, c.value, c.threshold)?;
    }
    writeln!(out, "wrote {} ({wall:.1} s)", args.out.display())?;
    let failed: Vec<&Check> = report.failed_checks().collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Property(failure_text(&failed, config.kind)))
    }
}

fn check_command(args: &CheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut kinds = vec![ExperimentKind::LemmaSuite, ExperimentKind::Order];
    if args.full {
        kinds = ExperimentKind::ALL.to_vec();
    }
    let base = ExperimentConfig::new(ExperimentKind::LemmaSuite)?.seed_base;
    let pool = thread_pool(args.threads)?;
    let mut failures = Vec::new();
    let spectral = within(&pool, || spectral_exactness(SPECTRAL_CASES, base))?;
    for c in spectral.checks() {
        writeln!(out, "{} spectral/{} value={:e} threshold={:e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold)?;
        if !c.passed {
            failures.push(format!("spectral/{}: value {} threshold {}", c.name, c.value, c.threshold));
        }
    }
    for kind in kinds {
        let config = ExperimentConfig::new(kind)?;
        let started = SystemTime::now();
        let clock = Instant::now();
        let (report, threads) = within(&pool, || (experiments::run(&config), rayon::current_num_threads()));
        let report = match report {
            Ok(report) => report,
            Err(e @ Error::EnvelopeViolation { .. }) => {
                writeln!(out, "FAIL {kind}: {e}")?;
                failures.push(format!("{kind}: {e}"));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(dir) = &args.out {
            let wall = clock.elapsed().as_secs_f64();
            write_outputs(&dir.join(kind.name()), &config, &report, started, wall, threads)?;
        }
        for c in &report.checks {
            writeln!(out, "{} {kind}/{} value={} threshold={}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold)?;
        }
        let failed: Vec<&Check> = report.failed_checks().collect();
        if !failed.is_empty() {
            failures.push(failure_text(&failed, kind));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Property(failures.join("\n")))
    }
}

fn norms_command(args: &NormsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let field = Field::read_binary(&args.field)?;
    let grid = *field.grid();
    let s_grid = SGrid::geometric(grid.spacing().powi(2).min(0.5), args.s_points)?;
    let params = BesovParams::new(args.alpha, args.p, s_grid.clone())?;
    let phi = phi_besov(&field, &params).ok().map(|v| v.value());
    let report = json!({
        "field": args.field.display().to_string(),
        "grid": grid,
        "alpha": args.alpha,
        "p": args.p,
        "s_points": args.s_points,
        "sup_norm": besov_norm_sup(&field, args.alpha, &s_grid)?,
        "p_norm": besov_norm_p(&field, &params),
        "phi": phi,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
    Ok(())
}
