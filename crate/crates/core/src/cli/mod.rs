//! Command-line runner.
//!
//! Every subcommand reads a TOML [`ExperimentConfig`], validates it in full,
//! runs one experiment and writes `<kind>.json` and `<kind>.csv` into the
//! output directory. Exit status: 0 success, 2 failed invariant check,
//! 3 inputs must be respecified, 4 bad config or arguments, 1 anything else.

pub mod config;
pub mod report;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{ExperimentConfig, Kind};
pub use report::{RunReport, Table};

use crate::error::Error;
use crate::numtheory::{bezout, farey_sequence};

/// Overrides the output directory, below `--out`.
pub const OUT_DIR_ENV: &str = "MULTICHARGE_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "multicharge-out";

#[derive(Debug, Parser)]
#[command(name = "multicharge", version, about = "Thermodynamics with several conserved quantities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the report table (csv) or the full report (json) on stdout.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generalized Gibbs state for given charges and betas.
    Thermal(Common),
    /// Inverse temperatures matching target charge averages.
    SolveBetas(Common),
    /// Trade one charge for another against a bath.
    Trade(Common),
    /// Work extraction down to the thermal state (or a goal state).
    Extract(Common),
    /// Explicit ladder batteries over a list of weight widths.
    Battery(Common),
    /// Second-law audit over random joint unitaries.
    Audit(Common),
    /// Farey-robust selection and number-theory helpers.
    Farey {
        #[command(subcommand)]
        action: Option<FareyAction>,
        #[command(flatten)]
        common: Common,
    },
    /// Grid sweep of extract, battery or trade over up to two parameters.
    Sweep(Common),
}

#[derive(Debug, Clone, Subcommand)]
pub enum FareyAction {
    /// Robust (dn1, dn2) for a measured ratio x/y.
    RobustSelect {
        measured: String,
        #[arg(long, allow_hyphen_values = true)]
        delta: String,
        #[arg(long)]
        eps: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
    },
    /// Check that neighbouring intervals overlap at order floor(|y|/eps).
    Coverage {
        #[arg(long)]
        order: u64,
        #[arg(long)]
        eps: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
    },
    /// Integers (a, b) with u a + v b = 1.
    Bezout { u: u64, v: u64 },
    /// The Farey sequence of a given order.
    Sequence { order: u64 },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Argument(_)
        | Error::Dimension { .. }
        | Error::Commensurability { .. }
        | Error::GuardBand { .. }
        | Error::Unsupported(_)
        | Error::BathRejected(_)
        | Error::RoleSwap => 4,
        Error::ExcludedRatio { .. } | Error::WindowExhausted { .. } => 3,
        Error::Invariant(_) | Error::Property(_) | Error::Precondition(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first) and runs; returns the exit status.
pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run_cli(cli),
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

pub fn main() -> i32 {
    run_args(std::env::args_os())
}

pub fn run_cli(cli: Cli) -> i32 {
    let start = Instant::now();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    eprintln!("elapsed: {:.3} s", start.elapsed().as_secs_f64());
    code
}

fn dispatch(cli: Cli) -> Result<i32, Error> {
    let (kind, common, sweep) = match cli.command {
        Command::Thermal(c) => (Some(Kind::Thermal), c, false),
        Command::SolveBetas(c) => (Some(Kind::SolveBetas), c, false),
        Command::Trade(c) => (Some(Kind::Trade), c, false),
        Command::Extract(c) => (Some(Kind::Extract), c, false),
        Command::Battery(c) => (Some(Kind::Battery), c, false),
        Command::Audit(c) => (Some(Kind::Audit), c, false),
        Command::Sweep(c) => (None, c, true),
        Command::Farey { action: Some(action), common } => return farey_direct(action, common),
        Command::Farey { action: None, common } => (Some(Kind::Farey), common, false),
    };
    let path = common.config.clone().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    let kind = match (kind, cfg.kind) {
        (Some(k), Some(c)) if k != c => return Err(Error::Config(format!("config kind {c} does not match subcommand {k}"))),
        (Some(k), _) => k,
        (None, _) => cfg.kind()?,
    };
    cfg.kind = Some(kind);
    cfg.validate(kind)?;
    let out = out_dir(&common, Some(&cfg));
    let report = if sweep { run::run_sweep(kind, &cfg)? } else { run::run_experiment(kind, &cfg)? };
    let stem = if sweep { "sweep" } else { kind.name() };
    finish(&report, stem, out, common.format)
}

fn out_dir(common: &Common, cfg: Option<&ExperimentConfig>) -> Option<PathBuf> {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.and_then(|c| c.output.as_ref()?.dir.clone()).map(PathBuf::from))
        .or_else(|| cfg.map(|_| PathBuf::from(DEFAULT_OUT_DIR)))
}

fn finish(report: &RunReport, stem: &str, out: Option<PathBuf>, format: Option<Format>) -> Result<i32, Error> {
    if let Some(dir) = &out {
        let (json, csv) = report::write_report(dir, stem, report)?;
        eprintln!("wrote {} and {}", json.display(), csv.display());
    }
    match format {
        Some(Format::Csv) => print!("{}", report.steps.to_csv()),
        Some(Format::Json) => print!("{}", report.to_json()),
        None => print_summary(report),
    }
    if let Some(reason) = &report.respecify {
        eprintln!("respecify required: {reason}");
        return Ok(3);
    }
    let failed = report.failed_checks();
    for c in &failed {
        eprintln!("check failed: {} = {:e} (bound {:e})", c.name, c.value, c.bound);
    }
    Ok(if failed.is_empty() { 0 } else { 2 })
}

fn print_summary(report: &RunReport) {
    for note in &report.notes {
        println!("{note}");
    }
    for (k, v) in &report.totals {
        println!("{k} = {v:.16e}");
    }
    for c in &report.checks {
        println!("{} {} = {:e} (bound {:e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
    }
}

fn farey_direct(action: FareyAction, common: Common) -> Result<i32, Error> {
    use config::{FareyMode, Num, Protocol};
    let protocol = match action {
        FareyAction::Bezout { u, v } => {
            let (a, b) = bezout(u, v)?;
            println!("({a}, {b})");
            return Ok(0);
        }
        FareyAction::Sequence { order } => {
            let seq = farey_sequence(order)?;
            let items: Vec<String> = seq.elements().iter().map(|r| r.to_string()).collect();
            println!("{}", items.join(" "));
            return Ok(0);
        }
        FareyAction::RobustSelect { measured, delta, eps, y } => Protocol {
            farey: Some(FareyMode::RobustSelect),
            measured: Some(Num::Text(measured)),
            delta: Some(Num::Text(delta)),
            epsilon: Some(Num::Text(eps)),
            y: Some(Num::Text(y)),
            ..Protocol::default()
        },
        FareyAction::Coverage { order, eps, y } => Protocol {
            farey: Some(FareyMode::Coverage),
            order: Some(order),
            epsilon: Some(Num::Text(eps)),
            y: Some(Num::Text(y)),
            ..Protocol::default()
        },
    };
    let cfg = ExperimentConfig {
        kind: Some(Kind::Farey),
        seed: common.seed,
        charges: Vec::new(),
        betas: Vec::new(),
        state: None,
        bath: None,
        protocol,
        sweep: None,
        output: None,
    };
    cfg.validate(Kind::Farey)?;
    let report = run::run_experiment(Kind::Farey, &cfg)?;
    finish(&report, "farey", out_dir(&common, None), common.format)
}
