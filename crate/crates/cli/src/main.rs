//! `envmm`: batch front end for the envelope minimax library.
//!
//! Reads a JSON experiment config, runs the matching pipeline and writes
//! `report.json` and `series.csv` into the output directory.
//! Exit status: 0 success, 2 domain outcome (no minimizer, envelope
//! violation), 1 usage or IO error.

mod config;
mod inputs;
mod pipeline;
mod summary;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ExperimentConfig, Kind};

#[derive(Parser)]
#[command(name = "envmm", version, about = "Covariance-envelope minimax projection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config of any kind.
    Run(RunArgs),
    /// Run a config, requiring `kind` to match.
    #[command(name = "envelope_check")]
    EnvelopeCheck(RunArgs),
    Minimize(RunArgs),
    #[command(name = "verify_extremal")]
    VerifyExtremal(RunArgs),
    #[command(name = "wss_envelope")]
    WssEnvelope(RunArgs),
    #[command(name = "wss_filter")]
    WssFilter(RunArgs),
    #[command(name = "elliptic_demo")]
    EllipticDemo(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `tol` in the config.
    #[arg(long)]
    tol: Option<f64>,
    /// Suppress the summary table.
    #[arg(long)]
    quiet: bool,
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("ENVMM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("ENVMM_THREADS must be a nonnegative integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure the thread pool")?;
    Ok(())
}

fn execute(expected: Option<Kind>, args: &RunArgs) -> Result<i32> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(kind) = expected {
        if kind != cfg.kind {
            bail!(
                "subcommand `{}` does not match config kind `{}`",
                kind.name(),
                cfg.kind.name()
            );
        }
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.tol.is_some() {
        cfg.tol = args.tol;
    }
    cfg.validate()
        .with_context(|| format!("invalid config {}", args.config.display()))?;

    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(|p| cfg.resolve(p)))
        .unwrap_or_else(|| PathBuf::from("envmm-out"));

    let outcome = pipeline::run(&cfg)?;

    let report = json!({
        "kind": cfg.kind.name(),
        "seed": cfg.seed,
        "tol": cfg.tol(),
        "status": outcome.status.name(),
        "result": outcome.result,
    });
    write_artifacts(&out_dir, &report, &outcome.series)?;
    if !args.quiet {
        let title = format!("envmm {}  status: {}", cfg.kind.name(), outcome.status.name());
        outcome.summary.render(&title, std::io::stdout().lock())?;
    }
    Ok(outcome.status.exit_code())
}

fn write_artifacts(dir: &Path, report: &serde_json::Value, series: &summary::Series) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    series.write(&dir.join("series.csv"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (expected, args) = match &cli.command {
        Command::Run(a) => (None, a),
        Command::EnvelopeCheck(a) => (Some(Kind::EnvelopeCheck), a),
        Command::Minimize(a) => (Some(Kind::Minimize), a),
        Command::VerifyExtremal(a) => (Some(Kind::VerifyExtremal), a),
        Command::WssEnvelope(a) => (Some(Kind::WssEnvelope), a),
        Command::WssFilter(a) => (Some(Kind::WssFilter), a),
        Command::EllipticDemo(a) => (Some(Kind::EllipticDemo), a),
    };
    match init_threads().and_then(|_| execute(expected, args)) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
