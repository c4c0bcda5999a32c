//! `bossal`: run active learning experiments, generate synthetic feature
//! files and turn finished runs into plot-ready tables.
//!
//! Exit status is 0 on success, 2 when the input (arguments, config, data)
//! is invalid and 1 when the run fails for any other reason.

mod config;
mod error;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use bossal::data::{generate_synthetic, write_feature_file};
use bossal::harness::{run_experiment, write_curves_csv, Regime, Summary};
use bossal::{Exec, SyntheticSpec};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, Result};
use crate::report::Mode;

/// Default output root when neither `--out` nor `BOSSAL_OUT` is given.
const DEFAULT_OUT_ROOT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "bossal", version, about = "Pool-based active learning experiments on frozen features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    ///
    /// Writes curves.csv, summary.json, config.json and manifest.json into
    /// the output directory.
    Run(RunArgs),
    /// Aggregate run directories into <mode>.csv and gnuplot-ready <mode>.dat.
    Report(ReportArgs),
    /// Write a synthetic Gaussian-mixture dataset as an ALFX feature file.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: $BOSSAL_OUT/<config name>, else runs/<config name>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output root used when --out is absent.
    #[arg(long, env = "BOSSAL_OUT", hide = true)]
    out_root: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially [default: all cores].
    #[arg(long)]
    jobs: Option<usize>,
    /// Master seed, replacing `experiment.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Named selector bundle: boss, boss-s, boss-xs, boss-xxs, cdo-<benchmark>
    /// or sas-<benchmark> for cifar10, snacks, dopanim, dtd.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Table to produce.
    #[arg(long, value_enum)]
    mode: Mode,
    /// Run directories written by `bossal run`; all must share cycles and batch size.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Output directory [default: $BOSSAL_OUT/reports, else runs/reports].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "BOSSAL_OUT", hide = true)]
    out_root: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Destination ALFX file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SyntheticSpec::default().num_classes)]
    num_classes: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().per_class)]
    per_class: usize,
    /// Standard deviation of each class cluster.
    #[arg(long, default_value_t = SyntheticSpec::default().cluster_spread)]
    cluster_spread: f64,
    /// Mean pairwise distance between class centroids.
    #[arg(long, default_value_t = SyntheticSpec::default().class_separation)]
    class_separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    /// SHA-256 of the canonical (sorted-key) JSON of the effective config.
    config_hash: String,
    engine_version: &'static str,
    /// Seconds since the Unix epoch.
    started_at: u64,
    finished_at: u64,
    outputs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn exec_for(jobs: Option<usize>) -> Result<Exec> {
    match jobs {
        None => Ok(Exec::default()),
        Some(0) => Err(CliError::config("--jobs must be at least 1")),
        Some(1) => Ok(Exec::Sequential),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
            Ok(Exec::Parallel)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let started_at = unix_now();
    let overrides = Overrides {
        seed: args.seed,
        preset: args.preset,
    };
    let mut cfg = RunConfig::load(&args.config, &overrides)?;
    let exec = exec_for(args.jobs)?;
    let out = match args.out {
        Some(dir) => dir,
        None => {
            let stem = args.config.file_stem().unwrap_or_default();
            args.out_root
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
                .join(stem)
        }
    };

    let dataset = cfg.dataset.load()?;
    cfg.experiment.exec = exec;
    let curves = run_experiment(&dataset, &cfg.experiment)?;

    fs::create_dir_all(&out)?;
    let curves_path = out.join("curves.csv");
    let summary_path = out.join("summary.json");
    let config_path = out.join("config.json");
    let manifest_path = out.join("manifest.json");
    write_curves_csv(fs::File::create(&curves_path)?, &curves)?;
    let summary = Summary::new(
        cfg.experiment.selector.name(),
        cfg.experiment.batch_size,
        &curves,
    )?;
    summary.write(&summary_path)?;
    write_json(&config_path, &cfg)?;
    let manifest = RunManifest {
        config_hash: cfg.hash()?,
        engine_version: env!("CARGO_PKG_VERSION"),
        started_at,
        finished_at: unix_now(),
        outputs: vec![curves_path, summary_path, config_path, manifest_path.clone()],
    };
    write_json(&manifest_path, &manifest)?;

    let full = summary.aulc[&Regime::Full];
    println!(
        "{}: {} repetitions, AULC {:.4} ± {:.4} -> {}",
        summary.selector,
        summary.repetitions,
        full.mean,
        full.se,
        out.display()
    );
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(bossal::Error::from)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let out = args.out.unwrap_or_else(|| {
        args.out_root
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
            .join("reports")
    });
    for path in report::report(args.mode, &args.runs, &out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        num_classes: args.num_classes,
        dim: args.dim,
        per_class: args.per_class,
        cluster_spread: args.cluster_spread,
        class_separation: args.class_separation,
        seed: args.seed,
    };
    let dataset = generate_synthetic(&spec)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_feature_file(&dataset, &args.out)?;
    println!(
        "{}: {} instances, {} classes, {} dims",
        args.out.display(),
        dataset.len(),
        dataset.num_classes(),
        dataset.dim()
    );
    Ok(())
}
