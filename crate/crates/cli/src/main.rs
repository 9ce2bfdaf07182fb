use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use p2ploc::experiment::{report_log, run_experiment, ExperimentSpec, SweepAxes};
use p2ploc::metrics::{thresholds, RunSummary};
use p2ploc::scenario::{write_scenario, Scenario};

#[derive(Parser)]
#[command(name = "p2ploc", version, about = "Cooperative localization under NLOS ranging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scenario (ground truth, ranges, inertial readings) to a file.
    Generate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run one configuration (sweep axes ignored) for every replication.
    Run {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run every sweep point and replication.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Recompute metrics from epoch log files.
    Report {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, default_value_t = 20)]
        burn_in: usize,
    },
}

#[derive(Args)]
struct SpecArgs {
    /// TOML experiment file; defaults give the full-size setup.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Base seed; replication r uses seed + r.
    #[arg(long)]
    seed: u64,
    /// Override a field by key path, e.g. `--set scenario.params.alpha=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl SpecArgs {
    fn load(&self) -> Result<ExperimentSpec> {
        let text = match &self.config {
            Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => String::new(),
        };
        let mut overrides = self.overrides.clone();
        overrides.push(format!("scenario.seed={}", self.seed));
        Ok(ExperimentSpec::from_toml_str(&text, &overrides)?)
    }
}

fn print_summary(label: &str, s: &RunSummary) {
    let mut line = format!("{label}:");
    for e in &s.estimators {
        line.push_str(&format!(" {}={:.3}m", e.estimator, e.mean_error));
    }
    if let Some(pd) = s.detection.p_d {
        line.push_str(&format!(" p_d={pd:.3}"));
    }
    if let Some(fa) = s.detection.false_alarm {
        line.push_str(&format!(" false_alarm={fa:.3}"));
    }
    line.push_str(&format!(" resets={}", s.resets));
    println!("{line}");
}

fn experiment(spec: &ExperimentSpec, out: &Path) -> Result<ExitCode> {
    let outcome = run_experiment(spec, Some(out))?;
    for r in &outcome.results {
        print_summary(&r.job.label(), &r.summary);
        eprintln!("{}: {:.1}s", r.job.label(), r.summary.runtime_seconds);
    }
    for (job, e) in &outcome.failures {
        eprintln!("{}: failed: {e}", job.label());
    }
    Ok(if outcome.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Generate { spec, out } => {
            let spec = spec.load()?;
            let scenario = Scenario::generate(&spec.scenario)?;
            let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            write_scenario(&scenario, &mut w)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { spec, out } => {
            let mut spec = spec.load()?;
            spec.sweep = SweepAxes::default();
            experiment(&spec, &out)
        }
        Command::Sweep { spec, out } => experiment(&spec.load()?, &out),
        Command::Report { logs, burn_in } => {
            let grid = thresholds(0.05, 201);
            for path in &logs {
                let s = report_log(path, burn_in, &grid).with_context(|| format!("reading {}", path.display()))?;
                if s.estimators.is_empty() {
                    bail!("{} lists no estimators", path.display());
                }
                print_summary(&path.display().to_string(), &s);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
