use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use phasespace::harness::{
    emit_plot_data, resolve_output_dir, run_experiment, sweep_dt, sweep_ensemble, sweep_grid, write_sweep_csv,
    ComparisonReport, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "phasespace", version, about = "Wigner, Husimi and Bohmian distributions of a tunnelling packet")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by commands that read a configuration.
#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides a configuration key, e.g. `--set grid.n=16384` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    probe_s: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let mut overrides: Vec<(String, String)> = Vec::new();
        for item in &self.overrides {
            let (k, v) = item.split_once('=').with_context(|| format!("expected KEY=VALUE, got {item}"))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(n) = self.n_traj {
            overrides.push(("bohmian.n_traj".into(), n.to_string()));
        }
        if let Some(dt) = self.dt {
            overrides.push(("dt".into(), format!("{dt:?}")));
        }
        if let Some(s) = self.probe_s {
            overrides.push(("probe_s".into(), format!("{s:?}")));
        }
        for (k, v) in overrides {
            config.apply_override(&k, &v).with_context(|| format!("override {k}={v}"))?;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Runs the simulation and writes all artifacts.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Seed of the trajectory sampling.
        #[arg(long)]
        seed: u64,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes plot data and a gnuplot script for a finished run.
    Plot { run_dir: PathBuf },
    /// Prints the comparison table of a finished run; fails if it differs from
    /// the expected pattern.
    Validate { run_dir: PathBuf },
    /// Convergence sweep over dt, grid size or ensemble size.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(value_enum)]
        parameter: SweepParameter,
        /// Comma-separated values of the swept parameter.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Seed for the ensemble sweep.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Coarsening factor of the histogram bins for the ensemble sweep.
        #[arg(long, default_value_t = 16)]
        bin_factor: usize,
        /// CSV output file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParameter {
    Dt,
    Grid,
    N,
}

fn as_count(v: f64) -> anyhow::Result<usize> {
    if v < 1.0 || v.fract() != 0.0 {
        bail!("{v} is not a positive integer");
    }
    Ok(v as usize)
}

fn read_report(run_dir: &Path) -> anyhow::Result<ComparisonReport> {
    let path = run_dir.join("report.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ComparisonReport::from_json(&text)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let config = config.load()?;
            let out = resolve_output_dir(out.as_deref().unwrap_or(&config.output.dir));
            let run = run_experiment(&config, seed, &out)?;
            println!("{}", run.report.table_text());
            println!("T = {:.6}", run.report.transmission.probability);
            println!("artifacts in {}", out.display());
        }
        Command::Plot { run_dir } => {
            for path in emit_plot_data(&resolve_output_dir(&run_dir))? {
                println!("{}", path.display());
            }
        }
        Command::Validate { run_dir } => {
            let report = read_report(&resolve_output_dir(&run_dir))?;
            println!("{}", report.table_text());
            if !report.matches_expected_pattern {
                println!("pattern: MISMATCH");
                return Ok(ExitCode::FAILURE);
            }
            println!("pattern: OK");
        }
        Command::Sweep { config, parameter, values, seed, bin_factor, out } => {
            let config = config.load()?;
            let (name, points) = match parameter {
                SweepParameter::Dt => ("dt", sweep_dt(&config, &values)?),
                SweepParameter::Grid => {
                    let sizes = values.iter().map(|v| as_count(*v)).collect::<anyhow::Result<Vec<_>>>()?;
                    ("n", sweep_grid(&config, &sizes)?)
                }
                SweepParameter::N => {
                    let sizes = values.iter().map(|v| as_count(*v)).collect::<anyhow::Result<Vec<_>>>()?;
                    ("n_traj", sweep_ensemble(&config, seed, &sizes, bin_factor)?)
                }
            };
            let out = resolve_output_dir(&out);
            write_sweep_csv(&out, name, &points)?;
            for p in &points {
                println!("{name} = {}: {:?}", p.value, p);
            }
            println!("written to {}", out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
