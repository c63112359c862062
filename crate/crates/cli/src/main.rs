use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sinpinn::pde::kdv;
use sinpinn_cli::config::{preset, Axis, ConfigFile, ExperimentConfig, RunMode, Scale, SweepSpec};
use sinpinn_cli::props::{run_proposition_suite, PropMatrix};
use sinpinn_cli::report::render_report;
use sinpinn_cli::sweep::run_sweep;

#[derive(Parser)]
#[command(name = "sinpinn", version, about = "PINN experiments with sinusoidal feature mappings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration for each seed.
    Run(ExperimentArgs),
    /// Sweep σ or λ over a log-spaced grid.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value = "sigma")]
        axis: Axis,
        /// Range and count default to the standard sweep of the axis.
        #[arg(long)]
        min: Option<f64>,
        #[arg(long)]
        max: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Initialisation statistics: variance bounds, backward gain, coverage.
    Props {
        #[arg(long, default_value = "results/props")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Divide every Monte-Carlo draw count by this factor.
        #[arg(long, default_value_t = 1)]
        thin: usize,
    },
    /// Charts and a summary table for a results directory.
    Report { dir: PathBuf },
    /// Build or refresh the KdV reference-solution cache.
    Oracle {
        #[arg(long, default_value = "results/kdv")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Named preset (convdiff, cavity, wave1d, taylor-green, kdv, helmholtz2d).
    #[arg(long)]
    preset: Option<String>,
    /// TOML file; its keys override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    architecture: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Exact iteration count, not rescaled by --scale.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    mode: Option<RunMode>,
    #[arg(long)]
    scale: Option<Scale>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(self, sweep: Option<SweepSpec>) -> Result<ExperimentConfig> {
        let mut file = match &self.preset {
            Some(p) => preset(p)?,
            None => ConfigFile::default(),
        };
        if let Some(path) = &self.config {
            file = file.overlay(ConfigFile::load(path)?);
        }
        file = file.overlay(ConfigFile {
            problem: self.problem,
            variant: self.variant,
            architecture: self.architecture,
            sigma: self.sigma,
            lambda: self.lambda,
            seeds: self.seeds,
            mode: self.mode,
            scale: self.scale,
            out: self.out,
            sweep,
            ..Default::default()
        });
        let mut cfg = ExperimentConfig::resolve(file)?;
        if let Some(n) = self.iters {
            cfg.iterations = n;
        }
        Ok(cfg)
    }
}

enum Failure {
    Config(anyhow::Error),
    Runs(anyhow::Error),
}

fn experiment(cfg: Result<ExperimentConfig>) -> Result<(), Failure> {
    let cfg = cfg.map_err(Failure::Config)?;
    let result = run_sweep(&cfg).map_err(Failure::Runs)?;
    for c in &result.cells {
        println!(
            "{} {} σ={} λ={}: best MSE {:e} over {} runs",
            c.problem, c.variant, c.sigma, c.lambda, c.best_mse, c.runs
        );
    }
    println!("results in {}", cfg.out.display());
    if result.all_failed() {
        return Err(Failure::Runs(anyhow::anyhow!("every run failed")));
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run(exp) => experiment(exp.resolve(None)),
        Command::Sweep { exp, axis, min, max, count } => {
            let std = SweepSpec::standard(axis);
            let spec = SweepSpec {
                min: min.unwrap_or(std.min),
                max: max.unwrap_or(std.max),
                count: count.unwrap_or(std.count),
                ..std
            };
            experiment(exp.resolve(Some(spec)))
        }
        Command::Props { out, seed, thin } => {
            if thin == 0 {
                return Err(Failure::Config(anyhow::anyhow!("--thin must be at least 1")));
            }
            let mut m = PropMatrix { seed, ..Default::default() };
            for d in [
                m.prop1.as_mut().map(|s| &mut s.draws),
                m.prop3.as_mut().map(|s| &mut s.draws),
                m.fig3.as_mut().map(|s| &mut s.draws),
            ]
            .into_iter()
            .flatten()
            {
                *d = (*d / thin).max(sinpinn::initlab::MIN_DRAWS);
            }
            let files = run_proposition_suite(&m, &out).map_err(Failure::Runs)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Report { dir } => {
            let r = render_report(&dir).map_err(Failure::Runs)?;
            for c in r.charts.iter().chain(&r.table) {
                println!("{}", c.display());
            }
            Ok(())
        }
        Command::Oracle { out } => {
            let path = out.join("kdv_reference.csv");
            let table = std::fs::create_dir_all(&out)
                .context("creating output directory")
                .and_then(|_| Ok(kdv::load_or_solve(Some(&path), &kdv::KdvParams::default())?))
                .map_err(Failure::Runs)?;
            println!("{} ({} x {} nodes)", path.display(), table.params.nx, table.params.nt);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runs(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
