//! One training run: model construction, training, evaluation and the
//! per-run artifacts (`history.csv`, `fields.csv`).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use sinpinn::network::{Network, NetworkConfig, ParameterSet, Variant};
use sinpinn::pde::{self, PdeProblem};
use sinpinn::rng::{stream, streams};
use sinpinn::train::{
    sample_observations, sampling::uniform_grid, train_with, write_history, LossSpec, Scenario, Status, TrainConfig,
    TrainOutcome,
};

use crate::config::{ExperimentConfig, RunMode};
use crate::summary::SummaryRow;

/// One (σ, λ, seed) cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub sigma: f64,
    pub lambda: f64,
    pub seed: u64,
}

pub fn run_id(cfg: &ExperimentConfig, spec: &RunSpec) -> String {
    let mode = match cfg.mode {
        RunMode::Forward => String::new(),
        m => format!("_{m}"),
    };
    format!(
        "{}_{}_s{}_l{}_seed{}{mode}",
        cfg.problem, cfg.variant, spec.sigma, spec.lambda, spec.seed
    )
}

/// The problem as trained under `cfg.mode`; inverse modes draw their
/// observations from the run seed.
pub fn staged_problem(cfg: &ExperimentConfig, seed: u64) -> Result<PdeProblem> {
    let base = cfg.problem()?;
    let scenario = match cfg.mode {
        RunMode::Forward => return Ok(base),
        RunMode::InverseDense => Scenario::Dense,
        RunMode::InverseSparse => Scenario::Sparse,
    };
    let obs = sample_observations(&base, scenario, &mut stream(seed, streams::OBSERVATIONS))?;
    Ok(pde::make_inverse_variant(&base, obs)?)
}

pub fn build_network(cfg: &ExperimentConfig, sigma: f64) -> Result<Network> {
    let sigma = (cfg.variant != Variant::Standard).then_some(sigma);
    Ok(Network::new(NetworkConfig::for_variant(&cfg.architecture, cfg.variant, sigma)?)?)
}

fn row_from(cfg: &ExperimentConfig, spec: &RunSpec, problem: &PdeProblem, out: &TrainOutcome, secs: f64) -> SummaryRow {
    let last = out.history.last();
    let pick = |f: fn(&sinpinn::train::HistoryRow) -> f64| last.map(f).unwrap_or(f64::NAN);
    let estimate = problem
        .scalars
        .iter()
        .find(|s| s.trainable)
        .and_then(|s| out.params.scalar(&s.name));
    let diverged = matches!(out.status, Status::Diverged { .. });
    SummaryRow {
        run_id: run_id(cfg, spec),
        problem: cfg.problem.clone(),
        variant: cfg.variant.to_string(),
        sigma: spec.sigma,
        lambda: spec.lambda,
        seed: spec.seed,
        scale: cfg.scale.to_string(),
        iters: cfg.iterations,
        mse: if diverged { f64::NAN } else { out.final_mse.unwrap_or(f64::NAN) },
        loss_pde: pick(|r| r.pde),
        loss_ic: pick(|r| r.ic),
        loss_bc: pick(|r| r.bc),
        loss_data: pick(|r| r.data),
        physics_estimate: estimate,
        wall_seconds: secs,
        status: if diverged { "diverged" } else { "completed" }.into(),
    }
}

/// Row for a run that could not be carried out at all.
pub fn failed_row(cfg: &ExperimentConfig, spec: &RunSpec, secs: f64) -> SummaryRow {
    SummaryRow {
        run_id: run_id(cfg, spec),
        problem: cfg.problem.clone(),
        variant: cfg.variant.to_string(),
        sigma: spec.sigma,
        lambda: spec.lambda,
        seed: spec.seed,
        scale: cfg.scale.to_string(),
        iters: cfg.iterations,
        mse: f64::NAN,
        loss_pde: f64::NAN,
        loss_ic: f64::NAN,
        loss_bc: f64::NAN,
        loss_data: f64::NAN,
        physics_estimate: None,
        wall_seconds: secs,
        status: "failed".into(),
    }
}

pub fn run_dir(out: &Path, id: &str) -> PathBuf {
    out.join("runs").join(id)
}

/// Trains one cell and writes `history.csv` and `fields.csv` under
/// `out/runs/<run_id>/`.
pub fn run_single(cfg: &ExperimentConfig, spec: &RunSpec) -> Result<SummaryRow> {
    let start = Instant::now();
    let problem = staged_problem(cfg, spec.seed)?;
    let net = build_network(cfg, spec.sigma)?;
    let loss = LossSpec::for_problem(&problem, spec.lambda);
    let tc = TrainConfig {
        iterations: cfg.iterations,
        learning_rate: cfg.learning_rate,
        seed: spec.seed,
        eval_every: cfg.eval_every,
        ..Default::default()
    };
    let id = run_id(cfg, spec);
    log::info!("{id}: training for {} iterations", cfg.iterations);
    let out = train_with(&net, &problem, &loss, &tc, None, &mut |_| {})?;
    let secs = start.elapsed().as_secs_f64();
    if let Status::Diverged { iteration, reason } = &out.status {
        log::warn!("{id}: diverged at iteration {iteration}: {reason}");
    }

    let dir = run_dir(&cfg.out, &id);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = BufWriter::new(fs::File::create(dir.join("history.csv"))?);
    write_history(&out.history, &mut w)?;
    w.flush()?;
    write_fields(&dir.join("fields.csv"), &net, &out.params, &problem)?;
    Ok(row_from(cfg, spec, &problem, &out, secs))
}

/// Nodes per dimension of the exported field grid.
fn export_counts(d: usize) -> Vec<usize> {
    match d {
        1 => vec![501],
        2 => vec![101, 101],
        _ => {
            let mut c = vec![41; d];
            c[d - 1] = 5;
            c
        }
    }
}

/// Predicted fields (and the closed form where one exists) on a regular
/// grid, for contour plots in external tools.
pub fn write_fields(path: &Path, net: &Network, params: &ParameterSet, problem: &PdeProblem) -> Result<()> {
    let d = problem.domain.dim();
    let pts = uniform_grid(&problem.domain, &export_counts(d))?;
    let pred = net.forward_batch(&params.values, &pts)?;
    let m = net.output_count();
    if m < problem.fields.len() {
        bail!("network has {m} outputs but {} has {} fields", problem.name, problem.fields.len());
    }
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("writing {}", path.display()))?);
    let mut header: Vec<String> = problem.domain.labels.clone();
    header.extend(problem.fields.iter().cloned());
    if problem.analytic.is_some() {
        header.extend(problem.fields.iter().map(|f| format!("{f}_exact")));
    }
    writeln!(w, "{}", header.join(","))?;
    for (k, p) in pts.chunks(d).enumerate() {
        let mut cells: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        cells.extend(pred[k * m..k * m + problem.fields.len()].iter().map(|v| v.to_string()));
        if problem.analytic.is_some() {
            cells.extend(pde::exact_solution(problem, p)?.iter().map(|v| v.to_string()));
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, ConfigFile};

    fn tiny(mode: RunMode, dir: &Path) -> ExperimentConfig {
        let file = preset("wave1d").unwrap().overlay(ConfigFile {
            architecture: Some("(x,t)-8-6-(u)".into()),
            iterations: Some(5),
            eval_every: Some(5),
            mode: Some(mode),
            out: Some(dir.to_path_buf()),
            ..Default::default()
        });
        ExperimentConfig::resolve(file).unwrap()
    }

    #[test]
    fn rerun_reproduces_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(RunMode::Forward, dir.path());
        let spec = RunSpec { sigma: 1.0, lambda: 1.0, seed: 4 };
        let a = run_single(&cfg, &spec).unwrap();
        let b = run_single(&cfg, &spec).unwrap();
        assert!(a.same_numbers(&b));
        assert!(a.mse.is_finite() && a.physics_estimate.is_none());
        let run = run_dir(dir.path(), &a.run_id);
        let hist = fs::read_to_string(run.join("history.csv")).unwrap();
        assert_eq!(hist.lines().count(), 6);
        let fields = fs::read_to_string(run.join("fields.csv")).unwrap();
        assert_eq!(fields.lines().next(), Some("x,t,u,u_exact"));
        assert_eq!(fields.lines().count(), 1 + 101 * 101);
    }

    #[test]
    fn inverse_run_reports_the_estimate() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(RunMode::InverseSparse, dir.path());
        let row = run_single(&cfg, &RunSpec { sigma: 1.0, lambda: 1.0, seed: 0 }).unwrap();
        assert!(row.run_id.ends_with("_inverse-sparse"));
        assert!(row.physics_estimate.is_some_and(|c| c != 1.0));
        assert_eq!((row.loss_ic, row.loss_bc), (0.0, 0.0));
    }

    #[test]
    fn inverse_needs_an_inferable_scalar() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(RunMode::InverseDense, dir.path());
        cfg.problem = "helmholtz".into();
        cfg.architecture = "(x,y)-8-(u)".into();
        assert!(run_single(&cfg, &RunSpec { sigma: 1.0, lambda: 1.0, seed: 0 }).is_err());
    }
}
