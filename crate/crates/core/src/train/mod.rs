//! Loss assembly, optimisation and the training loop.

pub mod evaluate;
pub mod loss;
pub mod optim;
pub mod sampling;

use std::io::Write;

pub use evaluate::{evaluate_mse, metric_mse, sample_observations, test_grid, Scenario, TestGrid};
pub use loss::{attach_scalars, compute_loss, LossReport, LossSpec, Mode};
pub use optim::{adam_step, plateau_schedule, AdamState, PlateauConfig, PlateauState};
pub use sampling::{sample_collocation, Batch, BatchSampler, SamplingMethod};

use crate::error::{config, Error, Result};
use crate::network::{Network, ParameterSet};
use crate::pde::PdeProblem;
use crate::rng::{self, streams};

/// Consecutive non-finite losses that end a run.
pub const DIVERGENCE_STRIKES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub plateau: PlateauConfig,
    /// Loss evaluations averaged into one ADAM step.
    pub accumulation: usize,
    pub seed: u64,
    /// Test-grid MSE is logged every this many evaluations (0 = only at the end).
    pub eval_every: usize,
    /// Draw new collocation points at every evaluation instead of cycling
    /// through the fixed training sample.
    pub fresh_sampling: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 1000,
            learning_rate: 1e-3,
            plateau: PlateauConfig::default(),
            accumulation: 1,
            seed: 0,
            eval_every: 1000,
            fresh_sampling: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.plateau;
        if !(p.decay > 0.0 && p.decay < 1.0) {
            return config(format!("plateau decay {} outside (0, 1)", p.decay));
        }
        if !(self.learning_rate > 0.0) || !(p.min_lr > 0.0) {
            return config("learning rates must be positive");
        }
        if self.accumulation == 0 {
            return config("gradient accumulation factor must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub lr: f64,
    pub total: f64,
    pub pde: f64,
    pub ic: f64,
    pub bc: f64,
    pub data: f64,
    /// NaN where not evaluated.
    pub test_mse: f64,
    pub scalars: Vec<(String, f64)>,
}

pub const HISTORY_HEADER: &str =
    "iteration,lr,loss_total,loss_pde,loss_ic,loss_bc,loss_data,test_mse,physics_scalar_estimates";

impl HistoryRow {
    /// Scalars are written as `name=value` pairs joined by `;`.
    pub fn csv_line(&self) -> String {
        let scalars: Vec<String> = self.scalars.iter().map(|(n, v)| format!("{n}={v:e}")).collect();
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            self.iteration,
            self.lr,
            self.total,
            self.pde,
            self.ic,
            self.bc,
            self.data,
            self.test_mse,
            scalars.join(";")
        )
    }
}

pub fn write_history(rows: &[HistoryRow], w: &mut dyn Write) -> Result<()> {
    writeln!(w, "{HISTORY_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Completed,
    Diverged { iteration: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterSet,
    pub history: Vec<HistoryRow>,
    pub status: Status,
    /// Test-grid MSE of the returned parameters, when ground truth exists.
    pub final_mse: Option<f64>,
}

impl TrainOutcome {
    pub fn diverged(&self) -> bool {
        matches!(self.status, Status::Diverged { .. })
    }

    /// `Err(Divergence)` for a diverged run.
    pub fn into_result(self) -> Result<Self> {
        match &self.status {
            Status::Completed => Ok(self),
            Status::Diverged { iteration, reason } => Err(Error::Divergence(format!(
                "diverged at iteration {iteration}: {reason}"
            ))),
        }
    }
}

/// Runs the training loop from freshly initialised parameters.
pub fn train(network: &Network, problem: &PdeProblem, spec: &LossSpec, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(network, problem, spec, cfg, None, &mut |_| {})
}

/// As [`train`], optionally starting from `initial` and calling `observer`
/// after every history row.
pub fn train_with(
    network: &Network,
    problem: &PdeProblem,
    spec: &LossSpec,
    cfg: &TrainConfig,
    initial: Option<ParameterSet>,
    observer: &mut dyn FnMut(&HistoryRow),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.validate()?;
    let mut params = match initial {
        Some(p) => p,
        None => network.init(&mut rng::stream(cfg.seed, streams::INIT))?,
    };
    attach_scalars(&mut params, problem);
    let grid = if problem.has_ground_truth() {
        Some(test_grid(problem)?)
    } else {
        None
    };
    let mse = |p: &ParameterSet| -> Result<f64> {
        match &grid {
            Some(g) => evaluate_mse(network, &p.values, problem, g),
            None => Ok(f64::NAN),
        }
    };
    if cfg.iterations == 0 {
        let final_mse = grid.as_ref().map(|_| mse(&params)).transpose()?;
        return Ok(TrainOutcome {
            params,
            history: Vec::new(),
            status: Status::Completed,
            final_mse,
        });
    }

    let mode = spec.mode();
    let mut batch_rng = rng::stream(cfg.seed, streams::BATCH);
    let mut sampler = BatchSampler::new(problem, cfg.fresh_sampling, &mut batch_rng)?;
    let mut adam = AdamState::new(params.len());
    let mut plateau = PlateauState::new(cfg.plateau, cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut losses = Vec::with_capacity(cfg.iterations);
    let mut acc = vec![0.0; params.len()];
    let mut acc_count = 0;
    let mut strikes = 0;
    let mut status = Status::Completed;

    for it in 0..cfg.iterations {
        let lr = plateau.lr;
        let batch = sampler.draw(&spec.batch, &mut batch_rng)?;
        let report = compute_loss(network, &params, problem, spec, &batch, mode)?;
        let finite = report.total.is_finite();
        let mut failure = None;
        if finite {
            strikes = 0;
            for (a, g) in acc.iter_mut().zip(&report.gradient) {
                *a += g;
            }
            acc_count += 1;
            if acc_count == cfg.accumulation {
                let scale = 1.0 / acc_count as f64;
                acc.iter_mut().for_each(|a| *a *= scale);
                if let Err(e) = adam_step(&mut params.values, &acc, &params.trainable, &mut adam, lr) {
                    failure = Some(e.to_string());
                }
                acc.fill(0.0);
                acc_count = 0;
            }
            losses.push(report.total);
            plateau_schedule(&losses, &mut plateau);
        } else {
            strikes += 1;
            if strikes >= DIVERGENCE_STRIKES {
                failure = Some(format!("loss non-finite for {strikes} consecutive evaluations"));
            }
        }

        let last = it + 1 == cfg.iterations;
        let due = cfg.eval_every > 0 && (it + 1) % cfg.eval_every == 0;
        let test_mse = if grid.is_some() && (due || last) && failure.is_none() {
            mse(&params)?
        } else {
            f64::NAN
        };
        let row = HistoryRow {
            iteration: it + 1,
            lr,
            total: report.total,
            pde: report.pde,
            ic: report.ic,
            bc: report.bc,
            data: report.data,
            test_mse,
            scalars: problem
                .scalars
                .iter()
                .filter_map(|s| params.scalar(&s.name).map(|v| (s.name.clone(), v)))
                .collect(),
        };
        observer(&row);
        history.push(row);
        if let Some(reason) = failure {
            log::warn!("{}: training diverged at iteration {}: {reason}", problem.name, it + 1);
            status = Status::Diverged {
                iteration: it + 1,
                reason,
            };
            break;
        }
    }

    let final_mse = match (&status, &grid) {
        (Status::Completed, Some(_)) => {
            let last = history.last().map_or(f64::NAN, |r| r.test_mse);
            Some(if last.is_nan() { mse(&params)? } else { last })
        }
        _ => None,
    };
    Ok(TrainOutcome {
        params,
        history,
        status,
        final_mse,
    })
}
