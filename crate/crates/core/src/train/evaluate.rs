//! Test-grid error metrics and synthetic observations.

use crate::error::{usage, Error, Result};
use crate::network::Network;
use crate::pde::{exact_solution, kdv, Equation, MseMetric, Observations, PdeProblem, TrainingGrid};
use crate::rng::{uniform, Rng};

use super::sampling::uniform_grid;

/// Ground truth on a point set, `truth[point * fields + field]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestGrid {
    pub points: Vec<f64>,
    pub truth: Vec<f64>,
    pub fields: usize,
}

impl TestGrid {
    pub fn len(&self) -> usize {
        self.truth.len() / self.fields.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uniform grid at the training-sample resolution, or the tabulated
/// reference for KdV.
pub fn test_grid(problem: &PdeProblem) -> Result<TestGrid> {
    let d = problem.domain.dim();
    if problem.equation == Equation::Kdv && problem.analytic.is_none() {
        let table = kdv::load_or_solve(problem.reference_cache.as_deref(), &kdv::KdvParams::default())?;
        let mut points = Vec::with_capacity(table.u.len() * 2);
        let mut truth = Vec::with_capacity(table.u.len());
        for (ix, x) in table.x.iter().enumerate() {
            for (it, t) in table.t.iter().enumerate() {
                points.extend([*x, *t]);
                truth.push(table.at(ix, it));
            }
        }
        return Ok(TestGrid {
            points,
            truth,
            fields: 1,
        });
    }
    if problem.analytic.is_none() {
        return Err(Error::Unsupported(format!("{} has no ground truth", problem.name)));
    }
    let counts = match &problem.defaults.grid {
        TrainingGrid::Uniform(c) => c.clone(),
        g => g.uniform_counts(d),
    };
    let points = uniform_grid(&problem.domain, &counts)?;
    let mut truth = Vec::new();
    for p in points.chunks(d) {
        truth.extend(exact_solution(problem, p)?);
    }
    Ok(TestGrid {
        points,
        truth,
        fields: problem.fields.len(),
    })
}

/// Metric over `[point][field]` predictions and truths with `fields`
/// columns each.
pub fn metric_mse(metric: MseMetric, pred: &[f64], truth: &[f64], fields: usize) -> Result<f64> {
    if pred.len() != truth.len() || fields == 0 || pred.len() % fields != 0 || pred.is_empty() {
        return usage("prediction and truth shapes differ");
    }
    let n = (pred.len() / fields) as f64;
    let rows = pred.chunks(fields).zip(truth.chunks(fields));
    Ok(match metric {
        MseMetric::Scalar => rows.map(|(p, t)| (p[0] - t[0]).powi(2)).sum::<f64>() / n,
        MseMetric::VelocityComponents => {
            if fields < 2 {
                return usage("velocity metric needs two fields");
            }
            rows.map(|(p, t)| (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2)).sum::<f64>() / (2.0 * n)
        }
        MseMetric::VelocityMagnitude => {
            if fields < 2 {
                return usage("velocity metric needs two fields");
            }
            rows.map(|(p, t)| (p[0].hypot(p[1]) - t[0].hypot(t[1])).powi(2)).sum::<f64>() / n
        }
    })
}

pub fn evaluate_mse(network: &Network, params: &[f64], problem: &PdeProblem, grid: &TestGrid) -> Result<f64> {
    let out = network.forward_batch(params, &grid.points)?;
    let m = network.output_count();
    let f = grid.fields;
    if m < f {
        return usage("network has fewer outputs than the test grid has fields");
    }
    let pred: Vec<f64> = out.chunks(m).flat_map(|r| r[..f].to_vec()).collect();
    metric_mse(problem.metric, &pred, &grid.truth, f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Dense,
    Sparse,
}

/// Noise-free observations of the velocity (or the single field).
pub fn sample_observations(problem: &PdeProblem, scenario: Scenario, rng: &mut Rng) -> Result<Observations> {
    if problem.analytic.is_none() {
        return Err(Error::Unsupported(format!("{} has no ground truth", problem.name)));
    }
    let dom = &problem.domain;
    let d = dom.dim();
    let fields: Vec<usize> = (0..problem.fields.len().min(2)).collect();
    let points = match scenario {
        Scenario::Dense => test_grid(problem)?.points,
        Scenario::Sparse => match problem.equation {
            Equation::Wave => {
                // x uniform, t with density ∝ t
                let t = dom.time.expect("wave has a time axis");
                let mut pts = Vec::with_capacity(200 * d);
                for _ in 0..200 {
                    let x = uniform(rng, dom.lower[0], dom.upper[0]);
                    let s = uniform(rng, 0.0, 1.0).sqrt();
                    let mut p = vec![x; d];
                    p[t] = dom.lower[t] + dom.extent(t) * s;
                    pts.extend(p);
                }
                pts
            }
            Equation::NavierStokesTransient => (0..600)
                .flat_map(|_| (0..d).map(|k| uniform(rng, dom.lower[k], dom.upper[k])).collect::<Vec<_>>())
                .collect(),
            _ => {
                return Err(Error::Unsupported(format!(
                    "no sparse observation scenario for {}",
                    problem.name
                )))
            }
        },
    };
    let mut values = Vec::with_capacity(points.len() / d * fields.len());
    for p in points.chunks(d) {
        let all = exact_solution(problem, p)?;
        values.extend(fields.iter().map(|&f| all[f]));
    }
    Ok(Observations { points, fields, values })
}
