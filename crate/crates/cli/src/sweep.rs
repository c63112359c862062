//! Multi-seed runs and σ/λ sweeps on a rayon worker pool.

use std::time::Instant;

use anyhow::{bail, Result};
use rayon::prelude::*;
use sinpinn::pde::{kdv, Equation};

use crate::config::{Axis, ExperimentConfig};
use crate::runner::{failed_row, run_single, RunSpec};
use crate::summary::{self, CellRow, SummaryRow, CELLS_FILE, SUMMARY_FILE};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SummaryRow>,
    pub cells: Vec<CellRow>,
}

impl SweepResult {
    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| r.status != "completed")
    }
}

/// Every (value, seed) cell of the experiment, values outermost.
pub fn plan(cfg: &ExperimentConfig) -> Vec<RunSpec> {
    let values: Vec<(f64, f64)> = match &cfg.sweep {
        None => vec![(cfg.sigma, cfg.lambda)],
        Some(s) => s
            .values()
            .into_iter()
            .map(|v| match s.axis {
                Axis::Sigma => (v, cfg.lambda),
                Axis::Lambda => (cfg.sigma, v),
            })
            .collect(),
    };
    values
        .into_iter()
        .flat_map(|(sigma, lambda)| cfg.seeds.iter().map(move |&seed| RunSpec { sigma, lambda, seed }))
        .collect()
}

/// Solves (or loads) a numerical reference once, before the workers start,
/// so that runs only ever read the cache.
pub fn prepare_reference(cfg: &ExperimentConfig) -> Result<()> {
    let problem = cfg.problem()?;
    if let (Equation::Kdv, Some(cache)) = (problem.equation, &problem.reference_cache) {
        std::fs::create_dir_all(&cfg.out)?;
        kdv::load_or_solve(Some(cache), &kdv::KdvParams::default())?;
    }
    Ok(())
}

/// Runs every planned cell, keeping going past individual failures, then
/// writes `summary.csv` and `cells.csv` to `cfg.out` and re-checks the
/// aggregation against the file just written.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let jobs = plan(cfg);
    prepare_reference(cfg)?;
    log::info!("{} runs planned for {}", jobs.len(), cfg.problem);
    let rows: Vec<SummaryRow> = jobs
        .par_iter()
        .map(|spec| {
            let start = Instant::now();
            run_single(cfg, spec).unwrap_or_else(|e| {
                log::error!("run σ={} λ={} seed={} failed: {e:#}", spec.sigma, spec.lambda, spec.seed);
                failed_row(cfg, spec, start.elapsed().as_secs_f64())
            })
        })
        .collect();
    let cells = summary::aggregate(&rows);

    let bytes = summary::write_rows(&rows)?;
    summary::save(&cfg.out.join(SUMMARY_FILE), &bytes)?;
    summary::save(&cfg.out.join(CELLS_FILE), &summary::write_cells(&cells)?)?;
    let reread = summary::load_rows(&cfg.out.join(SUMMARY_FILE))?;
    if summary::write_rows(&reread)? != bytes {
        bail!("summary CSV does not round-trip");
    }
    summary::verify_aggregation(&reread, &cells)?;
    Ok(SweepResult { rows, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, ConfigFile, SweepSpec};

    #[test]
    fn plan_covers_values_times_seeds() {
        let mut f = preset("wave1d").unwrap();
        f.seeds = Some(vec![3, 4]);
        f.sweep = Some(SweepSpec::standard(Axis::Lambda));
        let cfg = ExperimentConfig::resolve(f).unwrap();
        let p = plan(&cfg);
        assert_eq!(p.len(), 50);
        assert_eq!((p[0].lambda, p[0].seed, p[1].seed), (1.0, 3, 4));
        assert_eq!(p[49].lambda, 1e6);
        assert!(p.iter().all(|s| s.sigma == 1.0));
    }

    #[test]
    fn count_one_is_a_single_run_per_seed() {
        let dir = tempfile::tempdir().unwrap();
        let f = preset("convdiff").unwrap().overlay(ConfigFile {
            architecture: Some("(x)-6-4-(u)".into()),
            iterations: Some(3),
            seeds: Some(vec![0, 1]),
            out: Some(dir.path().to_path_buf()),
            sweep: Some(SweepSpec {
                axis: Axis::Sigma,
                min: 0.7,
                max: 9.0,
                count: 1,
                log: true,
            }),
            ..Default::default()
        });
        let cfg = ExperimentConfig::resolve(f).unwrap();
        let r = run_sweep(&cfg).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.cells.len(), 1);
        assert!(r.rows.iter().all(|row| row.sigma == 0.7));
        assert!(dir.path().join(SUMMARY_FILE).exists());
    }
}
