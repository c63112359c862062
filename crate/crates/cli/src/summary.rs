//! Summary rows, best-per-cell aggregation and their CSV files.
//!
//! Column order is fixed:
//! `run_id, problem, variant, sigma, lambda, seed, scale, iters, mse,
//! loss_pde, loss_ic, loss_bc, loss_data, physics_estimate, wall_seconds,
//! status`. Numbers are written in Rust's shortest round-trip form, `NaN`
//! marks an unavailable value and `physics_estimate` is empty for forward
//! runs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const CELLS_FILE: &str = "cells.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub problem: String,
    pub variant: String,
    pub sigma: f64,
    pub lambda: f64,
    pub seed: u64,
    pub scale: String,
    pub iters: usize,
    pub mse: f64,
    pub loss_pde: f64,
    pub loss_ic: f64,
    pub loss_bc: f64,
    pub loss_data: f64,
    pub physics_estimate: Option<f64>,
    pub wall_seconds: f64,
    /// `completed`, `diverged` or `failed`.
    pub status: String,
}

impl SummaryRow {
    pub fn same_numbers(&self, other: &SummaryRow) -> bool {
        let a = SummaryRow {
            wall_seconds: 0.0,
            ..self.clone()
        };
        let b = SummaryRow {
            wall_seconds: 0.0,
            ..other.clone()
        };
        write_rows(&[a]).ok() == write_rows(&[b]).ok()
    }
}

/// Best MSE over the seeds of one (problem, variant, σ, λ) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub problem: String,
    pub variant: String,
    pub sigma: f64,
    pub lambda: f64,
    pub runs: usize,
    pub best_mse: f64,
    pub best_run: String,
}

fn to_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

fn from_bytes<T: for<'de> Deserialize<'de>>(bytes: &[u8], header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().from_reader(bytes);
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        bail!("unexpected columns {found:?}");
    }
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

pub const SUMMARY_COLUMNS: [&str; 16] = [
    "run_id",
    "problem",
    "variant",
    "sigma",
    "lambda",
    "seed",
    "scale",
    "iters",
    "mse",
    "loss_pde",
    "loss_ic",
    "loss_bc",
    "loss_data",
    "physics_estimate",
    "wall_seconds",
    "status",
];

pub const CELL_COLUMNS: [&str; 7] = ["problem", "variant", "sigma", "lambda", "runs", "best_mse", "best_run"];

pub fn write_rows(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    to_bytes(rows, &SUMMARY_COLUMNS)
}

pub fn read_rows(bytes: &[u8]) -> Result<Vec<SummaryRow>> {
    from_bytes(bytes, &SUMMARY_COLUMNS)
}

pub fn write_cells(cells: &[CellRow]) -> Result<Vec<u8>> {
    to_bytes(cells, &CELL_COLUMNS)
}

pub fn read_cells(bytes: &[u8]) -> Result<Vec<CellRow>> {
    from_bytes(bytes, &CELL_COLUMNS)
}

pub fn load_rows(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .with_context(|| format!("reading {}", path.display()))?;
    read_rows(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn save(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .with_context(|| format!("writing {}", path.display()))
}

/// One row per distinct (problem, variant, σ, λ), in first-seen order.
/// Non-finite MSEs never win; a cell without any finite MSE reports NaN.
pub fn aggregate(rows: &[SummaryRow]) -> Vec<CellRow> {
    let mut order = Vec::new();
    let mut cells: BTreeMap<usize, CellRow> = BTreeMap::new();
    let key = |r: &SummaryRow| (r.problem.clone(), r.variant.clone(), r.sigma.to_bits(), r.lambda.to_bits());
    for r in rows {
        let k = key(r);
        let idx = match order.iter().position(|o| *o == k) {
            Some(i) => i,
            None => {
                order.push(k);
                order.len() - 1
            }
        };
        let cell = cells.entry(idx).or_insert_with(|| CellRow {
            problem: r.problem.clone(),
            variant: r.variant.clone(),
            sigma: r.sigma,
            lambda: r.lambda,
            runs: 0,
            best_mse: f64::NAN,
            best_run: String::new(),
        });
        cell.runs += 1;
        if r.mse.is_finite() && !(cell.best_mse <= r.mse) {
            cell.best_mse = r.mse;
            cell.best_run = r.run_id.clone();
        }
    }
    cells.into_values().collect()
}

/// Re-derives `cells` from `rows` and checks every best equals the minimum
/// over its member rows.
pub fn verify_aggregation(rows: &[SummaryRow], cells: &[CellRow]) -> Result<()> {
    for c in cells {
        let min = rows
            .iter()
            .filter(|r| r.problem == c.problem && r.variant == c.variant && r.sigma == c.sigma && r.lambda == c.lambda)
            .map(|r| r.mse)
            .filter(|m| m.is_finite())
            .fold(f64::NAN, f64::min);
        let same = (min.is_nan() && c.best_mse.is_nan()) || min == c.best_mse;
        if !same {
            bail!(
                "cell {} {} σ={} λ={}: best {} but member minimum {}",
                c.problem,
                c.variant,
                c.sigma,
                c.lambda,
                c.best_mse,
                min
            );
        }
    }
    if write_cells(cells)? != write_cells(&aggregate(rows))? {
        bail!("aggregate does not match a fresh aggregation of the rows");
    }
    Ok(())
}
