//! Proposition-check suite: runs the initialisation statistics over a test
//! matrix and writes one CSV (plus an SVG chart) per table.
//!
//! All tables share the [`PropRow`] columns. `x` is the abscissa of the
//! table: the input point for `prop1`/`prop3`/`fig4`, `var(u)` for `fig3`
//! and the target frequency `|w|` for `fig11`. Unused numbers are `NaN`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use rayon::prelude::*;
use sinpinn::initlab::{
    backward_variance_sim, bound_prop1, bound_prop3, expected_tanh_integrand, freq_coverage_probability,
    mc_input_gradient_variance, sin_backward_exact, tanh_integrand_bound, PropRow,
};
use sinpinn::jets::Activation;
use sinpinn::network::{NetworkConfig, Variant};
use sinpinn::rng::{stream, Rng};

use crate::config::log_grid;
use crate::summary::save;
use crate::svg::{Chart, Series};

pub const PROP_COLUMNS: [&str; 9] = ["table", "n", "sigma", "x", "activation", "empirical", "bound", "se", "draws"];

#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Spec {
    pub widths: Vec<usize>,
    pub xs: Vec<f64>,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop3Spec {
    pub width: usize,
    pub sigmas: Vec<f64>,
    pub xs: Vec<f64>,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Spec {
    pub activations: Vec<Activation>,
    pub variances: Vec<f64>,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig4Spec {
    pub sigmas: Vec<f64>,
    pub xs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig11Spec {
    pub width: usize,
    pub target_w: f64,
    pub rel_tol: f64,
    pub sigmas: Vec<f64>,
}

/// Which tables to produce; `None` skips a table.
#[derive(Debug, Clone, PartialEq)]
pub struct PropMatrix {
    pub seed: u64,
    pub prop1: Option<Prop1Spec>,
    pub prop3: Option<Prop3Spec>,
    pub fig3: Option<Fig3Spec>,
    pub fig4: Option<Fig4Spec>,
    pub fig11: Option<Fig11Spec>,
}

impl Default for PropMatrix {
    fn default() -> Self {
        PropMatrix {
            seed: 0,
            prop1: Some(Prop1Spec {
                widths: vec![16, 64, 256],
                xs: vec![0.0, 0.5, 1.0],
                draws: 10_000,
            }),
            prop3: Some(Prop3Spec {
                width: 64,
                sigmas: vec![0.5, 1.0, 2.0],
                xs: vec![0.0, 0.3, 1.0],
                draws: 100_000,
            }),
            fig3: Some(Fig3Spec {
                activations: vec![Activation::Tanh, Activation::Sigmoid, Activation::Sin],
                variances: log_grid(1e-3, 10.0, 25),
                draws: 100_000,
            }),
            fig4: Some(Fig4Spec {
                sigmas: log_grid(0.1, 100.0, 31),
                xs: vec![0.25, 0.5, 1.0, 2.0],
            }),
            fig11: Some(Fig11Spec {
                width: 64,
                target_w: 3.0,
                rel_tol: 0.1,
                sigmas: log_grid(0.1, 10.0, 41),
            }),
        }
    }
}

impl PropMatrix {
    pub fn empty(seed: u64) -> Self {
        PropMatrix {
            seed,
            prop1: None,
            prop3: None,
            fig3: None,
            fig4: None,
            fig11: None,
        }
    }

    fn cells(&self) -> usize {
        let p1 = self.prop1.as_ref().map_or(0, |s| s.widths.len() * s.xs.len());
        let p3 = self.prop3.as_ref().map_or(0, |s| s.sigmas.len() * s.xs.len());
        let f3 = self.fig3.as_ref().map_or(0, |s| s.activations.len() * s.variances.len());
        let f4 = self.fig4.as_ref().map_or(0, |s| s.sigmas.len() * s.xs.len());
        let f11 = self.fig11.as_ref().map_or(0, |s| s.sigmas.len());
        p1 + p3 + f3 + f4 + f11
    }
}

/// Independent stream per (table, cell).
fn cell_rng(seed: u64, table: u64, cell: usize) -> Rng {
    stream(seed, (table << 32) | cell as u64)
}

fn row(table: &str, n: usize, sigma: f64, x: f64, activation: &str) -> PropRow {
    PropRow {
        table: table.into(),
        n,
        sigma,
        x,
        activation: activation.into(),
        empirical: f64::NAN,
        bound: f64::NAN,
        se: f64::NAN,
        draws: 0,
    }
}

pub fn prop1_rows(spec: &Prop1Spec, seed: u64) -> Result<Vec<PropRow>> {
    let tables: Vec<Vec<PropRow>> = spec
        .widths
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let cfg = NetworkConfig::for_variant(&format!("(x)-{n}-(u)"), Variant::Standard, None)?;
            let r = mc_input_gradient_variance(&cfg, None, &spec.xs, spec.draws, &mut cell_rng(seed, 1, i))?;
            Ok(r.x
                .iter()
                .enumerate()
                .map(|(k, &x)| PropRow {
                    empirical: r.variance[k],
                    bound: bound_prop1(n),
                    se: r.se[k],
                    draws: r.draws,
                    ..row("prop1", n, f64::NAN, x, "tanh")
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(tables.concat())
}

pub fn prop3_rows(spec: &Prop3Spec, seed: u64) -> Result<Vec<PropRow>> {
    let n = spec.width;
    let tables: Vec<Vec<PropRow>> = spec
        .sigmas
        .par_iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let cfg = NetworkConfig::for_variant(&format!("(x)-{n}-(u)"), Variant::Sf, Some(sigma))?;
            let r = mc_input_gradient_variance(&cfg, Some(sigma), &spec.xs, spec.draws, &mut cell_rng(seed, 3, i))?;
            Ok(r.x
                .iter()
                .enumerate()
                .map(|(k, &x)| PropRow {
                    empirical: r.variance[k],
                    bound: bound_prop3(n, sigma, x),
                    se: r.se[k],
                    draws: r.draws,
                    ..row("prop3", n, sigma, x, "sin")
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(tables.concat())
}

/// `bound` holds the closed form where one exists (sin).
pub fn fig3_rows(spec: &Fig3Spec, seed: u64) -> Result<Vec<PropRow>> {
    let cells: Vec<(Activation, f64)> = spec
        .activations
        .iter()
        .flat_map(|&a| spec.variances.iter().map(move |&v| (a, v)))
        .collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(i, &(a, v))| {
            let e = backward_variance_sim(a, v, spec.draws, &mut cell_rng(seed, 4, i))?;
            Ok(PropRow {
                empirical: e.value,
                se: e.se,
                bound: if a == Activation::Sin { sin_backward_exact(v) } else { f64::NAN },
                draws: spec.draws,
                ..row("fig3", 0, f64::NAN, v, &a.to_string())
            })
        })
        .collect()
}

/// Quadrature values of `E[w² sech⁴(wx)]` with their decay bound.
pub fn fig4_rows(spec: &Fig4Spec) -> Result<Vec<PropRow>> {
    let mut out = Vec::new();
    for &x in &spec.xs {
        for &sigma in &spec.sigmas {
            out.push(PropRow {
                empirical: expected_tanh_integrand(sigma, x)?,
                bound: if x == 0.0 { f64::NAN } else { tanh_integrand_bound(sigma, x) },
                se: 0.0,
                ..row("fig4", 0, sigma, x, "tanh")
            });
        }
    }
    Ok(out)
}

/// `empirical` is the probability that at least one of `width` features
/// lands in the band, `bound` the single-feature probability. The band is
/// named in the `activation` column.
pub fn fig11_rows(spec: &Fig11Spec) -> Result<Vec<PropRow>> {
    let band = format!("sin rel_tol={}", spec.rel_tol);
    spec.sigmas
        .iter()
        .map(|&sigma| {
            let (single, any) = freq_coverage_probability(spec.width, sigma, spec.target_w, spec.rel_tol)?;
            Ok(PropRow {
                empirical: any,
                bound: single,
                se: 0.0,
                ..row("fig11", spec.width, sigma, spec.target_w, &band)
            })
        })
        .collect()
}

pub fn write_prop_rows(rows: &[PropRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(PROP_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

pub fn read_prop_rows(bytes: &[u8]) -> Result<Vec<PropRow>> {
    let mut r = csv::ReaderBuilder::new().from_reader(bytes);
    if r.headers()?.iter().ne(PROP_COLUMNS) {
        bail!("unexpected columns in proposition table");
    }
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

fn group<K: PartialEq + Clone>(rows: &[PropRow], key: impl Fn(&PropRow) -> K) -> Vec<(K, Vec<&PropRow>)> {
    let mut out: Vec<(K, Vec<&PropRow>)> = Vec::new();
    for r in rows {
        let k = key(r);
        match out.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(r),
            None => out.push((k, vec![r])),
        }
    }
    out
}

fn chart_for(table: &str, rows: &[PropRow]) -> Chart {
    let mut series = Vec::new();
    let chart = |title: &str, x: &str, y: &str, log_x, log_y, series| Chart {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        log_x,
        log_y,
        series,
    };
    match table {
        "prop1" => {
            for (x, g) in group(rows, |r| r.x.to_bits()) {
                let x = f64::from_bits(x);
                series.push(Series::scatter(format!("x={x}"), g.iter().map(|r| (r.n as f64, r.empirical)).collect()));
            }
            let bound = group(rows, |r| r.n).into_iter().map(|(n, g)| (n as f64, g[0].bound)).collect();
            series.push(Series::line("bound", bound));
            chart("tanh-Xavier input-gradient variance", "width n", "var(du/dx)", true, true, series)
        }
        "prop3" => {
            for (x, g) in group(rows, |r| r.x.to_bits()) {
                let x = f64::from_bits(x);
                series.push(Series::scatter(format!("MC x={x}"), g.iter().map(|r| (r.sigma, r.empirical)).collect()));
                series.push(Series::line(format!("bound x={x}"), g.iter().map(|r| (r.sigma, r.bound)).collect()));
            }
            chart("sf input-gradient variance", "σ", "var(du/dx)", true, true, series)
        }
        "fig3" => {
            for (a, g) in group(rows, |r| r.activation.clone()) {
                series.push(Series::line(a, g.iter().map(|r| (r.x, r.empirical)).collect()));
            }
            chart("backward-pass gain", "var(u)", "var(f') + E[f']²", true, false, series)
        }
        "fig4" => {
            for (x, g) in group(rows, |r| r.x.to_bits()) {
                let x = f64::from_bits(x);
                series.push(Series::line(format!("x={x}"), g.iter().map(|r| (r.sigma, r.empirical)).collect()));
            }
            chart("E[w² sech⁴(wx)]", "σ", "expectation", true, true, series)
        }
        _ => {
            for (band, g) in group(rows, |r| r.activation.clone()) {
                series.push(Series::line(format!("at least one ({band})"), g.iter().map(|r| (r.sigma, r.empirical)).collect()));
                series.push(Series::line("single feature", g.iter().map(|r| (r.sigma, r.bound)).collect()));
            }
            chart("frequency coverage", "σ", "probability", true, false, series)
        }
    }
}

/// Runs every table in `matrix` and writes `<table>.csv` and `<table>.svg`
/// into `out`. Returns the CSV paths.
pub fn run_proposition_suite(matrix: &PropMatrix, out: &Path) -> Result<Vec<PathBuf>> {
    if matrix.cells() == 0 {
        bail!("nothing to run");
    }
    let mut tables: Vec<(&str, Vec<PropRow>)> = Vec::new();
    if let Some(s) = &matrix.prop1 {
        tables.push(("prop1", prop1_rows(s, matrix.seed)?));
    }
    if let Some(s) = &matrix.prop3 {
        tables.push(("prop3", prop3_rows(s, matrix.seed)?));
    }
    if let Some(s) = &matrix.fig3 {
        tables.push(("fig3", fig3_rows(s, matrix.seed)?));
    }
    if let Some(s) = &matrix.fig4 {
        tables.push(("fig4", fig4_rows(s)?));
    }
    if let Some(s) = &matrix.fig11 {
        tables.push(("fig11", fig11_rows(s)?));
    }
    let mut written = Vec::new();
    for (name, rows) in tables.into_iter().filter(|(_, r)| !r.is_empty()) {
        let path = out.join(format!("{name}.csv"));
        save(&path, &write_prop_rows(&rows)?)?;
        save(&out.join(format!("{name}.svg")), chart_for(name, &rows).render().as_bytes())?;
        log::info!("wrote {} ({} rows)", path.display(), rows.len());
        written.push(path);
    }
    Ok(written)
}
