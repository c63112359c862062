//! Charts and a text table from a results directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sinpinn::train::HISTORY_HEADER;

use crate::summary::{self, SummaryRow, SUMMARY_FILE};
use crate::svg::{Chart, Series};

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Report {
    pub charts: Vec<PathBuf>,
    pub table: Option<PathBuf>,
    /// Inputs that were skipped, with the reason.
    pub warnings: Vec<String>,
}

const HISTORY_SERIES: [(&str, &str); 6] = [
    ("loss_total", "total"),
    ("loss_pde", "PDE"),
    ("loss_ic", "IC"),
    ("loss_bc", "BC"),
    ("loss_data", "data"),
    ("test_mse", "test MSE"),
];

pub fn history_chart(path: &Path, title: &str) -> Result<Chart> {
    let mut r = csv::ReaderBuilder::new()
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    if header.iter().ne(HISTORY_HEADER.split(',')) {
        bail!("{}: unexpected columns", path.display());
    }
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mut series: Vec<Series> = HISTORY_SERIES.iter().map(|(_, label)| Series::line(*label, vec![])).collect();
    for rec in r.records() {
        let rec = rec.with_context(|| format!("{}", path.display()))?;
        let it: f64 = rec[col("iteration")].parse().with_context(|| format!("{}: bad iteration", path.display()))?;
        for (s, (name, _)) in series.iter_mut().zip(HISTORY_SERIES) {
            let v: f64 = rec[col(name)].parse().with_context(|| format!("{}: bad {name}", path.display()))?;
            s.points.push((it, v));
        }
    }
    series.retain(|s| s.points.iter().any(|p| p.1 > 0.0 && p.1.is_finite()));
    Ok(Chart {
        title: title.into(),
        x_label: "iteration".into(),
        y_label: "loss".into(),
        log_x: false,
        log_y: true,
        series,
    })
}

/// Best MSE per (variant, axis value) for one problem, one series per
/// variant; `None` unless the axis takes at least two values.
pub fn mse_chart(rows: &[SummaryRow], problem: &str, sigma_axis: bool) -> Option<Chart> {
    let of = |r: &SummaryRow| if sigma_axis { r.sigma } else { r.lambda };
    let rows: Vec<&SummaryRow> = rows.iter().filter(|r| r.problem == problem).collect();
    let values: BTreeSet<u64> = rows.iter().map(|r| of(r).to_bits()).collect();
    if values.len() < 2 {
        return None;
    }
    let variants: Vec<String> = rows.iter().fold(Vec::new(), |mut v, r| {
        if !v.contains(&r.variant) {
            v.push(r.variant.clone());
        }
        v
    });
    let owned: Vec<SummaryRow> = rows.iter().map(|r| (*r).clone()).collect();
    let cells = summary::aggregate(&owned);
    let series = variants
        .into_iter()
        .map(|v| {
            let mut pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.variant == v)
                .map(|c| (if sigma_axis { c.sigma } else { c.lambda }, c.best_mse))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series::line(v, pts)
        })
        .collect();
    let axis = if sigma_axis { "σ" } else { "λ" };
    Some(Chart {
        title: format!("{problem}: best MSE vs {axis}"),
        x_label: axis.into(),
        y_label: "best MSE over seeds".into(),
        log_x: true,
        log_y: true,
        series,
    })
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.3e}")
    }
}

pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<48} {:>8} {:>10} {:>10} {:>6} {:>10} {:>10} {:>10} {:>9} {:>9}",
        "run_id", "variant", "sigma", "lambda", "seed", "mse", "loss_pde", "estimate", "seconds", "status"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<48} {:>8} {:>10} {:>10} {:>6} {:>10} {:>10} {:>10} {:>9.1} {:>9}",
            r.run_id,
            r.variant,
            r.sigma,
            r.lambda,
            r.seed,
            fmt(r.mse),
            fmt(r.loss_pde),
            r.physics_estimate.map_or("-".into(), |c| format!("{c:.6}")),
            r.wall_seconds,
            r.status
        );
    }
    s
}

fn write(path: PathBuf, text: &str, report: &mut Report) -> Result<()> {
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    report.charts.push(path);
    Ok(())
}

/// Renders every chart the results in `dir` support. Malformed inputs are
/// skipped with a warning; a directory with nothing usable is an error.
pub fn render_report(dir: &Path) -> Result<Report> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let mut report = Report::default();
    let warn = |report: &mut Report, msg: String| {
        log::warn!("{msg}");
        report.warnings.push(msg);
    };

    let summary_path = dir.join(SUMMARY_FILE);
    let rows = if summary_path.exists() {
        match summary::load_rows(&summary_path) {
            Ok(rows) => rows,
            Err(e) => {
                warn(&mut report, format!("skipping {}: {e:#}", summary_path.display()));
                Vec::new()
            }
        }
    } else {
        Vec::new()
    };
    let problems: Vec<String> = rows.iter().fold(Vec::new(), |mut v, r| {
        if !v.contains(&r.problem) {
            v.push(r.problem.clone());
        }
        v
    });
    for p in &problems {
        for (sigma_axis, tag) in [(true, "sigma"), (false, "lambda")] {
            if let Some(c) = mse_chart(&rows, p, sigma_axis) {
                write(dir.join(format!("mse_vs_{tag}_{p}.svg")), &c.render(), &mut report)?;
            }
        }
    }
    if !rows.is_empty() {
        let path = dir.join("summary.txt");
        fs::write(&path, summary_table(&rows))?;
        report.table = Some(path);
    }

    let runs = dir.join("runs");
    if runs.is_dir() {
        let mut ids: Vec<PathBuf> = fs::read_dir(&runs)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        ids.sort();
        for run in ids.into_iter().filter(|p| p.is_dir()) {
            let hist = run.join("history.csv");
            if !hist.exists() {
                continue;
            }
            let id = run.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            match history_chart(&hist, &id) {
                Ok(c) => write(run.join("loss_history.svg"), &c.render(), &mut report)?,
                Err(e) => warn(&mut report, format!("skipping {}: {e:#}", hist.display())),
            }
        }
    }
    if report.charts.is_empty() && report.table.is_none() {
        bail!("nothing to report in {}", dir.display());
    }
    Ok(report)
}
