//! Experiment configuration: TOML documents, shipped presets and the
//! iteration-count scale.
//!
//! ```toml
//! problem = "wave"            # catalogue name or alias
//! variant = "sf"              # standard | sf | ff | rf | siren
//! architecture = "(x,t)-64-50-50-50-(u)"
//! sigma = 2.5
//! lambda = 180.0
//! seeds = [0, 1, 2]
//! iterations = 200000         # paper-scale count; see `scale`
//! learning_rate = 5e-3
//! mode = "forward"            # forward | inverse-dense | inverse-sparse
//! scale = "paper"             # paper | desk
//! eval_every = 1000
//! out = "results/wave"
//!
//! [sweep]                     # optional
//! axis = "sigma"              # sigma | lambda
//! min = 0.1
//! max = 10.0
//! count = 25
//! log = true
//! ```
//!
//! Every key except `problem` falls back to the problem's catalogue default.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sinpinn::network::Variant;
use sinpinn::pde::{problem_by_name, PdeProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    #[default]
    Forward,
    InverseDense,
    InverseSparse,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Forward => "forward",
            RunMode::InverseDense => "inverse-dense",
            RunMode::InverseSparse => "inverse-sparse",
        })
    }
}

impl FromStr for RunMode {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(RunMode::Forward),
            "inverse-dense" => Ok(RunMode::InverseDense),
            "inverse-sparse" => Ok(RunMode::InverseSparse),
            _ => bail!("unknown mode {s:?} (forward, inverse-dense, inverse-sparse)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Paper,
    Desk,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Paper => "paper",
            Scale::Desk => "desk",
        })
    }
}

impl FromStr for Scale {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            _ => bail!("unknown scale {s:?} (paper, desk)"),
        }
    }
}

impl Scale {
    /// Desk-scale iteration count for a problem whose full count is `paper`.
    pub fn iterations(self, problem: &str, paper: usize) -> usize {
        match self {
            Scale::Paper => paper,
            Scale::Desk => match problem {
                "convdiff" | "kdv" => 20_000,
                "helmholtz" | "wave" => 50_000,
                "taylor-green" | "cavity" => 20_000,
                _ => paper,
            }
            .min(paper),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Sigma,
    Lambda,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Sigma => "sigma",
            Axis::Lambda => "lambda",
        })
    }
}

impl FromStr for Axis {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma" => Ok(Axis::Sigma),
            "lambda" => Ok(Axis::Lambda),
            _ => bail!("unknown sweep axis {s:?} (sigma, lambda)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub min: f64,
    pub max: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_true")]
    pub log: bool,
}

fn default_count() -> usize {
    25
}

fn default_true() -> bool {
    true
}

impl SweepSpec {
    /// The ranges searched for each axis: σ in [0.1, 10], λ in [1, 1e6].
    pub fn standard(axis: Axis) -> Self {
        let (min, max) = match axis {
            Axis::Sigma => (0.1, 10.0),
            Axis::Lambda => (1.0, 1e6),
        };
        SweepSpec {
            axis,
            min,
            max,
            count: 25,
            log: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            bail!("sweep count must be at least 1");
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            bail!("sweep range [{}, {}] is not a finite interval", self.min, self.max);
        }
        match self.axis {
            Axis::Sigma if self.min <= 0.0 => bail!("σ range must lie in (0, ∞)"),
            Axis::Lambda if self.min < 1.0 => bail!("λ range must lie in [1, ∞)"),
            _ => Ok(()),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.log {
            log_grid(self.min, self.max, self.count)
        } else if self.count == 1 {
            vec![self.min]
        } else {
            let step = (self.max - self.min) / (self.count - 1) as f64;
            (0..self.count)
                .map(|i| if i + 1 == self.count { self.max } else { self.min + step * i as f64 })
                .collect()
        }
    }
}

/// `count` log-uniform values from `lo` to `hi`, both endpoints exact.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| match i {
                    0 => lo,
                    i if i + 1 == count => hi,
                    i => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

/// Configuration file contents; unset keys take problem defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: Option<String>,
    pub variant: Option<String>,
    pub architecture: Option<String>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub iterations: Option<usize>,
    pub learning_rate: Option<f64>,
    pub mode: Option<RunMode>,
    pub scale: Option<Scale>,
    pub eval_every: Option<usize>,
    pub out: Option<PathBuf>,
    pub sweep: Option<SweepSpec>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Keys set in `other` replace ours.
    pub fn overlay(mut self, other: ConfigFile) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$(if other.$f.is_some() { self.$f = other.$f; })*};
        }
        take!(problem, variant, architecture, sigma, lambda, seeds, iterations, learning_rate, mode, scale, eval_every, out, sweep);
        self
    }
}

pub const PRESETS: [(&str, &str); 6] = [
    ("convdiff", include_str!("../presets/convdiff.toml")),
    ("cavity", include_str!("../presets/cavity.toml")),
    ("wave1d", include_str!("../presets/wave1d.toml")),
    ("taylor-green", include_str!("../presets/taylor-green.toml")),
    ("kdv", include_str!("../presets/kdv.toml")),
    ("helmholtz2d", include_str!("../presets/helmholtz2d.toml")),
];

pub fn preset(name: &str) -> Result<ConfigFile> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            anyhow!("unknown preset {name:?} (available: {})", names.join(", "))
        })?;
    ConfigFile::parse(text).with_context(|| format!("preset {name}"))
}

/// Fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: String,
    pub variant: Variant,
    pub architecture: String,
    pub sigma: f64,
    pub lambda: f64,
    pub seeds: Vec<u64>,
    /// Iteration count after scaling.
    pub iterations: usize,
    pub learning_rate: f64,
    pub mode: RunMode,
    pub scale: Scale,
    pub eval_every: usize,
    pub out: PathBuf,
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    /// Fills unset keys from the problem catalogue and validates.
    ///
    /// `iterations` is a paper-scale count and is reduced according to
    /// `scale`.
    pub fn resolve(file: ConfigFile) -> Result<Self> {
        let name = file.problem.ok_or_else(|| anyhow!("no problem given"))?;
        let problem = problem_by_name(&name)?;
        let d = &problem.defaults;
        let variant: Variant = file.variant.as_deref().unwrap_or("sf").parse()?;
        let scale = file.scale.unwrap_or_default();
        let iterations = scale.iterations(&problem.name, file.iterations.unwrap_or(d.iterations));
        let cfg = ExperimentConfig {
            problem: problem.name.clone(),
            variant,
            architecture: file.architecture.unwrap_or_else(|| d.architecture.clone()),
            sigma: file.sigma.unwrap_or(d.sigma),
            lambda: file.lambda.unwrap_or(d.lambda),
            seeds: file.seeds.unwrap_or_else(|| vec![0]),
            iterations,
            learning_rate: file.learning_rate.unwrap_or(d.learning_rate),
            mode: file.mode.unwrap_or_default(),
            scale,
            eval_every: file.eval_every.unwrap_or(1000),
            out: file.out.unwrap_or_else(|| PathBuf::from("results").join(&problem.name)),
            sweep: file.sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            bail!("σ must be positive, got {}", self.sigma);
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            bail!("λ must be positive, got {}", self.lambda);
        }
        if !(self.learning_rate > 0.0) {
            bail!("learning rate must be positive");
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        sinpinn::network::NetworkConfig::for_variant(&self.architecture, self.variant, Some(self.sigma))?;
        Ok(())
    }

    /// The catalogue problem; a numerically computed reference is cached
    /// next to the results.
    pub fn problem(&self) -> Result<PdeProblem> {
        let mut p = problem_by_name(&self.problem)?;
        if p.analytic.is_none() && p.has_ground_truth() {
            p.reference_cache = Some(self.reference_cache());
        }
        Ok(p)
    }

    pub fn reference_cache(&self) -> PathBuf {
        self.out.join(format!("{}_reference.csv", self.problem))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve_to_catalogue_defaults() {
        for (name, _) in PRESETS {
            let cfg = ExperimentConfig::resolve(preset(name).unwrap()).unwrap();
            let p = cfg.problem().unwrap();
            assert_eq!(cfg.architecture, p.defaults.architecture, "{name}");
            assert_eq!(cfg.iterations, p.defaults.iterations, "{name}");
            assert_eq!(cfg.learning_rate, p.defaults.learning_rate, "{name}");
        }
        let c = ExperimentConfig::resolve(preset("convdiff").unwrap()).unwrap();
        assert_eq!((c.sigma, c.lambda), (0.5, 500.0));
    }

    #[test]
    fn desk_scale_shrinks_iterations() {
        let mut f = preset("wave1d").unwrap();
        f.scale = Some(Scale::Desk);
        assert_eq!(ExperimentConfig::resolve(f).unwrap().iterations, 50_000);
        let f = ConfigFile {
            problem: Some("convdiff".into()),
            scale: Some(Scale::Desk),
            ..Default::default()
        };
        assert_eq!(ExperimentConfig::resolve(f).unwrap().iterations, 20_000);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.1, 10.0, 25);
        assert_eq!(g.len(), 25);
        assert_eq!((g[0], g[24]), (0.1, 10.0));
        assert!((g[12] - 1.0).abs() < 1e-12);
        let r = g[1] / g[0];
        for w in g.windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-9);
        }
        let l = SweepSpec::standard(Axis::Lambda).values();
        assert_eq!((l[0], l[24]), (1.0, 1e6));
        assert_eq!(log_grid(3.0, 7.0, 1), vec![3.0]);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            "problem = \"nope\"",
            "problem = \"wave\"\nvariant = \"cnn\"",
            "problem = \"wave\"\nsigma = -1.0",
            "problem = \"wave\"\nseeds = []",
            "problem = \"wave\"\n[sweep]\naxis = \"lambda\"\nmin = 0.5\nmax = 10.0",
            "problem = \"wave\"\n[sweep]\naxis = \"sigma\"\nmin = 0.1\nmax = 10.0\ncount = 0",
        ];
        for text in bad {
            let r = ConfigFile::parse(text).and_then(ExperimentConfig::resolve);
            assert!(r.is_err(), "{text}");
        }
        assert!(ConfigFile::parse("problem = \"wave\"\nbogus = 1").is_err());
    }
}
