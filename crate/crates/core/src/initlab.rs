//! Initial input-gradient statistics: Monte-Carlo estimates, closed-form
//! bounds and the frequency-coverage curve of sinusoidal features.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{config, usage, Error, Result};
use crate::jets::{Activation, JetLayout, Tape};
use crate::network::{Network, NetworkConfig};
use crate::rng::{normal, Rng};

pub const MIN_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub x: Vec<f64>,
    pub variance: Vec<f64>,
    /// Standard error of each variance estimate.
    pub se: Vec<f64>,
    /// NaN until attached with [`VarianceReport::with_bound`].
    pub bound: Vec<f64>,
    pub draws: usize,
}

impl VarianceReport {
    pub fn with_bound(mut self, f: impl Fn(f64) -> f64) -> Self {
        self.bound = self.x.iter().map(|&x| f(x)).collect();
        self
    }
}

/// Sample variance and its standard error `sqrt((m4 - m2²) / N)`.
pub fn variance_with_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for s in samples {
        let d = (s - mean).powi(2);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    (m2 * n / (n - 1.0), ((m4 - m2 * m2).max(0.0) / n).sqrt())
}

/// Variance of `∂û/∂x` over fresh initialisations of a single-input
/// network. `sigma` overrides the feature-layer initialisation.
pub fn mc_input_gradient_variance(
    cfg: &NetworkConfig,
    sigma: Option<f64>,
    xs: &[f64],
    draws: usize,
    rng: &mut Rng,
) -> Result<VarianceReport> {
    if draws < MIN_DRAWS {
        return config(format!("at least {MIN_DRAWS} draws needed, got {draws}"));
    }
    if cfg.input_dim() != 1 || xs.is_empty() {
        return usage("input-gradient variance needs one input and at least one x");
    }
    let mut cfg = cfg.clone();
    if let Some(s) = sigma {
        cfg.feature_init = crate::network::InitScheme::Normal(s);
    }
    let net = Network::new(cfg)?;
    let layout = JetLayout::single(0, 1)?;
    let mut samples = vec![Vec::with_capacity(draws); xs.len()];
    for _ in 0..draws {
        let params = net.init(rng)?;
        let tape = Tape::new(&params.values);
        let bound = net.bind(&tape)?;
        let input = tape.seed_inputs(xs, 1, &layout)?;
        let g = net.apply(&tape, &bound, input, &layout)?.deriv(0, 0, 1)?.value();
        for (s, v) in samples.iter_mut().zip(g) {
            s.push(v);
        }
    }
    let (variance, se) = samples.iter().map(|s| variance_with_se(s)).unzip();
    Ok(VarianceReport {
        x: xs.to_vec(),
        variance,
        se,
        bound: vec![f64::NAN; xs.len()],
        draws,
    })
}

/// `(2n/(n+1)) · (2/(n+1))`, the tanh-Xavier input-gradient variance bound.
pub fn bound_prop1(n: usize) -> f64 {
    let n = n as f64;
    2.0 * n / (n + 1.0) * 2.0 / (n + 1.0)
}

/// `(2n/(n+1)) · 2π²σ² · [1 + e^(-8π²σ²x²)(1 - 16π²σ²x²)]`.
pub fn bound_prop3(n: usize, sigma: f64, x: f64) -> f64 {
    let n = n as f64;
    let a = PI * PI * sigma * sigma * x * x;
    2.0 * n / (n + 1.0) * 2.0 * PI * PI * sigma * sigma * (1.0 + (-8.0 * a).exp() * (1.0 - 16.0 * a))
}

/// Upper bound on `E[w² sech⁴(wx)]`, `w ~ N(0, σ²)`, for `x ≠ 0`: twice
/// `(1/(σ√(2π))) · 1/(2|x|³)`.
pub fn tanh_integrand_bound(sigma: f64, x: f64) -> f64 {
    2.0 / (sigma * (2.0 * PI).sqrt()) / (2.0 * x.abs().powi(3))
}

pub const QUADRATURE_TOL: f64 = 1e-10;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    Some(
        adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
    )
}

/// Adaptive Simpson integral of `f` over `[a, b]`, pre-split into `panels`
/// so that narrow features are not stepped over.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> Result<f64> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + h * i as f64;
        let hi = if i + 1 == panels { b } else { lo + h };
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = simpson(lo, hi, fa, fm, fb);
        total += adaptive(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 40).ok_or_else(|| {
            Error::Oracle(format!("quadrature did not converge on [{lo}, {hi}]"))
        })?;
    }
    Ok(total)
}

/// `E[w² sech⁴(wx)]` for `w ~ N(0, σ²)` by quadrature of the even integrand
/// over `[0, 8σ]`.
pub fn expected_tanh_integrand(sigma: f64, x: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return config(format!("σ must be positive, got {sigma}"));
    }
    let c = 1.0 / (sigma * (2.0 * PI).sqrt());
    let f = move |w: f64| {
        let s = 1.0 / (w * x).cosh();
        let s2 = s * s;
        w * w * s2 * s2 * c * (-0.5 * (w / sigma).powi(2)).exp()
    };
    let upper = 8.0 * sigma;
    // panel width resolves both the Gaussian and the sech⁴ scale 1/|x|
    let scale = if x == 0.0 { sigma } else { sigma.min(1.0 / x.abs()) };
    let panels = ((upper / (0.25 * scale)).ceil() as usize).clamp(16, 1 << 16);
    Ok(2.0 * integrate(&f, 0.0, upper, panels, 0.5 * QUADRATURE_TOL)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Monte-Carlo `var(f'(u)) + E[f'(u)]² = E[f'(u)²]` for `u ~ N(0, var_u)`.
pub fn backward_variance_sim(f: Activation, var_u: f64, draws: usize, rng: &mut Rng) -> Result<Estimate> {
    if !(var_u > 0.0) || draws < 2 {
        return config("variance must be positive and draws at least 2");
    }
    let sd = var_u.sqrt();
    let samples: Vec<f64> = (0..draws)
        .map(|_| f.derivatives(normal(rng, sd))[1].powi(2))
        .collect();
    let n = draws as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(Estimate {
        value: mean,
        se: (var / n).sqrt(),
    })
}

/// Closed form of [`backward_variance_sim`] for sin: `(1 + e^(-2 var_u)) / 2`.
pub fn sin_backward_exact(var_u: f64) -> f64 {
    0.5 * (1.0 + (-2.0 * var_u).exp())
}

/// Probability that one `N(0, σ²)` weight lands within `rel_tol` of
/// `±target_w`, and that at least one of `n_features` does.
pub fn freq_coverage_probability(n_features: usize, sigma: f64, target_w: f64, rel_tol: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0) || !(rel_tol > 0.0 && rel_tol < 1.0) {
        return config("σ must be positive and the tolerance inside (0, 1)");
    }
    let z = Normal::new(0.0, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let (lo, hi) = (target_w.abs() * (1.0 - rel_tol), target_w.abs() * (1.0 + rel_tol));
    let single = 2.0 * (z.cdf(hi / sigma) - z.cdf(lo / sigma));
    let at_least_one = 1.0 - (1.0 - single).powi(n_features as i32);
    Ok((single, at_least_one))
}

/// One cell of a proposition table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropRow {
    pub table: String,
    pub n: usize,
    pub sigma: f64,
    pub x: f64,
    pub activation: String,
    pub empirical: f64,
    pub bound: f64,
    pub se: f64,
    pub draws: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Variant;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn prop1_values() {
        assert_eq!(bound_prop1(1), 1.0);
        assert_relative_eq!(bound_prop1(64), 128.0 / 65.0 * 2.0 / 65.0);
        assert!((bound_prop1(64) - 0.06059).abs() < 1e-5);
        assert!(bound_prop1(1_000_000) <= 4e-6);
    }

    #[test]
    fn prop3_values() {
        let k = 128.0 / 65.0;
        assert_relative_eq!(bound_prop3(64, 1.0, 0.0), k * 4.0 * PI * PI);
        assert_relative_eq!(bound_prop3(64, 1.0, 50.0), k * 2.0 * PI * PI);
        assert!((bound_prop3(64, 1.0, 0.5) - 38.87).abs() < 5e-3);
    }

    #[test]
    fn integrand_at_origin_is_second_moment() {
        for s in [0.5, 1.0, 3.0] {
            assert_relative_eq!(expected_tanh_integrand(s, 0.0).unwrap(), s * s, max_relative = 1e-9);
        }
        assert!(expected_tanh_integrand(0.0, 1.0).is_err());
    }

    #[test]
    fn coverage_examples() {
        let (s, a) = freq_coverage_probability(64, 3.0, 3.0, 0.1).unwrap();
        assert!((s - 0.0968).abs() < 1e-4);
        assert!((a - 0.998).abs() < 1e-3);
        let (s, a) = freq_coverage_probability(64, 0.01, 3.0, 0.1).unwrap();
        assert!(s < 1e-100 && a < 1e-100);
    }

    #[test]
    fn zero_weights_give_zero_variance() {
        let cfg = NetworkConfig::for_variant("(x)-8-(u)", Variant::Sf, None).unwrap();
        let mut cfg0 = cfg.clone();
        cfg0.init = crate::network::InitScheme::Normal(0.0);
        let r = mc_input_gradient_variance(&cfg0, Some(0.0), &[0.0, 0.5], 1000, &mut stream(1, 4)).unwrap();
        assert_eq!(r.variance, vec![0.0, 0.0]);
        assert!(mc_input_gradient_variance(&cfg, None, &[0.0], 999, &mut stream(1, 4)).is_err());
    }

    #[test]
    fn sin_backward_matches_closed_form() {
        let mut rng = stream(2, 4);
        for v in [0.01, 0.1, 1.0, 10.0] {
            let e = backward_variance_sim(Activation::Sin, v, 20_000, &mut rng).unwrap();
            assert!((e.value - sin_backward_exact(v)).abs() <= 3.0 * e.se.max(1e-12), "{v}: {e:?}");
        }
    }
}
