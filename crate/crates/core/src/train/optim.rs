//! ADAM and the reduce-on-plateau learning-rate schedule.

use crate::error::{usage, Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One bias-corrected ADAM update of the entries where `trainable` is set.
pub fn adam_step(
    params: &mut [f64],
    gradient: &[f64],
    trainable: &[bool],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let n = params.len();
    if gradient.len() != n || trainable.len() != n || state.m.len() != n || state.v.len() != n {
        return usage("optimizer state does not match the parameter count");
    }
    if !(lr > 0.0) {
        return usage(format!("learning rate must be positive, got {lr}"));
    }
    if let Some(i) = (0..n).find(|&i| trainable[i] && !gradient[i].is_finite()) {
        return Err(Error::Divergence(format!(
            "non-finite gradient {} at parameter {i}",
            gradient[i]
        )));
    }
    state.step += 1;
    let c1 = 1.0 - BETA1.powf(state.step as f64);
    let c2 = 1.0 - BETA2.powf(state.step as f64);
    for i in 0..n {
        if !trainable[i] {
            continue;
        }
        let g = gradient[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauConfig {
    /// Evaluations without sufficient improvement before decaying.
    pub patience: usize,
    pub decay: f64,
    /// Relative improvement of the best loss that resets the wait.
    pub threshold: f64,
    pub min_lr: f64,
    /// Consecutive losses averaged into one plateau check. Per-batch losses
    /// are noisy; comparing single evaluations against the best one seen
    /// decays on sampling luck rather than on a stalled loss.
    pub window: usize,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            patience: 1000,
            decay: 0.5,
            threshold: 1e-3,
            min_lr: 1e-6,
            window: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauState {
    pub config: PlateauConfig,
    pub lr: f64,
    /// Best window mean so far.
    pub best: f64,
    /// Evaluations since `best` last improved.
    pub wait: usize,
    sum: f64,
    count: usize,
}

impl PlateauState {
    pub fn new(config: PlateauConfig, lr: f64) -> Self {
        PlateauState {
            config,
            lr,
            best: f64::INFINITY,
            wait: 0,
            sum: 0.0,
            count: 0,
        }
    }
}

/// Feeds the newest loss in `history` to the schedule and returns the
/// learning rate for the next step. The loss is compared in window means.
pub fn plateau_schedule(history: &[f64], state: &mut PlateauState) -> f64 {
    let Some(&loss) = history.last() else {
        return state.lr;
    };
    let c = state.config;
    state.sum += loss;
    state.count += 1;
    if state.count < c.window.max(1) {
        return state.lr;
    }
    let mean = state.sum / state.count as f64;
    let n = state.count;
    state.sum = 0.0;
    state.count = 0;
    if mean < state.best * (1.0 - c.threshold) || state.best == f64::INFINITY && mean.is_finite() {
        state.best = mean;
        state.wait = 0;
    } else {
        state.wait += n;
        if state.wait >= c.patience {
            state.lr = (state.lr * c.decay).max(c.min_lr);
            state.wait = 0;
        }
    }
    state.lr
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![0.3, -1.2];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &[true, true], &mut s, 1e-3).unwrap();
        assert_eq!(p, vec![0.3, -1.2]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m̂ = g, v̂ = g², so the step is α g / (|g| + ε)
        let g = [2.0, -0.5, 1e-3];
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &g, &[true; 3], &mut s, 0.01).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            let expected = -0.01 * gi / (gi.abs() + EPSILON);
            assert!((pi - expected).abs() < 1e-15, "{pi} vs {expected}");
        }
    }

    #[test]
    fn frozen_entries_and_nan() {
        let mut p = vec![1.0, 1.0];
        let mut s = AdamState::new(2);
        for _ in 0..100 {
            adam_step(&mut p, &[1.0, 1.0], &[false, true], &mut s, 1e-2).unwrap();
        }
        assert_eq!(p[0].to_bits(), 1.0f64.to_bits());
        assert!(p[1] < 1.0);
        assert!(matches!(
            adam_step(&mut p, &[0.0, f64::NAN], &[true, true], &mut s, 1e-2),
            Err(Error::Divergence(_))
        ));
        // a NaN on a frozen entry is ignored
        adam_step(&mut p, &[f64::NAN, 0.0], &[false, true], &mut s, 1e-2).unwrap();
    }

    #[test]
    fn plateau_examples() {
        let cfg = PlateauConfig {
            patience: 5,
            window: 1,
            ..Default::default()
        };
        let mut s = PlateauState::new(cfg, 1e-3);
        let mut h = Vec::new();
        for i in 0..50 {
            h.push(1.0 / (i + 1) as f64);
            assert_eq!(plateau_schedule(&h, &mut s), 1e-3);
        }
        let mut s = PlateauState::new(cfg, 1e-3);
        let mut h = vec![];
        let lrs: Vec<f64> = (0..6)
            .map(|_| {
                h.push(2.0);
                plateau_schedule(&h, &mut s)
            })
            .collect();
        assert_eq!(lrs[..5], [1e-3; 5]);
        assert_eq!(lrs[5], 5e-4);
        let mut s = PlateauState::new(cfg, 1e-6);
        for _ in 0..20 {
            h.push(2.0);
            assert_eq!(plateau_schedule(&h, &mut s), 1e-6);
        }
    }

    #[test]
    fn plateau_ignores_batch_noise() {
        // a steadily falling loss with 10% multiplicative Gaussian noise
        let mut rng = crate::rng::stream(3, 0);
        let noise: Vec<f64> = (0..5000).map(|_| 1.0 + crate::rng::normal(&mut rng, 0.1)).collect();
        let noisy = |i: usize| (1.0 - 2e-5 * i as f64) * noise[i];
        let mut s = PlateauState::new(PlateauConfig::default(), 5e-3);
        let mut h = Vec::new();
        for i in 0..5000 {
            h.push(noisy(i));
            plateau_schedule(&h, &mut s);
        }
        assert_eq!(s.lr, 5e-3);
        let mut single = PlateauState::new(
            PlateauConfig {
                window: 1,
                ..Default::default()
            },
            5e-3,
        );
        let mut h = Vec::new();
        for i in 0..5000 {
            h.push(noisy(i));
            plateau_schedule(&h, &mut single);
        }
        assert!(single.lr < 5e-3);
        // a flat loss still decays once per patience
        let mut s = PlateauState::new(PlateauConfig::default(), 5e-3);
        for _ in 0..2100 {
            h.push(1.0);
            plateau_schedule(&h, &mut s);
        }
        assert_eq!(s.lr, 1.25e-3);
    }
}
