//! Independent oracles: a plain loop-based MLP and Richardson-extrapolated
//! finite differences.

#![allow(dead_code)]

pub mod suite;

use std::f64::consts::TAU;

use sinpinn::jets::Activation;
use sinpinn::network::{FeatureMapKind, NetworkConfig};

fn act(f: Activation, z: f64) -> f64 {
    match f {
        Activation::Tanh => z.tanh(),
        Activation::Sin => z.sin(),
        Activation::Cos => z.cos(),
        Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        Activation::Exp => z.exp(),
    }
}

struct Reader<'a> {
    params: &'a [f64],
    at: usize,
}

impl Reader<'_> {
    /// `W x + b` with `W` stored row-major `[out][in]`, followed by `b`.
    fn dense(&mut self, x: &[f64], out: usize) -> Vec<f64> {
        let n = x.len();
        let w = &self.params[self.at..self.at + out * n];
        let b = &self.params[self.at + out * n..self.at + out * n + out];
        self.at += out * n + out;
        (0..out)
            .map(|i| b[i] + (0..n).map(|j| w[i * n + j] * x[j]).sum::<f64>())
            .collect()
    }
}

/// Outputs at `x`, in declaration order.
pub fn naive_forward(cfg: &NetworkConfig, params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = Reader { params, at: 0 };
    let mut h: Vec<f64> = match cfg.feature_map {
        FeatureMapKind::NoneDirect => x.to_vec(),
        FeatureMapKind::StandardDense => r.dense(x, cfg.feature_width).into_iter().map(f64::tanh).collect(),
        FeatureMapKind::Sinusoidal => r
            .dense(x, cfg.feature_width)
            .into_iter()
            .map(|z| (TAU * z).sin())
            .collect(),
        FeatureMapKind::FourierPairs | FeatureMapKind::RandomFrozen => {
            let z = r.dense(x, cfg.feature_width / 2);
            let mut v: Vec<f64> = z.iter().map(|z| (TAU * z).sin()).collect();
            v.extend(z.iter().map(|z| (TAU * z).cos()));
            v
        }
    };
    for &w in &cfg.trunk {
        h = r.dense(&h, w).into_iter().map(|z| act(cfg.activation, z)).collect();
    }
    let mut out = Vec::new();
    for b in &cfg.branches {
        let mut g = h.clone();
        for &w in &b.hidden {
            g = r.dense(&g, w).into_iter().map(|z| act(cfg.activation, z)).collect();
        }
        out.extend(r.dense(&g, b.outputs.len()));
    }
    out
}

fn central(f: &dyn Fn(f64) -> f64, x: f64, order: usize, h: f64) -> f64 {
    match order {
        0 => f(x),
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        3 => (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h),
        _ => panic!("order {order} not supported"),
    }
}

/// Central difference of the given order with two Richardson levels
/// (error `O(h⁶)`; every stencil here has an even error expansion).
pub fn fd_derivative(f: &dyn Fn(f64) -> f64, x: f64, order: usize, h: f64) -> f64 {
    let d: Vec<f64> = (0..3).map(|k| central(f, x, order, h / (1 << k) as f64)).collect();
    let r1 = [(4.0 * d[1] - d[0]) / 3.0, (4.0 * d[2] - d[1]) / 3.0];
    (16.0 * r1[1] - r1[0]) / 15.0
}

/// Richardson estimate at the step of a geometric ladder where two
/// successive estimates agree best; balances truncation against rounding
/// without knowing the function's frequency content.
pub fn fd_adaptive(f: &dyn Fn(f64) -> f64, x: f64, order: usize) -> f64 {
    let steps: Vec<f64> = (0..7).map(|k| 4e-2 / (1 << k) as f64).collect();
    let est: Vec<f64> = steps.iter().map(|&h| fd_derivative(f, x, order, h)).collect();
    let best = (0..est.len() - 1)
        .min_by(|&a, &b| {
            let da = (est[a] - est[a + 1]).abs();
            let db = (est[b] - est[b + 1]).abs();
            da.total_cmp(&db)
        })
        .unwrap();
    est[best + 1]
}

/// `|a - b| / max(|b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}
