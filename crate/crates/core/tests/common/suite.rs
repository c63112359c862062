//! Shared drivers for the derivative, gradient and residual oracle suites.

use rand::{Rng as _, RngCore};
use sinpinn::jets::Jet;
use sinpinn::network::{Network, NetworkConfig, ParameterSet, Variant};
use sinpinn::pde::{self, BatchComposition, JetFields, PdeProblem};
use sinpinn::rng::{stream, Rng};
use sinpinn::train::{attach_scalars, compute_loss, Batch, BatchSampler, LossSpec};

use super::{fd_adaptive, fd_derivative, naive_forward, rel_err};

pub struct Case {
    pub problem: PdeProblem,
    pub net: Network,
    pub params: ParameterSet,
}

pub fn random_case(rng: &mut Rng) -> Case {
    let problems = [pde::convdiff(), pde::wave(), pde::kdv_problem(), pde::helmholtz(), pde::taylor_green(), pde::cavity()];
    let problem = problems[rng.random_range(0..problems.len())].clone();
    let variant = Variant::ALL[rng.random_range(0..Variant::ALL.len())];
    let inputs = problem.domain.labels.join(",");
    let width = 2 * rng.random_range(2..5);
    let hidden: Vec<String> = (0..rng.random_range(1..3)).map(|_| rng.random_range(3..7).to_string()).collect();
    let outputs = if problem.fields.len() == 1 {
        format!("({})", problem.fields[0])
    } else {
        let b: Vec<String> = problem.fields.iter().map(|f| format!("4-({f})")).collect();
        format!("[{}]", b.join(","))
    };
    let arch = format!("({inputs})-{width}-{}-{outputs}", hidden.join("-"));
    let sigma = rng.random_range(0.3..1.0);
    let cfg = NetworkConfig::for_variant(&arch, variant, Some(sigma)).unwrap();
    let net = Network::new(cfg).unwrap();
    let mut params = net.init(&mut stream(rng.next_u64(), 1)).unwrap();
    // nonzero biases so every code path carries weight
    for l in net.layers() {
        for b in l.bias.clone() {
            params.values[b] = rng.random_range(-0.3..0.3);
        }
    }
    attach_scalars(&mut params, &problem);
    Case { problem, net, params }
}

pub fn random_point(problem: &PdeProblem, rng: &mut Rng) -> Vec<f64> {
    let d = &problem.domain;
    (0..d.dim()).map(|k| rng.random_range(d.lower[k]..d.upper[k])).collect()
}

/// Worst relative errors `[order 1, order 2, order 3]` over every input
/// direction and output at one random point.
pub fn input_derivative_errors(case: &Case, rng: &mut Rng) -> [f64; 3] {
    let x = random_point(&case.problem, rng);
    let cfg = case.net.config();
    let mut worst = [0.0f64; 3];
    for dim in 0..x.len() {
        let jets = case.net.forward_with_jets(&case.params.values, &x, dim, 3).unwrap();
        for (field, jet) in jets.iter().enumerate() {
            let f = |s: f64| {
                let mut p = x.clone();
                p[dim] = s;
                naive_forward(cfg, &case.params.values, &p)[field]
            };
            assert!((jet.value() - f(x[dim])).abs() <= 1e-12 * (1.0 + jet.value().abs()));
            for order in 1..=3 {
                let fd = fd_adaptive(&f, x[dim], order);
                worst[order - 1] = worst[order - 1].max(rel_err(jet.deriv(order), fd, 1e-3));
            }
        }
    }
    worst
}

pub fn small_batch(problem: &PdeProblem, rng: &mut Rng) -> Batch {
    let counts = BatchComposition { pde: 6, ic: 4, bc: 6, data: 5 };
    let mut s = BatchSampler::new(problem, true, rng).unwrap();
    s.draw(&counts, rng).unwrap()
}

/// Largest `|ad - fd| / max(|fd|, 1e-6 ‖fd‖∞)` over every parameter.
pub fn gradient_error(case: &Case, batch: &Batch) -> f64 {
    let spec = LossSpec {
        batch: BatchComposition { pde: 6, ic: 4, bc: 6, data: 5 },
        lambda: 3.0,
        ..LossSpec::for_problem(&case.problem, 1.0)
    };
    let mode = spec.mode();
    let loss = |p: &ParameterSet| compute_loss(&case.net, p, &case.problem, &spec, batch, mode).unwrap();
    let report = loss(&case.params);
    let fd: Vec<f64> = (0..case.params.len())
        .map(|i| {
            let f = |v: f64| {
                let mut p = case.params.clone();
                p.values[i] = v;
                loss(&p).total
            };
            let x = case.params.values[i];
            fd_derivative(&f, x, 1, 1e-3 * (1.0 + x.abs()))
        })
        .collect();
    let scale = fd.iter().fold(0.0f64, |m, g| m.max(g.abs())) * 1e-6;
    fd.iter()
        .zip(&report.gradient)
        .map(|(f, a)| rel_err(*a, *f, scale))
        .fold(0.0, f64::max)
}

/// Worst relative errors `[d1, d2, d3, parameter gradient]` over `count`
/// random networks.
pub fn oracle_suite(seed: u64, count: usize) -> [f64; 4] {
    let mut rng = stream(seed, 9);
    let mut worst = [0.0f64; 4];
    for _ in 0..count {
        let case = random_case(&mut rng);
        let e = input_derivative_errors(&case, &mut rng);
        let batch = small_batch(&case.problem, &mut rng);
        let g = gradient_error(&case, &batch);
        for k in 0..3 {
            worst[k] = worst[k].max(e[k]);
        }
        worst[3] = worst[3].max(g);
    }
    worst
}

/// Largest |R| over `n` random interior points.
pub fn max_residual(problem: &PdeProblem, n: usize) -> f64 {
    let a = problem.analytic.expect("closed form");
    let dom = &problem.domain;
    let d = dom.dim();
    let scalars: Vec<f64> = problem.scalars.iter().map(|s| s.value).collect();
    let mut rng = stream(11, 4);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let p: Vec<f64> = (0..d).map(|k| rng.random_range(dom.lower[k]..dom.upper[k])).collect();
        // per_dim[dim][field]
        let per_dim: Vec<Vec<Jet>> = (0..d)
            .map(|k| {
                let x: Vec<Jet> = p
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| if i == k { Jet::seed(v, 3) } else { Jet::constant(v, 3) }.unwrap())
                    .collect();
                a.eval(&x)
            })
            .collect();
        let fields: Vec<Vec<Jet>> = (0..problem.fields.len())
            .map(|f| per_dim.iter().map(|o| o[f]).collect())
            .collect();
        let r = problem
            .equation
            .residuals(&JetFields { fields: &fields, point: &p }, &scalars)
            .unwrap();
        worst = r.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    worst
}

