mod common;

use common::{fd_derivative, rel_err};
use proptest::prelude::*;
use sinpinn::jets::Activation;
use sinpinn::network::{
    Architecture, FeatureMapKind, InitScheme, Network, NetworkConfig, ParameterSet, Variant,
};
use sinpinn::pde::{self, BatchComposition, Domain, Target};
use sinpinn::rng::stream;
use sinpinn::train::*;

fn convdiff_net(arch: &str, variant: Variant) -> Network {
    Network::new(NetworkConfig::for_variant(arch, variant, Some(0.5)).unwrap()).unwrap()
}

#[test]
fn linear_toy_has_zero_loss() {
    // v = 0 leaves -k u_xx; u = x meets both the operator and the conditions
    let mut p = pde::convdiff();
    p.scalars[0].value = 0.0;
    for c in &mut p.conditions {
        c.target = Target::new(|x| x[0]);
    }
    let arch = Architecture::parse("(x)-(u)").unwrap();
    let cfg = NetworkConfig::from_architecture(&arch, FeatureMapKind::NoneDirect, Activation::Tanh, InitScheme::Xavier, None).unwrap();
    let net = Network::new(cfg).unwrap();
    let mut params = ParameterSet::new(vec![1.0, 0.0], vec![true; 2]).unwrap();
    attach_scalars(&mut params, &p);
    let batch = Batch {
        pde: vec![0.1, 0.4, 0.8],
        bc: vec![0.0, 1.0],
        bc_faces: vec![0, 1],
        ..Default::default()
    };
    let r = compute_loss(&net, &params, &p, &LossSpec::for_problem(&p, 1.0), &batch, Mode::Forward).unwrap();
    assert_eq!((r.pde, r.bc, r.total), (0.0, 0.0, 0.0));
}

#[test]
fn gradient_of_200_parameter_model() {
    let p = pde::convdiff();
    let net = convdiff_net("(x)-16-9-(u)", Variant::Sf);
    let mut params = net.init(&mut stream(5, 1)).unwrap();
    attach_scalars(&mut params, &p);
    assert!((190..=210).contains(&params.len()));
    let mut sampler = BatchSampler::new(&p, false, &mut stream(5, 2)).unwrap();
    let batch = sampler.draw(&p.defaults.batch, &mut stream(5, 2)).unwrap();
    let spec = LossSpec::for_problem(&p, 500.0);
    let loss = |q: &ParameterSet| compute_loss(&net, q, &p, &spec, &batch, Mode::Forward).unwrap();
    let r = loss(&params);
    let fd: Vec<f64> = (0..net.weight_count())
        .map(|i| {
            let x = params.values[i];
            let f = |v: f64| {
                let mut q = params.clone();
                q.values[i] = v;
                loss(&q).total
            };
            fd_derivative(&f, x, 1, 1e-3 * (1.0 + x.abs()))
        })
        .collect();
    let floor = fd.iter().fold(0.0f64, |m, g| m.max(g.abs())) * 1e-6;
    for (i, f) in fd.iter().enumerate() {
        let e = rel_err(r.gradient[i], *f, floor);
        assert!(e <= 1e-5, "parameter {i}: {e:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn total_is_weighted_sum(seed in 0u64..1000, lambda in 0.1f64..1000.0, which in 0usize..4) {
        let p = [pde::wave(), pde::kdv_problem(), pde::taylor_green(), pde::helmholtz()][which].clone();
        let inputs = p.domain.labels.join(",");
        let outputs = if p.fields.len() == 1 { "(u)".to_string() } else { "[4-(u),4-(v),4-(p)]".to_string() };
        let cfg = NetworkConfig::for_variant(&format!("({inputs})-8-6-{outputs}"), Variant::Sf, Some(1.0)).unwrap();
        let net = Network::new(cfg).unwrap();
        let mut params = net.init(&mut stream(seed, 1)).unwrap();
        attach_scalars(&mut params, &p);
        let mut rng = stream(seed, 2);
        let counts = BatchComposition { pde: 7, ic: 5, bc: 6, data: 0 };
        let batch = BatchSampler::new(&p, true, &mut rng).unwrap().draw(&counts, &mut rng).unwrap();
        let spec = LossSpec { lambda, lambda_ic: 1.0, lambda_bc: 1.0, data: false, batch: counts };
        let r = compute_loss(&net, &params, &p, &spec, &batch, Mode::Forward).unwrap();
        let sum = r.pde / lambda + r.ic + r.bc;
        prop_assert!((r.total - sum).abs() <= 4.0 * f64::EPSILON * sum.abs());
        prop_assert!(r.pde >= 0.0 && r.ic >= 0.0 && r.bc >= 0.0 && r.data == 0.0);
    }
}

fn short_config(iterations: usize) -> TrainConfig {
    TrainConfig {
        iterations,
        learning_rate: 5e-3,
        eval_every: 10,
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn zero_iterations_return_initial_parameters() {
    let p = pde::convdiff();
    let net = convdiff_net("(x)-8-4-(u)", Variant::Sf);
    let out = train(&net, &p, &LossSpec::for_problem(&p, 500.0), &short_config(0)).unwrap();
    let mut expected = net.init(&mut stream(3, sinpinn::rng::streams::INIT)).unwrap();
    attach_scalars(&mut expected, &p);
    assert_eq!(out.params, expected);
    assert!(out.history.is_empty());
}

#[test]
fn identical_seeds_give_identical_runs() {
    let p = pde::wave();
    let cfg = NetworkConfig::for_variant("(x,t)-8-6-(u)", Variant::Ff, Some(1.0)).unwrap();
    let net = Network::new(cfg).unwrap();
    let spec = LossSpec::for_problem(&p, 1.0);
    let a = train(&net, &p, &spec, &short_config(30)).unwrap();
    let b = train(&net, &p, &spec, &short_config(30)).unwrap();
    let bits = |o: &TrainOutcome| o.params.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let lines = |o: &TrainOutcome| o.history.iter().map(HistoryRow::csv_line).collect::<Vec<_>>();
    assert_eq!(lines(&a), lines(&b));
    assert_eq!(a.history.len(), 30);
    assert!(a.history[9].test_mse.is_finite() && a.history[8].test_mse.is_nan());
}

#[test]
fn frozen_features_stay_fixed() {
    let p = pde::convdiff();
    let net = convdiff_net("(x)-8-4-(u)", Variant::Rf);
    let out = train(&net, &p, &LossSpec::for_problem(&p, 500.0), &short_config(100)).unwrap();
    let init = net.init(&mut stream(3, sinpinn::rng::streams::INIT)).unwrap();
    let f = net.feature_layer().unwrap();
    let range = f.weights.start..f.bias.end;
    for i in range.clone() {
        assert_eq!(out.params.values[i].to_bits(), init.values[i].to_bits());
    }
    assert_ne!(out.params.values[range.end..net.weight_count()], init.values[range.end..net.weight_count()]);
}

#[test]
fn history_csv_layout() {
    let p = pde::convdiff();
    let net = convdiff_net("(x)-8-4-(u)", Variant::Sf);
    let out = train(&net, &p, &LossSpec::for_problem(&p, 500.0), &short_config(3)).unwrap();
    let mut buf = Vec::new();
    write_history(&out.history, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iteration,lr,loss_total,loss_pde,loss_ic,loss_bc,loss_data,test_mse,physics_scalar_estimates"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 9);
    assert_eq!(row[0], "1");
    assert_eq!(row[8], "v=5e1;k=1e0");
}

#[test]
fn inverse_wave_moves_the_speed() {
    let base = pde::wave();
    let obs = sample_observations(&base, Scenario::Sparse, &mut stream(1, 3)).unwrap();
    let p = pde::make_inverse_variant(&base, obs).unwrap();
    let cfg = NetworkConfig::for_variant("(x,t)-8-6-(u)", Variant::Sf, Some(1.0)).unwrap();
    let net = Network::new(cfg).unwrap();
    let out = train(&net, &p, &LossSpec::for_problem(&p, 180.0), &short_config(20)).unwrap();
    let c = out.params.scalar("c").unwrap();
    assert_ne!(c, 1.0);
    assert!(out.history.iter().all(|r| r.ic == 0.0 && r.bc == 0.0 && r.data > 0.0));
}

#[test]
fn latin_hypercube_mean() {
    let dom = Domain::new(&["x", "y"], &[(0.0, 1.0), (0.0, 1.0)], None).unwrap();
    let n = 10_000;
    let pts = sample_collocation(&dom, n, &SamplingMethod::LatinHypercube, &mut stream(8, 2)).unwrap();
    let se = (1.0f64 / 12.0 / n as f64).sqrt();
    for k in 0..2 {
        let mean = pts.iter().skip(k).step_by(2).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() <= 3.0 * se, "axis {k}: {mean}");
    }
    assert!(pts.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn sparse_wave_times_ramp_up() {
    let p = pde::wave();
    let mut rng = stream(9, 3);
    let mut ts = Vec::new();
    for _ in 0..50 {
        let obs = sample_observations(&p, Scenario::Sparse, &mut rng).unwrap();
        assert_eq!(obs.len(), 200);
        ts.extend(obs.points.chunks(2).map(|q| q[1]));
    }
    let n = ts.len() as f64;
    let mean = ts.iter().sum::<f64>() / n;
    // density 2t on [0, 1]: mean 2/3, variance 1/18
    let se = (1.0f64 / 18.0 / n).sqrt();
    assert!((mean - 2.0 / 3.0).abs() <= 3.0 * se, "{mean}");
}
