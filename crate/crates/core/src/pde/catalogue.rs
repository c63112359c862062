use std::f64::consts::PI;

use super::*;

fn face(dim: usize, upper: bool) -> Location {
    Location::Face { dim, upper }
}

fn cond(kind: ConditionKind, location: Location, field: usize, target: Target) -> ConditionSpec {
    ConditionSpec {
        kind,
        location,
        field,
        target,
    }
}

fn exact_field(a: Analytic, field: usize) -> Target {
    Target::new(move |p| a.eval_f64(p)[field])
}

fn spatial_faces(domain: &Domain) -> Vec<Location> {
    domain
        .spatial_dims()
        .flat_map(|d| [face(d, false), face(d, true)])
        .collect()
}

fn inverse_batch() -> BatchComposition {
    BatchComposition {
        pde: 450,
        ic: 0,
        bc: 0,
        data: 50,
    }
}

/// Steady 1D convection-diffusion `v u_x = k u_xx` on `[0, 1]`.
pub fn convdiff() -> PdeProblem {
    let domain = Domain::new(&["x"], &[(0.0, 1.0)], None).unwrap();
    let analytic = Analytic::ConvectionDiffusion {
        peclet: 50.0,
        length: 1.0,
    };
    let conditions = spatial_faces(&domain)
        .into_iter()
        .map(|loc| cond(ConditionKind::Dirichlet, loc, 0, exact_field(analytic, 0)))
        .collect();
    PdeProblem {
        name: "convdiff".into(),
        equation: Equation::ConvectionDiffusion,
        domain,
        fields: vec!["u".into()],
        conditions,
        scalars: vec![PhysicsScalar::fixed("v", 50.0), PhysicsScalar::fixed("k", 1.0)],
        analytic: Some(analytic),
        metric: MseMetric::Scalar,
        defaults: ProblemDefaults {
            architecture: "(x)-32-10-10-10-(u)".into(),
            sigma: 0.5,
            lambda: 500.0,
            // both endpoints enter every evaluation
            batch: BatchComposition {
                pde: 499,
                ic: 0,
                bc: 2,
                data: 0,
            },
            inverse_batch: inverse_batch(),
            iterations: 50_000,
            learning_rate: 5e-3,
            grid: TrainingGrid::Lhs(5000),
        },
        observations: None,
        reference_cache: None,
    }
}

/// Lid-driven cavity at Re = 400 on the unit square.
pub fn cavity() -> PdeProblem {
    let domain = Domain::new(&["x", "y"], &[(0.0, 1.0), (0.0, 1.0)], None).unwrap();
    let mut conditions = Vec::new();
    // Side walls come first so the two lid corners are assigned to them.
    for loc in [face(0, false), face(0, true), face(1, false), face(1, true)] {
        let lid = loc == face(1, true);
        let u = if lid { 1.0 } else { 0.0 };
        conditions.push(cond(ConditionKind::Dirichlet, loc, 0, Target::constant(u)));
        conditions.push(cond(ConditionKind::Dirichlet, loc, 1, Target::constant(0.0)));
    }
    PdeProblem {
        name: "cavity".into(),
        equation: Equation::NavierStokesSteady,
        domain,
        fields: vec!["u".into(), "v".into(), "p".into()],
        conditions,
        scalars: vec![PhysicsScalar::fixed("nu", 1.0 / 400.0)],
        analytic: None,
        metric: MseMetric::VelocityComponents,
        defaults: ProblemDefaults {
            architecture: "(x,y)-64-20-20-20-[20-20-20-(u),20-20-20-(v),20-20-20-(p)]".into(),
            sigma: 1.0,
            lambda: 1.0,
            batch: BatchComposition {
                pde: 475,
                ic: 0,
                bc: 25,
                data: 0,
            },
            inverse_batch: inverse_batch(),
            iterations: 200_000,
            learning_rate: 1e-3,
            grid: TrainingGrid::Uniform(vec![52, 52]),
        },
        observations: None,
        reference_cache: None,
    }
}

/// 1D wave equation with speed 2 on `[0, 2] × [0, 1]`.
pub fn wave() -> PdeProblem {
    let domain = Domain::new(&["x", "t"], &[(0.0, 2.0), (0.0, 1.0)], Some(1)).unwrap();
    let analytic = Analytic::Wave { c: 2.0 };
    let mut conditions = vec![
        cond(ConditionKind::InitialValue, Location::InitialSlice, 0, exact_field(analytic, 0)),
        cond(
            ConditionKind::InitialTimeDerivative,
            Location::InitialSlice,
            0,
            Target::constant(0.0),
        ),
    ];
    for loc in spatial_faces(&domain) {
        conditions.push(cond(ConditionKind::Dirichlet, loc, 0, Target::constant(0.0)));
    }
    PdeProblem {
        name: "wave".into(),
        equation: Equation::Wave,
        domain,
        fields: vec!["u".into()],
        conditions,
        scalars: vec![PhysicsScalar::inferable("c", 2.0, 1.0)],
        analytic: Some(analytic),
        metric: MseMetric::Scalar,
        defaults: ProblemDefaults {
            architecture: "(x,t)-64-50-50-50-(u)".into(),
            sigma: 1.0,
            lambda: 1.0,
            batch: BatchComposition {
                pde: 450,
                ic: 40,
                bc: 10,
                data: 0,
            },
            inverse_batch: inverse_batch(),
            iterations: 200_000,
            learning_rate: 5e-3,
            grid: TrainingGrid::Uniform(vec![256, 256]),
        },
        observations: None,
        reference_cache: None,
    }
}

/// Decaying Taylor–Green vortices at Re = 100 on `[0.5, 4.5]² × [0, 10]`.
pub fn taylor_green() -> PdeProblem {
    let domain = Domain::new(
        &["x", "y", "t"],
        &[(0.5, 4.5), (0.5, 4.5), (0.0, 10.0)],
        Some(2),
    )
    .unwrap();
    let nu = 1.0 / 100.0;
    let analytic = Analytic::TaylorGreen { nu };
    let mut conditions: Vec<ConditionSpec> = (0..3)
        .map(|f| cond(ConditionKind::InitialValue, Location::InitialSlice, f, exact_field(analytic, f)))
        .collect();
    for loc in spatial_faces(&domain) {
        let Location::Face { dim, .. } = loc else { unreachable!() };
        for f in 0..2 {
            conditions.push(cond(ConditionKind::Dirichlet, loc, f, exact_field(analytic, f)));
        }
        // dp/dx = (π/2) sin(2πx) e^{-4π²νt}, likewise in y
        let dp = Target::new(move |p| {
            0.5 * PI * (2.0 * PI * p[dim]).sin() * (-4.0 * PI * PI * nu * p[2]).exp()
        });
        conditions.push(cond(ConditionKind::Neumann, loc, 2, dp));
    }
    PdeProblem {
        name: "taylor-green".into(),
        equation: Equation::NavierStokesTransient,
        domain,
        fields: vec!["u".into(), "v".into(), "p".into()],
        conditions,
        scalars: vec![PhysicsScalar::inferable("nu", nu, 0.05)],
        analytic: Some(analytic),
        metric: MseMetric::VelocityMagnitude,
        defaults: ProblemDefaults {
            architecture: "(x,y,t)-64-50-50-50-[50-50-50-(u),50-50-50-(v),50-50-50-(p)]".into(),
            sigma: 1.0,
            lambda: 1.0,
            batch: BatchComposition {
                pde: 450,
                ic: 40,
                bc: 10,
                data: 0,
            },
            inverse_batch: inverse_batch(),
            iterations: 100_000,
            learning_rate: 5e-3,
            grid: TrainingGrid::Uniform(vec![101, 101, 51]),
        },
        observations: None,
        reference_cache: None,
    }
}

/// KdV with `ν = 5e-4`, `u(x, 0) = cos(πx)`, periodic on `[-1, 1]`.
pub fn kdv() -> PdeProblem {
    let domain = Domain::new(&["x", "t"], &[(-1.0, 1.0), (0.0, 1.25)], Some(1)).unwrap();
    let conditions = vec![
        cond(
            ConditionKind::InitialValue,
            Location::InitialSlice,
            0,
            Target::new(|p| (PI * p[0]).cos()),
        ),
        cond(
            ConditionKind::PeriodicPair { order: 1 },
            face(0, false),
            0,
            Target::constant(0.0),
        ),
    ];
    PdeProblem {
        name: "kdv".into(),
        equation: Equation::Kdv,
        domain,
        fields: vec!["u".into()],
        conditions,
        scalars: vec![PhysicsScalar::fixed("nu", 5e-4)],
        analytic: None,
        metric: MseMetric::Scalar,
        defaults: ProblemDefaults {
            architecture: "(x,t)-64-50-50-50-(u)".into(),
            sigma: 1.0,
            lambda: 1.0,
            batch: BatchComposition {
                pde: 480,
                ic: 10,
                bc: 10,
                data: 0,
            },
            inverse_batch: inverse_batch(),
            iterations: 100_000,
            learning_rate: 5e-3,
            grid: TrainingGrid::Uniform(vec![257, 251]),
        },
        observations: None,
        reference_cache: None,
    }
}

/// Helmholtz problem with solution `sin(πx) sin(6πy)` on `[-1, 1]²`.
pub fn helmholtz() -> PdeProblem {
    let domain = Domain::new(&["x", "y"], &[(-1.0, 1.0), (-1.0, 1.0)], None).unwrap();
    let analytic = Analytic::Helmholtz;
    let conditions = spatial_faces(&domain)
        .into_iter()
        .map(|loc| cond(ConditionKind::Dirichlet, loc, 0, exact_field(analytic, 0)))
        .collect();
    PdeProblem {
        name: "helmholtz".into(),
        equation: Equation::Helmholtz,
        domain,
        fields: vec!["u".into()],
        conditions,
        scalars: Vec::new(),
        analytic: Some(analytic),
        metric: MseMetric::Scalar,
        defaults: ProblemDefaults {
            architecture: "(x,y)-64-20-20-20-(u)".into(),
            sigma: 1.0,
            lambda: 1.0,
            batch: BatchComposition {
                pde: 450,
                ic: 0,
                bc: 50,
                data: 0,
            },
            inverse_batch: inverse_batch(),
            iterations: 100_000,
            learning_rate: 5e-3,
            grid: TrainingGrid::Uniform(vec![256, 256]),
        },
        observations: None,
        reference_cache: None,
    }
}

pub fn catalogue() -> Vec<PdeProblem> {
    vec![convdiff(), cavity(), wave(), taylor_green(), kdv(), helmholtz()]
}

/// Looks a problem up by name; preset aliases are accepted.
pub fn problem_by_name(name: &str) -> Result<PdeProblem> {
    let canonical = match name.to_ascii_lowercase().as_str() {
        "convdiff" | "convection-diffusion" => "convdiff",
        "cavity" | "lid-driven-cavity" => "cavity",
        "wave" | "wave1d" => "wave",
        "taylor-green" | "taylorgreen" | "tg" => "taylor-green",
        "kdv" => "kdv",
        "helmholtz" | "helmholtz2d" => "helmholtz",
        other => return usage(format!("unknown problem {other:?}")),
    };
    Ok(catalogue()
        .into_iter()
        .find(|p| p.name == canonical)
        .expect("catalogue covers every canonical name"))
}
