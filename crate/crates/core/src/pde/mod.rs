//! Benchmark problems: domains, residual operators, boundary and initial
//! conditions, analytic solutions and inverse-problem variants.

mod catalogue;
pub mod kdv;

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

pub use catalogue::{catalogue, convdiff, cavity, helmholtz, kdv as kdv_problem, problem_by_name, taylor_green, wave};

use crate::error::{config, usage, Error, Result};
use crate::jets::{Jet, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub labels: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Index of the time coordinate, if any.
    pub time: Option<usize>,
}

impl Domain {
    pub fn new(labels: &[&str], bounds: &[(f64, f64)], time: Option<usize>) -> Result<Self> {
        if labels.len() != bounds.len() || labels.is_empty() {
            return config("domain needs one bound pair per labelled dimension");
        }
        for (l, (lo, hi)) in labels.iter().zip(bounds) {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return config(format!("degenerate bounds [{lo}, {hi}] for {l}"));
            }
        }
        if time.is_some_and(|t| t >= labels.len()) {
            return config("time index outside domain");
        }
        Ok(Domain {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            lower: bounds.iter().map(|b| b.0).collect(),
            upper: bounds.iter().map(|b| b.1).collect(),
            time,
        })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn spatial_dims(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(move |&d| Some(d) != self.time)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    pub fn extent(&self, dim: usize) -> f64 {
        self.upper[dim] - self.lower[dim]
    }
}

pub type TargetFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Target(pub TargetFn);

impl Target {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Target(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Target::new(move |_| c)
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        (self.0)(p)
    }
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Target(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionKind {
    Dirichlet,
    /// Derivative along the face's dimension.
    Neumann,
    InitialValue,
    InitialTimeDerivative,
    /// Value and derivatives up to `order` equal on the lower and upper
    /// faces of the dimension.
    PeriodicPair { order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Face { dim: usize, upper: bool },
    InitialSlice,
}

#[derive(Debug, Clone)]
pub struct ConditionSpec {
    pub kind: ConditionKind,
    pub location: Location,
    pub field: usize,
    pub target: Target,
}

impl ConditionSpec {
    pub fn is_initial(&self) -> bool {
        matches!(
            self.kind,
            ConditionKind::InitialValue | ConditionKind::InitialTimeDerivative
        )
    }

    /// `(dim, order)` jet orders needed to evaluate this condition.
    pub fn required_orders(&self, domain: &Domain) -> Vec<(usize, usize)> {
        match (self.kind, self.location) {
            (ConditionKind::Neumann, Location::Face { dim, .. }) => vec![(dim, 1)],
            (ConditionKind::InitialTimeDerivative, _) => domain.time.map(|t| (t, 1)).into_iter().collect(),
            (ConditionKind::PeriodicPair { order }, Location::Face { dim, .. }) => vec![(dim, order)],
            _ => Vec::new(),
        }
    }
}

/// Governing equations of the catalogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// `v u_x - k u_xx`; scalars `[v, k]`.
    ConvectionDiffusion,
    /// `u_tt - c² u_xx` over inputs `(x, t)`; scalars `[c]`.
    Wave,
    /// `u_xx + u_yy + u - q(x, y)`.
    Helmholtz,
    /// `u_t + u u_x + ν u_xxx` over `(x, t)`; scalars `[ν]`.
    Kdv,
    /// Incompressible flow on `(x, y)` with fields `(u, v, p)`; scalars `[ν]`.
    NavierStokesSteady,
    /// As steady, over `(x, y, t)`.
    NavierStokesTransient,
}

/// Access to output derivatives at a batch (or a single point).
pub trait FieldDerivs<T> {
    /// Raw derivative `d^order/d(dim)^order` of output `field`.
    fn d(&self, field: usize, dim: usize, order: usize) -> Result<T>;
    fn coord(&self, dim: usize) -> Result<T>;
}

/// Single-point derivatives from per-dimension jets: `fields[field][dim]`.
pub struct JetFields<'a> {
    pub fields: &'a [Vec<Jet>],
    pub point: &'a [f64],
}

impl FieldDerivs<f64> for JetFields<'_> {
    fn d(&self, field: usize, dim: usize, order: usize) -> Result<f64> {
        let jet = self
            .fields
            .get(field)
            .and_then(|f| f.get(dim))
            .ok_or_else(|| Error::Usage(format!("no jet for field {field} along input {dim}")))?;
        if order > jet.order() {
            return usage(format!(
                "derivative of order {order} requested from a jet of order {}",
                jet.order()
            ));
        }
        Ok(jet.deriv(order))
    }

    fn coord(&self, dim: usize) -> Result<f64> {
        self.point
            .get(dim)
            .copied()
            .ok_or_else(|| Error::Usage(format!("coordinate {dim} missing")))
    }
}

pub const HELMHOLTZ_SOURCE: f64 = 1.0 - PI * PI - 36.0 * PI * PI;

pub fn helmholtz_source<T: Real>(x: T, y: T) -> T {
    (x * PI).sin() * (y * (6.0 * PI)).sin() * HELMHOLTZ_SOURCE
}

impl Equation {
    pub fn residual_count(self) -> usize {
        match self {
            Equation::NavierStokesSteady | Equation::NavierStokesTransient => 3,
            _ => 1,
        }
    }

    /// `(dim, order)` pairs the residual reads.
    pub fn required_orders(self) -> Vec<(usize, usize)> {
        match self {
            Equation::ConvectionDiffusion => vec![(0, 2)],
            Equation::Wave => vec![(0, 2), (1, 2)],
            Equation::Helmholtz | Equation::NavierStokesSteady => vec![(0, 2), (1, 2)],
            Equation::Kdv => vec![(0, 3), (1, 1)],
            Equation::NavierStokesTransient => vec![(0, 2), (1, 2), (2, 1)],
        }
    }

    pub fn residuals<T: Real>(self, f: &dyn FieldDerivs<T>, s: &[T]) -> Result<Vec<T>> {
        let need = match self {
            Equation::ConvectionDiffusion => 2,
            Equation::Helmholtz => 0,
            _ => 1,
        };
        if s.len() < need {
            return usage(format!("{self:?} needs {need} physics scalars"));
        }
        Ok(match self {
            Equation::ConvectionDiffusion => {
                vec![f.d(0, 0, 1)? * s[0] - f.d(0, 0, 2)? * s[1]]
            }
            Equation::Wave => {
                let c = s[0];
                vec![f.d(0, 1, 2)? - c * c * f.d(0, 0, 2)?]
            }
            Equation::Helmholtz => {
                let q = helmholtz_source(f.coord(0)?, f.coord(1)?);
                vec![f.d(0, 0, 2)? + f.d(0, 1, 2)? + f.d(0, 0, 0)? - q]
            }
            Equation::Kdv => {
                let u = f.d(0, 0, 0)?;
                vec![f.d(0, 1, 1)? + u * f.d(0, 0, 1)? + s[0] * f.d(0, 0, 3)?]
            }
            Equation::NavierStokesSteady | Equation::NavierStokesTransient => {
                let nu = s[0];
                let (u, v) = (f.d(0, 0, 0)?, f.d(1, 0, 0)?);
                let (u_x, u_y, v_x, v_y) = (f.d(0, 0, 1)?, f.d(0, 1, 1)?, f.d(1, 0, 1)?, f.d(1, 1, 1)?);
                let lap_u = f.d(0, 0, 2)? + f.d(0, 1, 2)?;
                let lap_v = f.d(1, 0, 2)? + f.d(1, 1, 2)?;
                let mut mx = u * u_x + v * u_y - nu * lap_u + f.d(2, 0, 1)?;
                let mut my = u * v_x + v * v_y - nu * lap_v + f.d(2, 1, 1)?;
                if self == Equation::NavierStokesTransient {
                    mx = f.d(0, 2, 1)? + mx;
                    my = f.d(1, 2, 1)? + my;
                }
                vec![u_x + v_y, mx, my]
            }
        })
    }
}

pub fn residual_convdiff(u_x: &Jet, v: f64, k: f64) -> Result<f64> {
    let fields = [vec![*u_x]];
    let r = Equation::ConvectionDiffusion.residuals(&JetFields { fields: &fields, point: &[] }, &[v, k])?;
    Ok(r[0])
}

/// Jets of `u` along `t` and along `x` at the same point.
pub fn residual_wave(u_t: &Jet, u_x: &Jet, c: f64) -> Result<f64> {
    let fields = [vec![*u_x, *u_t]];
    let r = Equation::Wave.residuals(&JetFields { fields: &fields, point: &[] }, &[c])?;
    Ok(r[0])
}

pub fn residual_helmholtz(u_x: &Jet, u_y: &Jet, point: (f64, f64)) -> Result<f64> {
    let fields = [vec![*u_x, *u_y]];
    let pt = [point.0, point.1];
    let r = Equation::Helmholtz.residuals(&JetFields { fields: &fields, point: &pt }, &[])?;
    Ok(r[0])
}

pub fn residual_kdv(u_t: &Jet, u_x: &Jet, nu: f64) -> Result<f64> {
    let fields = [vec![*u_x, *u_t]];
    let r = Equation::Kdv.residuals(&JetFields { fields: &fields, point: &[] }, &[nu])?;
    Ok(r[0])
}

/// `fields` is `[u, v, p]`, each with jets along `(x, y, t)`.
pub fn residual_ns_transient(fields: &[Vec<Jet>], re: f64) -> Result<[f64; 3]> {
    let r = Equation::NavierStokesTransient.residuals(&JetFields { fields, point: &[] }, &[1.0 / re])?;
    Ok([r[0], r[1], r[2]])
}

/// `fields` is `[u, v, p]`, each with jets along `(x, y)`.
pub fn residual_ns_steady(fields: &[Vec<Jet>], re: f64) -> Result<[f64; 3]> {
    let r = Equation::NavierStokesSteady.residuals(&JetFields { fields, point: &[] }, &[1.0 / re])?;
    Ok([r[0], r[1], r[2]])
}

/// Closed-form solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Analytic {
    /// `(e^{(v/k)x} - 1) / (e^{(v/k)L} - 1)`
    ConvectionDiffusion { peclet: f64, length: f64 },
    /// `sin(πx)cos(cπt) + 0.5 sin(4πx)cos(4cπt)`
    Wave { c: f64 },
    /// Decaying vortex array with density one.
    TaylorGreen { nu: f64 },
    /// `sin(πx) sin(6πy)`
    Helmholtz,
}

impl Analytic {
    pub fn eval<T: Real>(&self, p: &[T]) -> Vec<T> {
        match *self {
            Analytic::ConvectionDiffusion { peclet, length } => {
                vec![((p[0] * peclet).exp() - 1.0) * (1.0 / (peclet * length).exp_m1())]
            }
            Analytic::Wave { c } => {
                let (x, t) = (p[0], p[1]);
                vec![
                    (x * PI).sin() * (t * (c * PI)).cos()
                        + (x * (4.0 * PI)).sin() * (t * (4.0 * c * PI)).cos() * 0.5,
                ]
            }
            Analytic::TaylorGreen { nu } => {
                let (x, y, t) = (p[0], p[1], p[2]);
                let decay = (t * (-2.0 * PI * PI * nu)).exp();
                let u = -((x * PI).cos() * (y * PI).sin() * decay);
                let v = (x * PI).sin() * (y * PI).cos() * decay;
                let pr = ((x * (2.0 * PI)).cos() + (y * (2.0 * PI)).cos())
                    * (t * (-4.0 * PI * PI * nu)).exp()
                    * -0.25;
                vec![u, v, pr]
            }
            Analytic::Helmholtz => vec![(p[0] * PI).sin() * (p[1] * (6.0 * PI)).sin()],
        }
    }

    pub fn eval_f64(&self, p: &[f64]) -> Vec<f64> {
        match *self {
            Analytic::ConvectionDiffusion { peclet, length } => {
                vec![(peclet * p[0]).exp_m1() / (peclet * length).exp_m1()]
            }
            _ => self.eval(p),
        }
    }
}

/// Physics coefficient appearing in a residual.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsScalar {
    pub name: String,
    pub value: f64,
    /// Starting value when the scalar is inferred from data.
    pub inverse_guess: Option<f64>,
    pub trainable: bool,
}

impl PhysicsScalar {
    pub fn fixed(name: &str, value: f64) -> Self {
        PhysicsScalar {
            name: name.into(),
            value,
            inverse_guess: None,
            trainable: false,
        }
    }

    pub fn inferable(name: &str, value: f64, guess: f64) -> Self {
        PhysicsScalar {
            inverse_guess: Some(guess),
            ..Self::fixed(name, value)
        }
    }

    /// Value a training run starts from.
    pub fn initial(&self) -> f64 {
        if self.trainable {
            self.inverse_guess.unwrap_or(self.value)
        } else {
            self.value
        }
    }
}

/// Points per loss term in one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchComposition {
    pub pde: usize,
    pub ic: usize,
    pub bc: usize,
    pub data: usize,
}

/// Resolution of the fixed training sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrainingGrid {
    /// Tensor grid with this many nodes per dimension, endpoints included.
    Uniform(Vec<usize>),
    /// Latin hypercube sample of this many interior points.
    Lhs(usize),
}

impl TrainingGrid {
    pub fn len(&self) -> usize {
        match self {
            TrainingGrid::Uniform(n) => n.iter().product(),
            TrainingGrid::Lhs(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node counts of the matching uniform grid.
    pub fn uniform_counts(&self, dim: usize) -> Vec<usize> {
        match self {
            TrainingGrid::Uniform(n) => n.clone(),
            TrainingGrid::Lhs(n) => vec![*n; dim],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDefaults {
    pub architecture: String,
    pub sigma: f64,
    pub lambda: f64,
    pub batch: BatchComposition,
    pub inverse_batch: BatchComposition,
    pub iterations: usize,
    pub learning_rate: f64,
    pub grid: TrainingGrid,
}

/// How fields are compared against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MseMetric {
    /// Plain MSE of the single output field.
    Scalar,
    /// Mean of the u and v MSEs.
    VelocityComponents,
    /// MSE of the velocity magnitude `sqrt(u² + v²)`.
    VelocityMagnitude,
}

/// Observed field values, row-major `[point][dim]` and `[point][field]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Observations {
    pub points: Vec<f64>,
    pub fields: Vec<usize>,
    pub values: Vec<f64>,
}

impl Observations {
    pub fn len(&self) -> usize {
        if self.fields.is_empty() {
            0
        } else {
            self.values.len() / self.fields.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct PdeProblem {
    pub name: String,
    pub equation: Equation,
    pub domain: Domain,
    pub fields: Vec<String>,
    pub conditions: Vec<ConditionSpec>,
    pub scalars: Vec<PhysicsScalar>,
    pub analytic: Option<Analytic>,
    pub metric: MseMetric,
    pub defaults: ProblemDefaults,
    /// Present in inverse mode.
    pub observations: Option<Observations>,
    /// Where a numerically computed reference is cached.
    pub reference_cache: Option<PathBuf>,
}

impl PdeProblem {
    pub fn is_inverse(&self) -> bool {
        self.observations.is_some()
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f == name)
    }

    /// Conditions contributing to the loss (none in inverse mode).
    pub fn active_conditions(&self) -> impl Iterator<Item = &ConditionSpec> {
        let on = !self.is_inverse();
        self.conditions.iter().filter(move |_| on)
    }

    pub fn has_ground_truth(&self) -> bool {
        self.analytic.is_some() || self.equation == Equation::Kdv
    }

    /// Every `(dim, order)` needed by residuals and conditions.
    pub fn required_orders(&self) -> Vec<(usize, usize)> {
        let mut v = self.equation.required_orders();
        for c in &self.conditions {
            v.extend(c.required_orders(&self.domain));
        }
        v
    }

    pub fn scalar(&self, name: &str) -> Option<&PhysicsScalar> {
        self.scalars.iter().find(|s| s.name == name)
    }

    pub fn batch(&self) -> BatchComposition {
        if self.is_inverse() {
            self.defaults.inverse_batch
        } else {
            self.defaults.batch
        }
    }
}

/// Closed-form field values at `point`.
pub fn exact_solution(problem: &PdeProblem, point: &[f64]) -> Result<Vec<f64>> {
    let a = problem.analytic.ok_or_else(|| {
        Error::Unsupported(format!("{} has no closed-form solution", problem.name))
    })?;
    if point.len() != problem.domain.dim() {
        return usage("point dimension does not match problem domain");
    }
    Ok(a.eval_f64(point))
}

/// Copy of `problem` that infers its designated physics scalars from
/// `observations` instead of enforcing initial and boundary conditions.
pub fn make_inverse_variant(problem: &PdeProblem, observations: Observations) -> Result<PdeProblem> {
    if !problem.scalars.iter().any(|s| s.inverse_guess.is_some()) {
        return Err(Error::Unsupported(format!(
            "{} has no physics scalar designated for inference",
            problem.name
        )));
    }
    if observations.is_empty() {
        return config("inverse mode needs at least one observation");
    }
    let d = problem.domain.dim();
    if observations.points.len() != observations.len() * d
        || observations.fields.iter().any(|&f| f >= problem.fields.len())
    {
        return usage("observation layout does not match the problem");
    }
    let mut inv = problem.clone();
    for s in &mut inv.scalars {
        s.trainable = s.inverse_guess.is_some();
    }
    inv.observations = Some(observations);
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn jets_along(f: impl Fn(&[Jet]) -> Vec<Jet>, p: &[f64], order: usize) -> Vec<Vec<Jet>> {
        // fields[field][dim]
        let d = p.len();
        let per_dim: Vec<Vec<Jet>> = (0..d)
            .map(|k| {
                let x: Vec<Jet> = p
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        if i == k {
                            Jet::seed(v, order).unwrap()
                        } else {
                            Jet::constant(v, order).unwrap()
                        }
                    })
                    .collect();
                f(&x)
            })
            .collect();
        let m = per_dim[0].len();
        (0..m).map(|fi| per_dim.iter().map(|o| o[fi]).collect()).collect()
    }

    #[test]
    fn convdiff_examples() {
        let c = Jet::constant(3.0, 2).unwrap();
        assert_eq!(residual_convdiff(&c, 50.0, 1.0).unwrap(), 0.0);
        let x = Jet::seed(0.4, 2).unwrap();
        assert_eq!(residual_convdiff(&x, 50.0, 1.0).unwrap(), 50.0);
        let low = Jet::seed(0.4, 1).unwrap();
        assert!(matches!(residual_convdiff(&low, 50.0, 1.0), Err(Error::Usage(_))));
    }

    #[test]
    fn wave_examples() {
        let x = Jet::seed(0.3, 2).unwrap();
        let xt = Jet::constant(0.3, 2).unwrap();
        assert_eq!(residual_wave(&xt, &x, 2.0).unwrap(), 0.0);
        let t = Jet::seed(0.7, 2).unwrap();
        let t2 = t * t;
        let t2x = Jet::constant(0.49, 2).unwrap();
        assert_relative_eq!(residual_wave(&t2, &t2x, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn helmholtz_zero_field() {
        let z = Jet::constant(0.0, 2).unwrap();
        let r = residual_helmholtz(&z, &z, (0.5, 0.25)).unwrap();
        let q = HELMHOLTZ_SOURCE * (PI * 0.5).sin() * (6.0 * PI * 0.25).sin();
        assert_eq!(r, -q);
        // sin(π/2) sin(3π/2) = -1, so -q = 1 - 37π²
        assert_relative_eq!(r, 1.0 - 37.0 * PI * PI, epsilon = 1e-9);
        assert_eq!(residual_helmholtz(&z, &z, (1.0 / PI * 0.0, 0.3)).unwrap(), 0.0);
    }

    #[test]
    fn kdv_examples() {
        let c = Jet::constant(1.5, 3).unwrap();
        assert_eq!(residual_kdv(&c, &c, 5e-4).unwrap(), 0.0);
        let x = Jet::seed(0.8, 3).unwrap();
        let xt = Jet::constant(0.8, 3).unwrap();
        assert_relative_eq!(residual_kdv(&xt, &x, 5e-4).unwrap(), 0.8);
        let s = Jet::seed(0.0, 3).unwrap().sin();
        let st = Jet::constant(0.0, 3).unwrap();
        assert_relative_eq!(residual_kdv(&st, &s, 5e-4).unwrap(), -5e-4, epsilon = 1e-18);
        assert!(residual_kdv(&st, &Jet::seed(0.0, 2).unwrap(), 5e-4).is_err());
    }

    #[test]
    fn ns_examples() {
        let p = [0.3, -0.6, 0.2];
        let consts = jets_along(|x| vec![x[0] * 0.0 + 1.0, x[0] * 0.0 - 2.0, x[0] * 0.0 + 0.5], &p, 2);
        assert_eq!(residual_ns_transient(&consts, 100.0).unwrap(), [0.0; 3]);
        let shear = jets_along(|x| vec![x[1], x[0], x[0] * 0.0], &p, 2);
        let r = residual_ns_transient(&shear, 100.0).unwrap();
        assert_eq!(r[0], 0.0);
        assert_relative_eq!(r[1], 0.3);
        let steady = jets_along(|x| vec![x[1], x[0], x[0] * 0.0], &p[..2], 2);
        let r = residual_ns_steady(&steady, 400.0).unwrap();
        assert_eq!(r, [0.0, 0.3, -0.6]);
        let rot = jets_along(|x| vec![-x[1], x[0], (x[0] * x[0] + x[1] * x[1]) * 0.5], &p[..2], 2);
        let r = residual_ns_steady(&rot, 400.0).unwrap();
        for v in r {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn exact_values() {
        let w = wave();
        assert_relative_eq!(exact_solution(&w, &[0.5, 0.0]).unwrap()[0], 1.0, epsilon = 1e-15);
        let tg = taylor_green();
        assert!(exact_solution(&tg, &[0.5, 0.5, 0.0]).unwrap()[0].abs() < 1e-16);
        let cd = convdiff();
        // (e^45 - 1)/(e^50 - 1)
        let expected = 6.737_946_999_085_467e-3;
        assert_relative_eq!(exact_solution(&cd, &[0.9]).unwrap()[0], expected, max_relative = 1e-12);
        assert!(matches!(exact_solution(&cavity(), &[0.5, 0.5]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn inverse_variant() {
        let w = wave();
        assert!(matches!(
            make_inverse_variant(&w, Observations::default()),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            make_inverse_variant(&helmholtz(), Observations { points: vec![0.0, 0.0], fields: vec![0], values: vec![0.0] }),
            Err(Error::Unsupported(_))
        ));
        let obs = Observations {
            points: vec![0.5, 0.5],
            fields: vec![0],
            values: vec![0.0],
        };
        let inv = make_inverse_variant(&w, obs).unwrap();
        let c = inv.scalar("c").unwrap();
        assert!(c.trainable);
        assert_eq!(c.value, 2.0);
        assert_eq!(c.initial(), 1.0);
        assert_eq!(inv.active_conditions().count(), 0);
        assert_eq!(inv.batch(), BatchComposition { pde: 450, ic: 0, bc: 0, data: 50 });
        let tg = make_inverse_variant(&taylor_green(), Observations { points: vec![1.0, 1.0, 1.0], fields: vec![0, 1], values: vec![0.0, 0.0] }).unwrap();
        assert_eq!(tg.scalar("nu").unwrap().value, 1e-2);
        assert_eq!(tg.scalar("nu").unwrap().initial(), 0.05);
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::new(&["x"], &[(1.0, 1.0)], None).is_err());
        assert!(Domain::new(&["x"], &[(0.0, 1.0)], Some(1)).is_err());
        let d = Domain::new(&["x", "t"], &[(0.0, 2.0), (0.0, 1.0)], Some(1)).unwrap();
        assert_eq!(d.spatial_dims().collect::<Vec<_>>(), vec![0]);
        assert!(d.contains(&[2.0, 0.0]));
        assert!(!d.contains(&[2.1, 0.0]));
    }
}
