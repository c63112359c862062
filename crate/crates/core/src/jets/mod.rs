//! Truncated Taylor arithmetic along one seeded input direction, plus a
//! reverse sweep ([`Tape`]) over computations whose primal values are
//! batches of such jets.
//!
//! A [`Jet`] of order `k` stores the Taylor coefficients
//! `a_j = (d^j u / ds^j) / j!` for `j = 0..=k`. Raw derivatives are read
//! through [`Jet::deriv`]. The maximum supported order is 3, which covers
//! every operator in the problem catalogue (the KdV dispersion term is the
//! only third derivative).

mod tape;

pub use tape::{JetLayout, NodeId, Tape, Var};

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{usage, Error, Result};

/// Highest derivative order carried by a jet.
pub const MAX_ORDER: usize = 3;

const FACTORIAL: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

/// Elementary smooth functions that can be composed with a jet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sin,
    Cos,
    Sigmoid,
    Exp,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sin => x.sin(),
            Activation::Cos => x.cos(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Exp => x.exp(),
        }
    }

    /// `[f, f', f'', f''', f'''']` at `x`.
    pub fn derivatives(self, x: f64) -> [f64; 5] {
        self.derivatives_with_value(x, self.apply(x))
    }

    /// Same as [`Activation::derivatives`] but reuses an already computed
    /// `y = f(x)`; tanh, sigmoid and exp derivatives are polynomials in `y`.
    pub fn derivatives_with_value(self, x: f64, y: f64) -> [f64; 5] {
        match self {
            Activation::Tanh => {
                let d1 = 1.0 - y * y;
                [
                    y,
                    d1,
                    -2.0 * y * d1,
                    d1 * (6.0 * y * y - 2.0),
                    d1 * (16.0 * y - 24.0 * y * y * y),
                ]
            }
            Activation::Sigmoid => {
                let d1 = y * (1.0 - y);
                let m = 1.0 - 2.0 * y;
                [
                    y,
                    d1,
                    d1 * m,
                    d1 * (1.0 - 6.0 * y + 6.0 * y * y),
                    d1 * m * (1.0 - 12.0 * y + 12.0 * y * y),
                ]
            }
            Activation::Sin => {
                let c = x.cos();
                [y, c, -y, -c, y]
            }
            Activation::Cos => {
                let s = x.sin();
                [y, -s, -y, s, y]
            }
            Activation::Exp => [y; 5],
        }
    }

    /// Upper bound on `|f'|` over the real line.
    pub fn max_slope(self) -> f64 {
        match self {
            Activation::Tanh | Activation::Sin | Activation::Cos => 1.0,
            Activation::Sigmoid => 0.25,
            Activation::Exp => f64::INFINITY,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "sin" => Ok(Activation::Sin),
            "cos" => Ok(Activation::Cos),
            "sigmoid" => Ok(Activation::Sigmoid),
            "exp" => Ok(Activation::Exp),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Activation::Tanh => "tanh",
            Activation::Sin => "sin",
            Activation::Cos => "cos",
            Activation::Sigmoid => "sigmoid",
            Activation::Exp => "exp",
        };
        f.write_str(s)
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Taylor coefficients of `f(a(s))` for orders `1..=k`, given the derivatives
/// `d` of `f` at `a_0` and the input coefficients `a[j-1] = a_j`.
#[inline]
pub(crate) fn compose_forward(d: &[f64; 5], a: &[f64], c: &mut [f64]) {
    let k = a.len();
    if k == 0 {
        return;
    }
    let a1 = a[0];
    c[0] = d[1] * a1;
    if k >= 2 {
        let a2 = a[1];
        c[1] = d[1] * a2 + 0.5 * d[2] * a1 * a1;
        if k >= 3 {
            let a3 = a[2];
            c[2] = d[1] * a3 + d[2] * a1 * a2 + d[3] / 6.0 * a1 * a1 * a1;
        }
    }
}

/// Adjoint of [`compose_forward`]: accumulates into `ga` (orders `1..=k`) and
/// returns the contribution to the adjoint of `a_0`. The adjoint of the
/// order-0 output is handled by the caller.
#[inline]
pub(crate) fn compose_adjoint(d: &[f64; 5], a: &[f64], gc: &[f64], ga: &mut [f64]) -> f64 {
    let k = a.len();
    let mut g0 = 0.0;
    if k == 0 {
        return g0;
    }
    let a1 = a[0];
    let g1 = gc[0];
    g0 += g1 * d[2] * a1;
    ga[0] += g1 * d[1];
    if k >= 2 {
        let a2 = a[1];
        let g2 = gc[1];
        g0 += g2 * (d[2] * a2 + 0.5 * d[3] * a1 * a1);
        ga[0] += g2 * d[2] * a1;
        ga[1] += g2 * d[1];
        if k >= 3 {
            let a3 = a[2];
            let g3 = gc[2];
            g0 += g3 * (d[2] * a3 + d[3] * a1 * a2 + d[4] / 6.0 * a1 * a1 * a1);
            ga[0] += g3 * (d[2] * a2 + 0.5 * d[3] * a1 * a1);
            ga[1] += g3 * d[2] * a1;
            ga[2] += g3 * d[1];
        }
    }
    g0
}

/// Truncated Taylor expansion along one seeded input variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    order: usize,
    coeffs: [f64; MAX_ORDER + 1],
}

impl Jet {
    fn check_order(order: usize) -> Result<()> {
        if order > MAX_ORDER {
            return Err(Error::Config(format!(
                "jet order {order} exceeds maximum {MAX_ORDER}"
            )));
        }
        Ok(())
    }

    /// Identity function of the seeded variable evaluated at `x`.
    pub fn seed(x: f64, order: usize) -> Result<Self> {
        Self::check_order(order)?;
        let mut coeffs = [0.0; MAX_ORDER + 1];
        coeffs[0] = x;
        if order >= 1 {
            coeffs[1] = 1.0;
        }
        Ok(Jet { order, coeffs })
    }

    pub fn constant(value: f64, order: usize) -> Result<Self> {
        Self::check_order(order)?;
        let mut coeffs = [0.0; MAX_ORDER + 1];
        coeffs[0] = value;
        Ok(Jet { order, coeffs })
    }

    /// Builds a jet from Taylor coefficients; the order is `coeffs.len() - 1`.
    pub fn from_coeffs(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() {
            return usage("a jet needs at least the order-0 coefficient");
        }
        Self::check_order(coeffs.len() - 1)?;
        let mut c = [0.0; MAX_ORDER + 1];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Ok(Jet {
            order: coeffs.len() - 1,
            coeffs: c,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficients `a_0..=a_order`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs[..=self.order]
    }

    /// `j`-th derivative with respect to the seeded variable, `a_j · j!`.
    ///
    /// Panics if `j` exceeds the jet order.
    pub fn deriv(&self, j: usize) -> f64 {
        assert!(j <= self.order, "derivative {j} beyond jet order {}", self.order);
        self.coeffs[j] * FACTORIAL[j]
    }

    /// Raw derivatives `[u, u', ..]` up to the jet order.
    pub fn derivs(&self) -> Vec<f64> {
        (0..=self.order).map(|j| self.deriv(j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs().iter().all(|c| c.is_finite())
    }

    pub fn activation(&self, f: Activation) -> Jet {
        let d = f.derivatives(self.coeffs[0]);
        let mut out = [0.0; MAX_ORDER + 1];
        out[0] = d[0];
        compose_forward(&d, &self.coeffs[1..=self.order], &mut out[1..=self.order]);
        Jet {
            order: self.order,
            coeffs: out,
        }
    }

    pub fn tanh(&self) -> Jet {
        self.activation(Activation::Tanh)
    }

    pub fn sigmoid(&self) -> Jet {
        self.activation(Activation::Sigmoid)
    }

    fn mul_unchecked(&self, other: &Jet) -> Jet {
        let mut out = [0.0; MAX_ORDER + 1];
        for (k, o) in out.iter_mut().enumerate().take(self.order + 1) {
            *o = (0..=k).map(|i| self.coeffs[i] * other.coeffs[k - i]).sum();
        }
        Jet {
            order: self.order,
            coeffs: out,
        }
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let mut out = [0.0; MAX_ORDER + 1];
        for (k, o) in out.iter_mut().enumerate().take(self.order + 1) {
            *o = f(self.coeffs[k], other.coeffs[k]);
        }
        Jet {
            order: self.order,
            coeffs: out,
        }
    }

    fn scale(&self, s: f64) -> Jet {
        let mut out = self.coeffs;
        for c in out.iter_mut() {
            *c *= s;
        }
        Jet {
            order: self.order,
            coeffs: out,
        }
    }
}

/// Binary jet operation tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
}

/// Checked binary arithmetic; multiplication is the truncated Cauchy product.
pub fn jet_arith(a: &Jet, b: &Jet, op: JetOp) -> Result<Jet> {
    if a.order != b.order {
        return usage(format!(
            "jet order mismatch: {} vs {}",
            a.order, b.order
        ));
    }
    Ok(match op {
        JetOp::Add => a.zip(b, |x, y| x + y),
        JetOp::Sub => a.zip(b, |x, y| x - y),
        JetOp::Mul => a.mul_unchecked(b),
    })
}

pub fn jet_seed(x: f64, order: usize) -> Result<Jet> {
    Jet::seed(x, order)
}

pub fn jet_activation(a: &Jet, f: Activation) -> Jet {
    a.activation(f)
}

// Operator forms panic on order mismatch; use `jet_arith` for the checked form.
impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        jet_arith(&self, &rhs, JetOp::Add).expect("jet order mismatch")
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        jet_arith(&self, &rhs, JetOp::Sub).expect("jet order mismatch")
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        jet_arith(&self, &rhs, JetOp::Mul).expect("jet order mismatch")
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

/// Arithmetic shared by `f64`, [`Jet`] and tape variables, so residual
/// operators and closed-form solutions are written once.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
}

impl Real for f64 {
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

impl Real for Jet {
    fn sin(self) -> Self {
        self.activation(Activation::Sin)
    }
    fn cos(self) -> Self {
        self.activation(Activation::Cos)
    }
    fn exp(self) -> Self {
        self.activation(Activation::Exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn seed_coefficients() {
        assert_eq!(Jet::seed(2.0, 3).unwrap().coeffs(), &[2.0, 1.0, 0.0, 0.0]);
        assert_eq!(Jet::seed(0.0, 1).unwrap().coeffs(), &[0.0, 1.0]);
        assert_eq!(Jet::seed(-1.0, 2).unwrap().coeffs(), &[-1.0, 1.0, 0.0]);
        assert!(matches!(Jet::seed(1.0, 4), Err(Error::Config(_))));
    }

    #[test]
    fn square_of_seed() {
        let x = Jet::seed(3.0, 2).unwrap();
        let sq = jet_arith(&x, &x, JetOp::Mul).unwrap();
        assert_eq!(sq.coeffs(), &[9.0, 6.0, 1.0]);
        assert_eq!(sq.derivs(), vec![9.0, 6.0, 2.0]);
    }

    #[test]
    fn identities() {
        let j = Jet::from_coeffs(&[0.3, -1.2, 0.7]).unwrap();
        let zero = Jet::constant(0.0, 2).unwrap();
        let one = Jet::constant(1.0, 2).unwrap();
        assert_eq!(jet_arith(&j, &zero, JetOp::Add).unwrap(), j);
        assert_eq!(jet_arith(&j, &one, JetOp::Mul).unwrap(), j);
    }

    #[test]
    fn order_mismatch_is_usage_error() {
        let a = Jet::seed(1.0, 2).unwrap();
        let b = Jet::seed(1.0, 3).unwrap();
        assert!(matches!(jet_arith(&a, &b, JetOp::Add), Err(Error::Usage(_))));
    }

    #[test]
    fn activation_derivatives_at_zero() {
        let x = Jet::seed(0.0, 3).unwrap();
        let t = x.activation(Activation::Tanh).derivs();
        assert_relative_eq!(t[1], 1.0);
        assert_relative_eq!(t[3], -2.0);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[2], 0.0);
        let s = x.activation(Activation::Sin).derivs();
        assert_eq!(s, vec![0.0, 1.0, 0.0, -1.0]);
        let g = x.activation(Activation::Sigmoid).derivs();
        assert_relative_eq!(g[0], 0.5);
        assert_relative_eq!(g[1], 0.25);
        assert_relative_eq!(g[2], 0.0);
        assert_relative_eq!(g[3], -0.125);
    }

    fn central(f: &dyn Fn(f64) -> f64, x: f64, h: f64, order: usize) -> f64 {
        match order {
            1 => (f(x + h) - f(x - h)) / (2.0 * h),
            2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
            _ => unreachable!(),
        }
    }

    #[test]
    fn fourth_derivative_tables_match_finite_differences() {
        for act in [
            Activation::Tanh,
            Activation::Sin,
            Activation::Cos,
            Activation::Sigmoid,
            Activation::Exp,
        ] {
            for &x in &[-1.3, -0.2, 0.0, 0.4, 1.7] {
                let d = act.derivatives(x);
                for n in 1..5 {
                    let prev = |z: f64| act.derivatives(z)[n - 1];
                    let fd = central(&prev, x, 1e-5, 1);
                    assert!(
                        (fd - d[n]).abs() < 1e-6 * (1.0 + d[n].abs()),
                        "{act} d{n} at {x}: {fd} vs {}",
                        d[n]
                    );
                }
            }
        }
    }

    #[test]
    fn adjoint_matches_forward_linearization() {
        let act = Activation::Tanh;
        let a = [0.3, -0.7, 0.4, 1.1];
        let gc = [0.5, -1.0, 2.0, 0.25];
        let eval = |a: &[f64; 4]| -> f64 {
            let d = act.derivatives(a[0]);
            let mut c = [0.0; 3];
            compose_forward(&d, &a[1..], &mut c);
            gc[0] * d[0] + gc[1] * c[0] + gc[2] * c[1] + gc[3] * c[2]
        };
        let d = act.derivatives(a[0]);
        let mut ga = [0.0; 3];
        let g0 = compose_adjoint(&d, &a[1..], &gc[1..], &mut ga) + gc[0] * d[1];
        let grads = [g0, ga[0], ga[1], ga[2]];
        for i in 0..4 {
            let mut p = a;
            let mut m = a;
            p[i] += 1e-6;
            m[i] -= 1e-6;
            let fd = (eval(&p) - eval(&m)) / 2e-6;
            assert_relative_eq!(fd, grads[i], max_relative = 1e-7, epsilon = 1e-9);
        }
    }

    #[test]
    fn composite_function_second_derivative() {
        // g(x) = sin(x) * tanh(x^2) + exp(x)
        let g = |x: f64| x.sin() * (x * x).tanh() + x.exp();
        let x = 0.37;
        let j = Jet::seed(x, 2).unwrap();
        let out = j.sin() * (j * j).tanh() + j.exp();
        assert_relative_eq!(out.deriv(0), g(x));
        assert_relative_eq!(out.deriv(1), central(&g, x, 1e-5, 1), max_relative = 1e-8);
        assert_relative_eq!(out.deriv(2), central(&g, x, 1e-4, 2), max_relative = 1e-6);
    }

    proptest! {
        #[test]
        fn order_zero_restriction_is_plain_arithmetic(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let ja = Jet::constant(a, 0).unwrap();
            let jb = Jet::constant(b, 0).unwrap();
            prop_assert_eq!((ja * jb).value(), a * b);
            prop_assert_eq!((ja + jb).value(), a + b);
            prop_assert_eq!((ja - jb).value(), a - b);
            for f in [Activation::Tanh, Activation::Sin, Activation::Sigmoid, Activation::Exp] {
                prop_assert_eq!(ja.activation(f).value(), f.apply(a));
            }
        }

        #[test]
        fn compositions_stay_finite(x in -5.0f64..5.0) {
            let j = Jet::seed(x, 3).unwrap();
            let out = (j.tanh() * j.sigmoid()).sin() + j * j * j;
            prop_assert!(out.is_finite());
        }
    }
}
