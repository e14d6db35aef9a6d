//! Scalar abstraction shared by plain `f64` evaluation and forward-mode
//! automatic differentiation.
//!
//! Every field in the crate (metric components, potentials, symmetry
//! generators, coordinate maps) is written once against [`Scalar`] and can
//! then be evaluated either at real points or at [`Dual`] points carrying a
//! gradient with respect to all `n + 2` coordinates.
//!
//! A [`Dual`] with an empty gradient is a constant; it combines with duals
//! of any seed dimension. Combining two non-constant duals of different
//! dimensions is a bug and panics.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use smallvec::SmallVec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalarError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{op} is undefined at {arg}")]
    Domain { op: &'static str, arg: f64 },
}

pub type ScalarResult<T> = Result<T, ScalarError>;

/// Exponents up to this magnitude that are exact integers go through `powi`.
const MAX_INTEGER_EXPONENT: f64 = 1024.0;

pub trait Scalar:
    Clone
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;

    /// Real part.
    fn value(&self) -> f64;

    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn tanh(&self) -> Self;
    fn abs(&self) -> Self;
    fn powi(&self, k: i32) -> Self;

    /// Natural logarithm; errors for non-positive arguments.
    fn ln(&self) -> ScalarResult<Self>;

    /// Square root; errors for non-positive arguments.
    fn sqrt(&self) -> ScalarResult<Self>;

    /// `self ^ exponent`. Integer-valued exponents use repeated
    /// multiplication so negative bases are allowed there.
    fn pow(&self, exponent: &Self) -> ScalarResult<Self>;

    fn is_finite(&self) -> bool;

    fn scale(&self, c: f64) -> Self {
        self.clone() * Self::constant(c)
    }
}

fn integer_exponent(e: f64) -> Option<i32> {
    (e.fract() == 0.0 && e.abs() <= MAX_INTEGER_EXPONENT).then_some(e as i32)
}

fn check_positive(op: &'static str, arg: f64) -> ScalarResult<()> {
    if arg > 0.0 {
        Ok(())
    } else {
        Err(ScalarError::Domain { op, arg })
    }
}

/// Shared real-part rule for `pow` so that `f64` and `Dual` agree bit for bit.
fn pow_value(base: f64, exponent: f64) -> ScalarResult<f64> {
    match integer_exponent(exponent) {
        Some(k) => Ok(base.powi(k)),
        None if base < 0.0 => Err(ScalarError::Domain {
            op: "pow",
            arg: base,
        }),
        None => Ok(base.powf(exponent)),
    }
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        f64::cosh(*self)
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn powi(&self, k: i32) -> Self {
        f64::powi(*self, k)
    }
    fn ln(&self) -> ScalarResult<Self> {
        check_positive("log", *self)?;
        Ok(f64::ln(*self))
    }
    fn sqrt(&self) -> ScalarResult<Self> {
        check_positive("sqrt", *self)?;
        Ok(f64::sqrt(*self))
    }
    fn pow(&self, exponent: &Self) -> ScalarResult<Self> {
        pow_value(*self, *exponent)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
}

type Grad = SmallVec<[f64; 6]>;

/// First-order dual number `value + Σ grad_k ε_k`.
#[derive(Clone, PartialEq)]
pub struct Dual {
    value: f64,
    grad: Grad,
}

impl fmt::Debug for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dual({}, {:?})", self.value, self.grad.as_slice())
    }
}

impl Dual {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            grad: Grad::new(),
        }
    }

    /// Independent variable `index` out of `dim` seeds.
    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        assert!(
            index < dim,
            "seed index {index} out of range for dimension {dim}"
        );
        let mut grad: Grad = SmallVec::from_elem(0.0, dim);
        grad[index] = 1.0;
        Self { value, grad }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Gradient components; empty for constants.
    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn partial(&self, k: usize) -> f64 {
        self.grad.get(k).copied().unwrap_or(0.0)
    }

    /// Gradient padded to `dim` components.
    pub fn gradient(&self, dim: usize) -> Vec<f64> {
        if self.grad.is_empty() {
            vec![0.0; dim]
        } else {
            assert_eq!(self.grad.len(), dim, "dual dimension mismatch");
            self.grad.to_vec()
        }
    }

    pub fn is_constant(&self) -> bool {
        self.grad.iter().all(|g| *g == 0.0)
    }

    /// Chain rule for a unary function with derivative `d` at `self.value`.
    fn chain(&self, value: f64, d: f64) -> Self {
        Self {
            value,
            grad: self.grad.iter().map(|g| d * g).collect(),
        }
    }

    /// `a * self.grad + b * other.grad`, broadcasting constants.
    fn combine(&self, a: f64, other: &Self, b: f64) -> Grad {
        match (self.grad.is_empty(), other.grad.is_empty()) {
            (true, true) => Grad::new(),
            (false, true) => self.grad.iter().map(|g| a * g).collect(),
            (true, false) => other.grad.iter().map(|g| b * g).collect(),
            (false, false) => {
                assert_eq!(self.grad.len(), other.grad.len(), "dual dimension mismatch");
                self.grad
                    .iter()
                    .zip(&other.grad)
                    .map(|(x, y)| a * x + b * y)
                    .collect()
            }
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        let grad = self.combine(1.0, &rhs, 1.0);
        Dual {
            value: self.value + rhs.value,
            grad,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        let grad = self.combine(1.0, &rhs, -1.0);
        Dual {
            value: self.value - rhs.value,
            grad,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        let grad = self.combine(rhs.value, &rhs, self.value);
        Dual {
            value: self.value * rhs.value,
            grad,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let value = self.value / rhs.value;
        let inv = 1.0 / rhs.value;
        let grad = self.combine(inv, &rhs, -value * inv);
        Dual { value, grad }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            value: -self.value,
            grad: self.grad.iter().map(|g| -g).collect(),
        }
    }
}

impl Scalar for Dual {
    fn constant(c: f64) -> Self {
        Dual::constant(c)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn sin(&self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }
    fn tan(&self) -> Self {
        let t = self.value.tan();
        self.chain(t, 1.0 + t * t)
    }
    fn sinh(&self) -> Self {
        self.chain(self.value.sinh(), self.value.cosh())
    }
    fn cosh(&self) -> Self {
        self.chain(self.value.cosh(), self.value.sinh())
    }
    fn tanh(&self) -> Self {
        let t = self.value.tanh();
        self.chain(t, 1.0 - t * t)
    }
    fn abs(&self) -> Self {
        let sign = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.chain(self.value.abs(), sign)
    }
    fn powi(&self, k: i32) -> Self {
        let d = if k == 0 {
            0.0
        } else {
            f64::from(k) * self.value.powi(k - 1)
        };
        self.chain(self.value.powi(k), d)
    }
    fn ln(&self) -> ScalarResult<Self> {
        check_positive("log", self.value)?;
        Ok(self.chain(self.value.ln(), 1.0 / self.value))
    }
    fn sqrt(&self) -> ScalarResult<Self> {
        check_positive("sqrt", self.value)?;
        let s = self.value.sqrt();
        Ok(self.chain(s, 0.5 / s))
    }
    fn pow(&self, exponent: &Self) -> ScalarResult<Self> {
        let value = pow_value(self.value, exponent.value)?;
        let base_d = match integer_exponent(exponent.value) {
            Some(0) => 0.0,
            Some(k) => f64::from(k) * self.value.powi(k - 1),
            None => exponent.value * self.value.powf(exponent.value - 1.0),
        };
        if exponent.is_constant() {
            return Ok(self.chain(value, base_d));
        }
        check_positive("pow with variable exponent", self.value)?;
        let exp_d = value * self.value.ln();
        Ok(Dual {
            value,
            grad: self.combine(base_d, exponent, exp_d),
        })
    }
    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }
    fn scale(&self, c: f64) -> Self {
        self.chain(self.value * c, c)
    }
}

/// Seed a point: entry `j` becomes a dual with gradient `e_j`.
pub fn seed(point: &[f64]) -> ScalarResult<Vec<Dual>> {
    if point.iter().any(|p| !p.is_finite()) {
        return Err(ScalarError::NonFinite("seed point"));
    }
    let dim = point.len();
    Ok(point
        .iter()
        .enumerate()
        .map(|(j, &p)| Dual::variable(p, j, dim))
        .collect())
}

/// Anything evaluable at a coordinate tuple over an arbitrary [`Scalar`].
pub trait ScalarField {
    fn eval<S: Scalar>(&self, coords: &[S]) -> crate::Result<S>;
}

/// Value and forward-mode gradient of `f` at `point`.
pub fn value_and_gradient<F: ScalarField + ?Sized>(
    f: &F,
    point: &[f64],
) -> crate::Result<(f64, Vec<f64>)> {
    let seeded = seed(point)?;
    let out = f.eval(&seeded)?;
    if !Scalar::is_finite(&out) {
        return Err(ScalarError::NonFinite("gradient").into());
    }
    Ok((out.value(), out.gradient(point.len())))
}

pub fn gradient<F: ScalarField + ?Sized>(f: &F, point: &[f64]) -> crate::Result<Vec<f64>> {
    value_and_gradient(f, point).map(|(_, g)| g)
}
