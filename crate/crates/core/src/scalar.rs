//! Two-mode scalar arithmetic.
//!
//! `Scalar` is either an exact big rational or a float carrying a worst-case
//! absolute error bound. Exact values stay exact under +, −, ×, ÷; any
//! operation touching a float value degrades to the float mode and propagates
//! the bound. Comparisons are decidable in exact mode and tolerance-aware
//! otherwise.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Machine epsilon used for per-operation rounding slop.
pub const EPS: f64 = f64::EPSILON;

/// Float value with a worst-case absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrFloat {
    pub value: f64,
    pub err: f64,
}

impl ErrFloat {
    pub fn exact(value: f64) -> Self {
        ErrFloat { value, err: 0.0 }
    }

    fn rounding(value: f64) -> f64 {
        // one ulp of the result, conservatively
        value.abs() * EPS
    }

    fn add(self, o: Self) -> Self {
        let v = self.value + o.value;
        ErrFloat { value: v, err: self.err + o.err + Self::rounding(v) }
    }

    fn sub(self, o: Self) -> Self {
        let v = self.value - o.value;
        ErrFloat { value: v, err: self.err + o.err + Self::rounding(v) }
    }

    fn mul(self, o: Self) -> Self {
        let v = self.value * o.value;
        let err = self.value.abs() * o.err + o.value.abs() * self.err + self.err * o.err
            + Self::rounding(v);
        ErrFloat { value: v, err }
    }

    fn div(self, o: Self) -> Self {
        let v = self.value / o.value;
        // |a/b - a'/b'| <= (|a| err_b + |b| err_a) / (|b| (|b| - err_b))
        let denom = o.value.abs() * (o.value.abs() - o.err).max(f64::MIN_POSITIVE);
        let err = (self.value.abs() * o.err + o.value.abs() * self.err) / denom
            + Self::rounding(v);
        ErrFloat { value: v, err }
    }
}

/// Three-way comparison outcome; `Indeterminate` only occurs in float mode
/// when the error bounds of the operands overlap the decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trichotomy {
    Less,
    Equal,
    Greater,
    Indeterminate,
}

/// Exact rational or error-bounded float.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Exact(BigRational),
    Float(ErrFloat),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::from_integer(1)
    }

    pub fn from_integer(n: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Exact scalar from a float's true (dyadic) rational value.
    pub fn exact_from_f64(v: f64) -> Option<Self> {
        BigRational::from_f64(v).map(Scalar::Exact)
    }

    pub fn float(v: f64) -> Self {
        Scalar::Float(ErrFloat::exact(v))
    }

    /// Parse "p/q", an integer, or a float literal. Rational forms produce
    /// exact scalars.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some((p, q)) = t.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| bad_number(text))?;
            let q: BigInt = q.trim().parse().map_err(|_| bad_number(text))?;
            if q.is_zero() {
                return Err(bad_number(text));
            }
            return Ok(Scalar::Exact(BigRational::new(p, q)));
        }
        if let Ok(n) = t.parse::<BigInt>() {
            return Ok(Scalar::Exact(BigRational::from_integer(n)));
        }
        let v: f64 = t.parse().map_err(|_| bad_number(text))?;
        Ok(Scalar::float(v))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Scalar::Float(e) => e.value,
        }
    }

    /// Absolute error bound of the represented value (0 in exact mode, up to
    /// the f64 conversion performed by the caller).
    pub fn err_bound(&self) -> f64 {
        match self {
            Scalar::Exact(_) => 0.0,
            Scalar::Float(e) => e.err,
        }
    }

    fn to_errfloat(&self) -> ErrFloat {
        match self {
            Scalar::Exact(r) => {
                let v = r.to_f64().unwrap_or(f64::NAN);
                // conversion may round once
                ErrFloat { value: v, err: ErrFloat::rounding(v) }
            }
            Scalar::Float(e) => *e,
        }
    }

    pub fn add(&self, o: &Scalar) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a + b),
            _ => Scalar::Float(self.to_errfloat().add(o.to_errfloat())),
        }
    }

    pub fn sub(&self, o: &Scalar) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a - b),
            _ => Scalar::Float(self.to_errfloat().sub(o.to_errfloat())),
        }
    }

    pub fn mul(&self, o: &Scalar) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a * b),
            _ => Scalar::Float(self.to_errfloat().mul(o.to_errfloat())),
        }
    }

    pub fn div(&self, o: &Scalar) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a / b),
            _ => Scalar::Float(self.to_errfloat().div(o.to_errfloat())),
        }
    }

    pub fn neg(&self) -> Scalar {
        Scalar::zero().sub(self)
    }

    pub fn powi(&self, n: u32) -> Scalar {
        let mut acc = Scalar::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.abs()),
            Scalar::Float(e) => Scalar::Float(ErrFloat { value: e.value.abs(), err: e.err }),
        }
    }

    /// Square root: stays exact when the argument is a perfect rational
    /// square, otherwise a float with one-rounding error.
    pub fn sqrt(&self) -> Scalar {
        if let Scalar::Exact(r) = self {
            if !r.is_negative() {
                let ns = r.numer().sqrt();
                let ds = r.denom().sqrt();
                if &(&ns * &ns) == r.numer() && &(&ds * &ds) == r.denom() {
                    return Scalar::Exact(BigRational::new(ns, ds));
                }
            }
        }
        let e = self.to_errfloat();
        let v = e.value.sqrt();
        let err = if v > 0.0 { e.err / (2.0 * v) + ErrFloat::rounding(v) } else { e.err.sqrt() };
        Scalar::Float(ErrFloat { value: v, err })
    }

    /// Compare against another scalar. Exact-vs-exact is decidable; any float
    /// operand makes the comparison tolerance-aware (`Equal` when the
    /// combined error bounds cover the difference — never `Indeterminate`,
    /// that variant is reserved for `trichotomy` callers that distinguish it).
    pub fn cmp_scalar(&self, o: &Scalar) -> Ordering {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp(b),
            _ => {
                let a = self.to_errfloat();
                let b = o.to_errfloat();
                let tol = a.err + b.err;
                let d = a.value - b.value;
                if d.abs() <= tol {
                    Ordering::Equal
                } else if d < 0.0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
        }
    }

    /// Trichotomy against another scalar, reporting `Indeterminate` when the
    /// float error bounds straddle the decision.
    pub fn trichotomy(&self, o: &Scalar) -> Trichotomy {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => match a.cmp(b) {
                Ordering::Less => Trichotomy::Less,
                Ordering::Equal => Trichotomy::Equal,
                Ordering::Greater => Trichotomy::Greater,
            },
            _ => {
                let a = self.to_errfloat();
                let b = o.to_errfloat();
                let tol = a.err + b.err;
                let d = a.value - b.value;
                if d > tol {
                    Trichotomy::Greater
                } else if d < -tol {
                    Trichotomy::Less
                } else if tol == 0.0 {
                    Trichotomy::Equal
                } else {
                    Trichotomy::Indeterminate
                }
            }
        }
    }

    /// Serialized form: "p/q" for exact values, shortest-roundtrip float
    /// otherwise.
    pub fn repr(&self) -> String {
        match self {
            Scalar::Exact(r) => {
                if r.is_integer() {
                    r.numer().to_string()
                } else {
                    format!("{}/{}", r.numer(), r.denom())
                }
            }
            Scalar::Float(e) => format!("{}", e.value),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.repr())
    }
}

fn bad_number(text: &str) -> Error {
    Error::InvalidArgument(format!("cannot parse scalar from {text:?}"))
}
