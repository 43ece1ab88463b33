//! Second-order truncated Taylor jets in one seeded input.
//!
//! A `Jet2 { v, d1, d2 }` carries `f`, `df/dt` and `d²f/dt²` for a single
//! designated input `t`. The component type is any [`Scalar`], so jets can
//! ride on a tape to get parameter gradients of time derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::{sigmoid, Scalar};
use super::AutodiffError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2<S = f64> {
    pub v: S,
    pub d1: S,
    pub d2: S,
}

/// Unary elementary functions with order-2 propagation rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetFn {
    Neg,
    Sqrt,
    Exp,
    Relu,
    Sigmoid,
    Square,
}

/// Binary elementary operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Mul,
    Div,
}

impl<S: Scalar> Jet2<S> {
    pub fn new(v: S, d1: S, d2: S) -> Self {
        Self { v, d1, d2 }
    }

    /// Constant lift: both derivatives vanish.
    pub fn constant(v: S) -> Self {
        let z = v.constant_like(0.0);
        Self { v, d1: z, d2: z }
    }

    /// The seeded input itself: `d1 = 1`, `d2 = 0`.
    pub fn seed(v: S) -> Self {
        Self { v, d1: v.constant_like(1.0), d2: v.constant_like(0.0) }
    }

    pub fn scale(self, c: S) -> Self {
        Self { v: self.v * c, d1: self.d1 * c, d2: self.d2 * c }
    }

    pub fn add_scalar(self, c: S) -> Self {
        Self { v: self.v + c, ..self }
    }

    pub fn square(self) -> Self {
        let Self { v, d1, d2 } = self;
        Self { v: v * v, d1: (v * d1) * 2.0, d2: (d1 * d1 + v * d2) * 2.0 }
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        let half_inv = r.constant_like(0.5) / r;
        // r'' = -1/(4 r^3) = -(half_inv)^2 / r
        let d1 = self.d1 * half_inv;
        let d2 = self.d2 * half_inv - self.d1 * self.d1 * (half_inv * half_inv / r);
        Self { v: r, d1, d2 }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        Self { v: e, d1: e * self.d1, d2: e * (self.d1 * self.d1 + self.d2) }
    }

    /// Inactive region (including exactly 0) propagates the zero jet.
    pub fn relu(self) -> Self {
        if self.v.value() > 0.0 {
            Self { v: self.v.relu(), ..self }
        } else {
            let z = self.v.relu();
            Self { v: z, d1: z * 0.0, d2: z * 0.0 }
        }
    }

    pub fn sigmoid(self) -> Self {
        let s = self.v.sigmoid();
        let s1 = s * (s.constant_like(1.0) - s);
        let s2 = s1 * (s.constant_like(1.0) - s * 2.0);
        Self { v: s, d1: s1 * self.d1, d2: s2 * (self.d1 * self.d1) + s1 * self.d2 }
    }

    pub fn apply(self, f: JetFn) -> Self {
        match f {
            JetFn::Neg => -self,
            JetFn::Sqrt => self.sqrt(),
            JetFn::Exp => self.exp(),
            JetFn::Relu => self.relu(),
            JetFn::Sigmoid => self.sigmoid(),
            JetFn::Square => self.square(),
        }
    }
}

/// Checked order-2 propagation of a unary elementary function.
pub fn jet_apply(f: JetFn, x: Jet2<f64>) -> Result<Jet2<f64>, AutodiffError> {
    if f == JetFn::Sqrt && x.v <= 0.0 {
        return Err(AutodiffError::Domain { op: "sqrt", value: x.v });
    }
    Ok(x.apply(f))
}

/// Checked order-2 propagation of a binary elementary operation.
pub fn jet_apply2(op: JetOp, a: Jet2<f64>, b: Jet2<f64>) -> Result<Jet2<f64>, AutodiffError> {
    match op {
        JetOp::Add => Ok(a + b),
        JetOp::Mul => Ok(a * b),
        JetOp::Div if b.v == 0.0 => Err(AutodiffError::Domain { op: "div", value: b.v }),
        JetOp::Div => Ok(a / b),
    }
}

impl<S: Scalar> Add for Jet2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

impl<S: Scalar> Sub for Jet2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }
}

impl<S: Scalar> Mul for Jet2<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + (self.d1 * o.d1) * 2.0 + self.v * o.d2,
        }
    }
}

impl<S: Scalar> Div for Jet2<S> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.v / o.v;
        let q1 = (self.d1 - q * o.d1) / o.v;
        let q2 = (self.d2 - (q1 * o.d1) * 2.0 - q * o.d2) / o.v;
        Self { v: q, d1: q1, d2: q2 }
    }
}

impl<S: Scalar> Neg for Jet2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { v: -self.v, d1: -self.d1, d2: -self.d2 }
    }
}

/// Sigmoid derivatives `(s, s', s'', s''')` at `z`, used by the fused
/// batch backward pass.
#[inline]
pub(crate) fn sigmoid_derivs(z: f64) -> (f64, f64, f64, f64) {
    let s = sigmoid(z);
    let s1 = s * (1.0 - s);
    let s2 = s1 * (1.0 - 2.0 * s);
    let s3 = s1 * (1.0 - 6.0 * s + 6.0 * s * s);
    (s, s1, s2, s3)
}
