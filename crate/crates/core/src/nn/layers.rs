use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet2, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply<S: Scalar>(self, z: Jet2<S>) -> Jet2<S> {
        match self {
            Activation::Relu => z.relu(),
            Activation::Sigmoid => z.sigmoid(),
            Activation::Identity => z,
        }
    }
}

/// Radial basis function used as the first activation of a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RbfFamily {
    /// `ρ / (1 + γ(x−μ)²)`
    InverseQuadratic,
    /// `ρ·sqrt(1 + γ(x−μ)²)`
    Multiquadric,
}

impl RbfFamily {
    pub fn apply<S: Scalar>(self, rho: S, mu: S, gamma: S, u: Jet2<S>) -> Jet2<S> {
        let d = Jet2 { v: u.v - mu, ..u };
        let q = d.square().scale(gamma).add_scalar(gamma.constant_like(1.0));
        match self {
            RbfFamily::InverseQuadratic => Jet2::constant(rho) / q,
            RbfFamily::Multiquadric => q.sqrt().scale(rho),
        }
    }

    pub fn eval(self, rho: f64, mu: f64, gamma: f64, x: f64) -> f64 {
        self.apply(rho, mu, gamma, Jet2::constant(x)).v
    }
}

/// Offsets of one dense layer inside the flat parameter vector. Weights are
/// stored row-major, `fan_out × fan_in`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSpec {
    pub w: usize,
    pub b: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    pub activation: Activation,
}

impl DenseSpec {
    pub fn forward<S: Scalar>(&self, p: &[S], a: &[Jet2<S>]) -> Vec<Jet2<S>> {
        debug_assert_eq!(a.len(), self.fan_in);
        (0..self.fan_out)
            .map(|o| {
                let row = &p[self.w + o * self.fan_in..self.w + (o + 1) * self.fan_in];
                let mut z0 = p[self.b + o];
                let mut z1 = z0.constant_like(0.0);
                let mut z2 = z1;
                for (w, x) in row.iter().zip(a) {
                    z0 = z0 + *w * x.v;
                    z1 = z1 + *w * x.d1;
                    z2 = z2 + *w * x.d2;
                }
                self.activation.apply(Jet2 { v: z0, d1: z1, d2: z2 })
            })
            .collect()
    }
}

/// Offsets of the shared `(ρ, μ, γ)` of an elementwise RBF layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfSpec {
    pub family: RbfFamily,
    pub rho: usize,
    pub mu: usize,
    pub gamma: usize,
}

impl RbfSpec {
    pub fn forward<S: Scalar>(&self, p: &[S], u: Jet2<S>) -> Jet2<S> {
        self.family.apply(p[self.rho], p[self.mu], p[self.gamma], u)
    }
}

/// Optional RBF followed by a dense stack ending in a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub input_dim: usize,
    pub rbf: Option<RbfSpec>,
    pub layers: Vec<DenseSpec>,
}

impl BranchSpec {
    pub fn forward<S: Scalar>(&self, p: &[S], input: &[Jet2<S>]) -> Jet2<S> {
        debug_assert_eq!(input.len(), self.input_dim);
        let mut a: Vec<Jet2<S>> = match &self.rbf {
            Some(rbf) => input.iter().map(|u| rbf.forward(p, *u)).collect(),
            None => input.to_vec(),
        };
        for layer in &self.layers {
            a = layer.forward(p, &a);
        }
        a[0]
    }
}
