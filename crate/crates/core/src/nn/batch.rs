//! Batched forward/backward through a branch with jet-valued activations.
//!
//! The generic [`BranchSpec::forward`] over tape scalars records one node per
//! arithmetic operation, which is far too slow for full-grid training. This
//! module runs the same computation over a batch of points with the
//! vector-Jacobian products of each layer written out by hand, caching the
//! pre-activations. The forward values are bitwise identical to the generic
//! path because every activation is evaluated through the same code.

use super::layers::{Activation, BranchSpec, DenseSpec, RbfSpec};
use crate::autodiff::{sigmoid_derivs, Jet2, Tape};

/// Cached activations of one branch over a batch of `n` points.
#[derive(Debug, Clone)]
pub struct BranchTrace {
    n: usize,
    /// Raw inputs, `n × input_dim`.
    inputs: Vec<Jet2>,
    /// Input of each dense layer followed by its pre-activation.
    layer_in: Vec<Vec<Jet2>>,
    layer_z: Vec<Vec<Jet2>>,
    outputs: Vec<Jet2>,
}

impl BranchTrace {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn outputs(&self) -> &[Jet2] {
        &self.outputs
    }
}

fn dense_forward(layer: &DenseSpec, p: &[f64], a: &[Jet2], n: usize) -> (Vec<Jet2>, Vec<Jet2>) {
    let (fi, fo) = (layer.fan_in, layer.fan_out);
    let w = &p[layer.w..layer.w + fi * fo];
    let b = &p[layer.b..layer.b + fo];
    let mut z = Vec::with_capacity(n * fo);
    let mut y = Vec::with_capacity(n * fo);
    for row in a.chunks_exact(fi) {
        for o in 0..fo {
            let wr = &w[o * fi..(o + 1) * fi];
            let (mut z0, mut z1, mut z2) = (b[o], 0.0, 0.0);
            for (wi, x) in wr.iter().zip(row) {
                z0 += wi * x.v;
                z1 += wi * x.d1;
                z2 += wi * x.d2;
            }
            let zj = Jet2 { v: z0, d1: z1, d2: z2 };
            z.push(zj);
            y.push(layer.activation.apply(zj));
        }
    }
    (z, y)
}

/// `(f', f'', f''')` at `z`.
fn activation_derivs(act: Activation, z: f64) -> (f64, f64, f64) {
    match act {
        Activation::Identity => (1.0, 0.0, 0.0),
        Activation::Relu => (if z > 0.0 { 1.0 } else { 0.0 }, 0.0, 0.0),
        Activation::Sigmoid => {
            let (_, s1, s2, s3) = sigmoid_derivs(z);
            (s1, s2, s3)
        }
    }
}

fn dense_backward(
    layer: &DenseSpec,
    p: &[f64],
    a: &[Jet2],
    z: &[Jet2],
    y_bar: &[Jet2],
    grad: &mut [f64],
) -> Vec<Jet2> {
    let (fi, fo) = (layer.fan_in, layer.fan_out);
    let w = &p[layer.w..layer.w + fi * fo];
    let mut a_bar = vec![Jet2::constant(0.0); a.len()];
    let mut gw = vec![0.0; fi * fo];
    let mut gb = vec![0.0; fo];
    for ((row, zrow), (ybrow, abrow)) in a
        .chunks_exact(fi)
        .zip(z.chunks_exact(fo))
        .zip(y_bar.chunks_exact(fo).zip(a_bar.chunks_exact_mut(fi)))
    {
        for o in 0..fo {
            let zj = zrow[o];
            let yb = ybrow[o];
            let (f1, f2, f3) = activation_derivs(layer.activation, zj.v);
            let zb0 = yb.v * f1 + yb.d1 * f2 * zj.d1 + yb.d2 * (f3 * zj.d1 * zj.d1 + f2 * zj.d2);
            let zb1 = yb.d1 * f1 + 2.0 * yb.d2 * f2 * zj.d1;
            let zb2 = yb.d2 * f1;
            if zb0 == 0.0 && zb1 == 0.0 && zb2 == 0.0 {
                continue;
            }
            gb[o] += zb0;
            let wr = &w[o * fi..(o + 1) * fi];
            let gwr = &mut gw[o * fi..(o + 1) * fi];
            for i in 0..fi {
                let x = row[i];
                gwr[i] += zb0 * x.v + zb1 * x.d1 + zb2 * x.d2;
                let ab = &mut abrow[i];
                ab.v += wr[i] * zb0;
                ab.d1 += wr[i] * zb1;
                ab.d2 += wr[i] * zb2;
            }
        }
    }
    for (g, d) in grad[layer.w..layer.w + fi * fo].iter_mut().zip(&gw) {
        *g += d;
    }
    for (g, d) in grad[layer.b..layer.b + fo].iter_mut().zip(&gb) {
        *g += d;
    }
    a_bar
}

/// Pulls `bar` back through one elementwise RBF application on a small
/// scratch tape; returns the input adjoint and accumulates the three shape
/// parameters.
fn rbf_backward(rbf: &RbfSpec, p: &[f64], u: Jet2, bar: Jet2, grad: &mut [f64]) -> Jet2 {
    let tape = Tape::with_capacity(48);
    let rho = tape.var(p[rbf.rho]);
    let mu = tape.var(p[rbf.mu]);
    let gamma = tape.var(p[rbf.gamma]);
    let uj = Jet2 { v: tape.var(u.v), d1: tape.var(u.d1), d2: tape.var(u.d2) };
    let y = rbf.family.apply(rho, mu, gamma, uj);
    let adj = tape.backward_seeded(&[(y.v, bar.v), (y.d1, bar.d1), (y.d2, bar.d2)]);
    grad[rbf.rho] += adj.wrt(rho);
    grad[rbf.mu] += adj.wrt(mu);
    grad[rbf.gamma] += adj.wrt(gamma);
    Jet2 { v: adj.wrt(uj.v), d1: adj.wrt(uj.d1), d2: adj.wrt(uj.d2) }
}

/// Evaluates `branch` at `n` points whose inputs are laid out point-major in
/// `inputs` (`n × input_dim`).
pub fn branch_forward(branch: &BranchSpec, p: &[f64], inputs: &[Jet2]) -> BranchTrace {
    let dim = branch.input_dim;
    assert_eq!(inputs.len() % dim, 0, "input length is not a multiple of the branch width");
    let n = inputs.len() / dim;
    let mut a: Vec<Jet2> = match &branch.rbf {
        Some(rbf) => inputs.iter().map(|u| rbf.forward(p, *u)).collect(),
        None => inputs.to_vec(),
    };
    let mut layer_in = Vec::with_capacity(branch.layers.len());
    let mut layer_z = Vec::with_capacity(branch.layers.len());
    for layer in &branch.layers {
        let (z, y) = dense_forward(layer, p, &a, n);
        layer_in.push(std::mem::replace(&mut a, y));
        layer_z.push(z);
    }
    BranchTrace { n, inputs: inputs.to_vec(), layer_in, layer_z, outputs: a }
}

/// Outputs only, without keeping the cache.
pub fn branch_values(branch: &BranchSpec, p: &[f64], inputs: &[Jet2]) -> Vec<Jet2> {
    let dim = branch.input_dim;
    let n = inputs.len() / dim;
    let mut a: Vec<Jet2> = match &branch.rbf {
        Some(rbf) => inputs.iter().map(|u| rbf.forward(p, *u)).collect(),
        None => inputs.to_vec(),
    };
    for layer in &branch.layers {
        a = dense_forward(layer, p, &a, n).1;
    }
    a
}

/// Accumulates `Σ_k ⟨out_bar_k, ∂out_k/∂p⟩` into `grad` and returns the
/// adjoints of the raw inputs.
pub fn branch_backward(branch: &BranchSpec, p: &[f64], trace: &BranchTrace, out_bar: &[Jet2], grad: &mut [f64]) -> Vec<Jet2> {
    assert_eq!(out_bar.len(), trace.outputs.len());
    let mut bar = out_bar.to_vec();
    for (l, layer) in branch.layers.iter().enumerate().rev() {
        bar = dense_backward(layer, p, &trace.layer_in[l], &trace.layer_z[l], &bar, grad);
    }
    match &branch.rbf {
        Some(rbf) => trace
            .inputs
            .iter()
            .zip(&bar)
            .map(|(u, b)| {
                if b.v == 0.0 && b.d1 == 0.0 && b.d2 == 0.0 {
                    Jet2::constant(0.0)
                } else {
                    rbf_backward(rbf, p, *u, *b, grad)
                }
            })
            .collect(),
        None => bar,
    }
}
