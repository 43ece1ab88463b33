//! Loss components and their gradients.
//!
//! Two evaluators share one definition. [`total_loss_with`] is generic over
//! the scalar type and serves both plain evaluation and tape gradients on
//! small models. [`loss_and_grad`] computes the same quantity with the
//! batched branch kernels and is what the trainer uses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{signum0, Jet2, Scalar, Tape};
use crate::dataset::FieldDataset;
use crate::error::{Error, Result};
use crate::nn::{branch_backward, branch_forward, BranchTrace, IPinnModel, KernelHead};
use crate::operator::{nonlocal_rhs_with, trapezoid_weight, truncation_halfwidth, Boundary, KernelVector, SignConvention};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub pde: f64,
    pub data: f64,
    pub sym: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { pde: 1.0, data: 1.0, sym: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.pde, self.data, self.sym];
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::config("loss weights must be finite and nonnegative"));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::config("at least one loss weight must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataNorm {
    #[default]
    Two,
    Sup,
}

/// Where the residual's kernel comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelMode {
    /// The model's kernel head (network or parametric).
    Model,
    /// A fixed kernel; only the field branch is fitted.
    Fixed(KernelVector),
}

/// Everything the loss needs besides the parameters.
#[derive(Debug, Clone)]
pub struct LossProblem<'a> {
    pub dataset: &'a FieldDataset,
    pub kernel: KernelMode,
    pub sign: SignConvention,
    pub boundary: Boundary,
    pub weights: LossWeights,
    pub data_norm: DataNorm,
    /// Also penalize `θ(x,t) − θ(−x,t)`.
    pub sym_on_theta: bool,
}

/// Components of the total loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<S = f64> {
    pub pde: S,
    pub data: S,
    pub sym: S,
    pub penalty: S,
    pub total: S,
}

impl<S: Scalar> LossParts<S> {
    pub fn values(&self) -> LossParts<f64> {
        LossParts {
            pde: self.pde.value(),
            data: self.data.value(),
            sym: self.sym.value(),
            penalty: self.penalty.value(),
            total: self.total.value(),
        }
    }
}

impl LossParts<f64> {
    pub fn is_finite(&self) -> bool {
        [self.pde, self.data, self.sym, self.penalty, self.total].iter().all(|v| v.is_finite())
    }
}

/// `sqrt(Σ r²)`; its gradient at the zero vector is taken as 0.
pub fn norm2<S: Scalar>(r: &[S], zero: S) -> S {
    let mut acc = zero;
    for v in r {
        acc = acc + v.square();
    }
    if acc.value() == 0.0 {
        zero
    } else {
        acc.sqrt()
    }
}

/// `max |e|`; the gradient goes to the first entry attaining the maximum.
pub fn sup_norm<S: Scalar>(e: &[S], zero: S) -> S {
    let mut best = zero;
    for v in e {
        let a = v.abs();
        if a.value() > best.value() {
            best = a;
        }
    }
    best
}

pub fn norm1<S: Scalar>(e: &[S], zero: S) -> S {
    let mut acc = zero;
    for v in e {
        acc = acc + v.abs();
    }
    acc
}

/// `‖r‖₂` over the residual samples.
pub fn loss_pde(residuals: &[f64]) -> f64 {
    norm2(residuals, 0.0)
}

/// Chosen norm of `θ_model − θ_data`.
pub fn loss_data(errors: &[f64], norm: DataNorm) -> f64 {
    match norm {
        DataNorm::Two => norm2(errors, 0.0),
        DataNorm::Sup => sup_norm(errors, 0.0),
    }
}

/// `Σ |f(x) − f(−x)|` over mirrored pairs `(f(x), f(−x))`.
pub fn loss_sym(pairs: &[(f64, f64)]) -> f64 {
    pairs.iter().map(|(a, b)| (a - b).abs()).sum()
}

/// `w_pde L_pde + w_data L_data + w_sym L_sym + penalty`.
pub fn combine<S: Scalar>(w: &LossWeights, pde: S, data: S, sym: S, penalty: S) -> LossParts<S> {
    let total = pde * w.pde + data * w.data + sym * w.sym + penalty;
    LossParts { pde, data, sym, penalty, total }
}

/// Pairs of grid indices `(i, i')` with `x_{i'} = −x_i`, `x_i > 0`, up to
/// rounding of the node coordinates. The kernel symmetry term evaluates
/// `C(x_i)` against `C(−x_i)` with exact negation.
pub fn mirror_pairs(dataset: &FieldDataset) -> Vec<(usize, usize)> {
    let g = dataset.grid();
    (0..g.n_x)
        .filter(|&i| g.x(i) > 0.0)
        .filter_map(|i| g.x_index(-g.x(i)).map(|j| (i, j)))
        .collect()
}

impl LossProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if let KernelMode::Fixed(k) = &self.kernel {
            let h = self.dataset.grid().h();
            if (k.h - h).abs() > 1e-12 * h {
                return Err(Error::config("fixed kernel step does not match the dataset grid"));
            }
        }
        Ok(())
    }

    fn half_width(&self, model: &IPinnModel) -> Result<usize> {
        match &self.kernel {
            KernelMode::Model => truncation_halfwidth(model.kernel_delta(), self.dataset.grid().h()),
            KernelMode::Fixed(k) => Ok(k.half_width()),
        }
    }
}

/// Total loss over the time rows `rows`, generic over the scalar type.
pub fn total_loss_with<S: Scalar>(
    model: &IPinnModel,
    p: &[S],
    problem: &LossProblem<'_>,
    rows: &[usize],
) -> Result<LossParts<S>> {
    let ds = problem.dataset;
    let g = ds.grid();
    let h = g.h();
    let zero = p[0].constant_like(0.0);
    let m_max = problem.half_width(model)?;
    let coeffs: Vec<S> = match &problem.kernel {
        KernelMode::Model => (0..=m_max)
            .map(|m| model.kernel_at(p, m as f64 * h) * (trapezoid_weight(m, m_max) * h))
            .collect(),
        KernelMode::Fixed(k) => k.coefficients().iter().map(|c| zero.constant_like(*c)).collect(),
    };
    let features: Vec<S> = (0..g.n_x).map(|i| model.theta_feature(p, g.x(i))).collect();
    let pairs = mirror_pairs(ds);
    let s = problem.sign.factor();
    let mut residuals = Vec::with_capacity(rows.len() * g.n_x);
    let mut errors = Vec::with_capacity(rows.len() * g.n_x);
    let mut sym_terms = Vec::new();
    for &j in rows {
        let t = zero.constant_like(g.t(j));
        let jets: Vec<Jet2<S>> =
            features.iter().enumerate().map(|(i, u)| model.theta_from_feature(p, *u, g.x(i), Jet2::seed(t))).collect();
        let values: Vec<S> = jets.iter().map(|q| q.v).collect();
        let q = nonlocal_rhs_with(&values, &coeffs, problem.boundary);
        for (i, jet) in jets.iter().enumerate() {
            residuals.push(jet.d2 - q[i] * s);
            errors.push(jet.v - ds.at(i, j));
        }
        if problem.sym_on_theta {
            sym_terms.extend(pairs.iter().map(|&(a, b)| values[a] - values[b]));
        }
    }
    for &(a, _) in &pairs {
        let x = g.x(a);
        sym_terms.push(model.kernel_at(p, x) - model.kernel_at(p, -x));
    }
    let pde = norm2(&residuals, zero);
    let data = match problem.data_norm {
        DataNorm::Two => norm2(&errors, zero),
        DataNorm::Sup => sup_norm(&errors, zero),
    };
    let sym = norm1(&sym_terms, zero);
    let penalty = model.regularization_penalty_with(p);
    let parts = combine(&problem.weights, pde, data, sym, penalty);
    if !parts.total.value().is_finite() {
        return Err(Error::Divergence(format!("non-finite loss {:?}", parts.values())));
    }
    Ok(parts)
}

/// Loss and gradient through the generic path on a fresh tape. Intended for
/// small models and cross-checks.
pub fn tape_loss_and_grad(model: &IPinnModel, problem: &LossProblem<'_>, rows: &[usize]) -> Result<(LossParts, Vec<f64>)> {
    let tape = Tape::new();
    let p = tape.params(model.params());
    let parts = total_loss_with(model, &p, problem, rows)?;
    let grad = tape.grad(parts.total)?;
    Ok((parts.values(), grad))
}

struct RowForward {
    trace: BranchTrace,
    residual: Vec<f64>,
    error: Vec<f64>,
}

struct RowBackward {
    grad: Vec<f64>,
    feature_bar: Vec<f64>,
    coeff_bar: Vec<f64>,
}

/// Kernel values `C(ξ)` at the requested offsets and a way to push
/// adjoints back into the parameters.
enum KernelEval {
    Network { trace: BranchTrace },
    Parametric { gamma: f64, sigma: f64, gs: usize, ss: usize, xs: Vec<f64> },
}

impl KernelEval {
    fn new(model: &IPinnModel, xs: &[f64]) -> Self {
        let p = model.params();
        match model.head() {
            KernelHead::Network(branch) => {
                let inputs: Vec<Jet2> = xs.iter().map(|&x| Jet2::constant(x)).collect();
                KernelEval::Network { trace: branch_forward(branch, p, &inputs) }
            }
            &KernelHead::Parametric { gamma_star, sigma_star } => KernelEval::Parametric {
                gamma: p[gamma_star],
                sigma: p[sigma_star],
                gs: gamma_star,
                ss: sigma_star,
                xs: xs.to_vec(),
            },
        }
    }

    fn values(&self, model: &IPinnModel) -> Vec<f64> {
        match self {
            KernelEval::Network { trace } => trace.outputs().iter().map(|j| j.v).collect(),
            KernelEval::Parametric { xs, .. } => xs.iter().map(|&x| model.kernel_at(model.params(), x)).collect(),
        }
    }

    fn backward(&self, model: &IPinnModel, bars: &[f64], grad: &mut [f64]) {
        match self {
            KernelEval::Network { trace } => {
                let KernelHead::Network(branch) = model.head() else { unreachable!() };
                let jb: Vec<Jet2> = bars.iter().map(|&b| Jet2::constant(b)).collect();
                branch_backward(branch, model.params(), trace, &jb, grad);
            }
            KernelEval::Parametric { gamma, sigma, gs, ss, xs } => {
                for (&x, &b) in xs.iter().zip(bars) {
                    if b == 0.0 {
                        continue;
                    }
                    let e = (-(x * x) * sigma).exp();
                    grad[*gs] += b * e;
                    grad[*ss] -= b * gamma * x * x * e;
                }
            }
        }
    }
}

/// Total loss and its gradient with respect to every parameter, using the
/// batched branch kernels. Rows are processed independently and reduced in
/// row order, so the result does not depend on the thread count.
pub fn loss_and_grad(model: &IPinnModel, problem: &LossProblem<'_>, rows: &[usize]) -> Result<(LossParts, Vec<f64>)> {
    let ds = problem.dataset;
    let g = ds.grid();
    let (n_x, h) = (g.n_x, g.h());
    let p = model.params();
    let m_max = problem.half_width(model)?;
    let pairs = mirror_pairs(ds);
    let network = matches!(model.head(), KernelHead::Network(_));
    let model_kernel = matches!(problem.kernel, KernelMode::Model);

    // Kernel head inputs: stencil offsets, grid nodes (as field features),
    // then the mirrored symmetry points.
    let mut kx: Vec<f64> = Vec::new();
    let stencil_at = 0;
    if model_kernel {
        kx.extend((0..=m_max).map(|m| m as f64 * h));
    }
    let feature_at = kx.len();
    if network {
        kx.extend(g.xs());
    }
    let sym_at = kx.len();
    for &(a, _) in &pairs {
        kx.push(g.x(a));
        kx.push(-g.x(a));
    }
    let kernel = KernelEval::new(model, &kx);
    let kv = kernel.values(model);

    let coeffs: Vec<f64> = match &problem.kernel {
        KernelMode::Model => (0..=m_max).map(|m| kv[stencil_at + m] * (trapezoid_weight(m, m_max) * h)).collect(),
        KernelMode::Fixed(k) => k.coefficients(),
    };
    let features: Vec<f64> = if network { kv[feature_at..feature_at + n_x].to_vec() } else { g.xs() };
    let s = problem.sign.factor();
    let theta = model.theta_branch();

    let forward: Vec<RowForward> = rows
        .par_iter()
        .map(|&j| {
            let t = g.t(j);
            let mut inputs: Vec<Jet2> = Vec::with_capacity(n_x * theta.input_dim);
            for (i, &u) in features.iter().enumerate() {
                inputs.extend([Jet2::constant(u), Jet2::seed(t)]);
                if theta.input_dim == 3 {
                    inputs.push(Jet2::constant(g.x(i)));
                }
            }
            let trace = branch_forward(theta, p, &inputs);
            let values: Vec<f64> = trace.outputs().iter().map(|q| q.v).collect();
            let q = nonlocal_rhs_with(&values, &coeffs, problem.boundary);
            let residual = trace.outputs().iter().zip(&q).map(|(jet, qi)| jet.d2 - qi * s).collect();
            let error = (0..n_x).map(|i| values[i] - ds.at(i, j)).collect();
            RowForward { trace, residual, error }
        })
        .collect();

    let zero = 0.0;
    let all_r: Vec<f64> = forward.iter().flat_map(|r| r.residual.iter().copied()).collect();
    let all_e: Vec<f64> = forward.iter().flat_map(|r| r.error.iter().copied()).collect();
    let pde = norm2(&all_r, zero);
    let data = match problem.data_norm {
        DataNorm::Two => norm2(&all_e, zero),
        DataNorm::Sup => sup_norm(&all_e, zero),
    };
    let mut sym_terms: Vec<f64> = Vec::new();
    if problem.sym_on_theta {
        for row in &forward {
            let out = row.trace.outputs();
            sym_terms.extend(pairs.iter().map(|&(a, b)| out[a].v - out[b].v));
        }
    }
    let kernel_sym: Vec<f64> = (0..pairs.len()).map(|k| kv[sym_at + 2 * k] - kv[sym_at + 2 * k + 1]).collect();
    sym_terms.extend(&kernel_sym);
    let sym = norm1(&sym_terms, zero);
    let penalty = model.regularization_penalty();
    let parts = combine(&problem.weights, pde, data, sym, penalty);
    if !parts.is_finite() {
        return Err(Error::Divergence(format!("non-finite loss {parts:?}")));
    }

    let w = problem.weights;
    let r_scale = if pde == 0.0 { 0.0 } else { w.pde / pde };
    let e_bar: Vec<f64> = match problem.data_norm {
        DataNorm::Two => {
            let sc = if data == 0.0 { 0.0 } else { w.data / data };
            all_e.iter().map(|e| e * sc).collect()
        }
        DataNorm::Sup => {
            let mut bar = vec![0.0; all_e.len()];
            let mut best = 0.0;
            let mut arg = None;
            for (k, e) in all_e.iter().enumerate() {
                if e.abs() > best {
                    best = e.abs();
                    arg = Some(k);
                }
            }
            if let Some(k) = arg {
                bar[k] = w.data * signum0(all_e[k]);
            }
            bar
        }
    };

    let backward: Vec<RowBackward> = forward
        .par_iter()
        .enumerate()
        .map(|(k, row)| {
            let mut grad = vec![0.0; p.len()];
            let out = row.trace.outputs();
            let mut vbar: Vec<f64> = e_bar[k * n_x..(k + 1) * n_x].to_vec();
            let d2bar: Vec<f64> = row.residual.iter().map(|r| r * r_scale).collect();
            // r = d2 − s q with q_i = Σ_m c_|m| (v_i − v_{i+m})
            let qbar: Vec<f64> = d2bar.iter().map(|b| -s * b).collect();
            let mut coeff_bar = vec![0.0; coeffs.len()];
            let n = n_x as isize;
            let mm = coeffs.len() as isize - 1;
            for i in 0..n {
                let qb = qbar[i as usize];
                if qb == 0.0 {
                    continue;
                }
                let vi = out[i as usize].v;
                for m in -mm..=mm {
                    if m == 0 {
                        continue;
                    }
                    let c = coeffs[m.unsigned_abs()];
                    let j = i + m;
                    let nb = if (0..n).contains(&j) {
                        Some(j as usize)
                    } else {
                        match problem.boundary {
                            Boundary::Periodic => Some(j.rem_euclid(n) as usize),
                            Boundary::ZeroPad => None,
                        }
                    };
                    let vj = nb.map_or(0.0, |j| out[j].v);
                    coeff_bar[m.unsigned_abs()] += qb * (vi - vj);
                    vbar[i as usize] += qb * c;
                    if let Some(j) = nb {
                        vbar[j] -= qb * c;
                    }
                }
            }
            if problem.sym_on_theta && w.sym != 0.0 {
                for &(a, b) in &pairs {
                    let sg = w.sym * signum0(out[a].v - out[b].v);
                    vbar[a] += sg;
                    vbar[b] -= sg;
                }
            }
            let out_bar: Vec<Jet2> =
                vbar.iter().zip(&d2bar).map(|(&v, &d2)| Jet2 { v, d1: 0.0, d2 }).collect();
            let in_bar = branch_backward(theta, p, &row.trace, &out_bar, &mut grad);
            let feature_bar = in_bar.iter().step_by(theta.input_dim).map(|b| b.v).collect();
            RowBackward { grad, feature_bar, coeff_bar }
        })
        .collect();

    let mut grad = vec![0.0; p.len()];
    let mut feature_bar = vec![0.0; n_x];
    let mut coeff_bar = vec![0.0; coeffs.len()];
    for row in &backward {
        for (a, b) in grad.iter_mut().zip(&row.grad) {
            *a += b;
        }
        for (a, b) in feature_bar.iter_mut().zip(&row.feature_bar) {
            *a += b;
        }
        for (a, b) in coeff_bar.iter_mut().zip(&row.coeff_bar) {
            *a += b;
        }
    }

    let mut kbar = vec![0.0; kx.len()];
    if model_kernel {
        for m in 0..=m_max {
            kbar[stencil_at + m] = coeff_bar[m] * (trapezoid_weight(m, m_max) * h);
        }
    }
    if network {
        kbar[feature_at..feature_at + n_x].copy_from_slice(&feature_bar);
    }
    for (k, d) in kernel_sym.iter().enumerate() {
        let sg = w.sym * signum0(*d);
        kbar[sym_at + 2 * k] += sg;
        kbar[sym_at + 2 * k + 1] -= sg;
    }
    kernel.backward(model, &kbar, &mut grad);

    let reg = model.config().regularizer;
    for block in model.layout().blocks().iter().filter(|b| b.regularized) {
        for i in block.range() {
            grad[i] += reg.l1 * signum0(p[i]) + 2.0 * reg.l2 * p[i];
        }
    }
    if let Some(bad) = grad.iter().position(|v| !v.is_finite()) {
        return Err(Error::Divergence(format!("non-finite gradient for parameter {bad}")));
    }
    Ok((parts, grad))
}
