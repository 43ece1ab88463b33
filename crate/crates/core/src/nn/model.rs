//! The two-branch inverse network.
//!
//! The kernel branch maps `x` through an RBF and a ReLU stack to `C(x)`; the
//! field branch maps `(C(x), t)` through a sigmoid stack to `θ(x, t)`. All
//! parameters live in one flat vector described by a [`ParamLayout`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::init::InitKind;
use super::layers::{Activation, BranchSpec, DenseSpec, RbfFamily, RbfSpec};
use crate::autodiff::{Jet2, Scalar};
use crate::error::{Error, Result};
use crate::operator::KernelVector;

/// `l1·Σ|w| + l2·Σw²` over the kernel-branch weight matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    pub l1: f64,
    pub l2: f64,
}

impl Default for Regularizer {
    fn default() -> Self {
        Self { l1: 0.01, l2: 0.01 }
    }
}

/// Which object produces the kernel used in the nonlocal term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelHeadKind {
    /// RBF + ReLU branch; its output also feeds the field branch.
    #[default]
    Network,
    /// Two scalars in `γ*·exp(−σ* x²)`; the field branch reads `(x, t)`.
    Parametric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kernel_head: KernelHeadKind,
    pub rbf: RbfFamily,
    pub rbf_gamma: f64,
    pub gamma_trainable: bool,
    pub mu_trainable: bool,
    pub rho_init: f64,
    pub mu_init: f64,
    /// RBF at the head of the field branch as well.
    pub theta_rbf: bool,
    /// Raw `x` as a third field-branch input next to `C(x)` and `t`.
    #[serde(default)]
    pub theta_x_input: bool,
    pub c_depth: usize,
    pub c_width: usize,
    pub theta_depth: usize,
    pub theta_width: usize,
    /// Nonnegativity projection on the kernel branch.
    pub constrained: bool,
    pub regularizer: Regularizer,
    pub c_init: InitKind,
    pub theta_init: InitKind,
    pub gamma_star_init: f64,
    pub sigma_star_init: f64,
    /// Half-width of the offset stencil the model kernel is sampled on.
    pub kernel_support: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kernel_head: KernelHeadKind::Network,
            rbf: RbfFamily::Multiquadric,
            rbf_gamma: 0.09,
            gamma_trainable: false,
            mu_trainable: false,
            rho_init: 1.0,
            mu_init: 0.0,
            theta_rbf: false,
            theta_x_input: false,
            c_depth: 8,
            c_width: 20,
            theta_depth: 8,
            theta_width: 20,
            constrained: true,
            regularizer: Regularizer::default(),
            c_init: InitKind::GlorotNormal,
            theta_init: InitKind::RandomUniform,
            gamma_star_init: 3.0,
            sigma_star_init: 0.5,
            kernel_support: 10.0,
        }
    }
}

impl ModelConfig {
    pub fn parametric() -> Self {
        Self { kernel_head: KernelHeadKind::Parametric, kernel_support: 6.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let depths_ok = self.theta_depth > 0
            && self.theta_width > 0
            && (self.kernel_head == KernelHeadKind::Parametric || (self.c_depth > 0 && self.c_width > 0));
        if !depths_ok {
            return Err(Error::config("layer depths and widths must be positive"));
        }
        if !(self.rbf_gamma > 0.0) || !self.rbf_gamma.is_finite() {
            return Err(Error::config("rbf gamma must be positive"));
        }
        if !(self.kernel_support > 0.0) || !self.kernel_support.is_finite() {
            return Err(Error::config("kernel support must be positive"));
        }
        let r = self.regularizer;
        if !(r.l1 >= 0.0 && r.l2 >= 0.0) {
            return Err(Error::config("regularizer weights must be nonnegative"));
        }
        if !(self.rho_init.is_finite() && self.mu_init.is_finite()) {
            return Err(Error::config("rbf initial values must be finite"));
        }
        if self.kernel_head == KernelHeadKind::Parametric
            && !(self.gamma_star_init >= 0.0 && self.sigma_star_init >= 0.0)
        {
            return Err(Error::config("parametric kernel guesses must be nonnegative"));
        }
        if self.kernel_head == KernelHeadKind::Parametric && self.theta_x_input {
            return Err(Error::config("the parametric field branch already reads x"));
        }
        Ok(())
    }
}

/// Named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub trainable: bool,
    pub nonneg: bool,
    pub regularized: bool,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamLayout {
    blocks: Vec<ParamBlock>,
    len: usize,
}

impl ParamLayout {
    fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, trainable: bool, nonneg: bool, regularized: bool) -> usize {
        let offset = self.len;
        let block = ParamBlock { name: name.into(), shape, offset, trainable, nonneg, regularized };
        self.len += block.len();
        self.blocks.push(block);
        offset
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    fn mask(&self, pick: impl Fn(&ParamBlock) -> bool) -> Vec<bool> {
        let mut m = vec![false; self.len];
        for b in &self.blocks {
            if pick(b) {
                m[b.range()].iter_mut().for_each(|x| *x = true);
            }
        }
        m
    }

    pub fn trainable_mask(&self) -> Vec<bool> {
        self.mask(|b| b.trainable)
    }

    pub fn nonneg_mask(&self) -> Vec<bool> {
        self.mask(|b| b.nonneg)
    }

    pub fn regularized_mask(&self) -> Vec<bool> {
        self.mask(|b| b.regularized)
    }
}

/// Kernel side of the model.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelHead {
    Network(BranchSpec),
    Parametric { gamma_star: usize, sigma_star: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IPinnModel {
    config: ModelConfig,
    layout: ParamLayout,
    head: KernelHead,
    theta: BranchSpec,
    params: Vec<f64>,
    seed: u64,
}

fn dense_stack(
    layout: &mut ParamLayout,
    prefix: &str,
    fan_in: usize,
    depth: usize,
    width: usize,
    hidden: Activation,
    nonneg: bool,
    regularized: bool,
) -> Vec<DenseSpec> {
    let mut layers = Vec::with_capacity(depth + 1);
    let mut inp = fan_in;
    for l in 0..=depth {
        let (out, act, name) = if l < depth {
            (width, hidden, format!("{prefix}.dense{l}"))
        } else {
            (1, Activation::Identity, format!("{prefix}.out"))
        };
        let w = layout.push(format!("{name}.w"), vec![out, inp], true, nonneg, regularized);
        let b = layout.push(format!("{name}.b"), vec![out], true, nonneg, false);
        layers.push(DenseSpec { w, b, fan_in: inp, fan_out: out, activation: act });
        inp = out;
    }
    layers
}

fn rbf_block(layout: &mut ParamLayout, prefix: &str, cfg: &ModelConfig, nonneg: bool) -> RbfSpec {
    let rho = layout.push(format!("{prefix}.rbf.rho"), vec![1], true, nonneg, false);
    let mu = layout.push(format!("{prefix}.rbf.mu"), vec![1], cfg.mu_trainable, false, false);
    let gamma = layout.push(format!("{prefix}.rbf.gamma"), vec![1], cfg.gamma_trainable, nonneg, false);
    RbfSpec { family: cfg.rbf, rho, mu, gamma }
}

impl IPinnModel {
    /// Builds the layout and draws initial parameters; deterministic in
    /// `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut layout = ParamLayout::default();
        let head = match config.kernel_head {
            KernelHeadKind::Network => {
                let c = config.constrained;
                let rbf = rbf_block(&mut layout, "c", &config, c);
                let layers =
                    dense_stack(&mut layout, "c", 1, config.c_depth, config.c_width, Activation::Relu, c, true);
                KernelHead::Network(BranchSpec { input_dim: 1, rbf: Some(rbf), layers })
            }
            KernelHeadKind::Parametric => {
                let gamma_star = layout.push("kernel.gamma_star", vec![1], true, true, false);
                let sigma_star = layout.push("kernel.sigma_star", vec![1], true, true, false);
                KernelHead::Parametric { gamma_star, sigma_star }
            }
        };
        let theta_rbf = config.theta_rbf.then(|| rbf_block(&mut layout, "theta", &config, false));
        let input_dim = if config.theta_x_input { 3 } else { 2 };
        let layers = dense_stack(
            &mut layout,
            "theta",
            input_dim,
            config.theta_depth,
            config.theta_width,
            Activation::Sigmoid,
            false,
            false,
        );
        let theta = BranchSpec { input_dim, rbf: theta_rbf, layers };
        let mut model = Self { config, layout, head, theta, params: Vec::new(), seed };
        model.params = model.initial_params();
        Ok(model)
    }

    fn initial_params(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut p = vec![0.0; self.layout.len()];
        let cfg = &self.config;
        for block in self.layout.blocks() {
            let r = block.range();
            let leaf = block.name.rsplit('.').next().unwrap_or("");
            match leaf {
                "rho" => p[r].fill(cfg.rho_init),
                "mu" => p[r].fill(cfg.mu_init),
                "gamma" => p[r].fill(cfg.rbf_gamma),
                "gamma_star" => p[r].fill(cfg.gamma_star_init),
                "sigma_star" => p[r].fill(cfg.sigma_star_init),
                "b" => {}
                "w" => {
                    let init = if block.name.starts_with("c.") { cfg.c_init } else { cfg.theta_init };
                    let (out, inp) = (block.shape[0], block.shape[1]);
                    init.sample(&mut rng, inp, out, &mut p[r]);
                }
                _ => unreachable!("unknown parameter block {}", block.name),
            }
        }
        project_nonneg(&mut p, &self.layout.nonneg_mask());
        p
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn head(&self) -> &KernelHead {
        &self.head
    }

    pub fn theta_branch(&self) -> &BranchSpec {
        &self.theta
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.layout.len() {
            return Err(Error::config(format!(
                "expected {} parameters, got {}",
                self.layout.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn kernel_delta(&self) -> f64 {
        self.config.kernel_support
    }

    /// Kernel-branch output `C(x)` as a jet in `x`.
    pub fn c_with<S: Scalar>(&self, p: &[S], x: Jet2<S>) -> Jet2<S> {
        match &self.head {
            KernelHead::Network(branch) => branch.forward(p, &[x]),
            KernelHead::Parametric { gamma_star, sigma_star } => {
                let e = (x.square().scale(-p[*sigma_star])).exp();
                e.scale(p[*gamma_star])
            }
        }
    }

    /// Kernel value at a plain offset.
    pub fn kernel_at<S: Scalar>(&self, p: &[S], xi: f64) -> S {
        self.c_with(p, Jet2::constant(p[0].constant_like(xi))).v
    }

    /// First input of the field branch: `C(x)` or, for the parametric head,
    /// `x` itself.
    pub fn theta_feature<S: Scalar>(&self, p: &[S], x: f64) -> S {
        match self.head {
            KernelHead::Network(_) => self.kernel_at(p, x),
            KernelHead::Parametric { .. } => p[0].constant_like(x),
        }
    }

    /// Field branch on an explicit feature `u` at node `x` and time jet `t`.
    pub fn theta_from_feature<S: Scalar>(&self, p: &[S], u: S, x: f64, t: Jet2<S>) -> Jet2<S> {
        let u = Jet2::constant(u);
        if self.config.theta_x_input {
            self.theta.forward(p, &[u, t, Jet2::constant(u.v.constant_like(x))])
        } else {
            self.theta.forward(p, &[u, t])
        }
    }

    pub fn theta_with<S: Scalar>(&self, p: &[S], x: f64, t: Jet2<S>) -> Jet2<S> {
        let u = self.theta_feature(p, x);
        self.theta_from_feature(p, u, x, t)
    }

    pub fn forward_c(&self, x: f64) -> f64 {
        self.c_with(&self.params, Jet2::constant(x)).v
    }

    pub fn forward_c_jet(&self, x: Jet2) -> Jet2 {
        self.c_with(&self.params, x)
    }

    /// `θ(x, t)`; seeding `t` yields `∂ₜθ` and `∂ₜₜθ`.
    pub fn forward_theta(&self, x: f64, t: Jet2) -> Jet2 {
        self.theta_with(&self.params, x, t)
    }

    /// Checked variants reporting diverged parameters.
    pub fn try_forward_c(&self, x: f64) -> Result<f64> {
        let c = self.forward_c(x);
        if c.is_finite() {
            Ok(c)
        } else {
            Err(Error::Divergence(format!("kernel output {c} at x={x}")))
        }
    }

    pub fn try_forward_theta(&self, x: f64, t: Jet2) -> Result<Jet2> {
        let v = self.forward_theta(x, t);
        if v.v.is_finite() && v.d1.is_finite() && v.d2.is_finite() {
            Ok(v)
        } else {
            Err(Error::Divergence(format!("field output {v:?} at x={x}")))
        }
    }

    /// Samples the model kernel on the stencil `m·h`, `0 ≤ m < δ/h`.
    pub fn kernel_vector(&self, delta: f64, h: f64) -> Result<KernelVector> {
        KernelVector::sample(delta, h, |xi| self.forward_c(xi))
    }

    pub fn regularization_penalty_with<S: Scalar>(&self, p: &[S]) -> S {
        let Regularizer { l1, l2 } = self.config.regularizer;
        let mut acc = p[0].constant_like(0.0);
        for block in self.layout.blocks().iter().filter(|b| b.regularized) {
            for w in &p[block.range()] {
                acc = acc + w.abs() * l1 + w.square() * l2;
            }
        }
        acc
    }

    pub fn regularization_penalty(&self) -> f64 {
        self.regularization_penalty_with(&self.params)
    }

    /// `(γ*, σ*)` of the parametric head.
    pub fn parametric_kernel(&self) -> Option<(f64, f64)> {
        match self.head {
            KernelHead::Parametric { gamma_star, sigma_star } => {
                Some((self.params[gamma_star], self.params[sigma_star]))
            }
            KernelHead::Network(_) => None,
        }
    }

    /// Clamp every nonnegativity-constrained parameter at 0.
    pub fn project(&mut self) {
        let mask = self.layout.nonneg_mask();
        project_nonneg(&mut self.params, &mask);
    }
}

pub(crate) fn project_nonneg(p: &mut [f64], mask: &[bool]) {
    for (v, &m) in p.iter_mut().zip(mask) {
        if m && *v < 0.0 {
            *v = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_parameter_count() {
        let m = IPinnModel::new(ModelConfig::default(), 0).unwrap();
        // kernel branch: 3 rbf + (1*20+20) + 7*(20*20+20) + (20+1) = 3004
        // field branch: (2*20+20) + 7*(20*20+20) + (20+1) = 3021
        assert_eq!(m.param_count(), 6025);
        let with_rbf = IPinnModel::new(ModelConfig { theta_rbf: true, ..ModelConfig::default() }, 0).unwrap();
        assert_eq!(with_rbf.param_count(), 6028);
        let par = IPinnModel::new(ModelConfig::parametric(), 0).unwrap();
        assert_eq!(par.param_count(), 2 + 3021);
    }

    #[test]
    fn same_seed_same_params() {
        let a = IPinnModel::new(ModelConfig::default(), 42).unwrap();
        let b = IPinnModel::new(ModelConfig::default(), 42).unwrap();
        let c = IPinnModel::new(ModelConfig::default(), 43).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn constrained_init_is_nonnegative() {
        let m = IPinnModel::new(ModelConfig::default(), 5).unwrap();
        let mask = m.layout().nonneg_mask();
        let min = m.params().iter().zip(&mask).filter(|(_, k)| **k).map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
        assert!(min >= 0.0);
        assert!(m.params().iter().zip(&mask).any(|(v, k)| *k && *v > 0.0));
    }

    #[test]
    fn penalty_examples() {
        let cfg = ModelConfig { c_depth: 1, c_width: 1, ..ModelConfig::default() };
        let mut m = IPinnModel::new(cfg, 0).unwrap();
        let mut p = m.params().to_vec();
        for b in m.layout().blocks().iter().filter(|b| b.regularized) {
            p[b.range()].fill(0.0);
        }
        m.set_params(p.clone()).unwrap();
        assert_eq!(m.regularization_penalty(), 0.0);
        let w = m.layout().block("c.dense0.w").unwrap().offset;
        p[w] = 2.0;
        m.set_params(p).unwrap();
        assert!((m.regularization_penalty() - 0.06).abs() < 1e-15);
    }

    #[test]
    fn penalty_ignores_biases_and_field_branch() {
        let mut m = IPinnModel::new(ModelConfig::default(), 1).unwrap();
        let before = m.regularization_penalty();
        let mut p = m.params().to_vec();
        let b = m.layout().block("c.dense3.b").unwrap().offset;
        let tw = m.layout().block("theta.dense2.w").unwrap().offset;
        p[b] += 5.0;
        p[tw] += 5.0;
        m.set_params(p).unwrap();
        assert_eq!(m.regularization_penalty(), before);
    }

    #[test]
    fn multiquadric_identity_stack_at_origin() {
        let cfg = ModelConfig { c_depth: 1, c_width: 1, rbf_gamma: 1.0, ..ModelConfig::default() };
        let mut m = IPinnModel::new(cfg, 0).unwrap();
        let mut p = m.params().to_vec();
        for name in ["c.dense0.w", "c.out.w"] {
            p[m.layout().block(name).unwrap().offset] = 1.0;
        }
        for name in ["c.dense0.b", "c.out.b"] {
            p[m.layout().block(name).unwrap().offset] = 0.0;
        }
        m.set_params(p).unwrap();
        assert_eq!(m.forward_c(0.0), 1.0);
    }

    #[test]
    fn zero_final_layer_gives_constant_field() {
        let mut m = IPinnModel::new(ModelConfig::default(), 9).unwrap();
        let mut p = m.params().to_vec();
        p[m.layout().block("theta.out.w").unwrap().range()].fill(0.0);
        p[m.layout().block("theta.out.b").unwrap().offset] = 0.3;
        m.set_params(p).unwrap();
        let a = m.forward_theta(1.0, Jet2::seed(2.0));
        let b = m.forward_theta(-4.0, Jet2::seed(11.0));
        assert_eq!(a.v, 0.3);
        assert_eq!(b.v, 0.3);
        assert_eq!(a.d2, 0.0);
    }

    #[test]
    fn bias_only_field_branch_ignores_x() {
        let mut m = IPinnModel::new(ModelConfig::default(), 9).unwrap();
        let mut p = m.params().to_vec();
        for b in m.layout().blocks().iter().filter(|b| b.name.starts_with("theta.") && b.name.ends_with(".w")) {
            p[b.range()].fill(0.0);
        }
        for b in m.layout().blocks().iter().filter(|b| b.name.starts_with("theta.") && b.name.ends_with(".b")) {
            p[b.range()].fill(0.1);
        }
        m.set_params(p).unwrap();
        let a = m.forward_theta(1.0, Jet2::seed(2.0));
        let b = m.forward_theta(-7.0, Jet2::seed(2.0));
        assert_eq!(a, b);
    }

    #[test]
    fn time_jet_matches_five_point_difference() {
        let cfg = ModelConfig {
            theta_depth: 2,
            theta_width: 4,
            c_depth: 2,
            c_width: 4,
            theta_init: InitKind::GlorotNormal,
            ..ModelConfig::default()
        };
        let e = 1e-3;
        for seed in 0..100 {
            let m = IPinnModel::new(cfg.clone(), seed).unwrap();
            let f = |t: f64| m.forward_theta(0.7, Jet2::constant(t)).v;
            for &t0 in &[0.0, 3.0, 11.5] {
                let j = m.forward_theta(0.7, Jet2::seed(t0));
                let fd = (-f(t0 + 2.0 * e) + 16.0 * f(t0 + e) - 30.0 * f(t0) + 16.0 * f(t0 - e) - f(t0 - 2.0 * e))
                    / (12.0 * e * e);
                // rounding in the stencil is about 64 ulp(|f|) / (12 e^2)
                let floor = 64.0 * f64::EPSILON * f(t0).abs().max(1.0) / (12.0 * e * e);
                assert!((j.d2 - fd).abs() <= 1e-4 * j.d2.abs() + floor, "seed {seed}: {} vs {fd}", j.d2);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn constrained_kernel_is_even_and_nonnegative(seed in 0u64..1000, xs in proptest::collection::vec(-50.0f64..50.0, 64)) {
            let m = IPinnModel::new(ModelConfig::default(), seed).unwrap();
            for x in xs {
                let c = m.forward_c(x);
                prop_assert!(c >= 0.0);
                prop_assert_eq!(c.to_bits(), m.forward_c(-x).to_bits());
            }
        }
    }
}
