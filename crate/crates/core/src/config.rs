//! Run configuration: `section.key = value` lines.
//!
//! Every key has a default; [`RunConfig::to_text`] writes all of them so the
//! echo of a run reproduces it exactly. Unknown keys are errors.

use std::path::{Path, PathBuf};

use crate::dataset::{DatasetSpec, InitialCondition};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, GAUSSIAN_AMPLITUDE};
use crate::nn::{InitKind, KernelHeadKind, ModelConfig, RbfFamily};
use crate::operator::{Grid, SignConvention};
use crate::training::{DataNorm, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    VShape,
    BoundaryV,
    Gaussian,
    ParametricGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcKind {
    GaussianPulse,
    CosineMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSection {
    pub kernel: KernelKind,
    pub v_slope: f64,
    pub v_delta: f64,
    pub bv_delta: f64,
    pub bv_half_width: f64,
    pub gauss_amplitude: f64,
    pub gauss_sigma: f64,
    pub gauss_support: f64,
    pub pg_gamma_star: f64,
    pub pg_sigma_star: f64,
    pub pg_support: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
    pub sign: SignConvention,
    pub ic: IcKind,
    pub ic_amplitude: f64,
    pub ic_width: f64,
    pub ic_center: f64,
    pub ic_mode: u32,
    pub seed: u64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            kernel: KernelKind::VShape,
            v_slope: 0.6,
            v_delta: 10.0,
            bv_delta: 1.0,
            bv_half_width: 10.0,
            gauss_amplitude: GAUSSIAN_AMPLITUDE,
            gauss_sigma: 1.0,
            gauss_support: 6.0,
            pg_gamma_star: 3.0,
            pg_sigma_star: 0.5,
            pg_support: 6.0,
            x_min: -10.0,
            x_max: 10.0,
            n_x: 101,
            t_min: 0.0,
            t_max: 20.0,
            n_t: 101,
            sign: SignConvention::Oscillatory,
            ic: IcKind::GaussianPulse,
            ic_amplitude: 1.0,
            ic_width: 1.0,
            ic_center: 0.0,
            ic_mode: 1,
            seed: 0,
        }
    }
}

/// Parsed run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub model: ModelConfig,
    /// `None` resolves to the horizon stored in the dataset.
    pub model_kernel_support: Option<f64>,
    pub model_seed: u64,
    pub training: TrainConfig,
    /// `None` resolves to 1e-4, or 1e-3 for the parametric model.
    pub training_alpha0: Option<f64>,
    pub io_dataset: Option<PathBuf>,
    pub io_checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSection::default(),
            model: ModelConfig::default(),
            model_kernel_support: None,
            model_seed: 0,
            training: TrainConfig::default(),
            training_alpha0: None,
            io_dataset: None,
            io_checkpoint: None,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| Error::config(format!("{key}: expected a number, got {v:?}")))?;
    if !x.is_finite() {
        return Err(Error::config(format!("{key}: value must be finite")));
    }
    Ok(x)
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config(format!("{key}: expected a nonnegative integer, got {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected true/false, got {v:?}"))),
    }
}

fn parse_choice<T: Copy>(key: &str, v: &str, options: &[(&str, T)]) -> Result<T> {
    options.iter().find(|(n, _)| *n == v).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        Error::config(format!("{key}: expected one of {}, got {v:?}", names.join("|")))
    })
}

fn choice_name<T: PartialEq>(value: T, options: &[(&'static str, T)]) -> &'static str {
    options.iter().find(|(_, t)| *t == value).map(|(n, _)| *n).expect("every variant is named")
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

const KERNELS: &[(&str, KernelKind)] = &[
    ("v_shape", KernelKind::VShape),
    ("boundary_v", KernelKind::BoundaryV),
    ("gaussian", KernelKind::Gaussian),
    ("parametric_gaussian", KernelKind::ParametricGaussian),
];
const SIGNS: &[(&str, SignConvention)] = &[("oscillatory", SignConvention::Oscillatory), ("growing", SignConvention::Growing)];
const ICS: &[(&str, IcKind)] = &[("gaussian_pulse", IcKind::GaussianPulse), ("cosine_mode", IcKind::CosineMode)];
const HEADS: &[(&str, KernelHeadKind)] =
    &[("network", KernelHeadKind::Network), ("parametric", KernelHeadKind::Parametric)];
const RBFS: &[(&str, RbfFamily)] =
    &[("multiquadric", RbfFamily::Multiquadric), ("inverse_quadratic", RbfFamily::InverseQuadratic)];
const INITS: &[(&str, InitKind)] =
    &[("glorot_normal", InitKind::GlorotNormal), ("random_uniform", InitKind::RandomUniform)];
const NORMS: &[(&str, DataNorm)] = &[("two", DataNorm::Two), ("sup", DataNorm::Sup)];

impl RunConfig {
    /// Applies one `section.key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let d = &mut self.dataset;
        let m = &mut self.model;
        let t = &mut self.training;
        match key {
            "dataset.kernel" => d.kernel = parse_choice(key, v, KERNELS)?,
            "dataset.v_slope" => d.v_slope = parse_f64(key, v)?,
            "dataset.v_delta" => d.v_delta = parse_f64(key, v)?,
            "dataset.bv_delta" => d.bv_delta = parse_f64(key, v)?,
            "dataset.bv_half_width" => d.bv_half_width = parse_f64(key, v)?,
            "dataset.gauss_amplitude" => d.gauss_amplitude = parse_f64(key, v)?,
            "dataset.gauss_sigma" => d.gauss_sigma = parse_f64(key, v)?,
            "dataset.gauss_support" => d.gauss_support = parse_f64(key, v)?,
            "dataset.pg_gamma_star" => d.pg_gamma_star = parse_f64(key, v)?,
            "dataset.pg_sigma_star" => d.pg_sigma_star = parse_f64(key, v)?,
            "dataset.pg_support" => d.pg_support = parse_f64(key, v)?,
            "dataset.x_min" => d.x_min = parse_f64(key, v)?,
            "dataset.x_max" => d.x_max = parse_f64(key, v)?,
            "dataset.n_x" => d.n_x = parse_int(key, v)?,
            "dataset.t_min" => d.t_min = parse_f64(key, v)?,
            "dataset.t_max" => d.t_max = parse_f64(key, v)?,
            "dataset.n_t" => d.n_t = parse_int(key, v)?,
            "dataset.sign" => d.sign = parse_choice(key, v, SIGNS)?,
            "dataset.ic" => d.ic = parse_choice(key, v, ICS)?,
            "dataset.ic_amplitude" => d.ic_amplitude = parse_f64(key, v)?,
            "dataset.ic_width" => d.ic_width = parse_f64(key, v)?,
            "dataset.ic_center" => d.ic_center = parse_f64(key, v)?,
            "dataset.ic_mode" => d.ic_mode = parse_int(key, v)?,
            "dataset.seed" => d.seed = parse_int(key, v)?,
            "model.kernel_head" => m.kernel_head = parse_choice(key, v, HEADS)?,
            "model.rbf" => m.rbf = parse_choice(key, v, RBFS)?,
            "model.rbf_gamma" => m.rbf_gamma = parse_f64(key, v)?,
            "model.gamma_trainable" => m.gamma_trainable = parse_bool(key, v)?,
            "model.mu_trainable" => m.mu_trainable = parse_bool(key, v)?,
            "model.rho_init" => m.rho_init = parse_f64(key, v)?,
            "model.mu_init" => m.mu_init = parse_f64(key, v)?,
            "model.theta_rbf" => m.theta_rbf = parse_bool(key, v)?,
            "model.theta_x_input" => m.theta_x_input = parse_bool(key, v)?,
            "model.c_depth" => m.c_depth = parse_int(key, v)?,
            "model.c_width" => m.c_width = parse_int(key, v)?,
            "model.theta_depth" => m.theta_depth = parse_int(key, v)?,
            "model.theta_width" => m.theta_width = parse_int(key, v)?,
            "model.constrained" => m.constrained = parse_bool(key, v)?,
            "model.l1" => m.regularizer.l1 = parse_f64(key, v)?,
            "model.l2" => m.regularizer.l2 = parse_f64(key, v)?,
            "model.c_init" => m.c_init = parse_choice(key, v, INITS)?,
            "model.theta_init" => m.theta_init = parse_choice(key, v, INITS)?,
            "model.gamma_star_init" => m.gamma_star_init = parse_f64(key, v)?,
            "model.sigma_star_init" => m.sigma_star_init = parse_f64(key, v)?,
            "model.kernel_support" => {
                self.model_kernel_support = if v == "auto" { None } else { Some(parse_f64(key, v)?) }
            }
            "model.seed" => self.model_seed = parse_int(key, v)?,
            "training.epochs" => t.epochs = parse_int(key, v)?,
            "training.alpha0" => self.training_alpha0 = if v == "auto" { None } else { Some(parse_f64(key, v)?) },
            "training.w_pde" => t.weights.pde = parse_f64(key, v)?,
            "training.w_data" => t.weights.data = parse_f64(key, v)?,
            "training.w_sym" => t.weights.sym = parse_f64(key, v)?,
            "training.data_norm" => t.data_norm = parse_choice(key, v, NORMS)?,
            "training.sym_on_theta" => t.sym_on_theta = parse_bool(key, v)?,
            "training.batch_rows" => t.batch_rows = parse_int(key, v)?,
            "training.seed" => t.seed = parse_int(key, v)?,
            "training.beta1" => t.adam.beta1 = parse_f64(key, v)?,
            "training.beta2" => t.adam.beta2 = parse_f64(key, v)?,
            "training.eps" => t.adam.eps = parse_f64(key, v)?,
            "io.dataset" => self.io_dataset = (!v.is_empty()).then(|| PathBuf::from(v)),
            "io.checkpoint" => self.io_checkpoint = (!v.is_empty()).then(|| PathBuf::from(v)),
            _ => return Err(Error::config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` (as given to `--set`).
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected section.key=value, got {assignment:?}")))?;
        self.set(k.trim(), v)
    }

    /// Parses a config document on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected section.key = value", n + 1)))?;
            cfg.set(k.trim(), v).map_err(|e| match e {
                Error::Config(msg) => Error::config(format!("line {}: {msg}", n + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Sets every seed at once.
    pub fn set_seed(&mut self, seed: u64) {
        self.dataset.seed = seed;
        self.model_seed = seed;
        self.training.seed = seed;
    }

    /// All keys in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let d = &self.dataset;
        let m = &self.model;
        let t = &self.training;
        let opt = |x: Option<f64>| x.map_or_else(|| "auto".to_string(), num);
        let path = |p: &Option<PathBuf>| p.as_ref().map_or_else(String::new, |p| p.display().to_string());
        vec![
            ("dataset.kernel", choice_name(d.kernel, KERNELS).into()),
            ("dataset.v_slope", num(d.v_slope)),
            ("dataset.v_delta", num(d.v_delta)),
            ("dataset.bv_delta", num(d.bv_delta)),
            ("dataset.bv_half_width", num(d.bv_half_width)),
            ("dataset.gauss_amplitude", num(d.gauss_amplitude)),
            ("dataset.gauss_sigma", num(d.gauss_sigma)),
            ("dataset.gauss_support", num(d.gauss_support)),
            ("dataset.pg_gamma_star", num(d.pg_gamma_star)),
            ("dataset.pg_sigma_star", num(d.pg_sigma_star)),
            ("dataset.pg_support", num(d.pg_support)),
            ("dataset.x_min", num(d.x_min)),
            ("dataset.x_max", num(d.x_max)),
            ("dataset.n_x", d.n_x.to_string()),
            ("dataset.t_min", num(d.t_min)),
            ("dataset.t_max", num(d.t_max)),
            ("dataset.n_t", d.n_t.to_string()),
            ("dataset.sign", choice_name(d.sign, SIGNS).into()),
            ("dataset.ic", choice_name(d.ic, ICS).into()),
            ("dataset.ic_amplitude", num(d.ic_amplitude)),
            ("dataset.ic_width", num(d.ic_width)),
            ("dataset.ic_center", num(d.ic_center)),
            ("dataset.ic_mode", d.ic_mode.to_string()),
            ("dataset.seed", d.seed.to_string()),
            ("model.kernel_head", choice_name(m.kernel_head, HEADS).into()),
            ("model.rbf", choice_name(m.rbf, RBFS).into()),
            ("model.rbf_gamma", num(m.rbf_gamma)),
            ("model.gamma_trainable", m.gamma_trainable.to_string()),
            ("model.mu_trainable", m.mu_trainable.to_string()),
            ("model.rho_init", num(m.rho_init)),
            ("model.mu_init", num(m.mu_init)),
            ("model.theta_rbf", m.theta_rbf.to_string()),
            ("model.theta_x_input", m.theta_x_input.to_string()),
            ("model.c_depth", m.c_depth.to_string()),
            ("model.c_width", m.c_width.to_string()),
            ("model.theta_depth", m.theta_depth.to_string()),
            ("model.theta_width", m.theta_width.to_string()),
            ("model.constrained", m.constrained.to_string()),
            ("model.l1", num(m.regularizer.l1)),
            ("model.l2", num(m.regularizer.l2)),
            ("model.c_init", choice_name(m.c_init, INITS).into()),
            ("model.theta_init", choice_name(m.theta_init, INITS).into()),
            ("model.gamma_star_init", num(m.gamma_star_init)),
            ("model.sigma_star_init", num(m.sigma_star_init)),
            ("model.kernel_support", opt(self.model_kernel_support)),
            ("model.seed", self.model_seed.to_string()),
            ("training.epochs", t.epochs.to_string()),
            ("training.alpha0", opt(self.training_alpha0)),
            ("training.w_pde", num(t.weights.pde)),
            ("training.w_data", num(t.weights.data)),
            ("training.w_sym", num(t.weights.sym)),
            ("training.data_norm", choice_name(t.data_norm, NORMS).into()),
            ("training.sym_on_theta", t.sym_on_theta.to_string()),
            ("training.batch_rows", t.batch_rows.to_string()),
            ("training.seed", t.seed.to_string()),
            ("training.beta1", num(t.adam.beta1)),
            ("training.beta2", num(t.adam.beta2)),
            ("training.eps", num(t.adam.eps)),
            ("io.dataset", path(&self.io_dataset)),
            ("io.checkpoint", path(&self.io_checkpoint)),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# resolved peripinn configuration\n");
        for (k, v) in self.entries() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        let d = &self.dataset;
        match d.kernel {
            KernelKind::VShape => KernelSpec::VShape { slope: d.v_slope, delta: d.v_delta },
            KernelKind::BoundaryV => KernelSpec::BoundaryV { delta: d.bv_delta, half_width: d.bv_half_width },
            KernelKind::Gaussian => {
                KernelSpec::Gaussian { amplitude: d.gauss_amplitude, sigma: d.gauss_sigma, support: d.gauss_support }
            }
            KernelKind::ParametricGaussian => KernelSpec::ParametricGaussian {
                gamma_star: d.pg_gamma_star,
                sigma_star: d.pg_sigma_star,
                support: d.pg_support,
            },
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let d = &self.dataset;
        Grid::new(d.x_min, d.x_max, d.n_x, d.t_min, d.t_max, d.n_t)
    }

    pub fn initial_condition(&self) -> InitialCondition {
        let d = &self.dataset;
        match d.ic {
            IcKind::GaussianPulse => {
                InitialCondition::GaussianPulse { amplitude: d.ic_amplitude, width: d.ic_width, center: d.ic_center }
            }
            IcKind::CosineMode => InitialCondition::CosineMode { amplitude: d.ic_amplitude, mode: d.ic_mode },
        }
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec> {
        let spec = DatasetSpec {
            kernel: self.kernel_spec(),
            grid: self.grid()?,
            sign: self.dataset.sign,
            initial_condition: self.initial_condition(),
            seed: self.dataset.seed,
        };
        spec.kernel.validate()?;
        Ok(spec)
    }

    /// Fills the `auto` entries: kernel support from the dataset horizon and
    /// the learning rate from the model kind.
    pub fn resolve(&mut self, head: KernelHeadKind, dataset_delta: f64) {
        self.model.kernel_head = head;
        let support = *self.model_kernel_support.get_or_insert(dataset_delta);
        self.model.kernel_support = support;
        let default_lr = match head {
            KernelHeadKind::Network => 1e-4,
            KernelHeadKind::Parametric => 1e-3,
        };
        self.training.alpha0 = *self.training_alpha0.get_or_insert(default_lr);
    }

    pub fn model_config(&self) -> ModelConfig {
        self.model.clone()
    }

    pub fn train_config(&self) -> TrainConfig {
        self.training.clone()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.kernel_spec().validate()?;
        let d = &self.dataset;
        if d.ic == IcKind::GaussianPulse && !(d.ic_width > 0.0) {
            return Err(Error::config("dataset.ic_width must be positive"));
        }
        let mut m = self.model.clone();
        if let Some(s) = self.model_kernel_support {
            m.kernel_support = s;
        }
        m.validate()?;
        let mut t = self.training.clone();
        if let Some(a) = self.training_alpha0 {
            t.alpha0 = a;
        }
        t.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("dataset.kernel", "gaussian").unwrap();
        cfg.set("training.alpha0", "0.00123").unwrap();
        cfg.set("model.kernel_support", "6").unwrap();
        cfg.set("io.dataset", "/tmp/x.txt").unwrap();
        cfg.set_seed(99);
        let back = RunConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), cfg.to_text());
        assert_eq!(RunConfig::from_text(&RunConfig::default().to_text()).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_and_malformed_keys_rejected() {
        assert!(RunConfig::from_text("dataset.nope = 1").is_err());
        assert!(RunConfig::from_text("dataset.n_x = many").is_err());
        assert!(RunConfig::from_text("just words").is_err());
        assert!(RunConfig::from_text("model.rbf = gaussian").is_err());
        let err = RunConfig::from_text("# c\n\ndataset.n_x = 0.5").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn nonpositive_horizon_fails_validation() {
        let mut cfg = RunConfig::default();
        cfg.set("dataset.v_delta", "0").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.set("dataset.v_delta", "-2").unwrap();
        assert!(cfg.dataset_spec().is_err());
    }

    #[test]
    fn auto_entries_resolve() {
        let mut cfg = RunConfig::default();
        cfg.resolve(KernelHeadKind::Parametric, 6.0);
        assert_eq!(cfg.training.alpha0, 1e-3);
        assert_eq!(cfg.model.kernel_support, 6.0);
        assert!(cfg.to_text().contains("training.alpha0 = 0.001\n"));
    }

    #[test]
    fn example_one_grid() {
        let g = RunConfig::default().grid().unwrap();
        assert_eq!(g.n_x, 101);
        assert!((g.h() - 0.2).abs() < 1e-15);
    }
}
