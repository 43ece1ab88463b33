//! Synthetic displacement fields and their on-disk format.
//!
//! File layout (plain text, one record per line):
//!
//! ```text
//! # peripinn-dataset v1
//! # meta {"grid":{...},"kernel":{...},...}
//! # sha256 <hex digest of every line after this one>
//! x t theta
//! <x> <t> <theta>        17 significant digits, time-major
//! ```

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{sample_kernel, KernelSpec};
use crate::operator::{Boundary, Grid, SignConvention};
use crate::spectral::solve_field;

const MAGIC: &str = "# peripinn-dataset v1";
const PAYLOAD_HEADER: &str = "x t theta";

/// Initial data of the forward problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `θ₀ = A·exp(−((x−c)/w)²)`, `v₀ = 0`.
    GaussianPulse { amplitude: f64, width: f64, center: f64 },
    /// `θ₀ = A·cos(k x)` with `k = 2π·mode/period`, `v₀ = 0`.
    CosineMode { amplitude: f64, mode: u32 },
    Custom { theta0: Vec<f64>, v0: Vec<f64> },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::GaussianPulse { amplitude: 1.0, width: 1.0, center: 0.0 }
    }
}

impl InitialCondition {
    /// `(θ₀, v₀)` sampled on the grid.
    pub fn sample(&self, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
        let xs = grid.xs();
        let zeros = vec![0.0; grid.n_x];
        match self {
            InitialCondition::GaussianPulse { amplitude, width, center } => {
                if !(*width > 0.0) {
                    return Err(Error::config("pulse width must be positive"));
                }
                let th = xs.iter().map(|x| amplitude * (-((x - center) / width).powi(2)).exp()).collect();
                Ok((th, zeros))
            }
            InitialCondition::CosineMode { amplitude, mode } => {
                let k = 2.0 * std::f64::consts::PI * *mode as f64 / grid.period();
                Ok((xs.iter().map(|x| amplitude * (k * x).cos()).collect(), zeros))
            }
            InitialCondition::Custom { theta0, v0 } => {
                if theta0.len() != grid.n_x || v0.len() != grid.n_x {
                    return Err(Error::config("custom initial data length does not match the grid"));
                }
                Ok((theta0.clone(), v0.clone()))
            }
        }
    }
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub grid: Grid,
    pub kernel: Option<KernelSpec>,
    pub delta: f64,
    pub h: f64,
    pub dt: f64,
    pub sign: SignConvention,
    pub boundary: Boundary,
    pub initial_condition: InitialCondition,
    pub seed: u64,
    pub generator: String,
}

/// Displacement samples `θ(x_i, t_j)` on a uniform grid, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDataset {
    pub meta: DatasetMeta,
    theta: Vec<f64>,
    theta0: Vec<f64>,
    v0: Vec<f64>,
}

/// Parameters of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub kernel: KernelSpec,
    pub grid: Grid,
    pub sign: SignConvention,
    pub initial_condition: InitialCondition,
    pub seed: u64,
}

/// Solves the forward problem for `spec` with the spectral propagator.
pub fn generate(spec: &DatasetSpec) -> Result<FieldDataset> {
    spec.grid.validate()?;
    spec.kernel.validate()?;
    let h = spec.grid.h();
    let kernel = sample_kernel(&spec.kernel, h)?;
    let (th0, v0) = spec.initial_condition.sample(&spec.grid)?;
    let theta = solve_field(&kernel, &th0, &v0, &spec.grid, spec.sign)?;
    let meta = DatasetMeta {
        grid: spec.grid,
        kernel: Some(spec.kernel.clone()),
        delta: spec.kernel.support(),
        h,
        dt: spec.grid.dt(),
        sign: spec.sign,
        boundary: Boundary::Periodic,
        initial_condition: spec.initial_condition.clone(),
        seed: spec.seed,
        generator: "spectral".into(),
    };
    FieldDataset::new(meta, theta)
}

impl FieldDataset {
    pub fn new(meta: DatasetMeta, theta: Vec<f64>) -> Result<Self> {
        let g = meta.grid;
        g.validate()?;
        if theta.len() != g.n_x * g.n_t {
            return Err(Error::config(format!(
                "field has {} samples, grid needs {}",
                theta.len(),
                g.n_x * g.n_t
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("dataset contains non-finite samples".into()));
        }
        let (theta0, v0) = meta.initial_condition.sample(&g)?;
        Ok(Self { meta, theta, theta0, v0 })
    }

    pub fn grid(&self) -> &Grid {
        &self.meta.grid
    }

    /// `θ(x_i, t_j)`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.theta[j * self.meta.grid.n_x + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.meta.grid.n_x;
        &self.theta[j * n..(j + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    pub fn initial_displacement(&self) -> &[f64] {
        &self.theta0
    }

    pub fn initial_velocity(&self) -> &[f64] {
        &self.v0
    }

    pub fn to_text(&self) -> String {
        let meta = serde_json::to_string(&self.meta).expect("dataset metadata serializes");
        let payload = self.payload();
        let digest = hex(&Sha256::digest(payload.as_bytes()));
        format!("{MAGIC}\n# meta {meta}\n# sha256 {digest}\n{payload}")
    }

    fn payload(&self) -> String {
        let g = &self.meta.grid;
        let mut s = String::with_capacity(64 * self.theta.len() + 16);
        s.push_str(PAYLOAD_HEADER);
        s.push('\n');
        for j in 0..g.n_t {
            let t = g.t(j);
            for i in 0..g.n_x {
                let _ = writeln!(s, "{} {} {}", fmt17(g.x(i)), fmt17(t), fmt17(self.at(i, j)));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |d: &str| Error::parse("dataset file", d);
        let mut parts = text.splitn(4, '\n');
        if parts.next() != Some(MAGIC) {
            return Err(bad("missing magic header"));
        }
        let meta_line = parts.next().ok_or_else(|| bad("missing metadata line"))?;
        let meta_json = meta_line.strip_prefix("# meta ").ok_or_else(|| bad("missing metadata line"))?;
        let sum_line = parts.next().ok_or_else(|| bad("missing checksum line"))?;
        let digest = sum_line.strip_prefix("# sha256 ").ok_or_else(|| bad("missing checksum line"))?;
        let payload = parts.next().ok_or_else(|| bad("missing payload"))?;
        if hex(&Sha256::digest(payload.as_bytes())) != digest {
            return Err(bad("checksum mismatch"));
        }
        let meta: DatasetMeta =
            serde_json::from_str(meta_json).map_err(|e| bad(&format!("metadata: {e}")))?;
        meta.grid.validate()?;
        let g = meta.grid;
        let mut lines = payload.lines();
        if lines.next() != Some(PAYLOAD_HEADER) {
            return Err(bad("missing column header"));
        }
        let mut theta = Vec::with_capacity(g.n_x * g.n_t);
        for j in 0..g.n_t {
            for i in 0..g.n_x {
                let line = lines.next().ok_or_else(|| bad("truncated payload"))?;
                let mut cols = line.split(' ');
                let mut next = || -> Result<f64> {
                    cols.next()
                        .ok_or_else(|| bad("short row"))?
                        .parse::<f64>()
                        .map_err(|e| bad(&format!("number: {e}")))
                };
                let (x, t, v) = (next()?, next()?, next()?);
                if x != g.x(i) || t != g.t(j) {
                    return Err(bad(&format!("row ({x}, {t}) is off the grid")));
                }
                theta.push(v);
            }
        }
        if lines.next().is_some() {
            return Err(bad("trailing rows"));
        }
        FieldDataset::new(meta, theta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> DatasetSpec {
        DatasetSpec {
            kernel: KernelSpec::gaussian(),
            grid: Grid::new(-10.0, 10.0, 33, 0.0, 2.0, 5).unwrap(),
            sign: SignConvention::Oscillatory,
            initial_condition: InitialCondition::default(),
            seed: 7,
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let ds = generate(&small()).unwrap();
        let text = ds.to_text();
        let back = FieldDataset::from_text(&text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let text = generate(&small()).unwrap().to_text();
        let corrupted = text.replacen("e-1 ", "e-2 ", 1);
        assert_ne!(corrupted, text);
        let err = FieldDataset::from_text(&corrupted).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
        assert!(FieldDataset::from_text("hello").is_err());
    }

    #[test]
    fn example_one_grid_has_101_nodes() {
        let spec = DatasetSpec {
            kernel: KernelSpec::v_shape(),
            grid: Grid::new(-10.0, 10.0, 101, 0.0, 20.0, 11).unwrap(),
            ..small()
        };
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.grid().n_x, 101);
        assert!((ds.meta.h - 0.2).abs() < 1e-15);
        assert_eq!(ds.meta.delta, 10.0);
    }

    proptest! {
        #[test]
        fn fmt17_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt17(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
