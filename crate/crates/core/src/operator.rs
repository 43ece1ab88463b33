//! Discrete nonlocal operator on a uniform grid.
//!
//! The peridynamic right-hand side `∫ C(|x−y|) [θ(x) − θ(y)] dy` is
//! discretized on the offset stencil `|m| ≤ M` where `M` is the largest
//! integer strictly below `δ/h`, with trapezoidal weights on the stencil.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet2, Scalar};
use crate::error::{Error, Result};
use crate::nn::IPinnModel;

/// Uniform space-time grid; both endpoints are nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_x: usize, t_min: f64, t_max: f64, n_t: usize) -> Result<Self> {
        let g = Self { x_min, x_max, n_x, t_min, t_max, n_t };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.t_min, self.t_max].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("grid bounds must be finite"));
        }
        if self.n_x < 2 || self.n_t < 2 {
            return Err(Error::config("grid needs at least two nodes per axis"));
        }
        if self.x_max <= self.x_min || self.t_max <= self.t_min {
            return Err(Error::config("grid bounds must be increasing"));
        }
        Ok(())
    }

    /// Spatial step `h`.
    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n_t - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h()
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t_min + j as f64 * self.dt()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.n_t).map(|j| self.t(j)).collect()
    }

    /// Length of the periodic cell, `n_x · h`.
    pub fn period(&self) -> f64 {
        self.n_x as f64 * self.h()
    }

    /// Index of the grid node equal to `x` (within a tiny tolerance).
    pub fn x_index(&self, x: f64) -> Option<usize> {
        let r = (x - self.x_min) / self.h();
        let i = r.round();
        if i < 0.0 || i >= self.n_x as f64 || (r - i).abs() > 1e-9 {
            return None;
        }
        Some(i as usize)
    }
}

/// How `θ[i+m]` is read when `i+m` leaves the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    ZeroPad,
}

/// Sign in front of the nonlocal term: `θ_tt = s · q`.
///
/// `Growing` keeps the integrand as `[θ(x) − θ(y)]` (`s = +1`), which makes
/// every mode grow; `Oscillatory` uses `s = −1` and gives dispersive waves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    Growing,
    #[default]
    Oscillatory,
}

impl SignConvention {
    pub fn factor(self) -> f64 {
        match self {
            SignConvention::Growing => 1.0,
            SignConvention::Oscillatory => -1.0,
        }
    }
}

/// Largest integer `m` with `m < δ/h` (strict, also when `δ/h` is an
/// integer up to rounding).
pub fn truncation_halfwidth(delta: f64, h: f64) -> Result<usize> {
    if !(delta > 0.0) || !(h > 0.0) || !delta.is_finite() || !h.is_finite() {
        return Err(Error::config(format!("horizon and step must be positive (delta={delta}, h={h})")));
    }
    let ratio = delta / h;
    if !ratio.is_finite() || ratio >= (u32::MAX as f64) {
        return Err(Error::config(format!("delta/h = {ratio} overflows the index range")));
    }
    let nearest = ratio.round();
    let m = if (ratio - nearest).abs() <= 8.0 * f64::EPSILON * ratio.max(1.0) {
        nearest - 1.0
    } else {
        ratio.floor()
    };
    Ok(m.max(0.0) as usize)
}

/// Trapezoidal weight of offset `m` on the stencil `-M..=M`.
pub fn trapezoid_weight(m: usize, half_width: usize) -> f64 {
    if half_width > 0 && m == half_width {
        0.5
    } else {
        1.0
    }
}

/// Kernel samples `C(|m|·h)` for `m = 0..=M`; the negative half is implied
/// by evenness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelVector {
    pub delta: f64,
    pub h: f64,
    values: Vec<f64>,
}

impl KernelVector {
    /// Samples `c` at offsets `m·h`, `0 ≤ m ≤ truncation_halfwidth(δ, h)`.
    pub fn sample(delta: f64, h: f64, c: impl Fn(f64) -> f64) -> Result<Self> {
        let m_max = truncation_halfwidth(delta, h)?;
        let values = (0..=m_max).map(|m| c(m as f64 * h)).collect();
        Ok(Self { delta, h, values })
    }

    pub fn from_values(delta: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        let m_max = truncation_halfwidth(delta, h)?;
        if values.len() != m_max + 1 {
            return Err(Error::config(format!(
                "kernel vector needs {} entries for delta={delta}, h={h}, got {}",
                m_max + 1,
                values.len()
            )));
        }
        Ok(Self { delta, h, values })
    }

    pub fn half_width(&self) -> usize {
        self.values.len() - 1
    }

    /// `C(ξ_m)` for signed `m`.
    pub fn get(&self, m: isize) -> f64 {
        self.values[m.unsigned_abs()]
    }

    /// Nonnegative half, `m = 0..=M`.
    pub fn half(&self) -> &[f64] {
        &self.values
    }

    /// Full stencil `m = -M..=M`.
    pub fn full(&self) -> Vec<f64> {
        let m = self.half_width() as isize;
        (-m..=m).map(|k| self.get(k)).collect()
    }

    /// Stencil coefficients `w_m · C(ξ_m) · h` for `m = 0..=M`.
    pub fn coefficients(&self) -> Vec<f64> {
        let m_max = self.half_width();
        self.values
            .iter()
            .enumerate()
            .map(|(m, c)| trapezoid_weight(m, m_max) * c * self.h)
            .collect()
    }

    /// `Σ_m w_m C(ξ_m) h` over the full stencil.
    pub fn mass(&self) -> f64 {
        let c = self.coefficients();
        c[0] + 2.0 * c[1..].iter().sum::<f64>()
    }
}

/// `q[i] = Σ_{m=-M..M} c_m (θ[i] − θ[i+m])` with `c` the nonnegative half
/// of the stencil coefficients (see [`KernelVector::coefficients`]).
///
/// Offsets are visited in ascending order; the `m = 0` term is skipped since
/// it vanishes identically.
pub fn nonlocal_rhs_with<S: Scalar>(theta_row: &[S], coeffs: &[S], boundary: Boundary) -> Vec<S> {
    let n = theta_row.len() as isize;
    let m_max = coeffs.len() as isize - 1;
    (0..n)
        .map(|i| {
            let ti = theta_row[i as usize];
            let mut acc = ti.constant_like(0.0);
            for m in -m_max..=m_max {
                if m == 0 {
                    continue;
                }
                let c = coeffs[m.unsigned_abs()];
                let j = i + m;
                let diff = if (0..n).contains(&j) {
                    ti - theta_row[j as usize]
                } else {
                    match boundary {
                        Boundary::Periodic => ti - theta_row[j.rem_euclid(n) as usize],
                        Boundary::ZeroPad => ti,
                    }
                };
                acc = acc + c * diff;
            }
            acc
        })
        .collect()
}

/// Discrete nonlocal term for one time slice.
pub fn nonlocal_rhs(theta_row: &[f64], kernel: &KernelVector, boundary: Boundary) -> Vec<f64> {
    nonlocal_rhs_with(theta_row, &kernel.coefficients(), boundary)
}

/// Dense matrix of the discrete operator (`q = A θ`), periodic boundary.
pub fn operator_matrix(n: usize, kernel: &KernelVector, boundary: Boundary) -> Vec<Vec<f64>> {
    let coeffs = kernel.coefficients();
    let m_max = kernel.half_width() as isize;
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n as isize {
        for m in -m_max..=m_max {
            if m == 0 {
                continue;
            }
            let c = coeffs[m.unsigned_abs()];
            a[i as usize][i as usize] += c;
            let j = i + m;
            let col = if (0..n as isize).contains(&j) {
                Some(j)
            } else if boundary == Boundary::Periodic {
                Some(j.rem_euclid(n as isize))
            } else {
                None
            };
            if let Some(j) = col {
                a[i as usize][j as usize] -= c;
            }
        }
    }
    a
}

/// Residual at one collocation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSample {
    pub x: f64,
    pub t: f64,
    pub r: f64,
}

/// Where the residual takes its kernel from.
#[derive(Debug, Clone)]
pub enum KernelSource<'a> {
    /// The model's own kernel head.
    Model,
    Fixed(&'a KernelVector),
}

/// `r(x, t) = θ_tt − s · q` for every grid node of each requested time row,
/// with `θ_tt` from the model's time jet.
pub fn pde_residual(
    model: &IPinnModel,
    rows: &[usize],
    kernel_source: KernelSource<'_>,
    grid: &Grid,
    sign: SignConvention,
    boundary: Boundary,
) -> Result<Vec<ResidualSample>> {
    let h = grid.h();
    let kernel = match kernel_source {
        KernelSource::Fixed(k) => {
            if (k.h - h).abs() > 1e-12 * h {
                return Err(Error::config("kernel vector step does not match the grid"));
            }
            k.clone()
        }
        KernelSource::Model => model.kernel_vector(model.kernel_delta(), h)?,
    };
    let coeffs = kernel.coefficients();
    let xs = grid.xs();
    let s = sign.factor();
    let mut out = Vec::with_capacity(rows.len() * grid.n_x);
    for &j in rows {
        if j >= grid.n_t {
            return Err(Error::config(format!("collocation row {j} outside the grid")));
        }
        let t = grid.t(j);
        let jets: Vec<Jet2> = xs.iter().map(|&x| model.forward_theta(x, Jet2::seed(t))).collect();
        let values: Vec<f64> = jets.iter().map(|q| q.v).collect();
        let q = nonlocal_rhs_with(&values, &coeffs, boundary);
        for (i, jet) in jets.iter().enumerate() {
            let r = jet.d2 - s * q[i];
            if !r.is_finite() {
                return Err(Error::Divergence(format!("non-finite residual at x={}, t={t}", xs[i])));
            }
            out.push(ResidualSample { x: xs[i], t, r });
        }
    }
    Ok(out)
}

/// Residual of a sampled field: `θ_tt` by the central second difference in
/// time, interior rows only.
pub fn field_residual(
    theta: &[f64],
    grid: &Grid,
    kernel: &KernelVector,
    sign: SignConvention,
    boundary: Boundary,
) -> Vec<ResidualSample> {
    let n = grid.n_x;
    let dt = grid.dt();
    let s = sign.factor();
    let mut out = Vec::new();
    for j in 1..grid.n_t - 1 {
        let row = &theta[j * n..(j + 1) * n];
        let q = nonlocal_rhs(row, kernel, boundary);
        for i in 0..n {
            let tt = (theta[(j + 1) * n + i] - 2.0 * row[i] + theta[(j - 1) * n + i]) / (dt * dt);
            out.push(ResidualSample { x: grid.x(i), t: grid.t(j), r: tt - s * q[i] });
        }
    }
    out
}
