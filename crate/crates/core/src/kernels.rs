//! Closed-form reference kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::KernelVector;

/// `4/√π`, the amplitude of the unit-mass Gaussian reference kernel.
pub const GAUSSIAN_AMPLITUDE: f64 = 2.256_758_334_191_025;

/// Named kernel with its parameters.
///
/// `support` is the half-width of the offset stencil the kernel is sampled
/// on. For `v_shape` it is the horizon δ; for `boundary_v` it is the domain
/// half-width `L` while `delta` sets the width of the ramps at `±L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `C(x) = slope·|x|` on `[−δ, δ]`.
    VShape { slope: f64, delta: f64 },
    /// Ramps of width `delta` at the ends of `[−L, L]`, zero in between.
    BoundaryV { delta: f64, half_width: f64 },
    /// `C(x) = amplitude·exp(−σ x²)`, sampled on `[−support, support]`.
    Gaussian { amplitude: f64, sigma: f64, support: f64 },
    /// `C*(x) = γ*·exp(−σ* x²)`.
    ParametricGaussian { gamma_star: f64, sigma_star: f64, support: f64 },
}

impl KernelSpec {
    pub fn v_shape() -> Self {
        KernelSpec::VShape { slope: 0.6, delta: 10.0 }
    }

    pub fn boundary_v() -> Self {
        KernelSpec::BoundaryV { delta: 1.0, half_width: 10.0 }
    }

    pub fn gaussian() -> Self {
        KernelSpec::Gaussian { amplitude: GAUSSIAN_AMPLITUDE, sigma: 1.0, support: 6.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::VShape { .. } => "v_shape",
            KernelSpec::BoundaryV { .. } => "boundary_v",
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::ParametricGaussian { .. } => "parametric_gaussian",
        }
    }

    /// Half-width of the sampling stencil.
    pub fn support(&self) -> f64 {
        match *self {
            KernelSpec::VShape { delta, .. } => delta,
            KernelSpec::BoundaryV { half_width, .. } => half_width,
            KernelSpec::Gaussian { support, .. } => support,
            KernelSpec::ParametricGaussian { support, .. } => support,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            KernelSpec::VShape { slope, delta } => slope >= 0.0 && delta > 0.0,
            KernelSpec::BoundaryV { delta, half_width } => delta > 0.0 && half_width > delta,
            KernelSpec::Gaussian { amplitude, sigma, support } => {
                amplitude >= 0.0 && sigma >= 0.0 && support > 0.0
            }
            KernelSpec::ParametricGaussian { gamma_star, sigma_star, support } => {
                gamma_star >= 0.0 && sigma_star >= 0.0 && support > 0.0
            }
        };
        let finite = match *self {
            KernelSpec::VShape { slope, delta } => slope.is_finite() && delta.is_finite(),
            KernelSpec::BoundaryV { delta, half_width } => delta.is_finite() && half_width.is_finite(),
            KernelSpec::Gaussian { amplitude, sigma, support } => {
                amplitude.is_finite() && sigma.is_finite() && support.is_finite()
            }
            KernelSpec::ParametricGaussian { gamma_star, sigma_star, support } => {
                gamma_star.is_finite() && sigma_star.is_finite() && support.is_finite()
            }
        };
        if ok && finite {
            Ok(())
        } else {
            Err(Error::config(format!("invalid kernel parameters: {self:?}")))
        }
    }
}

/// Closed-form value `C(x)`.
pub fn eval_kernel(spec: &KernelSpec, x: f64) -> f64 {
    let a = x.abs();
    match *spec {
        KernelSpec::VShape { slope, delta } => {
            if a <= delta {
                slope * a
            } else {
                0.0
            }
        }
        // Printed piecewise form; each branch mirrors the other, so it is
        // evaluated on |x|.
        KernelSpec::BoundaryV { delta, half_width } => {
            if a > half_width || a <= half_width - delta {
                0.0
            } else {
                (delta + a - half_width) / delta
            }
        }
        KernelSpec::Gaussian { amplitude, sigma, .. } => amplitude * (-(a * a) * sigma).exp(),
        KernelSpec::ParametricGaussian { gamma_star, sigma_star, .. } => {
            gamma_star * (-(a * a) * sigma_star).exp()
        }
    }
}

/// Samples `spec` on the stencil `m·h`, `0 ≤ m < support/h`.
pub fn sample_kernel(spec: &KernelSpec, h: f64) -> Result<KernelVector> {
    spec.validate()?;
    KernelVector::sample(spec.support(), h, |xi| eval_kernel(spec, xi))
}
