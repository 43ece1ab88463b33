use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

/// Weight initializer of a dense layer. Biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Normal with variance `2 / (fan_in + fan_out)`.
    GlorotNormal,
    /// Uniform on `[-0.05, 0.05]`.
    RandomUniform,
}

pub const UNIFORM_LIMIT: f64 = 0.05;

impl InitKind {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R, fan_in: usize, fan_out: usize, out: &mut [f64]) {
        match self {
            InitKind::GlorotNormal => {
                let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Normal::new(0.0, std).expect("finite standard deviation");
                out.iter_mut().for_each(|w| *w = dist.sample(rng));
            }
            InitKind::RandomUniform => {
                let dist = Uniform::new_inclusive(-UNIFORM_LIMIT, UNIFORM_LIMIT).expect("valid range");
                out.iter_mut().for_each(|w| *w = dist.sample(rng));
            }
        }
    }
}
