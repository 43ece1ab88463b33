//! Inverse identification of the micromodulus of the 1D linear peridynamic
//! wave equation with RBF-activated physics-informed networks.
//!
//! The crate covers the whole pipeline: synthetic data from a spectral
//! solver ([`spectral`], [`dataset`]), the discrete nonlocal operator
//! ([`operator`]), a small automatic-differentiation engine ([`autodiff`]),
//! the two-branch network ([`nn`]) and its training loop ([`training`]).

pub mod autodiff;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod nn;
pub mod operator;
pub mod spectral;
pub mod training;

pub use error::{Error, Result};
