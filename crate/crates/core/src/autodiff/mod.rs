//! Forward-mode jets for time derivatives and a reverse-mode tape for
//! parameter gradients.

mod check;
mod jet;
mod scalar;
mod tape;

pub use check::{central_differences, finite_diff_check, tape_gradient, ScalarFn};
pub use jet::{jet_apply, jet_apply2, Jet2, JetFn, JetOp};
pub(crate) use jet::sigmoid_derivs;
pub use scalar::{sigmoid, Scalar};
pub(crate) use scalar::signum0;
pub use tape::{grad, Adjoints, Op, ParamId, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("{op} outside its domain at {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
}
