//! Layers, initializers and the two-branch inverse network.

mod batch;
mod checkpoint;
mod init;
mod layers;
mod model;

pub use batch::{branch_backward, branch_forward, branch_values, BranchTrace};
pub use checkpoint::{BlockShape, Checkpoint};
pub use init::{InitKind, UNIFORM_LIMIT};
pub use layers::{Activation, BranchSpec, DenseSpec, RbfFamily, RbfSpec};
pub use model::{
    IPinnModel, KernelHead, KernelHeadKind, ModelConfig, ParamBlock, ParamLayout, Regularizer,
};
pub(crate) use model::project_nonneg;
