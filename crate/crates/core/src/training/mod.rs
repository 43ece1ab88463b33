//! Losses, optimizer, learning-rate schedule and the training loops.

mod adam;
mod loss;
mod schedule;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{
    combine, loss_and_grad, loss_data, loss_pde, loss_sym, mirror_pairs, norm1, norm2, sup_norm, tape_loss_and_grad,
    total_loss_with, DataNorm, KernelMode, LossParts, LossProblem, LossWeights,
};
pub use schedule::{lr_at, LrSchedule};
pub use trainer::{train, train_ipinn, train_parametric, EpochRecord, TrainConfig, TrainOutcome, TrainReport};
