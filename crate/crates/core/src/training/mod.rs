//! Joint loss, Adam with warm-up and clipping, and the training loop.

mod loss;
mod optim;
mod train;

pub use loss::{joint_loss, joint_loss_sum_on_tape};
pub use optim::{clip_gradients, lr_schedule, Adam, OptimizerState};
pub use train::{batch_gradients, evaluate, train, train_until, DevPoint, Init, Phase, TrainConfig, TrainOutcome};

#[cfg(test)]
mod tests;
