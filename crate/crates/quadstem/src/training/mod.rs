//! Loss, optimizer, and the training loop.

pub mod loss;
pub mod optimizer;
pub mod trainer;

pub use loss::{loss_on_tape, separation_loss, LossValue, LossWeights};
pub use optimizer::{cosine_lr, Adam, AdamConfig};
pub use trainer::{evaluate_loss, train, Dataset, ExampleAudio, TrainConfig, TrainOutcome};
