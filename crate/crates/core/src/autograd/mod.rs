//! Reverse-mode gradients, loss, optimizer and the toy trainer.

pub mod backward;
pub mod gradcheck;
mod loss;
mod optim;
mod params;
mod tape;
mod train;

pub use loss::l1_loss;
pub use optim::{
    adam_step, ema_update, AdamConfig, EmaState, OptimizerState, ADAM_BETA1, ADAM_BETA2,
    ADAM_EPSILON, DEFAULT_LEARNING_RATE, EMA_DECAY,
};
pub use params::ParamStore;
pub use tape::{Eager, Gradients, Graph, OpKind, Tape, Var};
pub use train::{train_toy, TrainOutcome};
