//! Desk-scale models and local client training.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use model::{init_model, loss_and_grad, ModelKind, ModelState};
pub use train::{local_train, samples_processed, ModelUpdate, TrainParams};
