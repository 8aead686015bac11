//! Coarse and fine losses, the coarse-to-fine training loop, and
//! checkpoint persistence.

pub mod checkpoint;
pub mod loss;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointTensor};
pub use loss::{coarse_loss, coarse_loss_backward, fine_loss, fine_loss_backward};
pub use train::{train, TrainSummary};
