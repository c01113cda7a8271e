//! Segmentation, teacher-forced training, autoregressive inference and
//! checkpoints.
//!
//! Training runs in `f32`. Every step is deterministic for a given seed:
//! batch items are reduced in a fixed order regardless of thread count.

mod adam;
mod checkpoint;
mod config;
mod infer;
mod segments;
mod step;
mod train_loop;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, RngState, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::TrainConfig;
pub use infer::{infer_autoregressive, infer_magnitudes};
pub use segments::{make_segments, Segment};
pub use step::{
    batch_loss_and_grads, evaluate_loss, masked_l1, train_step, worker_threads, StepStats,
};
pub use train_loop::{
    load_segments, train_loop, DataOrder, TrainOutcome, FINAL_CHECKPOINT, TRAIN_LOG,
};
