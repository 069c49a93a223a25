//! Centroid regression attention model.
//!
//! Predicts a summary centroid from a cluster's sentence embeddings by
//! attention pooling, optionally gated against the plain mean-pool
//! centroid. Training minimizes cosine distance to the mean embedding of the
//! reference summary; gradients are computed analytically.

mod adam;
mod backward;
mod checkpoint;
mod forward;
pub mod gradcheck;
mod params;
mod train;

pub use adam::{AdamState, StepSchedule};
pub use backward::{backward, cosine_loss_grad, loss_and_grad};
pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint, Checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use forward::{
    cosine_loss, forward, forward_variant, normalize_inputs, ClusterInputs, ForwardTrace,
    InterpTrace,
};
pub use params::{CeraParams, InterpParams, Variant, DEFAULT_POSITIONS};
pub use train::{
    mean_cosine_loss, predict_centroid, train, training_target, write_history, EpochRecord,
    TrainConfig, TrainOutcome, ValidationMetric,
};
