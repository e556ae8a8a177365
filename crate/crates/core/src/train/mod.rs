//! Desk-scale training: synthetic class-structured data, linear projection
//! encoders for both modalities, AdamW with warmup + cosine decay, and a
//! deterministic mini-batch loop over any of the losses.

mod encoder;
mod optim;
mod schedule;
mod synthetic;
mod trainer;

pub use encoder::{EncoderGrads, EncoderParams};
pub use optim::{AdamW, OptimizerConfig, OptimizerKind};
pub use schedule::cosine_schedule;
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};
pub use trainer::{
    batch_gradients, encode_features, similarity_for, train, train_from, BatchInputs, EpochRecord,
    TrainConfig, TrainOutcome,
};
