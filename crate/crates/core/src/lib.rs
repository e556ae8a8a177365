//! Soft-label deep metric learning for bidirectional video–text retrieval.
//!
//! The crate is `no_std` (with `alloc`) and purely computational: losses with
//! analytic gradients ([`losses`]), relevancy-aware triplet mining
//! ([`mining`]), retrieval metrics ([`metrics`]), a small deterministic
//! training harness ([`train`]), and inference-time flip augmentation and
//! ensembling ([`infer`]). File formats and the command-line driver live in
//! the `smsl` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod codec;
pub mod data;
pub mod error;
pub mod fixtures;
pub mod gradcheck;
pub mod infer;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod mining;
pub mod train;

pub use data::{
    cosine_similarity, dot_similarity, gather_batch_relevancy, l2_normalize, relevancy_from_labels,
    DatasetBundle, FeatureMatrix, RelevancyMatrix, SimilarityMatrix,
};
pub use error::{Error, Result};
pub use losses::{LossConfig, LossKind, LossResult};
pub use matrix::Matrix;
pub use metrics::{evaluate, RetrievalReport};
pub use mining::{Direction, MiningStrategy, Triplet, TripletSet};
