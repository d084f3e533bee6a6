//! Two-view sentence-embedding fusion.
//!
//! A pre-trained view and a domain-specific view of the same sentences are
//! combined by weighted concatenation, CCA or Gaussian-kernel CCA, and a
//! linear classifier is trained on the result. The crate also carries a
//! text-CNN domain encoder with hand-derived gradients and synthetic worlds
//! that check numerically when concatenation provably works and when CCA
//! provably discards the label signal.
//!
//! `no_std` with `alloc`; file formats and the command line live in the
//! companion `embfuse` crate.
#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classifier;
pub mod combiner;
pub mod config;
pub mod dataset;
pub mod embedding;
pub mod encoder;
pub mod error;
pub mod linalg;
mod par;
#[cfg(feature = "serde")]
mod serde_mat;
pub mod pipeline;
pub mod rng;
pub mod theory;

pub use config::RunConfig;
pub use dataset::{make_split, subsample_train, LabeledDataset, Split, SplitMode};
pub use embedding::{EmbeddingSet, Mat};
pub use error::{Error, Result};
