//! Building blocks for two multimodal hate-speech pipelines operating on
//! OCR text and precomputed image/text embeddings.
//!
//! * Binary hate-speech detection: handcrafted syntactic features and word
//!   n-gram counts feed several boosted-tree models whose validation
//!   probabilities are combined, together with any externally produced
//!   multimodal predictions, by a greedy weighted ensembler.
//! * Target detection (individual / community / organization): a multimodal
//!   embedding is concatenated with named-entity counts and the best of a
//!   sweep of boosted-tree models is kept.
//!
//! Everything is deterministic. With the `parallel` feature (default) batch
//! loops run on rayon; results are identical to the sequential build.

pub mod bow;
pub mod corpus;
pub mod ensemble;
pub mod entfeat;
mod error;
pub mod fusion;
pub mod gbdt;
pub mod matrix;
pub mod metrics;
pub mod par;
pub mod synfeat;
pub mod table;

pub use error::{Error, Result};
