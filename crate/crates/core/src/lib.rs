//! Causal topic model for unsupervised segmentation of timestamped token
//! sequences into actions.
//!
//! A video is a document of clips; each clip carries a human-word, an
//! object-word and a normalized timestamp. The model assigns every clip an
//! action-topic and an object-topic, learns which topics co-occur (through a
//! correlated stick-breaking prior) and how they are ordered in time (through
//! pairwise relative-time densities), and uses both to guess which action is
//! missing from a query sequence.
//!
//! Modules follow the pipeline:
//!
//! * [`corpus`]: data model, file formats, clipification, skeleton features
//!   and k-means word quantization.
//! * [`model`]: configuration, probability kernels, moment estimators,
//!   checkpoints and the forward-sampling generator.
//! * [`sampler`]: collapsed Gibbs / Metropolis-Hastings training and
//!   frozen-parameter inference.
//! * [`patch`]: segmentation and forgotten-action detection.
//! * [`eval`]: topic-to-class mapping and the evaluation metrics.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod patch;
pub mod sampler;
mod util;

pub use error::{CatmError, Result};
