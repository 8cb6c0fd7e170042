//! Self-training annotation engine for multichannel time-series events.
//!
//! The crate trains one left-to-right GMM-HMM per event class from a small
//! gold-labeled seed, decodes unlabeled epochs, ranks them by a
//! length-normalized posterior confidence, folds the most confident
//! pseudo-labels back into the training pool, and repeats. Two selection
//! schemes are provided: volume halving (grow each class pool by a fixed
//! fraction of its current size) and a fixed per-class confidence threshold.
//!
//! Modules follow the pipeline order:
//!
//! * [`corpus`]: records, label spans, manifests, splits, and a seeded
//!   synthetic corpus generator
//! * [`features`]: epoch segmentation and the energy/cepstrum front end
//! * [`hmm`]: per-class GMM-HMM training, scoring, and model files
//! * [`selector`]: confidence ranking and the two selection schemes
//! * [`pipeline`]: the self-training loop, pool bookkeeping, run directories
//! * [`eval`]: confusion matrices, sensitivity, accuracy, report tables

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod hmm;
pub mod pipeline;
pub mod seed;
pub mod selector;

pub use error::{Error, Result};
pub use corpus::LabelClass;
