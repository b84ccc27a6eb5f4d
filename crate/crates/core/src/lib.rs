//! Sentence segmentation for classical Chinese.
//!
//! The pipeline derives boundary labels from the punctuation typists added
//! to digitized texts, trains skip-gram character embeddings, trains a
//! stacked bidirectional LSTM to decide whether each character ends a
//! sentence, and scores predictions with boundary F1. An experiment runner
//! combines corpora for embedding, classifier training and testing.

mod binfmt;
mod linalg;

pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
