//! Core library for synthesizing copy-move and blur tampered image
//! datasets with pixel-accurate ground-truth masks, generating
//! question-answer triples over the tampering facts, curating balanced
//! splits, verifying dataset contracts, and scoring predictions.

pub mod curate;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod mask;
pub mod oracle;
pub mod pipeline;
pub mod qa;
pub mod rng;
pub mod synth;
pub mod tamper;

pub use error::{Error, Result};
