//! Semantic transfer to query videos by tessellation in a joint
//! semantics-video space (SVS).
//!
//! Reference clips and their semantics are embedded with PCA and regularized
//! CCA ([`embedding`]), organised into a [`corpus`], and matched to query
//! clips by local nearest neighbours, restricted Viterbi decoding
//! ([`tessellate`]) or an LSTM predictor of semantic dynamics
//! ([`predictor`]). [`transfer`] turns the matched path into summaries,
//! detections or sound features and scores them; [`synth`] generates
//! corpora with known ground truth.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod embedding;
mod error;
pub mod io;
pub mod matrix;
pub mod predictor;
pub mod rng;
pub mod synth;
pub mod tessellate;
pub mod transfer;

pub use error::{Error, Result};
pub use matrix::{load_feature_matrix, save_feature_matrix, Dtype, FeatureMatrix};
