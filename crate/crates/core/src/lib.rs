//! Deep Bayesian active learning for frame- and sequence-labeling tasks.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense/LSTM network engine with backpropagation, losses and Adam
//! - [`bayes`]: Monte-Carlo dropout posterior sampling
//! - [`acquisition`]: uncertainty scores and pool ranking
//! - [`pool`]: labeled/unlabeled bookkeeping at frame, video and segment granularity
//! - [`data`]: synthetic tasks, dataset files and the replay oracle
//! - [`harness`]: the active-learning loop, metrics and significance testing

pub mod acquisition;
pub mod bayes;
pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod pool;
pub mod rng;

pub use error::{Error, Result};
