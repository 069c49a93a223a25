//! Extractive multi-document summarization around a centroid.
//!
//! Sentences are picked so that the sum of their embeddings points as close
//! as possible to a cluster centroid, under a word budget. The centroid is
//! either the mean-pool of the cluster, the mean of a reference summary, or
//! the output of a small attention model trained to predict the latter.
//!
//! - [`corpus`]: cluster model, file formats, preprocessing, cluster building
//! - [`selection`]: greedy, beam search and greedy-extension selection
//! - [`cera`]: the centroid regression model, its gradients and training
//! - [`rouge`]: ROUGE-1/2/L and bootstrap confidence intervals
//! - [`cli`]: the command-line front end

pub mod cera;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod rouge;
pub mod selection;
pub mod vector;

pub use error::{Error, ErrorKind, Result};
