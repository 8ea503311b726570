//! Relation classification with multiple range-restricted bidirectional
//! GRUs and attention pooling, trained with a margin ranking loss.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`autodiff`] — minimal reverse-mode differentiable array engine
//! - [`corpus`] — SemEval-2010 Task 8 ingestion, tokenization, embeddings
//! - [`net`] — ranges, masked bidirectional GRU layers, attention, scoring
//! - [`train`] — ranking loss, AdaDelta, dropout, the epoch loop
//! - [`eval`] — macro-averaged F1 (excluding Other) and scorer-format output
//! - [`cli`] — the `rrgru` command entry points

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod net;
pub mod train;

pub use error::{Error, Result};
