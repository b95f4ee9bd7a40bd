//! Dialogue state tracking as per-slot example-guided question answering,
//! with the tooling needed to benchmark continual learning over a stream of
//! services: corpus ingest, state deltas, state-change similarity, example
//! retrieval, prompt serialization, replay sampling and CL metrics.
//!
//! Model inference lives outside the crate behind the answerer protocol in
//! [`harness`].

pub mod convert;
pub mod corpus;
pub mod delta;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod jsonl;
pub mod memory;
pub mod promptgen;
pub mod retrieval;
pub mod similarity;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
