//! Pseudo zero pronoun (PZero) pretraining and argument-selection models for
//! zero anaphora resolution.
//!
//! The crate covers the whole pipeline at desk scale:
//!
//! * [`corpus`] / [`vocab`]: phrase-chunked parsed text, noun phrase
//!   extraction and vocabulary construction.
//! * [`datagen`]: PZero and Cloze instance generation.
//! * [`encoder`]: a small transformer encoder with hand-written backward
//!   passes, the selection head, the label head and the exophoric head.
//! * [`zar`]: zero anaphora instances, AS / AS-PZero input construction and
//!   prediction decoding.
//! * [`training`]: losses, Adam, learning rate schedules and the
//!   pretraining / finetuning loops.
//! * [`eval`]: category-aware scoring, breakdowns and the paired
//!   permutation test.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod datagen;
pub mod encoder;
mod error;
pub mod eval;
pub mod grid;
pub mod jsonl;
pub mod synthetic;
pub mod training;
pub mod vocab;
pub mod zar;

pub use error::{Error, Result};
