//! A desk-scale workbench for Arabic diacritization: text processing,
//! multitask training-data construction, a character-level encoder-decoder
//! trained from scratch, overlapping-window inference for long lines, and an
//! evaluation battery with error breakdowns.
//!
//! The crate is organized around the lifecycle of a diacritization
//! experiment:
//!
//! * [`text`]: segmentation of diacritized text into base characters and
//!   mark sets, stripping, and canonical rendering.
//! * [`corpus`]: corpus and bitext ingestion, frequency tables, OOV reports.
//! * [`data`]: character vocabulary, task-tagged examples, batching, mixing.
//! * [`model`]: the transformer, its training loop, decoding, checkpoints,
//!   and a most-frequent-diacritization baseline.
//! * [`window`]: overlapping-window inference for lines beyond the model's
//!   position budget.
//! * [`eval`]: word and diacritic error rates, frequency buckets, linguistic
//!   breakdowns, and report serialization.
//! * [`synth`]: a synthetic benchmark whose diacritics depend on sentence
//!   context, for exercising the multitask recipe end to end.

pub mod cli;
pub mod corpus;
pub mod data;
pub mod eval;
pub mod model;
pub mod synth;
pub mod text;
pub mod window;
