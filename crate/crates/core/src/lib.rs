//! Punctuation restoration posed as token classification.
//!
//! The pipeline runs corpus normalization and labeling ([`corpus`]),
//! WordPiece encoding with root-token labels ([`tokenizer`]), grouping of
//! sentences into 3–7 sentence compounds ([`batcher`]), tagging through a
//! pluggable backend ([`tagger`]), scoring ([`eval`]) and the human baseline
//! protocol ([`humaneval`]). [`cli`] wires the stages into one binary.

pub mod batcher;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod humaneval;
pub mod label;
pub mod tagger;
pub mod tokenizer;

pub use error::{Error, Result};
pub use label::{PunctClass, MASK_LABEL};
