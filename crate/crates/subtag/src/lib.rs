//! File formats, experiment tooling and synthetic data for the subword
//! sequence tagger.
//!
//! The algorithmic core lives in `subtag-core`; this crate adds everything
//! that touches the filesystem — corpus/lexicon/word-vector readers, the
//! versioned model container, the training configuration format — plus the
//! ablation-experiment runner and deterministic synthetic-corpus
//! generators used by the test suites and the CLI.

pub mod ablate;
pub mod artifact;
pub mod config_io;
pub mod corpus_io;
pub mod error;
pub mod lexicon_io;
pub mod report;
pub mod synth;
pub mod vectors;

pub use error::FormatError;
