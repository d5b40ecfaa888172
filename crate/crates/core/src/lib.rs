//! Sequence tagger that builds word representations from subword units.
//!
//! Each word in an utterance is encoded three ways — as characters, as
//! marked phonemes looked up in a pronunciation lexicon, and as UTF-8
//! bytes. A small bidirectional LSTM runs over each enabled unit and the
//! final states are concatenated (optionally together with a dedicated
//! word embedding) into the word representation that feeds a word-level
//! bidirectional LSTM with a linear-chain CRF on top.
//!
//! Everything is computed in `f64` on a reverse-mode tape, so gradients
//! can be checked against central finite differences. The crate is
//! `no_std`-compatible (`alloc` required); disable the default `std`
//! feature to build without the standard library.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod crf;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod gradcheck;
pub mod model;
pub mod optim;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
