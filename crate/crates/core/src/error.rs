//! Error type shared by the core modules.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An operation received an empty input it cannot handle.
    EmptyInput(&'static str),
    /// A dropout rate outside `[0, 1)`.
    InvalidRate(f64),
    /// Tensor shapes do not line up for an operation.
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },
    /// A value that must be finite is NaN or infinite. `what` names the
    /// offending tensor or quantity.
    NonFinite { what: String },
    /// Two lexicon entries for the same word disagree on pronunciation.
    LexiconConflict { word: String },
    /// A lexicon entry with no phonemes.
    EmptyPronunciation { word: String },
    /// A word with no characters reached a featurizer.
    EmptyWord,
    /// A corpus with no utterances where one is required.
    EmptyCorpus,
    /// An utterance with no tokens.
    EmptyUtterance,
    /// A label string that is not `O`, `B-<type>` or `I-<type>`.
    BadLabel { label: String },
    /// A label absent from the tag set.
    UnknownLabel { label: String },
    /// Training produced a non-finite loss.
    Divergence { epoch: usize, batch: usize },
    /// A gradient-checked loss returned different values for identical inputs.
    NonDeterministicLoss,
    /// A `WordFeatures` is missing the sequence for an enabled unit.
    MissingFeatures { unit: &'static str },
    /// A model configuration that cannot be trained.
    BadConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::InvalidRate(r) => write!(f, "dropout rate {r} outside [0, 1)"),
            Error::ShapeMismatch {
                context,
                expected,
                got,
            } => write!(f, "shape mismatch in {context}: expected {expected}, got {got}"),
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::LexiconConflict { word } => {
                write!(f, "conflicting lexicon entries for word '{word}'")
            }
            Error::EmptyPronunciation { word } => {
                write!(f, "empty pronunciation for word '{word}'")
            }
            Error::EmptyWord => write!(f, "empty word"),
            Error::EmptyCorpus => write!(f, "corpus has no utterances"),
            Error::EmptyUtterance => write!(f, "utterance has no tokens"),
            Error::BadLabel { label } => write!(f, "malformed BIO2 label '{label}'"),
            Error::UnknownLabel { label } => write!(f, "label '{label}' not in tag set"),
            Error::Divergence { epoch, batch } => {
                write!(f, "non-finite loss at epoch {epoch}, batch {batch}")
            }
            Error::NonDeterministicLoss => {
                write!(f, "loss function is not deterministic; disable dropout")
            }
            Error::MissingFeatures { unit } => {
                write!(f, "missing features for enabled {unit} unit")
            }
            Error::BadConfig(msg) => write!(f, "bad configuration: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
