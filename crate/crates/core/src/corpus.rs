//! Tagged utterances and corpora.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

/// A token sequence with one BIO2 label per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedUtterance {
    pub tokens: Vec<String>,
    pub labels: Vec<String>,
}

impl TaggedUtterance {
    pub fn new(tokens: Vec<String>, labels: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyUtterance);
        }
        if tokens.len() != labels.len() {
            return Err(Error::ShapeMismatch {
                context: "TaggedUtterance",
                expected: tokens.len().to_string(),
                got: labels.len().to_string(),
            });
        }
        for label in &labels {
            validate_label(label)?;
        }
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::EmptyWord);
        }
        Ok(TaggedUtterance { tokens, labels })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Checks that a label is `O`, `B-<type>` or `I-<type>`.
pub fn validate_label(label: &str) -> Result<()> {
    if label == "O" {
        return Ok(());
    }
    let well_formed = (label.starts_with("B-") || label.starts_with("I-")) && label.len() > 2;
    if well_formed {
        Ok(())
    } else {
        Err(Error::BadLabel {
            label: label.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub split: Split,
    pub utterances: Vec<TaggedUtterance>,
}

impl Corpus {
    pub fn new(split: Split, utterances: Vec<TaggedUtterance>) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Corpus { split, utterances })
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// All tokens of all utterances, in order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.utterances
            .iter()
            .flat_map(|u| u.tokens.iter().map(String::as_str))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.utterances
            .iter()
            .flat_map(|u| u.labels.iter().map(String::as_str))
    }
}
