//! CoNLL-style corpus files: one `token<TAB>label` per line, a blank line
//! between utterances. Tokens are lowercased on read; labels must be
//! well-formed BIO2.

use std::fs;
use std::path::Path;

use subtag_core::corpus::{validate_label, Corpus, Split, TaggedUtterance};

use crate::error::FormatError;

pub fn parse_corpus(text: &str, split: Split, path_label: &str) -> Result<Corpus, FormatError> {
    let mut utterances = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut flush = |tokens: &mut Vec<String>, labels: &mut Vec<String>| -> Result<(), FormatError> {
        if !tokens.is_empty() {
            utterances.push(TaggedUtterance::new(
                std::mem::take(tokens),
                std::mem::take(labels),
            )?);
        }
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            flush(&mut tokens, &mut labels)?;
            continue;
        }
        let (token, label) = line.split_once('\t').ok_or_else(|| {
            FormatError::parse(path_label, i + 1, "expected 'token<TAB>label'")
        })?;
        if token.is_empty() {
            return Err(FormatError::parse(path_label, i + 1, "empty token"));
        }
        if label.contains('\t') {
            return Err(FormatError::parse(path_label, i + 1, "too many fields"));
        }
        validate_label(label)
            .map_err(|e| FormatError::parse(path_label, i + 1, e.to_string()))?;
        tokens.push(token.to_lowercase());
        labels.push(label.to_string());
    }
    flush(&mut tokens, &mut labels)?;
    Ok(Corpus::new(split, utterances)?)
}

pub fn read_corpus(path: &Path, split: Split) -> Result<Corpus, FormatError> {
    let text = fs::read_to_string(path)?;
    parse_corpus(&text, split, &path.display().to_string())
}

pub fn corpus_to_string(corpus: &Corpus) -> String {
    let mut out = String::new();
    for (i, utt) in corpus.utterances.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (token, label) in utt.tokens.iter().zip(&utt.labels) {
            out.push_str(token);
            out.push('\t');
            out.push_str(label);
            out.push('\n');
        }
    }
    out
}

pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<(), FormatError> {
    Ok(fs::write(path, corpus_to_string(corpus))?)
}

/// The same tokens with replacement labels (predictions).
pub fn with_labels(corpus: &Corpus, labels: &[Vec<String>]) -> Result<Corpus, FormatError> {
    let utterances = corpus
        .utterances
        .iter()
        .zip(labels)
        .map(|(u, l)| Ok(TaggedUtterance::new(u.tokens.clone(), l.clone())?))
        .collect::<Result<Vec<_>, FormatError>>()?;
    Ok(Corpus::new(corpus.split, utterances)?)
}
