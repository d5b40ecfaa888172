//! Pre-trained word vectors: `word v1 v2 ... v_dim` per line. Vectors for
//! words in the training vocabulary replace their rows of the
//! word-embedding table; everything else keeps its random initialization.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::FormatError;

pub fn parse_word_vectors(
    text: &str,
    dim: usize,
    path_label: &str,
) -> Result<BTreeMap<String, Vec<f64>>, FormatError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line");
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    FormatError::parse(path_label, i + 1, format!("bad float '{f}'"))
                })
            })
            .collect::<Result<_, _>>()?;
        if values.len() != dim {
            return Err(FormatError::parse(
                path_label,
                i + 1,
                format!("expected {dim} values, got {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FormatError::parse(path_label, i + 1, "non-finite value"));
        }
        if map.insert(word.to_string(), values).is_some() {
            eprintln!("warning: {path_label}:{}: duplicate vector for '{word}', last occurrence wins", i + 1);
        }
    }
    Ok(map)
}

pub fn read_word_vectors(path: &Path, dim: usize) -> Result<BTreeMap<String, Vec<f64>>, FormatError> {
    let text = fs::read_to_string(path)?;
    parse_word_vectors(&text, dim, &path.display().to_string())
}

pub use subtag_core::model::apply_word_vectors;
