//! Pronunciation lexicon files: `word<TAB>phoneme phoneme ...` with
//! unmarked X-SAMPA tokens, one entry per line, `#` comments ignored.
//! Position markers are applied by the compiler and must never appear in
//! the file.

use std::fs;
use std::path::Path;

use subtag_core::featurize::{compile_lexicon, PhonemeLexicon};

use crate::error::FormatError;

pub fn parse_lexicon_entries(
    text: &str,
    path_label: &str,
) -> Result<Vec<(String, Vec<String>)>, FormatError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, rest) = line.split_once('\t').ok_or_else(|| {
            FormatError::parse(path_label, i + 1, "expected 'word<TAB>phonemes'")
        })?;
        if word.is_empty() {
            return Err(FormatError::parse(path_label, i + 1, "empty word"));
        }
        let phonemes: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
        if phonemes.is_empty() {
            return Err(FormatError::parse(path_label, i + 1, "empty pronunciation"));
        }
        for p in &phonemes {
            if p.ends_with("_B") || p.ends_with("_E") || p.ends_with("_BE") {
                return Err(FormatError::parse(
                    path_label,
                    i + 1,
                    format!("token '{p}' carries a position marker; markers are applied by the compiler"),
                ));
            }
        }
        entries.push((word.to_string(), phonemes));
    }
    Ok(entries)
}

pub fn parse_lexicon(text: &str, path_label: &str) -> Result<PhonemeLexicon, FormatError> {
    let entries = parse_lexicon_entries(text, path_label)?;
    Ok(compile_lexicon(&entries)?)
}

pub fn read_lexicon(path: &Path) -> Result<PhonemeLexicon, FormatError> {
    let text = fs::read_to_string(path)?;
    parse_lexicon(&text, &path.display().to_string())
}

pub fn lexicon_entries_to_string(entries: &[(String, Vec<String>)]) -> String {
    let mut out = String::new();
    for (word, phonemes) in entries {
        out.push_str(word);
        out.push('\t');
        out.push_str(&phonemes.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_and_skips_comments() {
        let lex = parse_lexicon("# comment\ndark\td A r\\ k\n\na\t@\n", "t").unwrap();
        assert_eq!(lex.len(), 2);
        assert!(lex.token_id("d_B").is_some());
        assert!(lex.token_id("@_BE").is_some());
    }

    #[test]
    fn rejects_markers_in_the_file() {
        let err = parse_lexicon("dark\td_B A\n", "t").unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn missing_tab_and_empty_pronunciation_report_lines() {
        assert!(matches!(
            parse_lexicon("dark d A\n", "t").unwrap_err(),
            FormatError::Parse { line: 1, .. }
        ));
        assert!(matches!(
            parse_lexicon("dark\t   \n", "t").unwrap_err(),
            FormatError::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn conflicting_entries_surface_the_core_error() {
        let err = parse_lexicon("dark\td A\ndark\td O\n", "t").unwrap_err();
        assert!(matches!(err, FormatError::Core(_)), "{err}");
    }
}
