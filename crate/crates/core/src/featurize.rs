//! Subword featurization: characters, marked phonemes, and UTF-8 bytes.
//!
//! Vocabularies are built from the training split only and frozen. Every
//! vocabulary reserves PAD (id 0) and, where lookups can fail, UNK (id 1);
//! the byte codec instead covers all 256 byte values plus PAD, so byte
//! featurization is total.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Character vocabulary: one id per Unicode scalar value seen in training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    ids: BTreeMap<char, usize>,
    chars: Vec<char>,
}

impl CharVocab {
    /// Builds from the distinct characters of the training tokens, with ids
    /// assigned in sorted scalar-value order after PAD and UNK.
    pub fn build(corpus: &Corpus) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let set: BTreeSet<char> = corpus.tokens().flat_map(|t| t.chars()).collect();
        Ok(Self::from_chars(set))
    }

    fn from_chars(set: BTreeSet<char>) -> Self {
        let chars: Vec<char> = set.into_iter().collect();
        let ids = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + 2))
            .collect();
        CharVocab { ids, chars }
    }

    /// Rebuilds from a serialized id-ordered character list.
    pub fn from_sorted_chars(chars: Vec<char>) -> Result<Self> {
        let set: BTreeSet<char> = chars.iter().copied().collect();
        if set.len() != chars.len() || !set.iter().zip(&chars) .all(|(a, b)| a == b) {
            return Err(Error::BadConfig(String::from(
                "character vocabulary must be sorted and duplicate-free",
            )));
        }
        Ok(Self::from_chars(set))
    }

    pub fn id(&self, c: char) -> usize {
        self.ids.get(&c).copied().unwrap_or(UNK_ID)
    }

    /// Vocabulary size including PAD and UNK.
    pub fn size(&self) -> usize {
        self.chars.len() + 2
    }

    /// Characters in id order (ids start at 2).
    pub fn chars(&self) -> &[char] {
        &self.chars
    }
}

/// One id per character of the word; unseen characters map to UNK.
pub fn chars_of(word: &str, vocab: &CharVocab) -> Result<Vec<usize>> {
    if word.is_empty() {
        return Err(Error::EmptyWord);
    }
    Ok(word.chars().map(|c| vocab.id(c)).collect())
}

/// The UTF-8 byte encoding of a word, one id per byte. Total and OOV-free:
/// ids 0..=255 are the byte values, 256 is PAD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ByteCodec;

impl ByteCodec {
    pub const PAD: usize = 256;

    /// 256 byte values plus PAD.
    pub const fn size() -> usize {
        257
    }
}

pub fn bytes_of(word: &str) -> Vec<usize> {
    word.bytes().map(|b| b as usize).collect()
}

/// A pronunciation lexicon compiled into marked phoneme-token ids.
///
/// The compiler appends `_B` to a word's first phoneme and `_E` to its
/// last; a single-phoneme word gets the fused `_BE`. Lookups are
/// lowercased to match corpus tokenization. Words absent from the lexicon
/// map to the one-element sequence `[UNK]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeLexicon {
    entries: BTreeMap<String, Vec<usize>>,
    tokens: Vec<String>,
    token_ids: BTreeMap<String, usize>,
}

impl PhonemeLexicon {
    /// An empty lexicon: every word maps to `[UNK]`.
    pub fn empty() -> Self {
        PhonemeLexicon {
            entries: BTreeMap::new(),
            tokens: Vec::new(),
            token_ids: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Marked-token vocabulary size including PAD and UNK.
    pub fn vocab_size(&self) -> usize {
        self.tokens.len() + 2
    }

    /// Marked tokens in id order (ids start at 2).
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token_id(&self, token: &str) -> Option<usize> {
        self.token_ids.get(token).copied()
    }

    /// Entries as (word, marked token sequence), in deterministic order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, Vec<&str>)> {
        self.entries.iter().map(|(w, ids)| {
            let toks = ids.iter().map(|&i| self.tokens[i - 2].as_str()).collect();
            (w.as_str(), toks)
        })
    }

    /// Rebuilds from serialized parts: the id-ordered marked-token list and
    /// per-word marked sequences.
    pub fn from_marked(tokens: Vec<String>, entries: Vec<(String, Vec<String>)>) -> Result<Self> {
        let token_ids: BTreeMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i + 2))
            .collect();
        if token_ids.len() != tokens.len() {
            return Err(Error::BadConfig(String::from(
                "phoneme vocabulary has duplicate tokens",
            )));
        }
        let mut map = BTreeMap::new();
        for (word, seq) in entries {
            let ids = seq
                .iter()
                .map(|t| {
                    token_ids.get(t).copied().ok_or_else(|| Error::BadConfig(
                        format!("lexicon token '{t}' missing from phoneme vocabulary"),
                    ))
                })
                .collect::<Result<Vec<usize>>>()?;
            if ids.is_empty() {
                return Err(Error::EmptyPronunciation { word });
            }
            map.insert(word, ids);
        }
        Ok(PhonemeLexicon {
            entries: map,
            tokens,
            token_ids,
        })
    }
}

fn mark_pronunciation(phonemes: &[String]) -> Vec<String> {
    let n = phonemes.len();
    phonemes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if n == 1 {
                format!("{p}_BE")
            } else if i == 0 {
                format!("{p}_B")
            } else if i == n - 1 {
                format!("{p}_E")
            } else {
                p.clone()
            }
        })
        .collect()
}

/// Compiles raw `word -> unmarked phoneme list` entries into a frozen
/// lexicon. Words are lowercased; duplicate words are allowed only with
/// identical pronunciations.
pub fn compile_lexicon(raw: &[(String, Vec<String>)]) -> Result<PhonemeLexicon> {
    let mut marked: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (word, phonemes) in raw {
        if phonemes.is_empty() {
            return Err(Error::EmptyPronunciation { word: word.clone() });
        }
        let word = word.to_lowercase();
        let seq = mark_pronunciation(phonemes);
        match marked.get(&word) {
            Some(existing) if *existing != seq => {
                return Err(Error::LexiconConflict { word });
            }
            _ => {
                marked.insert(word, seq);
            }
        }
    }

    let token_set: BTreeSet<String> = marked.values().flatten().cloned().collect();
    let tokens: Vec<String> = token_set.into_iter().collect();
    let token_ids: BTreeMap<String, usize> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i + 2))
        .collect();
    let entries = marked
        .into_iter()
        .map(|(w, seq)| {
            let ids = seq.iter().map(|t| token_ids[t]).collect();
            (w, ids)
        })
        .collect();
    Ok(PhonemeLexicon {
        entries,
        tokens,
        token_ids,
    })
}

/// The marked phoneme-id sequence for a word; `[UNK]` when absent.
pub fn phonemes_of(word: &str, lexicon: &PhonemeLexicon) -> Vec<usize> {
    match lexicon.entries.get(&word.to_lowercase()) {
        Some(ids) => ids.clone(),
        None => vec![UNK_ID],
    }
}

/// Word-level vocabulary over training token types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordVocab {
    ids: BTreeMap<String, usize>,
    words: Vec<String>,
}

impl WordVocab {
    pub fn build(corpus: &Corpus) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let set: BTreeSet<String> = corpus.tokens().map(|t| t.to_string()).collect();
        Ok(Self::from_set(set))
    }

    fn from_set(set: BTreeSet<String>) -> Self {
        let words: Vec<String> = set.into_iter().collect();
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i + 2))
            .collect();
        WordVocab { ids, words }
    }

    pub fn from_sorted_words(words: Vec<String>) -> Result<Self> {
        let set: BTreeSet<String> = words.iter().cloned().collect();
        if set.len() != words.len() || !set.iter().zip(&words).all(|(a, b)| a == b) {
            return Err(Error::BadConfig(String::from(
                "word vocabulary must be sorted and duplicate-free",
            )));
        }
        Ok(Self::from_set(set))
    }

    pub fn id(&self, word: &str) -> usize {
        self.ids.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    /// Vocabulary size including PAD and UNK.
    pub fn size(&self) -> usize {
        self.words.len() + 2
    }

    /// Words in id order (ids start at 2).
    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// The three subword id-sequences (plus optional word id) for one token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordFeatures {
    pub char_ids: Vec<usize>,
    pub phoneme_ids: Vec<usize>,
    pub byte_ids: Vec<usize>,
    pub word_id: Option<usize>,
}

/// Frozen vocabularies plus the lexicon; a pure function from words to
/// [`WordFeatures`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Featurizer {
    pub chars: CharVocab,
    pub lexicon: PhonemeLexicon,
    pub bytes: ByteCodec,
    pub words: WordVocab,
}

impl Featurizer {
    /// Builds all vocabularies from the training split; the lexicon is an
    /// external resource compiled beforehand.
    pub fn build(train: &Corpus, lexicon: PhonemeLexicon) -> Result<Self> {
        Ok(Featurizer {
            chars: CharVocab::build(train)?,
            lexicon,
            bytes: ByteCodec,
            words: WordVocab::build(train)?,
        })
    }

    pub fn features(&self, word: &str, with_word_id: bool) -> Result<WordFeatures> {
        Ok(WordFeatures {
            char_ids: chars_of(word, &self.chars)?,
            phoneme_ids: phonemes_of(word, &self.lexicon),
            byte_ids: bytes_of(word),
            word_id: with_word_id.then(|| self.words.id(word)),
        })
    }

    pub fn featurize(&self, tokens: &[String], with_word_id: bool) -> Result<Vec<WordFeatures>> {
        tokens
            .iter()
            .map(|t| self.features(t, with_word_id))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Split, TaggedUtterance};
    use proptest::prelude::*;

    fn corpus_of(words: &[&str]) -> Corpus {
        let utt = TaggedUtterance::new(
            words.iter().map(|w| w.to_string()).collect(),
            words.iter().map(|_| "O".to_string()).collect(),
        )
        .unwrap();
        Corpus::new(Split::Train, vec![utt]).unwrap()
    }

    fn lexicon_of(entries: &[(&str, &[&str])]) -> PhonemeLexicon {
        let raw: Vec<(String, Vec<String>)> = entries
            .iter()
            .map(|(w, ps)| (w.to_string(), ps.iter().map(|p| p.to_string()).collect()))
            .collect();
        compile_lexicon(&raw).unwrap()
    }

    #[test]
    fn chars_of_known_word_has_no_unk() {
        let vocab = CharVocab::build(&corpus_of(&["dark"])).unwrap();
        let ids = chars_of("dark", &vocab).unwrap();
        assert_eq!(ids.len(), 4);
        assert!(ids.iter().all(|&i| i != UNK_ID && i != PAD_ID));
    }

    #[test]
    fn unseen_character_maps_to_unk() {
        let vocab = CharVocab::build(&corpus_of(&["dark"])).unwrap();
        // Cyrillic г was never seen.
        let ids = chars_of("da\u{0433}k", &vocab).unwrap();
        assert_eq!(ids.len(), 4);
        assert_eq!(ids[2], UNK_ID);
        assert!(ids[0] != UNK_ID && ids[3] != UNK_ID);
    }

    #[test]
    fn equal_characters_get_equal_ids() {
        let vocab = CharVocab::build(&corpus_of(&["aa"])).unwrap();
        let ids = chars_of("aa", &vocab).unwrap();
        assert_eq!(ids[0], ids[1]);
    }

    #[test]
    fn empty_word_is_an_error() {
        let vocab = CharVocab::build(&corpus_of(&["a"])).unwrap();
        assert_eq!(chars_of("", &vocab), Err(Error::EmptyWord));
    }

    #[test]
    fn char_vocab_counts_distinct_characters() {
        let vocab = CharVocab::build(&corpus_of(&["ab", "ba"])).unwrap();
        assert_eq!(vocab.size(), 4); // a, b, UNK, PAD
    }

    #[test]
    fn char_vocab_is_deterministic() {
        let a = CharVocab::build(&corpus_of(&["play", "queen", "sch\u{00f6}n"])).unwrap();
        let b = CharVocab::build(&corpus_of(&["play", "queen", "sch\u{00f6}n"])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bytes_of_schoen_matches_utf8() {
        assert_eq!(
            bytes_of("Sch\u{00f6}n"),
            vec![0x53, 0x63, 0x68, 0xC3, 0xB6, 0x6E]
        );
    }

    #[test]
    fn bytes_of_ascii_is_identity() {
        assert_eq!(bytes_of("a"), vec![0x61]);
    }

    #[test]
    fn bytes_of_cjk_is_three_bytes() {
        assert_eq!(bytes_of("\u{65e5}"), vec![0xE6, 0x97, 0xA5]);
    }

    #[test]
    fn byte_codec_is_always_257() {
        assert_eq!(ByteCodec::size(), 257);
        assert_eq!(ByteCodec::PAD, 256);
    }

    #[test]
    fn compile_marks_first_and_last_phoneme() {
        let lex = lexicon_of(&[("dark", &["d", "A", "r\\", "k"])]);
        let marked: Vec<(&str, Vec<&str>)> = lex.entries().collect();
        assert_eq!(marked[0].0, "dark");
        assert_eq!(marked[0].1, vec!["d_B", "A", "r\\", "k_E"]);
    }

    #[test]
    fn single_phoneme_word_gets_fused_marker() {
        let lex = lexicon_of(&[("a", &["@"])]);
        let marked: Vec<(&str, Vec<&str>)> = lex.entries().collect();
        assert_eq!(marked[0].1, vec!["@_BE"]);
        let ids = phonemes_of("a", &lex);
        assert_eq!(ids.len(), 1);
        assert_eq!(ids[0], lex.token_id("@_BE").unwrap());
    }

    #[test]
    fn shared_phonemes_share_one_vocab_id() {
        let lex = lexicon_of(&[("ab", &["A", "b"]), ("cab", &["k", "A", "b"])]);
        // Bare interior "A" appears in both words and gets a single id.
        assert_eq!(
            lex.tokens().iter().filter(|t| t.as_str() == "A").count(),
            1
        );
    }

    #[test]
    fn conflicting_duplicate_entries_error_citing_word() {
        let raw = vec![
            ("dark".to_string(), vec!["d".to_string(), "A".to_string()]),
            ("dark".to_string(), vec!["d".to_string(), "O".to_string()]),
        ];
        match compile_lexicon(&raw).unwrap_err() {
            Error::LexiconConflict { word } => assert_eq!(word, "dark"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identical_duplicate_entries_are_fine() {
        let raw = vec![
            ("dark".to_string(), vec!["d".to_string()]),
            ("DARK".to_string(), vec!["d".to_string()]),
        ];
        assert_eq!(compile_lexicon(&raw).unwrap().len(), 1);
    }

    #[test]
    fn empty_pronunciation_is_an_error() {
        let raw = vec![("dark".to_string(), vec![])];
        assert!(matches!(
            compile_lexicon(&raw).unwrap_err(),
            Error::EmptyPronunciation { .. }
        ));
    }

    #[test]
    fn missing_word_maps_to_unk_sequence() {
        let lex = lexicon_of(&[("dark", &["d", "A", "r\\", "k"])]);
        assert_eq!(phonemes_of("queen", &lex), vec![UNK_ID]);
    }

    #[test]
    fn lexicon_lookup_is_case_normalized() {
        let lex = lexicon_of(&[("Dark", &["d", "A"])]);
        assert_eq!(phonemes_of("dark", &lex), phonemes_of("DARK", &lex));
        assert_ne!(phonemes_of("dark", &lex), vec![UNK_ID]);
    }

    #[test]
    fn featurizer_produces_all_three_sequences() {
        let corpus = corpus_of(&["play", "dark"]);
        let lex = lexicon_of(&[("dark", &["d", "A", "r\\", "k"])]);
        let f = Featurizer::build(&corpus, lex).unwrap();
        let feats = f.features("dark", true).unwrap();
        assert_eq!(feats.char_ids.len(), 4);
        assert_eq!(feats.byte_ids.len(), 4);
        assert_eq!(feats.phoneme_ids.len(), 4);
        assert!(feats.word_id.is_some());
        let oov = f.features("queen", true).unwrap();
        assert_eq!(oov.phoneme_ids, vec![UNK_ID]);
        assert_eq!(oov.word_id, Some(UNK_ID));
    }

    proptest! {
        #[test]
        fn byte_concat_roundtrips_utf8(word in "[a-z\u{00e0}-\u{00ff}\u{4e00}-\u{4e2f}]{1,12}") {
            let ids = bytes_of(&word);
            prop_assert!(ids.len() >= word.chars().count());
            prop_assert_eq!(ids.len() == word.chars().count(), word.is_ascii());
            let bytes: Vec<u8> = ids.iter().map(|&i| i as u8).collect();
            prop_assert_eq!(core::str::from_utf8(&bytes).unwrap(), word.as_str());
        }

        #[test]
        fn marker_rule_holds(
            words in proptest::collection::vec(("[a-z]{1,8}", proptest::collection::vec("[a-zA-Z@{}\\\\]{1,3}", 1..6)), 1..10)
        ) {
            let raw: Vec<(String, Vec<String>)> = words
                .into_iter()
                .map(|(w, ps)| (w, ps.into_iter().collect()))
                .collect();
            let lex = match compile_lexicon(&raw) {
                Ok(l) => l,
                Err(Error::LexiconConflict { .. }) => return Ok(()),
                Err(e) => panic!("unexpected {e:?}"),
            };
            for (_, seq) in lex.entries() {
                let n = seq.len();
                if n == 1 {
                    prop_assert!(seq[0].ends_with("_BE"));
                } else {
                    prop_assert!(seq[0].ends_with("_B") && !seq[0].ends_with("_BE"));
                    prop_assert!(seq[n - 1].ends_with("_E") && !seq[n - 1].ends_with("_BE"));
                    for tok in &seq[1..n - 1] {
                        prop_assert!(!tok.ends_with("_B") && !tok.ends_with("_E"));
                    }
                }
            }
        }
    }
}
