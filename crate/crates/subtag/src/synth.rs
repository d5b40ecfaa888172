//! Deterministic synthetic corpora.
//!
//! The affix task generates voice-command-style utterances over pseudo-word
//! pools in which the entity type is carried by a word-internal suffix
//! (`-lo` songs, `-ra` artists, `-ki` devices), so every subword unit can
//! recover the tag while plain word identity also works for in-vocabulary
//! tokens. Pronunciations come from a fixed letter-to-X-SAMPA mapping with
//! configurable lexicon coverage.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use subtag_core::corpus::{Corpus, Split, TaggedUtterance};
use subtag_core::featurize::{compile_lexicon, PhonemeLexicon};
use subtag_core::rng::{derive_seed, seeded, SeededRng};

const CONSONANTS: [char; 12] = ['b', 'd', 'f', 'g', 'k', 'm', 'n', 'p', 's', 't', 'v', 'z'];
const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cat {
    Song,
    Artist,
    Device,
    Filler,
}

impl Cat {
    fn suffix(self) -> &'static str {
        match self {
            Cat::Song => "lo",
            Cat::Artist => "ra",
            Cat::Device => "ki",
            Cat::Filler => "mu",
        }
    }

    fn label(self) -> Option<&'static str> {
        match self {
            Cat::Song => Some("song"),
            Cat::Artist => Some("artist"),
            Cat::Device => Some("device"),
            Cat::Filler => None,
        }
    }
}

fn stem(rng: &mut SeededRng, syllables: usize) -> String {
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(*CONSONANTS.choose(rng).expect("non-empty"));
        s.push(*VOWELS.choose(rng).expect("non-empty"));
    }
    s
}

/// `n` distinct pseudo-words of one category, never colliding with `taken`.
fn word_pool(rng: &mut SeededRng, cat: Cat, n: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut pool = Vec::with_capacity(n);
    while pool.len() < n {
        let word = format!("{}{}", stem(rng, 2), cat.suffix());
        if taken.insert(word.clone()) {
            pool.push(word);
        }
    }
    pool
}

/// Letter-wise pseudo grapheme-to-phoneme mapping into X-SAMPA-style
/// tokens.
pub fn pronounce(word: &str) -> Vec<String> {
    word.chars()
        .filter_map(|c| {
            let p = match c {
                'a' => "A",
                'b' => "b",
                'c' => "k",
                'd' => "d",
                'e' => "E",
                'f' => "f",
                'g' => "g",
                'h' => "h",
                'i' => "i",
                'j' => "dZ",
                'k' => "k",
                'l' => "l",
                'm' => "m",
                'n' => "n",
                'o' => "@U",
                'p' => "p",
                'q' => "k",
                'r' => "r\\",
                's' => "s",
                't' => "t",
                'u' => "u",
                'v' => "v",
                'w' => "w",
                'x' => "ks",
                'y' => "j",
                'z' => "z",
                _ => return None,
            };
            Some(p.to_string())
        })
        .collect()
}

/// Lexicon entries for a `coverage` fraction of the given words.
fn lexicon_for(
    words: impl IntoIterator<Item = String>,
    coverage: f64,
    rng: &mut SeededRng,
) -> Vec<(String, Vec<String>)> {
    words
        .into_iter()
        .filter(|_| rng.random::<f64>() < coverage)
        .map(|w| {
            let pron = pronounce(&w);
            (w, pron)
        })
        .filter(|(_, p)| !p.is_empty())
        .collect()
}

#[derive(Debug, Clone)]
pub struct AffixTaskSpec {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub entity_words_per_type: usize,
    pub filler_words: usize,
    /// Fraction of word types with a lexicon entry.
    pub lexicon_coverage: f64,
    /// Fraction of test entity slots filled from a pool never seen in
    /// train/dev.
    pub oov_rate: f64,
    pub seed: u64,
}

impl Default for AffixTaskSpec {
    fn default() -> Self {
        AffixTaskSpec {
            n_train: 120,
            n_dev: 60,
            n_test: 60,
            entity_words_per_type: 24,
            filler_words: 16,
            lexicon_coverage: 0.9,
            oov_rate: 0.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
    pub lexicon: PhonemeLexicon,
    pub lexicon_entries: Vec<(String, Vec<String>)>,
}

struct Pools {
    song: Vec<String>,
    artist: Vec<String>,
    device: Vec<String>,
    filler: Vec<String>,
}

impl Pools {
    fn of(&self, cat: Cat) -> &[String] {
        match cat {
            Cat::Song => &self.song,
            Cat::Artist => &self.artist,
            Cat::Device => &self.device,
            Cat::Filler => &self.filler,
        }
    }
}

enum Piece {
    Lit(&'static str),
    // (category, max phrase length)
    Slot(Cat, usize),
}

fn templates() -> Vec<Vec<Piece>> {
    use Piece::{Lit, Slot};
    vec![
        vec![Lit("play"), Slot(Cat::Song, 2)],
        vec![Lit("play"), Slot(Cat::Device, 1)],
        vec![Lit("play"), Slot(Cat::Song, 2), Lit("by"), Slot(Cat::Artist, 1)],
        vec![Lit("turn"), Lit("on"), Lit("the"), Slot(Cat::Device, 1)],
        vec![Lit("show"), Lit("me"), Slot(Cat::Artist, 1)],
        vec![Lit("search"), Lit("for"), Slot(Cat::Filler, 1)],
        vec![Lit("skip"), Lit("this"), Lit("one")],
        vec![Lit("volume"), Lit("up")],
    ]
}

fn sample_utterance(
    rng: &mut SeededRng,
    pools: &Pools,
    oov_pools: Option<(&Pools, f64)>,
) -> TaggedUtterance {
    let templates = templates();
    let template = &templates[rng.random_range(0..templates.len())];
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    for piece in template {
        match piece {
            Piece::Lit(word) => {
                tokens.push(word.to_string());
                labels.push("O".to_string());
            }
            Piece::Slot(cat, max_len) => {
                let len = rng.random_range(1..=*max_len);
                for i in 0..len {
                    let pool = match oov_pools {
                        Some((unseen, rate))
                            if !unseen.of(*cat).is_empty() && rng.random::<f64>() < rate =>
                        {
                            unseen.of(*cat)
                        }
                        _ => pools.of(*cat),
                    };
                    let word = pool.choose(rng).expect("non-empty pool").clone();
                    tokens.push(word);
                    labels.push(match cat.label() {
                        Some(ty) if i == 0 => format!("B-{ty}"),
                        Some(ty) => format!("I-{ty}"),
                        None => "O".to_string(),
                    });
                }
            }
        }
    }
    TaggedUtterance::new(tokens, labels).expect("generated utterances are well-formed")
}

fn corpus(
    rng: &mut SeededRng,
    split: Split,
    n: usize,
    pools: &Pools,
    oov: Option<(&Pools, f64)>,
) -> Corpus {
    let utterances = (0..n).map(|_| sample_utterance(rng, pools, oov)).collect();
    Corpus::new(split, utterances).expect("n >= 1")
}

/// Generates the affix-tagging task: train/dev from shared word pools, a
/// test split whose entity slots are OOV with probability `oov_rate`, and
/// a pronunciation lexicon covering pool words, literals and the unseen
/// pool alike (an ASR lexicon is an external resource, not a training
/// artifact).
pub fn affix_task(spec: &AffixTaskSpec) -> SynthData {
    let mut pool_rng = seeded(derive_seed(spec.seed, 100));
    let mut taken = BTreeSet::new();
    let pools = Pools {
        song: word_pool(&mut pool_rng, Cat::Song, spec.entity_words_per_type, &mut taken),
        artist: word_pool(&mut pool_rng, Cat::Artist, spec.entity_words_per_type, &mut taken),
        device: word_pool(&mut pool_rng, Cat::Device, spec.entity_words_per_type, &mut taken),
        filler: word_pool(&mut pool_rng, Cat::Filler, spec.filler_words, &mut taken),
    };
    let unseen = Pools {
        song: word_pool(&mut pool_rng, Cat::Song, spec.entity_words_per_type / 2 + 1, &mut taken),
        artist: word_pool(
            &mut pool_rng,
            Cat::Artist,
            spec.entity_words_per_type / 2 + 1,
            &mut taken,
        ),
        device: word_pool(
            &mut pool_rng,
            Cat::Device,
            spec.entity_words_per_type / 2 + 1,
            &mut taken,
        ),
        filler: Vec::new(),
    };

    let mut text_rng = seeded(derive_seed(spec.seed, 200));
    let train = corpus(&mut text_rng, Split::Train, spec.n_train, &pools, None);
    let dev = corpus(&mut text_rng, Split::Dev, spec.n_dev, &pools, None);
    let oov = (spec.oov_rate > 0.0).then_some((&unseen, spec.oov_rate));
    let test = corpus(&mut text_rng, Split::Test, spec.n_test, &pools, oov);

    let mut lex_rng = seeded(derive_seed(spec.seed, 300));
    let mut all_words: BTreeSet<String> = taken;
    for t in templates().iter().flatten() {
        if let Piece::Lit(w) = t {
            all_words.insert(w.to_string());
        }
    }
    let lexicon_entries = lexicon_for(all_words, spec.lexicon_coverage, &mut lex_rng);
    let lexicon = compile_lexicon(&lexicon_entries).expect("generated entries are consistent");

    SynthData {
        train,
        dev,
        test,
        lexicon,
        lexicon_entries,
    }
}

#[derive(Debug, Clone)]
pub struct VocabScaleSpec {
    pub n_utts: usize,
    pub word_pool: usize,
    pub lexicon_coverage: f64,
    pub seed: u64,
}

impl Default for VocabScaleSpec {
    fn default() -> Self {
        VocabScaleSpec {
            n_utts: 5000,
            word_pool: 3500,
            lexicon_coverage: 0.5,
            seed: 11,
        }
    }
}

/// A corpus with many distinct word types and a bounded subword inventory,
/// for vocabulary-scaling measurements.
pub fn vocab_scale_task(spec: &VocabScaleSpec) -> SynthData {
    let mut pool_rng = seeded(derive_seed(spec.seed, 100));
    let mut pool: BTreeSet<String> = BTreeSet::new();
    while pool.len() < spec.word_pool {
        let syllables = pool_rng.random_range(2..=4);
        pool.insert(stem(&mut pool_rng, syllables));
    }
    let pool: Vec<String> = pool.into_iter().collect();

    let mut text_rng = seeded(derive_seed(spec.seed, 200));
    let mut utterances = Vec::with_capacity(spec.n_utts);
    for _ in 0..spec.n_utts {
        let mut tokens = vec!["play".to_string()];
        let mut labels = vec!["O".to_string()];
        let n_song = text_rng.random_range(1..=2);
        for i in 0..n_song {
            tokens.push(pool.choose(&mut text_rng).expect("non-empty").clone());
            labels.push(if i == 0 { "B-song".into() } else { "I-song".into() });
        }
        tokens.push("by".to_string());
        labels.push("O".to_string());
        tokens.push(pool.choose(&mut text_rng).expect("non-empty").clone());
        labels.push("B-artist".to_string());
        utterances.push(TaggedUtterance::new(tokens, labels).expect("well-formed"));
    }
    let train = Corpus::new(Split::Train, utterances).expect("n >= 1");

    let mut lex_rng = seeded(derive_seed(spec.seed, 300));
    let mut all_words: BTreeSet<String> = pool.into_iter().collect();
    all_words.insert("play".to_string());
    all_words.insert("by".to_string());
    let lexicon_entries = lexicon_for(all_words, spec.lexicon_coverage, &mut lex_rng);
    let lexicon = compile_lexicon(&lexicon_entries).expect("generated entries are consistent");

    SynthData {
        dev: train.clone(),
        test: train.clone(),
        train,
        lexicon,
        lexicon_entries,
    }
}

/// The worked introduction example with gold entities.
pub fn paper_example() -> TaggedUtterance {
    TaggedUtterance::new(
        "play we are the champions by queen"
            .split_whitespace()
            .map(str::to_string)
            .collect(),
        vec![
            "O".into(),
            "B-song".into(),
            "I-song".into(),
            "I-song".into(),
            "I-song".into(),
            "O".into(),
            "B-artist".into(),
        ],
    )
    .expect("well-formed")
}
