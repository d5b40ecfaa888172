//! Per-token precision/recall/F1, the out-of-vocabulary slice evaluation,
//! and vocabulary/parameter-count reporting.
//!
//! The metric is micro-averaged over tokens: a token counts whenever its
//! gold or predicted label is not `O`. `O` predicted as `O` contributes to
//! no count.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::featurize::WordVocab;
use crate::model::{Model, ModelConfig, VocabSizes};

/// Precision, recall and F1 as percentages, with the underlying counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
        let precision = if tp + fp > 0 {
            100.0 * tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            100.0 * tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }

    pub fn zero() -> Prf {
        Prf::from_counts(0, 0, 0)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn add(&mut self, gold: &str, pred: &str) {
        if gold == "O" && pred == "O" {
            return;
        }
        if pred == gold {
            self.tp += 1;
            return;
        }
        if pred != "O" {
            self.fp += 1;
        }
        if gold != "O" {
            self.fn_ += 1;
        }
    }

    fn prf(self) -> Prf {
        Prf::from_counts(self.tp, self.fp, self.fn_)
    }
}

fn check_aligned(gold: &[String], pred: &[String]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::ShapeMismatch {
            context: "per_token_prf",
            expected: gold.len().to_string(),
            got: pred.len().to_string(),
        });
    }
    Ok(())
}

/// Micro-averaged per-token precision/recall/F1 over aligned label
/// sequences.
pub fn per_token_prf<'a, I>(pairs: I) -> Result<Prf>
where
    I: IntoIterator<Item = (&'a [String], &'a [String])>,
{
    let mut counts = Counts::default();
    for (gold, pred) in pairs {
        check_aligned(gold, pred)?;
        for (g, p) in gold.iter().zip(pred) {
            counts.add(g, p);
        }
    }
    Ok(counts.prf())
}

/// Per-token PRF between a gold corpus and aligned predictions.
pub fn corpus_prf(gold: &Corpus, pred: &[Vec<String>]) -> Result<Prf> {
    if gold.len() != pred.len() {
        return Err(Error::ShapeMismatch {
            context: "corpus_prf",
            expected: gold.len().to_string(),
            got: pred.len().to_string(),
        });
    }
    per_token_prf(
        gold.utterances
            .iter()
            .zip(pred)
            .map(|(u, p)| (u.labels.as_slice(), p.as_slice())),
    )
}

/// The overall metric plus a per-label breakdown (secondary report; model
/// selection always uses the micro-averaged overall figure).
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub overall: Prf,
    pub per_label: BTreeMap<String, Prf>,
}

pub fn evaluate(gold: &Corpus, pred: &[Vec<String>]) -> Result<EvalReport> {
    let overall = corpus_prf(gold, pred)?;
    let mut label_counts: BTreeMap<String, Counts> = BTreeMap::new();
    for (u, p) in gold.utterances.iter().zip(pred) {
        for (g, p) in u.labels.iter().zip(p) {
            if g != "O" {
                let c = label_counts.entry(g.clone()).or_default();
                if p == g {
                    c.tp += 1;
                } else {
                    c.fn_ += 1;
                }
            }
            if p != "O" && p != g {
                label_counts.entry(p.clone()).or_default().fp += 1;
            }
        }
    }
    let per_label = label_counts
        .into_iter()
        .map(|(l, c)| (l, c.prf()))
        .collect();
    Ok(EvalReport { overall, per_label })
}

/// Evaluation restricted to utterances containing out-of-vocabulary words.
#[derive(Debug, Clone)]
pub struct OovReport {
    pub utterances_with_oov: usize,
    pub oov_token_count: usize,
    pub prf_on_oov_utterances: Prf,
    pub prf_on_oov_tokens: Prf,
}

/// Selects test utterances containing at least one token absent from the
/// frozen training word vocabulary and scores (a) those whole utterances
/// and (b) only the OOV token positions. An empty slice yields zero counts,
/// not an error.
pub fn oov_slice(gold: &Corpus, pred: &[Vec<String>], vocab: &WordVocab) -> Result<OovReport> {
    if gold.len() != pred.len() {
        return Err(Error::ShapeMismatch {
            context: "oov_slice",
            expected: gold.len().to_string(),
            got: pred.len().to_string(),
        });
    }
    let mut utterances_with_oov = 0;
    let mut oov_token_count = 0;
    let mut utterance_counts = Counts::default();
    let mut token_counts = Counts::default();
    for (u, p) in gold.utterances.iter().zip(pred) {
        check_aligned(&u.labels, p)?;
        let oov_positions: Vec<usize> = u
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| !vocab.contains(t))
            .map(|(i, _)| i)
            .collect();
        if oov_positions.is_empty() {
            continue;
        }
        utterances_with_oov += 1;
        oov_token_count += oov_positions.len();
        for (g, pl) in u.labels.iter().zip(p) {
            utterance_counts.add(g, pl);
        }
        for &i in &oov_positions {
            token_counts.add(&u.labels[i], &p[i]);
        }
    }
    Ok(OovReport {
        utterances_with_oov,
        oov_token_count,
        prf_on_oov_utterances: utterance_counts.prf(),
        prf_on_oov_tokens: token_counts.prf(),
    })
}

/// Tags the test corpus with the model and scores its OOV slice against
/// the model's frozen training word vocabulary.
pub fn oov_slice_with_model(model: &Model, test: &Corpus) -> Result<OovReport> {
    let pred = model.tag_corpus(test)?;
    oov_slice(test, &pred, &model.featurizer.words)
}

/// Vocabulary sizes and trainable-parameter accounting for one model
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabReport {
    pub char_vocab: usize,
    pub phoneme_vocab: usize,
    pub byte_vocab: usize,
    /// chars + marked phonemes + 257 bytes, PAD/UNK entries included.
    pub combined_subword: usize,
    pub word_vocab: usize,
    /// Parameters of the configuration as given.
    pub total_params: usize,
    /// Parameters of the same configuration without word embeddings.
    pub subword_only_params: usize,
    /// Embedding-table cost of the word-level vocabulary: `|vocab| x dim`.
    pub word_embedding_param_delta: usize,
}

pub fn vocab_report_for(sizes: &VocabSizes, config: &ModelConfig, num_tags: usize) -> VocabReport {
    let combined = sizes.chars + sizes.phonemes + sizes.bytes;
    let mut subword_only = *config;
    subword_only.use_word_embeddings = false;
    let subword_only_params = if subword_only.units.is_empty() {
        0
    } else {
        subword_only.param_count(sizes, num_tags)
    };
    VocabReport {
        char_vocab: sizes.chars,
        phoneme_vocab: sizes.phonemes,
        byte_vocab: sizes.bytes,
        combined_subword: combined,
        word_vocab: sizes.words,
        total_params: config.param_count(sizes, num_tags),
        subword_only_params,
        word_embedding_param_delta: sizes.words * config.word_embed_dim,
    }
}

pub fn vocab_report(model: &Model) -> VocabReport {
    vocab_report_for(
        &VocabSizes::of(&model.featurizer),
        &model.config,
        model.tags.len(),
    )
}
