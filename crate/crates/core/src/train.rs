//! Mini-batch training: shuffled padded batches, forward/backward over the
//! full model, Adam updates, a fixed epoch budget, and dev-set model
//! selection.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::crf::{nll_on_tape, TagSet};
use crate::error::{Error, Result};
use crate::eval::{corpus_prf, Prf};
use crate::featurize::{ByteCodec, Featurizer, PhonemeLexicon, WordFeatures, PAD_ID};
use crate::gradcheck::{check_gradients, GradCheck};
use crate::model::{emission_vars, Model, ModelConfig, ModelParams, UnitSet, VocabSizes};
use crate::optim::{adam_step, AdamState};
use crate::rng::{derive_seed, seeded, SeededRng};
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Everything a training run needs; a run is fully determined by this
/// value plus the corpora.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub dropout_rate: f64,
    pub units: UnitSet,
    pub use_word_embeddings: bool,
    pub seed: u64,
    pub subword_embed_dim: usize,
    pub subword_hidden_dim: usize,
    pub word_embed_dim: usize,
    pub word_hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.0007,
            batch_size: 4,
            max_epochs: 40,
            dropout_rate: 0.5,
            units: UnitSet::ALL,
            use_word_embeddings: false,
            seed: 1,
            subword_embed_dim: 35,
            subword_hidden_dim: 35,
            word_embed_dim: 64,
            word_hidden_dim: 128,
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            units: self.units,
            use_word_embeddings: self.use_word_embeddings,
            subword_embed_dim: self.subword_embed_dim,
            subword_hidden_dim: self.subword_hidden_dim,
            word_embed_dim: self.word_embed_dim,
            word_hidden_dim: self.word_hidden_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::BadConfig(String::from("batch_size must be >= 1")));
        }
        if self.max_epochs == 0 {
            return Err(Error::BadConfig(String::from("max_epochs must be >= 1")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidRate(self.dropout_rate));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::BadConfig(String::from("learning_rate must be positive")));
        }
        self.model_config().validate()
    }
}

/// One utterance ready for the model: subword features and gold tag ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeaturizedUtterance {
    pub features: Vec<WordFeatures>,
    pub gold: Vec<usize>,
}

/// Featurizes a corpus against frozen vocabularies and maps its labels to
/// tag ids.
pub fn featurize_corpus(
    featurizer: &Featurizer,
    tags: &TagSet,
    corpus: &Corpus,
    with_word_ids: bool,
) -> Result<Vec<FeaturizedUtterance>> {
    corpus
        .utterances
        .iter()
        .map(|u| {
            let features = featurizer.featurize(&u.tokens, with_word_ids)?;
            let gold = u
                .labels
                .iter()
                .map(|l| tags.id(l))
                .collect::<Result<Vec<usize>>>()?;
            Ok(FeaturizedUtterance { features, gold })
        })
        .collect()
}

/// A rectangular grid of padded id sequences: one row per (utterance,
/// token) cell, each `width` ids long, with the real length per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedSeqs {
    pub width: usize,
    pub ids: Vec<usize>,
    pub lens: Vec<usize>,
}

impl PaddedSeqs {
    fn build<'a>(
        cells: impl Iterator<Item = Option<&'a [usize]>> + Clone,
        pad: usize,
    ) -> PaddedSeqs {
        let width = cells
            .clone()
            .filter_map(|c| c.map(<[usize]>::len))
            .max()
            .unwrap_or(0)
            .max(1);
        let mut ids = Vec::new();
        let mut lens = Vec::new();
        for cell in cells {
            let seq = cell.unwrap_or(&[]);
            lens.push(seq.len());
            ids.extend_from_slice(seq);
            ids.extend(core::iter::repeat(pad).take(width - seq.len()));
        }
        PaddedSeqs { width, ids, lens }
    }

    fn cell(&self, index: usize) -> &[usize] {
        &self.ids[index * self.width..index * self.width + self.lens[index]]
    }
}

/// A padded mini-batch. Token and subword sequences are padded with PAD
/// ids to the batch maximum; `token_mask` records the real positions, and
/// the forward pass reads only real prefixes, so padded cells never touch
/// the loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub n_utts: usize,
    pub max_tokens: usize,
    pub token_mask: Vec<bool>,
    pub gold: Vec<usize>,
    pub word_ids: Option<Vec<usize>>,
    pub char_ids: PaddedSeqs,
    pub phoneme_ids: PaddedSeqs,
    pub byte_ids: PaddedSeqs,
}

impl Batch {
    fn build(utts: &[&FeaturizedUtterance]) -> Batch {
        let n_utts = utts.len();
        let max_tokens = utts.iter().map(|u| u.features.len()).max().unwrap_or(0);
        let with_words = utts
            .first()
            .and_then(|u| u.features.first())
            .map_or(false, |f| f.word_id.is_some());

        let mut token_mask = vec![false; n_utts * max_tokens];
        let mut gold = vec![0usize; n_utts * max_tokens];
        let mut word_ids = with_words.then(|| vec![PAD_ID; n_utts * max_tokens]);
        for (u, utt) in utts.iter().enumerate() {
            for t in 0..utt.features.len() {
                token_mask[u * max_tokens + t] = true;
                gold[u * max_tokens + t] = utt.gold[t];
                if let Some(w) = word_ids.as_mut() {
                    w[u * max_tokens + t] = utt.features[t].word_id.unwrap_or(PAD_ID);
                }
            }
        }

        let grid = |select: fn(&WordFeatures) -> &[usize], pad: usize| {
            let cells = (0..n_utts * max_tokens).map(|i| {
                let (u, t) = (i / max_tokens, i % max_tokens);
                utts[u].features.get(t).map(|f| select(f))
            });
            PaddedSeqs::build(cells, pad)
        };
        Batch {
            n_utts,
            max_tokens,
            token_mask,
            gold,
            word_ids,
            char_ids: grid(|f| &f.char_ids, PAD_ID),
            phoneme_ids: grid(|f| &f.phoneme_ids, PAD_ID),
            byte_ids: grid(|f| &f.byte_ids, ByteCodec::PAD),
        }
    }

    pub fn token_count(&self, u: usize) -> usize {
        (0..self.max_tokens)
            .take_while(|t| self.token_mask[u * self.max_tokens + t])
            .count()
    }

    /// Reconstructs the real (unpadded) features of one utterance from the
    /// padded grids.
    pub fn features_of(&self, u: usize) -> Vec<WordFeatures> {
        (0..self.token_count(u))
            .map(|t| {
                let i = u * self.max_tokens + t;
                WordFeatures {
                    char_ids: self.char_ids.cell(i).to_vec(),
                    phoneme_ids: self.phoneme_ids.cell(i).to_vec(),
                    byte_ids: self.byte_ids.cell(i).to_vec(),
                    word_id: self.word_ids.as_ref().map(|w| w[i]),
                }
            })
            .collect()
    }

    pub fn gold_of(&self, u: usize) -> Vec<usize> {
        let n = self.token_count(u);
        self.gold[u * self.max_tokens..u * self.max_tokens + n].to_vec()
    }
}

/// Shuffles the utterances with the run RNG and packs them into padded
/// batches of at most `batch_size`.
pub fn make_batches(
    utts: &[FeaturizedUtterance],
    batch_size: usize,
    rng: &mut SeededRng,
) -> Vec<Batch> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..utts.len()).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size.max(1))
        .map(|chunk| {
            let refs: Vec<&FeaturizedUtterance> = chunk.iter().map(|&i| &utts[i]).collect();
            Batch::build(&refs)
        })
        .collect()
}

/// Forward and backward over one batch. Returns the batch loss (mean of
/// per-utterance NLLs), the per-utterance losses, and gradients aligned
/// with [`ModelParams::named`]. On a non-finite loss the gradient list is
/// empty and the caller reports divergence.
pub fn batch_backward(
    params: &ModelParams,
    batch: &Batch,
    dropout_rate: f64,
    rng: &mut SeededRng,
) -> Result<(f64, Vec<f64>, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let vars = params.insert_into(&mut tape);
    let mut losses = Vec::with_capacity(batch.n_utts);
    for u in 0..batch.n_utts {
        let features = batch.features_of(u);
        let gold = batch.gold_of(u);
        let dropout = (dropout_rate > 0.0).then(|| (dropout_rate, &mut *rng));
        let emis = emission_vars(&mut tape, &vars, &features, dropout)?;
        losses.push(nll_on_tape(&mut tape, &emis, vars.transitions, &gold)?);
    }
    let loss_var = tape.mean_scalars(&losses);
    let loss = tape.value(loss_var).item();
    let per_utt: Vec<f64> = losses.iter().map(|&v| tape.value(v).item()).collect();
    if !loss.is_finite() {
        return Ok((loss, per_utt, Vec::new()));
    }
    let mut grads = tape.backward(loss_var);
    let grad_tensors: Vec<Tensor> = vars.flat.iter().map(|&v| grads.take(v)).collect();
    Ok((loss, per_utt, grad_tensors))
}

/// Per-utterance losses of a batch with dropout disabled; used to verify
/// that padding never leaks into real utterances.
pub fn batch_utterance_losses(params: &ModelParams, batch: &Batch) -> Result<Vec<f64>> {
    let mut rng = seeded(0);
    let (_, per_utt, _) = batch_backward(params, batch, 0.0, &mut rng)?;
    Ok(per_utt)
}

/// Full model snapshot at the epoch with the best dev F1 seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub epoch: usize,
    pub dev_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev: Prf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub log: Vec<EpochRecord>,
}

/// Runs exactly `max_epochs` epochs (no early stopping), evaluating
/// per-token F1 on the dev split after each epoch with dropout disabled,
/// and returns the checkpoint with the best dev F1 (ties keep the earlier
/// epoch) plus the per-epoch log.
pub fn train(
    cfg: &TrainConfig,
    lexicon: PhonemeLexicon,
    train_corpus: &Corpus,
    dev_corpus: &Corpus,
) -> Result<TrainOutcome> {
    train_with_vectors(cfg, lexicon, train_corpus, dev_corpus, None)
}

/// [`train`] with optional pre-trained word vectors replacing the matching
/// rows of the freshly initialized word-embedding table.
pub fn train_with_vectors(
    cfg: &TrainConfig,
    lexicon: PhonemeLexicon,
    train_corpus: &Corpus,
    dev_corpus: &Corpus,
    vectors: Option<&crate::model::WordVectors>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let model_cfg = cfg.model_config();
    let featurizer = Featurizer::build(train_corpus, lexicon)?;
    let tags = TagSet::from_labels(train_corpus.labels())?;
    let train_utts = featurize_corpus(
        &featurizer,
        &tags,
        train_corpus,
        model_cfg.use_word_embeddings,
    )?;

    let mut rng_init = seeded(derive_seed(cfg.seed, 0));
    let sizes = VocabSizes::of(&featurizer);
    let mut params = ModelParams::init(&model_cfg, &sizes, tags.len(), &mut rng_init);
    if let Some(vectors) = vectors {
        crate::model::apply_word_vectors(&mut params, &featurizer.words, vectors)?;
    }
    let mut model = Model {
        config: model_cfg,
        featurizer,
        tags,
        params,
    };

    let named: Vec<&Tensor> = model.params.named().into_iter().map(|(_, t)| t).collect();
    let mut adam = AdamState::new(cfg.learning_rate, named);
    let mut rng_shuffle = seeded(derive_seed(cfg.seed, 1));
    let mut rng_dropout = seeded(derive_seed(cfg.seed, 2));

    let mut log: Vec<EpochRecord> = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<Checkpoint> = None;
    for epoch in 1..=cfg.max_epochs {
        let batches = make_batches(&train_utts, cfg.batch_size, &mut rng_shuffle);
        let mut loss_sum = 0.0;
        let mut utt_count = 0usize;
        for (batch_idx, batch) in batches.iter().enumerate() {
            let (loss, per_utt, grads) =
                batch_backward(&model.params, batch, cfg.dropout_rate, &mut rng_dropout)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_idx,
                });
            }
            loss_sum += per_utt.iter().sum::<f64>();
            utt_count += per_utt.len();
            let mut named = model.params.named_mut();
            adam_step(&mut adam, &mut named, &grads)?;
        }

        let pred = model.tag_corpus(dev_corpus)?;
        let dev = corpus_prf(dev_corpus, &pred)?;
        log.push(EpochRecord {
            epoch,
            train_loss: loss_sum / utt_count as f64,
            dev,
        });
        if best.as_ref().map_or(true, |b| dev.f1 > b.dev_f1) {
            best = Some(Checkpoint {
                model: model.clone(),
                epoch,
                dev_f1: dev.f1,
            });
        }
    }
    Ok(TrainOutcome {
        best: best.expect("at least one epoch"),
        log,
    })
}

/// Finite-difference check of the end-to-end loss gradient (mean NLL over
/// the given utterances, dropout disabled) against the tape, for every
/// parameter of the model.
pub fn check_model_gradients(
    model: &Model,
    utts: &[FeaturizedUtterance],
    eps: f64,
) -> Result<GradCheck> {
    let tensors: Vec<(String, Tensor)> = model
        .params
        .named()
        .into_iter()
        .map(|(n, t)| (n, t.clone()))
        .collect();
    let template = model.params.clone();
    check_gradients(
        &tensors,
        move |tape, vars| {
            let mv = crate::model::ModelVars::from_flat(&template, vars.to_vec());
            let losses: Vec<_> = utts
                .iter()
                .map(|u| {
                    let emis = emission_vars(tape, &mv, &u.features, None)
                        .expect("features validated upstream");
                    nll_on_tape(tape, &emis, mv.transitions, &u.gold)
                        .expect("gold validated upstream")
                })
                .collect();
            tape.mean_scalars(&losses)
        },
        eps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Split, TaggedUtterance};
    use crate::featurize::compile_lexicon;
    use alloc::string::ToString;

    fn utt(tokens: &[&str], labels: &[&str]) -> TaggedUtterance {
        TaggedUtterance::new(
            tokens.iter().map(|t| t.to_string()).collect(),
            labels.iter().map(|l| l.to_string()).collect(),
        )
        .unwrap()
    }

    fn toy_corpus(n: usize) -> Corpus {
        let utts: Vec<TaggedUtterance> = (0..n)
            .map(|i| match i % 3 {
                0 => utt(&["play", "zorblo"], &["O", "B-song"]),
                1 => utt(&["call", "mira", "now"], &["O", "B-artist", "O"]),
                _ => utt(&["stop"], &["O"]),
            })
            .collect();
        Corpus::new(Split::Train, utts).unwrap()
    }

    fn toy_lexicon() -> PhonemeLexicon {
        let raw: Vec<(String, Vec<String>)> = [
            ("play", vec!["p", "l", "eI"]),
            ("zorblo", vec!["z", "O", "r\\", "b", "l", "@U"]),
            ("call", vec!["k", "O", "l"]),
            ("mira", vec!["m", "i", "r\\", "A"]),
        ]
        .into_iter()
        .map(|(w, ps)| (w.to_string(), ps.into_iter().map(String::from).collect()))
        .collect();
        compile_lexicon(&raw).unwrap()
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 3,
            max_epochs: 2,
            dropout_rate: 0.25,
            units: UnitSet::ALL,
            use_word_embeddings: true,
            seed: 5,
            subword_embed_dim: 3,
            subword_hidden_dim: 4,
            word_embed_dim: 4,
            word_hidden_dim: 5,
        }
    }

    fn featurized(corpus: &Corpus, with_words: bool) -> Vec<FeaturizedUtterance> {
        let featurizer = Featurizer::build(corpus, toy_lexicon()).unwrap();
        let tags = TagSet::from_labels(corpus.labels()).unwrap();
        featurize_corpus(&featurizer, &tags, corpus, with_words).unwrap()
    }

    #[test]
    fn batches_split_ten_into_four_four_two() {
        let utts = featurized(&toy_corpus(10), false);
        let mut rng = seeded(1);
        let batches = make_batches(&utts, 4, &mut rng);
        let sizes: Vec<usize> = batches.iter().map(|b| b.n_utts).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }

    #[test]
    fn oversized_batch_size_gives_single_batch() {
        let utts = featurized(&toy_corpus(5), false);
        let mut rng = seeded(1);
        let batches = make_batches(&utts, 64, &mut rng);
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].n_utts, 5);
    }

    #[test]
    fn same_seed_gives_identical_batches() {
        let utts = featurized(&toy_corpus(9), true);
        let a = make_batches(&utts, 2, &mut seeded(33));
        let b = make_batches(&utts, 2, &mut seeded(33));
        assert_eq!(a, b);
    }

    #[test]
    fn padding_partner_never_changes_real_losses() {
        let corpus = toy_corpus(6);
        let utts = featurized(&corpus, true);
        let featurizer = Featurizer::build(&corpus, toy_lexicon()).unwrap();
        let tags = TagSet::from_labels(corpus.labels()).unwrap();
        let mut rng = seeded(9);
        let params = ModelParams::init(
            &tiny_cfg().model_config(),
            &VocabSizes::of(&featurizer),
            tags.len(),
            &mut rng,
        );

        // The one-token utterance alone, and padded next to the longest.
        let short = &utts[2];
        let long = &utts[1];
        let alone = Batch::build(&[short]);
        let padded = Batch::build(&[short, long]);
        assert!(padded.max_tokens > alone.max_tokens);

        let a = batch_utterance_losses(&params, &alone).unwrap();
        let b = batch_utterance_losses(&params, &padded).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn single_epoch_logs_one_entry() {
        let corpus = toy_corpus(4);
        let cfg = TrainConfig {
            max_epochs: 1,
            ..tiny_cfg()
        };
        let out = train(&cfg, toy_lexicon(), &corpus, &corpus).unwrap();
        assert_eq!(out.log.len(), 1);
        assert_eq!(out.best.epoch, 1);
    }

    #[test]
    fn best_checkpoint_matches_log_maximum() {
        let corpus = toy_corpus(6);
        let cfg = TrainConfig {
            max_epochs: 4,
            ..tiny_cfg()
        };
        let out = train(&cfg, toy_lexicon(), &corpus, &corpus).unwrap();
        assert_eq!(out.log.len(), 4);
        let max = out
            .log
            .iter()
            .map(|r| r.dev.f1)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.best.dev_f1, max);
        // Ties keep the earliest epoch achieving the maximum.
        let first_max = out.log.iter().find(|r| r.dev.f1 == max).unwrap().epoch;
        assert_eq!(out.best.epoch, first_max);
    }

    #[test]
    fn identical_seeds_give_identical_checkpoints() {
        let corpus = toy_corpus(6);
        let cfg = tiny_cfg();
        let a = train(&cfg, toy_lexicon(), &corpus, &corpus).unwrap();
        let b = train(&cfg, toy_lexicon(), &corpus, &corpus).unwrap();
        assert_eq!(a.best.model, b.best.model);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn poisoned_parameters_report_divergence() {
        let corpus = toy_corpus(4);
        let utts = featurized(&corpus, false);
        let featurizer = Featurizer::build(&corpus, toy_lexicon()).unwrap();
        let tags = TagSet::from_labels(corpus.labels()).unwrap();
        let mut cfg = tiny_cfg();
        cfg.use_word_embeddings = false;
        let mut rng = seeded(9);
        let mut params = ModelParams::init(
            &cfg.model_config(),
            &VocabSizes::of(&featurizer),
            tags.len(),
            &mut rng,
        );
        for (name, t) in params.named_mut() {
            if name == "word_lstm.fwd.b_c" {
                t.data_mut()[0] = f64::NAN;
            }
        }
        let batch = Batch::build(&[&utts[0]]);
        let (loss, _, grads) = batch_backward(&params, &batch, 0.0, &mut seeded(0)).unwrap();
        assert!(!loss.is_finite());
        assert!(grads.is_empty());
    }

    #[test]
    fn end_to_end_gradient_check_on_tiny_model() {
        let corpus = toy_corpus(2);
        let featurizer = Featurizer::build(&corpus, toy_lexicon()).unwrap();
        let tags = TagSet::from_labels(corpus.labels()).unwrap();
        let cfg = tiny_cfg();
        let mut rng = seeded(11);
        let params = ModelParams::init(
            &cfg.model_config(),
            &VocabSizes::of(&featurizer),
            tags.len(),
            &mut rng,
        );
        let utts = featurize_corpus(&featurizer, &tags, &corpus, true).unwrap();
        let model = Model {
            config: cfg.model_config(),
            featurizer,
            tags,
            params,
        };
        let check = check_model_gradients(&model, &utts[..2], 1e-5).unwrap();
        assert!(
            check.max_rel_error < 1e-4,
            "max rel error {} at {:?}",
            check.max_rel_error,
            check.worst
        );
    }
}
