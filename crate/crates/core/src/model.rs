//! Full tagger assembly: configuration, the trainable parameter set, and
//! the utterance forward pass (subword composition, word-level BiLSTM,
//! emission projection).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::crf::{self, CrfParams, TagSet};
use crate::encoders::{
    bilstm_sequence_vars, embed_word_vars, LstmCellParams, LstmCellVars, SubwordEncoderVars,
    SubwordEncoders, SubwordUnitParams, SubwordUnitVars, LSTM_FIELDS,
};
use crate::error::{Error, Result};
use crate::featurize::{ByteCodec, Featurizer, WordFeatures};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::{dropout_mask, Tensor};

/// Which subword units feed the word representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitSet {
    pub chars: bool,
    pub phonemes: bool,
    pub bytes: bool,
}

impl UnitSet {
    pub const ALL: UnitSet = UnitSet {
        chars: true,
        phonemes: true,
        bytes: true,
    };

    pub const NONE: UnitSet = UnitSet {
        chars: false,
        phonemes: false,
        bytes: false,
    };

    pub fn count(&self) -> usize {
        usize::from(self.chars) + usize::from(self.phonemes) + usize::from(self.bytes)
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// The seven non-empty subsets, in ablation-grid order.
    pub fn all_subsets() -> [UnitSet; 7] {
        let u = |c, p, b| UnitSet {
            chars: c,
            phonemes: p,
            bytes: b,
        };
        [
            u(true, false, false),
            u(false, true, false),
            u(false, false, true),
            u(true, true, false),
            u(true, false, true),
            u(false, true, true),
            u(true, true, true),
        ]
    }

    /// Parses a comma-separated list of `char`, `phoneme`, `byte`; `none`
    /// yields the empty set (word-only models).
    pub fn parse(s: &str) -> Result<UnitSet> {
        let mut set = UnitSet::NONE;
        if s.trim() == "none" {
            return Ok(set);
        }
        for part in s.split(',') {
            match part.trim() {
                "char" => set.chars = true,
                "phoneme" => set.phonemes = true,
                "byte" => set.bytes = true,
                other => {
                    return Err(Error::BadConfig(format!("unknown subword unit '{other}'")))
                }
            }
        }
        Ok(set)
    }
}

impl core::fmt::Display for UnitSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.is_empty() {
            return write!(f, "none");
        }
        let mut parts = Vec::new();
        if self.chars {
            parts.push("char");
        }
        if self.phonemes {
            parts.push("phoneme");
        }
        if self.bytes {
            parts.push("byte");
        }
        write!(f, "{}", parts.join(","))
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub units: UnitSet,
    pub use_word_embeddings: bool,
    pub subword_embed_dim: usize,
    pub subword_hidden_dim: usize,
    pub word_embed_dim: usize,
    pub word_hidden_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            units: UnitSet::ALL,
            use_word_embeddings: false,
            subword_embed_dim: 35,
            subword_hidden_dim: 35,
            word_embed_dim: 64,
            word_hidden_dim: 128,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.units.is_empty() && !self.use_word_embeddings {
            return Err(Error::BadConfig(String::from(
                "at least one subword unit or word embeddings required",
            )));
        }
        let dims = [
            self.subword_embed_dim,
            self.subword_hidden_dim,
            self.word_embed_dim,
            self.word_hidden_dim,
        ];
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::BadConfig(String::from("dimensions must be positive")));
        }
        Ok(())
    }

    /// Width of the concatenated per-token embedding fed to the word-level
    /// BiLSTM.
    pub fn token_width(&self) -> usize {
        2 * self.subword_hidden_dim * self.units.count()
            + if self.use_word_embeddings {
                self.word_embed_dim
            } else {
                0
            }
    }

    /// Trainable parameter count, computed arithmetically.
    pub fn param_count(&self, sizes: &VocabSizes, num_tags: usize) -> usize {
        let lstm = |input: usize, hidden: usize| {
            3 * hidden * input + 3 * hidden * hidden + 4 * hidden
        };
        let unit = |vocab: usize| {
            vocab * self.subword_embed_dim
                + 2 * lstm(self.subword_embed_dim, self.subword_hidden_dim)
        };
        let mut total = 0;
        if self.units.chars {
            total += unit(sizes.chars);
        }
        if self.units.phonemes {
            total += unit(sizes.phonemes);
        }
        if self.units.bytes {
            total += unit(sizes.bytes);
        }
        if self.use_word_embeddings {
            total += sizes.words * self.word_embed_dim;
        }
        total += 2 * lstm(self.token_width(), self.word_hidden_dim);
        total += num_tags * (2 * self.word_hidden_dim) + num_tags;
        total += (num_tags + 2) * (num_tags + 2);
        total
    }
}

/// Vocabulary sizes (each including PAD/UNK reservations).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabSizes {
    pub chars: usize,
    pub phonemes: usize,
    pub bytes: usize,
    pub words: usize,
}

impl VocabSizes {
    pub fn of(featurizer: &Featurizer) -> VocabSizes {
        VocabSizes {
            chars: featurizer.chars.size(),
            phonemes: featurizer.lexicon.vocab_size(),
            bytes: ByteCodec::size(),
            words: featurizer.words.size(),
        }
    }
}

/// The full trainable parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoders: SubwordEncoders,
    pub word_fwd: LstmCellParams,
    pub word_bwd: LstmCellParams,
    pub crf: CrfParams,
}

impl ModelParams {
    /// Random initialization: Glorot-uniform weights, zero biases, scaled
    /// normal embeddings. Draw order is fixed, so a seed pins every value.
    pub fn init<R: Rng>(
        cfg: &ModelConfig,
        sizes: &VocabSizes,
        num_tags: usize,
        rng: &mut R,
    ) -> Self {
        let unit = |on: bool, vocab: usize, rng: &mut R| {
            on.then(|| {
                SubwordUnitParams::init(vocab, cfg.subword_embed_dim, cfg.subword_hidden_dim, rng)
            })
        };
        let encoders = SubwordEncoders {
            char_unit: unit(cfg.units.chars, sizes.chars, rng),
            phoneme_unit: unit(cfg.units.phonemes, sizes.phonemes, rng),
            byte_unit: unit(cfg.units.bytes, sizes.bytes, rng),
            word_embed: cfg
                .use_word_embeddings
                .then(|| crate::encoders::init_embedding(sizes.words, cfg.word_embed_dim, rng)),
        };
        let width = cfg.token_width();
        ModelParams {
            encoders,
            word_fwd: LstmCellParams::init(width, cfg.word_hidden_dim, rng),
            word_bwd: LstmCellParams::init(width, cfg.word_hidden_dim, rng),
            crf: CrfParams::init(num_tags, 2 * cfg.word_hidden_dim, rng),
        }
    }

    fn unit_slots(&self) -> [(&'static str, &Option<SubwordUnitParams>); 3] {
        [
            ("char", &self.encoders.char_unit),
            ("phoneme", &self.encoders.phoneme_unit),
            ("byte", &self.encoders.byte_unit),
        ]
    }

    /// Every parameter tensor with its stable name, in serialization order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (name, slot) in self.unit_slots() {
            if let Some(u) = slot {
                out.push((format!("{name}.embed"), &u.embed));
                for (dir, cell) in [("fwd", &u.fwd), ("bwd", &u.bwd)] {
                    for (field, t) in LSTM_FIELDS.iter().zip(cell.tensors()) {
                        out.push((format!("{name}.{dir}.{field}"), t));
                    }
                }
            }
        }
        if let Some(w) = &self.encoders.word_embed {
            out.push((String::from("word.embed"), w));
        }
        for (dir, cell) in [("fwd", &self.word_fwd), ("bwd", &self.word_bwd)] {
            for (field, t) in LSTM_FIELDS.iter().zip(cell.tensors()) {
                out.push((format!("word_lstm.{dir}.{field}"), t));
            }
        }
        out.push((String::from("crf.proj_w"), &self.crf.proj_w));
        out.push((String::from("crf.proj_b"), &self.crf.proj_b));
        out.push((String::from("crf.transitions"), &self.crf.transitions));
        out
    }

    /// Mutable view aligned with [`ModelParams::named`].
    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        let units = [
            ("char", &mut self.encoders.char_unit),
            ("phoneme", &mut self.encoders.phoneme_unit),
            ("byte", &mut self.encoders.byte_unit),
        ];
        for (name, slot) in units {
            if let Some(u) = slot {
                out.push((format!("{name}.embed"), &mut u.embed));
                for (dir, cell) in [("fwd", &mut u.fwd), ("bwd", &mut u.bwd)] {
                    for (field, t) in LSTM_FIELDS.iter().zip(cell.tensors_mut()) {
                        out.push((format!("{name}.{dir}.{field}"), t));
                    }
                }
            }
        }
        if let Some(w) = &mut self.encoders.word_embed {
            out.push((String::from("word.embed"), w));
        }
        for (dir, cell) in [("fwd", &mut self.word_fwd), ("bwd", &mut self.word_bwd)] {
            for (field, t) in LSTM_FIELDS.iter().zip(cell.tensors_mut()) {
                out.push((format!("word_lstm.{dir}.{field}"), t));
            }
        }
        out.push((String::from("crf.proj_w"), &mut self.crf.proj_w));
        out.push((String::from("crf.proj_b"), &mut self.crf.proj_b));
        out.push((String::from("crf.transitions"), &mut self.crf.transitions));
        out
    }

    pub fn num_params(&self) -> usize {
        self.named().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Pushes every parameter onto the tape (in [`ModelParams::named`]
    /// order) and returns the structured handle plus the flat var list for
    /// gradient extraction.
    pub(crate) fn insert_into(&self, tape: &mut Tape) -> ModelVars {
        let flat: Vec<Var> = self
            .named()
            .iter()
            .map(|(_, t)| tape.input((*t).clone()))
            .collect();
        ModelVars::from_flat(self, flat)
    }
}

/// Tape-side view of the full parameter set.
pub(crate) struct ModelVars {
    pub enc: SubwordEncoderVars,
    pub word_fwd: LstmCellVars,
    pub word_bwd: LstmCellVars,
    pub proj_w: Var,
    pub proj_b: Var,
    pub transitions: Var,
    /// All parameter vars in [`ModelParams::named`] order.
    pub flat: Vec<Var>,
}

impl ModelVars {
    /// Rebuilds the structured view from vars laid out in
    /// [`ModelParams::named`] order; `template` supplies the layout.
    pub(crate) fn from_flat(template: &ModelParams, flat: Vec<Var>) -> ModelVars {
        fn take_one(flat: &[Var], cursor: &mut usize) -> Var {
            let v = flat[*cursor];
            *cursor += 1;
            v
        }
        fn take_cell(flat: &[Var], cursor: &mut usize, hidden: usize) -> LstmCellVars {
            let cell = LstmCellVars::from_slice(&flat[*cursor..*cursor + 10], hidden);
            *cursor += 10;
            cell
        }
        fn take_unit(
            flat: &[Var],
            cursor: &mut usize,
            present: bool,
            hidden: usize,
        ) -> Option<SubwordUnitVars> {
            present.then(|| SubwordUnitVars {
                embed: take_one(flat, cursor),
                fwd: take_cell(flat, cursor, hidden),
                bwd: take_cell(flat, cursor, hidden),
            })
        }

        let enc_params = &template.encoders;
        let mut cursor = 0usize;
        let sub_hidden = enc_params
            .char_unit
            .as_ref()
            .or(enc_params.phoneme_unit.as_ref())
            .or(enc_params.byte_unit.as_ref())
            .map(|u| u.fwd.hidden_dim)
            .unwrap_or(0);
        let enc = SubwordEncoderVars {
            char_unit: take_unit(&flat, &mut cursor, enc_params.char_unit.is_some(), sub_hidden),
            phoneme_unit: take_unit(
                &flat,
                &mut cursor,
                enc_params.phoneme_unit.is_some(),
                sub_hidden,
            ),
            byte_unit: take_unit(&flat, &mut cursor, enc_params.byte_unit.is_some(), sub_hidden),
            word_embed: enc_params
                .word_embed
                .as_ref()
                .map(|_| take_one(&flat, &mut cursor)),
        };
        let word_fwd = take_cell(&flat, &mut cursor, template.word_fwd.hidden_dim);
        let word_bwd = take_cell(&flat, &mut cursor, template.word_bwd.hidden_dim);
        let proj_w = take_one(&flat, &mut cursor);
        let proj_b = take_one(&flat, &mut cursor);
        let transitions = take_one(&flat, &mut cursor);
        debug_assert_eq!(cursor, flat.len());
        ModelVars {
            enc,
            word_fwd,
            word_bwd,
            proj_w,
            proj_b,
            transitions,
            flat,
        }
    }
}

/// Per-token emission scores on the tape: embed each word, optionally mask
/// it with dropout, run the word-level BiLSTM, and project to tag scores.
pub(crate) fn emission_vars(
    tape: &mut Tape,
    vars: &ModelVars,
    features: &[WordFeatures],
    mut dropout: Option<(f64, &mut SeededRng)>,
) -> Result<Vec<Var>> {
    if features.is_empty() {
        return Err(Error::EmptyUtterance);
    }
    let mut embeddings = Vec::with_capacity(features.len());
    for f in features {
        let mut e = embed_word_vars(tape, &vars.enc, f)?;
        if let Some((rate, rng)) = dropout.as_mut() {
            let width = tape.value(e).numel();
            let mask = dropout_mask(width, *rate, rng)?;
            e = tape.mul_mask(e, mask);
        }
        embeddings.push(e);
    }
    let states = bilstm_sequence_vars(tape, &vars.word_fwd, &vars.word_bwd, &embeddings);
    Ok(states
        .into_iter()
        .map(|s| {
            let y = tape.matvec(vars.proj_w, s);
            tape.add_n(&[y, vars.proj_b])
        })
        .collect())
}

/// Pre-trained vectors keyed by word.
pub type WordVectors = alloc::collections::BTreeMap<String, Vec<f64>>;

/// Overwrites word-embedding rows for vocabulary words present in the
/// vector map; absent words keep their random initialization. Returns the
/// number of rows replaced.
pub fn apply_word_vectors(
    params: &mut ModelParams,
    vocab: &crate::featurize::WordVocab,
    vectors: &WordVectors,
) -> Result<usize> {
    let Some(table) = params.encoders.word_embed.as_mut() else {
        return Ok(0);
    };
    let dim = table.cols();
    let mut replaced = 0;
    for (word, vector) in vectors {
        if vector.len() != dim {
            return Err(Error::ShapeMismatch {
                context: "apply_word_vectors",
                expected: format!("{dim} values"),
                got: format!("{} values for '{word}'", vector.len()),
            });
        }
        if !vocab.contains(word) {
            continue;
        }
        let row = vocab.id(word);
        table.row_mut(row).copy_from_slice(vector);
        replaced += 1;
    }
    Ok(replaced)
}

/// A trained (or freshly initialized) tagger: configuration, frozen
/// vocabularies, tag inventory, and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub featurizer: Featurizer,
    pub tags: TagSet,
    pub params: ModelParams,
}

impl Model {
    /// Emission scores `[T, K]` for one featurized utterance. With
    /// `training` unset the pass is deterministic (no dropout).
    pub fn forward_utterance(
        &self,
        features: &[WordFeatures],
        training: bool,
        dropout_rate: f64,
        rng: &mut SeededRng,
    ) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.params.insert_into(&mut tape);
        let dropout = (training && dropout_rate > 0.0).then_some((dropout_rate, rng));
        let emis = emission_vars(&mut tape, &vars, features, dropout)?;
        let k = self.tags.len();
        let mut out = Tensor::zeros(vec![features.len(), k]);
        for (t, var) in emis.iter().enumerate() {
            out.row_mut(t).copy_from_slice(tape.value(*var).data());
        }
        Ok(out)
    }

    /// Featurizes and Viterbi-decodes one token sequence.
    pub fn tag_tokens(&self, tokens: &[String]) -> Result<Vec<String>> {
        let features = self
            .featurizer
            .featurize(tokens, self.config.use_word_embeddings)?;
        let mut rng = crate::rng::seeded(0);
        let emissions = self.forward_utterance(&features, false, 0.0, &mut rng)?;
        let (path, _) = crf::viterbi_decode(&emissions, &self.params.crf)?;
        Ok(path.iter().map(|&id| self.tags.label(id).to_string()).collect())
    }

    /// Tags every utterance of a corpus.
    pub fn tag_corpus(&self, corpus: &crate::corpus::Corpus) -> Result<Vec<Vec<String>>> {
        corpus
            .utterances
            .iter()
            .map(|u| self.tag_tokens(&u.tokens))
            .collect()
    }
}
