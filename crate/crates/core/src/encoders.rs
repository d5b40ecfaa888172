//! The LSTM cell, bidirectional sequence encoding, and composition of
//! per-word embeddings from subword-unit final states.
//!
//! The cell is the coupled-gate variant: there is no separate forget gate,
//! the cell state is interpolated by `(1 - i_t)`, and the output gate reads
//! the *current* cell state through an elementwise (diagonal) peephole:
//!
//! ```text
//! i_t = sigmoid(W_xi x_t + W_hi h_{t-1} + b_i)
//! c_t = (1 - i_t) .* c_{t-1} + i_t .* tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! o_t = sigmoid(W_xo x_t + W_ho h_{t-1} + W_co .* c_t + b_o)
//! h_t = o_t .* tanh(c_t)
//! ```

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::featurize::WordFeatures;
use crate::tape::{Tape, Var};
use crate::tensor::{sqrt, Tensor};

fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// Embedding tables start as scaled standard normal draws.
pub(crate) fn init_embedding<R: Rng>(vocab: usize, dim: usize, rng: &mut R) -> Tensor {
    let data = (0..vocab * dim)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            0.1 * z
        })
        .collect();
    Tensor::from_parts(vec![vocab, dim], data)
}

/// Weights and biases of one LSTM cell. `w_co` is the diagonal peephole
/// vector with exactly `hidden_dim` elements.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w_xi: Tensor,
    pub w_hi: Tensor,
    pub b_i: Tensor,
    pub w_xc: Tensor,
    pub w_hc: Tensor,
    pub b_c: Tensor,
    pub w_xo: Tensor,
    pub w_ho: Tensor,
    pub w_co: Tensor,
    pub b_o: Tensor,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Field order used everywhere a cell's tensors are enumerated.
pub(crate) const LSTM_FIELDS: [&str; 10] = [
    "w_xi", "w_hi", "b_i", "w_xc", "w_hc", "b_c", "w_xo", "w_ho", "w_co", "b_o",
];

impl LstmCellParams {
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let wx = |rng: &mut R| {
            Tensor::uniform(
                vec![hidden_dim, input_dim],
                glorot_limit(input_dim, hidden_dim),
                rng,
            )
        };
        let wh = |rng: &mut R| {
            Tensor::uniform(
                vec![hidden_dim, hidden_dim],
                glorot_limit(hidden_dim, hidden_dim),
                rng,
            )
        };
        LstmCellParams {
            w_xi: wx(rng),
            w_hi: wh(rng),
            b_i: Tensor::zeros(vec![hidden_dim]),
            w_xc: wx(rng),
            w_hc: wh(rng),
            b_c: Tensor::zeros(vec![hidden_dim]),
            w_xo: wx(rng),
            w_ho: wh(rng),
            w_co: Tensor::uniform(vec![hidden_dim], glorot_limit(hidden_dim, hidden_dim), rng),
            b_o: Tensor::zeros(vec![hidden_dim]),
            input_dim,
            hidden_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let expect = |t: &Tensor, shape: &[usize], what: &'static str| {
            if t.shape() != shape {
                Err(Error::ShapeMismatch {
                    context: what,
                    expected: alloc::format!("{shape:?}"),
                    got: alloc::format!("{:?}", t.shape()),
                })
            } else {
                Ok(())
            }
        };
        expect(&self.w_xi, &[h, d], "w_xi")?;
        expect(&self.w_hi, &[h, h], "w_hi")?;
        expect(&self.b_i, &[h], "b_i")?;
        expect(&self.w_xc, &[h, d], "w_xc")?;
        expect(&self.w_hc, &[h, h], "w_hc")?;
        expect(&self.b_c, &[h], "b_c")?;
        expect(&self.w_xo, &[h, d], "w_xo")?;
        expect(&self.w_ho, &[h, h], "w_ho")?;
        expect(&self.w_co, &[h], "w_co")?;
        expect(&self.b_o, &[h], "b_o")?;
        Ok(())
    }

    pub(crate) fn tensors(&self) -> [&Tensor; 10] {
        [
            &self.w_xi, &self.w_hi, &self.b_i, &self.w_xc, &self.w_hc, &self.b_c, &self.w_xo,
            &self.w_ho, &self.w_co, &self.b_o,
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut Tensor; 10] {
        [
            &mut self.w_xi,
            &mut self.w_hi,
            &mut self.b_i,
            &mut self.w_xc,
            &mut self.w_hc,
            &mut self.b_c,
            &mut self.w_xo,
            &mut self.w_ho,
            &mut self.w_co,
            &mut self.b_o,
        ]
    }

    pub(crate) fn insert_into(&self, tape: &mut Tape) -> LstmCellVars {
        let [w_xi, w_hi, b_i, w_xc, w_hc, b_c, w_xo, w_ho, w_co, b_o] =
            self.tensors().map(|t| tape.input(t.clone()));
        LstmCellVars {
            w_xi,
            w_hi,
            b_i,
            w_xc,
            w_hc,
            b_c,
            w_xo,
            w_ho,
            w_co,
            b_o,
            hidden_dim: self.hidden_dim,
        }
    }
}

/// Hidden and cell vectors of one LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            h: Tensor::zeros(vec![hidden_dim]),
            c: Tensor::zeros(vec![hidden_dim]),
        }
    }
}

/// Tape-side handle to one cell's parameters.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LstmCellVars {
    pub w_xi: Var,
    pub w_hi: Var,
    pub b_i: Var,
    pub w_xc: Var,
    pub w_hc: Var,
    pub b_c: Var,
    pub w_xo: Var,
    pub w_ho: Var,
    pub w_co: Var,
    pub b_o: Var,
    pub hidden_dim: usize,
}

impl LstmCellVars {
    pub(crate) fn from_slice(vars: &[Var], hidden_dim: usize) -> Self {
        LstmCellVars {
            w_xi: vars[0],
            w_hi: vars[1],
            b_i: vars[2],
            w_xc: vars[3],
            w_hc: vars[4],
            b_c: vars[5],
            w_xo: vars[6],
            w_ho: vars[7],
            w_co: vars[8],
            b_o: vars[9],
            hidden_dim,
        }
    }
}

/// One step of the coupled-gate cell on the tape.
pub(crate) fn lstm_step(
    tape: &mut Tape,
    p: &LstmCellVars,
    x: Var,
    h_prev: Var,
    c_prev: Var,
) -> (Var, Var) {
    let xi = tape.matvec(p.w_xi, x);
    let hi = tape.matvec(p.w_hi, h_prev);
    let i_pre = tape.add_n(&[xi, hi, p.b_i]);
    let i = tape.sigmoid(i_pre);

    let xc = tape.matvec(p.w_xc, x);
    let hc = tape.matvec(p.w_hc, h_prev);
    let g_pre = tape.add_n(&[xc, hc, p.b_c]);
    let g = tape.tanh(g_pre);

    let keep = tape.one_minus(i);
    let kept = tape.mul(keep, c_prev);
    let written = tape.mul(i, g);
    let c = tape.add_n(&[kept, written]);

    let xo = tape.matvec(p.w_xo, x);
    let ho = tape.matvec(p.w_ho, h_prev);
    let peephole = tape.mul(p.w_co, c);
    let o_pre = tape.add_n(&[xo, ho, peephole, p.b_o]);
    let o = tape.sigmoid(o_pre);

    let c_tanh = tape.tanh(c);
    let h = tape.mul(o, c_tanh);
    (h, c)
}

/// Runs one cell step on plain tensors.
pub fn lstm_cell_step(params: &LstmCellParams, x: &Tensor, prev: &LstmState) -> Result<LstmState> {
    params.validate()?;
    if x.numel() != params.input_dim
        || prev.h.numel() != params.hidden_dim
        || prev.c.numel() != params.hidden_dim
    {
        return Err(Error::ShapeMismatch {
            context: "lstm_cell_step",
            expected: alloc::format!(
                "x[{}], h[{}], c[{}]",
                params.input_dim,
                params.hidden_dim,
                params.hidden_dim
            ),
            got: alloc::format!(
                "x[{}], h[{}], c[{}]",
                x.numel(),
                prev.h.numel(),
                prev.c.numel()
            ),
        });
    }
    let mut tape = Tape::new();
    let vars = params.insert_into(&mut tape);
    let xv = tape.constant(x.clone());
    let hv = tape.constant(prev.h.clone());
    let cv = tape.constant(prev.c.clone());
    let (h, c) = lstm_step(&mut tape, &vars, xv, hv, cv);
    Ok(LstmState {
        h: tape.value(h).clone(),
        c: tape.value(c).clone(),
    })
}

/// Final forward state over `xs` concatenated with the final backward state
/// over the reversed sequence, both from zero initial states.
pub(crate) fn bilstm_final_vars(
    tape: &mut Tape,
    fwd: &LstmCellVars,
    bwd: &LstmCellVars,
    xs: &[Var],
) -> Var {
    debug_assert!(!xs.is_empty());
    let run = |tape: &mut Tape, cell: &LstmCellVars, rev: bool| {
        let mut h = tape.constant(Tensor::zeros(vec![cell.hidden_dim]));
        let mut c = tape.constant(Tensor::zeros(vec![cell.hidden_dim]));
        let order: Vec<Var> = if rev {
            xs.iter().rev().copied().collect()
        } else {
            xs.to_vec()
        };
        for x in order {
            let (nh, nc) = lstm_step(tape, cell, x, h, c);
            h = nh;
            c = nc;
        }
        h
    };
    let h_fwd = run(tape, fwd, false);
    let h_bwd = run(tape, bwd, true);
    tape.concat(&[h_fwd, h_bwd])
}

/// Per-position BiLSTM states: `concat(h_fwd[t], h_bwd[t])` for each `t`.
pub(crate) fn bilstm_sequence_vars(
    tape: &mut Tape,
    fwd: &LstmCellVars,
    bwd: &LstmCellVars,
    xs: &[Var],
) -> Vec<Var> {
    debug_assert!(!xs.is_empty());
    let mut h = tape.constant(Tensor::zeros(vec![fwd.hidden_dim]));
    let mut c = tape.constant(Tensor::zeros(vec![fwd.hidden_dim]));
    let mut fwd_states = Vec::with_capacity(xs.len());
    for &x in xs {
        let (nh, nc) = lstm_step(tape, fwd, x, h, c);
        h = nh;
        c = nc;
        fwd_states.push(h);
    }
    let mut h = tape.constant(Tensor::zeros(vec![bwd.hidden_dim]));
    let mut c = tape.constant(Tensor::zeros(vec![bwd.hidden_dim]));
    let mut bwd_states = vec![h; xs.len()];
    for (t, &x) in xs.iter().enumerate().rev() {
        let (nh, nc) = lstm_step(tape, bwd, x, h, c);
        h = nh;
        c = nc;
        bwd_states[t] = h;
    }
    fwd_states
        .into_iter()
        .zip(bwd_states)
        .map(|(f, b)| tape.concat(&[f, b]))
        .collect()
}

/// Runs a bidirectional pass over a sequence of input vectors and returns
/// the concatenated final states (`2 * hidden_dim` wide).
pub fn bilstm_final_states(
    xs: &[Tensor],
    fwd: &LstmCellParams,
    bwd: &LstmCellParams,
) -> Result<Tensor> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("bilstm_final_states"));
    }
    fwd.validate()?;
    bwd.validate()?;
    for x in xs {
        if x.numel() != fwd.input_dim || x.numel() != bwd.input_dim {
            return Err(Error::ShapeMismatch {
                context: "bilstm_final_states",
                expected: alloc::format!("[{}]", fwd.input_dim),
                got: alloc::format!("{:?}", x.shape()),
            });
        }
    }
    let mut tape = Tape::new();
    let fwd_vars = fwd.insert_into(&mut tape);
    let bwd_vars = bwd.insert_into(&mut tape);
    let x_vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
    let out = bilstm_final_vars(&mut tape, &fwd_vars, &bwd_vars, &x_vars);
    Ok(tape.value(out).clone())
}

/// One subword unit: an embedding table plus forward/backward cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordUnitParams {
    pub embed: Tensor,
    pub fwd: LstmCellParams,
    pub bwd: LstmCellParams,
}

impl SubwordUnitParams {
    pub fn init<R: Rng>(vocab: usize, embed_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        SubwordUnitParams {
            embed: init_embedding(vocab, embed_dim, rng),
            fwd: LstmCellParams::init(embed_dim, hidden_dim, rng),
            bwd: LstmCellParams::init(embed_dim, hidden_dim, rng),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SubwordUnitVars {
    pub embed: Var,
    pub fwd: LstmCellVars,
    pub bwd: LstmCellVars,
}

impl SubwordUnitParams {
    pub(crate) fn insert_into(&self, tape: &mut Tape) -> SubwordUnitVars {
        SubwordUnitVars {
            embed: tape.input(self.embed.clone()),
            fwd: self.fwd.insert_into(tape),
            bwd: self.bwd.insert_into(tape),
        }
    }
}

/// Embedding machinery for all enabled units plus the optional dedicated
/// word-embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordEncoders {
    pub char_unit: Option<SubwordUnitParams>,
    pub phoneme_unit: Option<SubwordUnitParams>,
    pub byte_unit: Option<SubwordUnitParams>,
    pub word_embed: Option<Tensor>,
}

impl SubwordEncoders {
    /// Width of [`embed_word`]'s output: `2 * hidden` per enabled unit plus
    /// the word-embedding dimension when enabled.
    pub fn output_width(&self) -> usize {
        let unit = |u: &Option<SubwordUnitParams>| {
            u.as_ref().map_or(0, |p| 2 * p.fwd.hidden_dim)
        };
        unit(&self.char_unit)
            + unit(&self.phoneme_unit)
            + unit(&self.byte_unit)
            + self.word_embed.as_ref().map_or(0, Tensor::cols)
    }

    fn units(&self) -> [(&'static str, &Option<SubwordUnitParams>); 3] {
        [
            ("char", &self.char_unit),
            ("phoneme", &self.phoneme_unit),
            ("byte", &self.byte_unit),
        ]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SubwordEncoderVars {
    pub char_unit: Option<SubwordUnitVars>,
    pub phoneme_unit: Option<SubwordUnitVars>,
    pub byte_unit: Option<SubwordUnitVars>,
    pub word_embed: Option<Var>,
}

impl SubwordEncoders {
    pub(crate) fn insert_into(&self, tape: &mut Tape) -> SubwordEncoderVars {
        SubwordEncoderVars {
            char_unit: self.char_unit.as_ref().map(|u| u.insert_into(tape)),
            phoneme_unit: self.phoneme_unit.as_ref().map(|u| u.insert_into(tape)),
            byte_unit: self.byte_unit.as_ref().map(|u| u.insert_into(tape)),
            word_embed: self.word_embed.as_ref().map(|t| tape.input(t.clone())),
        }
    }
}

fn unit_ids<'a>(f: &'a WordFeatures, unit: &'static str) -> Result<&'a [usize]> {
    let ids: &[usize] = match unit {
        "char" => &f.char_ids,
        "phoneme" => &f.phoneme_ids,
        _ => &f.byte_ids,
    };
    if ids.is_empty() {
        Err(Error::MissingFeatures { unit })
    } else {
        Ok(ids)
    }
}

/// Builds the word representation on the tape: per enabled unit, a BiLSTM
/// over subword embeddings; results concatenated in (char, phoneme, byte)
/// order, then the optional word vector. Deterministic — dropout is applied
/// by the caller to the full per-token embedding, not here.
pub(crate) fn embed_word_vars(
    tape: &mut Tape,
    enc: &SubwordEncoderVars,
    f: &WordFeatures,
) -> Result<Var> {
    let mut parts: Vec<Var> = Vec::with_capacity(4);
    let units = [
        ("char", &enc.char_unit),
        ("phoneme", &enc.phoneme_unit),
        ("byte", &enc.byte_unit),
    ];
    for (name, unit) in units {
        if let Some(u) = unit {
            let ids = unit_ids(f, name)?;
            let xs: Vec<Var> = ids.iter().map(|&id| tape.row(u.embed, id)).collect();
            parts.push(bilstm_final_vars(tape, &u.fwd, &u.bwd, &xs));
        }
    }
    match (enc.word_embed, f.word_id) {
        (Some(table), Some(id)) => parts.push(tape.row(table, id)),
        (None, None) => {}
        _ => return Err(Error::MissingFeatures { unit: "word" }),
    }
    if parts.is_empty() {
        return Err(Error::MissingFeatures { unit: "any" });
    }
    Ok(tape.concat(&parts))
}

/// Composes the word embedding from the enabled units on plain tensors.
pub fn embed_word(enc: &SubwordEncoders, f: &WordFeatures) -> Result<Tensor> {
    for (name, unit) in enc.units() {
        if unit.is_some() {
            unit_ids(f, name)?;
        }
    }
    let mut tape = Tape::new();
    let vars = enc.insert_into(&mut tape);
    let out = embed_word_vars(&mut tape, &vars, f)?;
    Ok(tape.value(out).clone())
}
