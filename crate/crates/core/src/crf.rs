//! Linear-chain CRF over tag sequences: sequence scoring, log-partition via
//! the forward algorithm, Viterbi decoding, and the negative log-likelihood
//! loss with its marginal-based backward pass.
//!
//! The transition matrix is `(K+2) x (K+2)` with virtual START (index `K`)
//! and STOP (index `K+1`) states. Unreachable cells (START as destination,
//! STOP as source) are pinned to a large negative constant so arithmetic
//! stays finite; their gradients are exactly zero because no path can use
//! them.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::corpus::validate_label;
use crate::error::{Error, Result};
use crate::tape::{CustomOp, Tape, Var};
use crate::tensor::{exp, logsumexp, Tensor};

/// Stand-in for -inf in transition scores; keeps all arithmetic finite.
pub const NEG_INF: f64 = -1e4;

/// Ordered BIO2 label inventory including `O`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    labels: Vec<String>,
    ids: BTreeMap<String, usize>,
}

impl TagSet {
    /// Builds the tag space from observed labels: validates BIO2 shape,
    /// always includes `O`, and closes the space so every `B-X` has a
    /// matching `I-X`. Ids follow lexicographic label order.
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut set: BTreeSet<String> = BTreeSet::new();
        set.insert("O".to_string());
        for label in labels {
            validate_label(label)?;
            set.insert(label.to_string());
        }
        let with_insides: Vec<String> = set
            .iter()
            .filter_map(|l| l.strip_prefix("B-").map(|ty| alloc::format!("I-{ty}")))
            .collect();
        set.extend(with_insides);
        Ok(Self::from_set(set))
    }

    fn from_set(set: BTreeSet<String>) -> Self {
        let labels: Vec<String> = set.into_iter().collect();
        let ids = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        TagSet { labels, ids }
    }

    /// Rebuilds from a serialized id-ordered label list.
    pub fn from_ordered(labels: Vec<String>) -> Result<Self> {
        let set: BTreeSet<String> = labels.iter().cloned().collect();
        if set.len() != labels.len() || !set.iter().zip(&labels).all(|(a, b)| a == b) {
            return Err(Error::BadConfig(String::from(
                "tag set must be sorted and duplicate-free",
            )));
        }
        for label in &labels {
            validate_label(label)?;
        }
        if !labels.iter().any(|l| l == "O") {
            return Err(Error::BadConfig(String::from("tag set must include O")));
        }
        Ok(Self::from_set(set))
    }

    pub fn id(&self, label: &str) -> Result<usize> {
        self.ids.get(label).copied().ok_or_else(|| Error::UnknownLabel {
            label: label.to_string(),
        })
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Emission projection plus tag transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams {
    /// `[K, input_width]` projection from word-BiLSTM states to tag scores.
    pub proj_w: Tensor,
    /// `[K]` projection bias.
    pub proj_b: Tensor,
    /// `[K+2, K+2]` transition scores including START and STOP.
    pub transitions: Tensor,
}

impl CrfParams {
    pub fn init<R: Rng>(num_tags: usize, input_width: usize, rng: &mut R) -> Self {
        let limit = |fan_in: usize, fan_out: usize| {
            crate::tensor::sqrt(6.0 / (fan_in + fan_out) as f64)
        };
        let proj_w = Tensor::uniform(
            vec![num_tags, input_width],
            limit(input_width, num_tags),
            rng,
        );
        let proj_b = Tensor::zeros(vec![num_tags]);
        let n = num_tags + 2;
        let mut transitions = Tensor::uniform(vec![n, n], limit(n, n), rng);
        fix_unreachable(&mut transitions, num_tags);
        CrfParams {
            proj_w,
            proj_b,
            transitions,
        }
    }

    pub fn num_tags(&self) -> usize {
        self.transitions.rows() - 2
    }
}

pub fn start_state(num_tags: usize) -> usize {
    num_tags
}

pub fn stop_state(num_tags: usize) -> usize {
    num_tags + 1
}

/// Pins START-as-destination and STOP-as-source (and the empty-path
/// START->STOP cell) to [`NEG_INF`].
pub fn fix_unreachable(transitions: &mut Tensor, num_tags: usize) {
    let (start, stop) = (start_state(num_tags), stop_state(num_tags));
    for i in 0..num_tags + 2 {
        transitions.set2(i, start, NEG_INF);
        transitions.set2(stop, i, NEG_INF);
    }
    transitions.set2(start, stop, NEG_INF);
}

fn check_instance(emissions: &Tensor, transitions: &Tensor, tags: Option<&[usize]>) -> Result<usize> {
    if emissions.shape().len() != 2 {
        return Err(Error::ShapeMismatch {
            context: "crf emissions",
            expected: String::from("[T, K]"),
            got: alloc::format!("{:?}", emissions.shape()),
        });
    }
    let k = emissions.cols();
    if transitions.shape() != [k + 2, k + 2] {
        return Err(Error::ShapeMismatch {
            context: "crf transitions",
            expected: alloc::format!("[{}, {}]", k + 2, k + 2),
            got: alloc::format!("{:?}", transitions.shape()),
        });
    }
    if let Some(tags) = tags {
        if tags.len() != emissions.rows() {
            return Err(Error::ShapeMismatch {
                context: "crf tags",
                expected: emissions.rows().to_string(),
                got: tags.len().to_string(),
            });
        }
        if tags.iter().any(|&t| t >= k) {
            return Err(Error::UnknownLabel {
                label: String::from("tag id out of range"),
            });
        }
    }
    Ok(k)
}

/// Score of one tag sequence: emissions along the path plus transitions
/// including the virtual START and STOP hops.
pub fn score_sequence(emissions: &Tensor, tags: &[usize], params: &CrfParams) -> Result<f64> {
    let k = check_instance(emissions, &params.transitions, Some(tags))?;
    let trans = &params.transitions;
    let (start, stop) = (start_state(k), stop_state(k));
    let mut score = trans.get2(start, tags[0]);
    score += emissions.get2(0, tags[0]);
    for t in 1..tags.len() {
        score += trans.get2(tags[t - 1], tags[t]);
        score += emissions.get2(t, tags[t]);
    }
    score += trans.get2(tags[tags.len() - 1], stop);
    Ok(score)
}

fn forward_alphas(emissions: &Tensor, transitions: &Tensor) -> (Vec<Vec<f64>>, f64) {
    let (t_len, k) = (emissions.rows(), emissions.cols());
    let (start, stop) = (start_state(k), stop_state(k));
    let mut alphas = Vec::with_capacity(t_len);
    let mut alpha: Vec<f64> = (0..k)
        .map(|j| transitions.get2(start, j) + emissions.get2(0, j))
        .collect();
    alphas.push(alpha.clone());
    let mut scratch = vec![0.0; k];
    for t in 1..t_len {
        let next: Vec<f64> = (0..k)
            .map(|j| {
                for (i, s) in scratch.iter_mut().enumerate() {
                    *s = alpha[i] + transitions.get2(i, j);
                }
                logsumexp(&scratch).expect("k >= 1") + emissions.get2(t, j)
            })
            .collect();
        alpha = next;
        alphas.push(alpha.clone());
    }
    let finals: Vec<f64> = (0..k)
        .map(|j| alpha[j] + transitions.get2(j, stop))
        .collect();
    let log_z = logsumexp(&finals).expect("k >= 1");
    (alphas, log_z)
}

/// log Σ over all `K^T` tag sequences of `exp(score)`, by the forward
/// algorithm with logsumexp recurrences.
pub fn log_partition(emissions: &Tensor, params: &CrfParams) -> Result<f64> {
    check_instance(emissions, &params.transitions, None)?;
    if emissions.rows() == 0 {
        return Err(Error::EmptyInput("log_partition"));
    }
    Ok(forward_alphas(emissions, &params.transitions).1)
}

/// Argmax tag sequence and its score. Ties break toward the lowest tag id
/// at every backpointer decision.
pub fn viterbi_decode(emissions: &Tensor, params: &CrfParams) -> Result<(Vec<usize>, f64)> {
    let k = check_instance(emissions, &params.transitions, None)?;
    let t_len = emissions.rows();
    if t_len == 0 {
        return Err(Error::EmptyInput("viterbi_decode"));
    }
    let trans = &params.transitions;
    let (start, stop) = (start_state(k), stop_state(k));

    let mut score: Vec<f64> = (0..k)
        .map(|j| trans.get2(start, j) + emissions.get2(0, j))
        .collect();
    let mut backptr: Vec<Vec<usize>> = Vec::with_capacity(t_len);
    for t in 1..t_len {
        let mut next = vec![0.0; k];
        let mut ptr = vec![0usize; k];
        for j in 0..k {
            let mut best = score[0] + trans.get2(0, j);
            let mut best_i = 0;
            for i in 1..k {
                let cand = score[i] + trans.get2(i, j);
                if cand > best {
                    best = cand;
                    best_i = i;
                }
            }
            next[j] = best + emissions.get2(t, j);
            ptr[j] = best_i;
        }
        score = next;
        backptr.push(ptr);
    }

    let mut best = score[0] + trans.get2(0, stop);
    let mut best_j = 0;
    for j in 1..k {
        let cand = score[j] + trans.get2(j, stop);
        if cand > best {
            best = cand;
            best_j = j;
        }
    }

    let mut path = vec![best_j];
    for ptr in backptr.iter().rev() {
        path.push(ptr[*path.last().expect("non-empty")]);
    }
    path.reverse();
    Ok((path, best))
}

/// `log_partition - score_sequence(gold)`; non-negative, zero only when the
/// gold path carries all probability mass.
pub fn nll_loss(emissions: &Tensor, gold: &[usize], params: &CrfParams) -> Result<f64> {
    Ok(log_partition(emissions, params)? - score_sequence(emissions, gold, params)?)
}

/// Posterior tag marginals `p(y_t = j)` as a `[T, K]` tensor.
pub fn marginals(emissions: &Tensor, params: &CrfParams) -> Result<Tensor> {
    check_instance(emissions, &params.transitions, None)?;
    if emissions.rows() == 0 {
        return Err(Error::EmptyInput("marginals"));
    }
    let (node, _, _) = posteriors(emissions, &params.transitions);
    Ok(node)
}

/// Forward-backward pass returning node posteriors `[T, K]`, pairwise
/// posteriors per step `[T-1][K, K]`, and the log partition.
fn posteriors(emissions: &Tensor, transitions: &Tensor) -> (Tensor, Vec<Tensor>, f64) {
    let (t_len, k) = (emissions.rows(), emissions.cols());
    let stop = stop_state(k);
    let (alphas, log_z) = forward_alphas(emissions, transitions);

    let mut betas = vec![vec![0.0; k]; t_len];
    for j in 0..k {
        betas[t_len - 1][j] = transitions.get2(j, stop);
    }
    let mut scratch = vec![0.0; k];
    for t in (0..t_len - 1).rev() {
        for i in 0..k {
            for (j, s) in scratch.iter_mut().enumerate() {
                *s = transitions.get2(i, j) + emissions.get2(t + 1, j) + betas[t + 1][j];
            }
            betas[t][i] = logsumexp(&scratch).expect("k >= 1");
        }
    }

    let mut node = Tensor::zeros(vec![t_len, k]);
    for t in 0..t_len {
        for j in 0..k {
            node.set2(t, j, exp(alphas[t][j] + betas[t][j] - log_z));
        }
    }
    let mut pair = Vec::with_capacity(t_len.saturating_sub(1));
    for t in 0..t_len - 1 {
        let mut q = Tensor::zeros(vec![k, k]);
        for i in 0..k {
            for j in 0..k {
                let lp = alphas[t][i]
                    + transitions.get2(i, j)
                    + emissions.get2(t + 1, j)
                    + betas[t + 1][j]
                    - log_z;
                q.set2(i, j, exp(lp));
            }
        }
        pair.push(q);
    }
    (node, pair, log_z)
}

/// Tape op computing the CRF negative log-likelihood of a gold path.
///
/// Inputs: `T` emission vectors of length `K`, then the transition matrix.
/// The backward pass is the classic CRF gradient: posterior marginals minus
/// gold indicators.
struct CrfNllOp {
    gold: Vec<usize>,
}

impl CrfNllOp {
    fn assemble(&self, inputs: &[&Tensor]) -> (Tensor, Tensor) {
        let t_len = self.gold.len();
        debug_assert_eq!(inputs.len(), t_len + 1);
        let k = inputs[0].numel();
        let mut emissions = Tensor::zeros(vec![t_len, k]);
        for (t, row) in inputs[..t_len].iter().enumerate() {
            emissions.row_mut(t).copy_from_slice(row.data());
        }
        (emissions, inputs[t_len].clone())
    }
}

impl CustomOp for CrfNllOp {
    fn name(&self) -> &'static str {
        "crf_nll"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Tensor {
        let (emissions, transitions) = self.assemble(inputs);
        let params = CrfParams {
            proj_w: Tensor::zeros(vec![1, 1]),
            proj_b: Tensor::zeros(vec![1]),
            transitions,
        };
        let nll = nll_loss(&emissions, &self.gold, &params).expect("validated by tape builder");
        Tensor::scalar(nll)
    }

    fn backward(&self, inputs: &[&Tensor], _value: &Tensor, dy: &Tensor) -> Vec<Tensor> {
        let (emissions, transitions) = self.assemble(inputs);
        let (t_len, k) = (emissions.rows(), emissions.cols());
        let (start, stop) = (start_state(k), stop_state(k));
        let scale = dy.item();
        let (node, pair, _) = posteriors(&emissions, &transitions);

        let mut out: Vec<Tensor> = Vec::with_capacity(t_len + 1);
        for t in 0..t_len {
            let mut d = node.row(t).to_vec();
            d[self.gold[t]] -= 1.0;
            for v in &mut d {
                *v *= scale;
            }
            out.push(Tensor::vector(d));
        }

        let mut dtrans = Tensor::zeros(vec![k + 2, k + 2]);
        for j in 0..k {
            let ind = if self.gold[0] == j { 1.0 } else { 0.0 };
            dtrans.set2(start, j, scale * (node.get2(0, j) - ind));
        }
        for (t, q) in pair.iter().enumerate() {
            for i in 0..k {
                for j in 0..k {
                    let ind = if self.gold[t] == i && self.gold[t + 1] == j {
                        1.0
                    } else {
                        0.0
                    };
                    let cur = dtrans.get2(i, j);
                    dtrans.set2(i, j, cur + scale * (q.get2(i, j) - ind));
                }
            }
        }
        for i in 0..k {
            let ind = if self.gold[t_len - 1] == i { 1.0 } else { 0.0 };
            dtrans.set2(i, stop, scale * (node.get2(t_len - 1, i) - ind));
        }
        out.push(dtrans);
        out
    }
}

/// Records the CRF NLL of `gold` given per-token emission vars and the
/// transition var; differentiable with respect to both.
pub fn nll_on_tape(tape: &mut Tape, emissions: &[Var], transitions: Var, gold: &[usize]) -> Result<Var> {
    if emissions.is_empty() {
        return Err(Error::EmptyInput("nll_on_tape"));
    }
    if emissions.len() != gold.len() {
        return Err(Error::ShapeMismatch {
            context: "nll_on_tape",
            expected: emissions.len().to_string(),
            got: gold.len().to_string(),
        });
    }
    let k = tape.value(emissions[0]).numel();
    if gold.iter().any(|&g| g >= k) {
        return Err(Error::UnknownLabel {
            label: String::from("tag id out of range"),
        });
    }
    let mut inputs = emissions.to_vec();
    inputs.push(transitions);
    Ok(tape.custom(inputs, Box::new(CrfNllOp { gold: gold.to_vec() })))
}
