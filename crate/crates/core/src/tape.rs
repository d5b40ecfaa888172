//! Reverse-mode automatic differentiation on a recording tape.
//!
//! Values are computed eagerly as operations are pushed; the tape keeps the
//! operation graph so [`Tape::backward`] can replay it in reverse and
//! accumulate d(loss)/d(node) for every node. Nodes are created in
//! topological order, so a single reverse sweep suffices.
//!
//! The op vocabulary is exactly what the tagger needs: matrix-vector
//! products, elementwise arithmetic and activations, concatenation,
//! embedding-row lookup, mask multiplication for dropout, and a hook for
//! composite ops with hand-derived backward passes (the CRF loss).

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::{sigmoid, tanh, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// A composite operation with a hand-derived vector-Jacobian product.
pub trait CustomOp {
    fn name(&self) -> &'static str;
    fn forward(&self, inputs: &[&Tensor]) -> Tensor;
    /// Returns one gradient contribution per input, each shaped like the
    /// corresponding input.
    fn backward(&self, inputs: &[&Tensor], value: &Tensor, dy: &Tensor) -> Vec<Tensor>;
}

enum Op {
    Leaf,
    MatVec { w: Var, x: Var },
    AddN(Vec<Var>),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    OneMinus(Var),
    Concat(Vec<Var>),
    Row { table: Var, row: usize },
    MulMask { x: Var, mask: Tensor },
    SumSquares(Var),
    Scale { x: Var, c: f64 },
    Custom { inputs: Vec<Var>, op: Box<dyn CustomOp> },
}

struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients for every node of a tape, produced by [`Tape::backward`].
pub struct Grads {
    grads: Vec<Tensor>,
}

impl Grads {
    pub fn of(&self, v: Var) -> &Tensor {
        &self.grads[v.0]
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        core::mem::replace(&mut self.grads[v.0], Tensor::zeros(vec![1]))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf whose gradient the caller will read back (a parameter
    /// or input data).
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t)
    }

    /// Records a leaf whose gradient is never read (initial states, data).
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t)
    }

    /// y = W x for a `[m, n]` matrix and an `n`-vector.
    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let (wt, xt) = (self.value(w), self.value(x));
        assert_eq!(wt.shape().len(), 2, "matvec weight must be a matrix");
        assert_eq!(
            wt.cols(),
            xt.numel(),
            "matvec: {:?} x {:?}",
            wt.shape(),
            xt.shape()
        );
        let m = wt.rows();
        let mut out = vec![0.0; m];
        let xd = xt.data();
        for (i, o) in out.iter_mut().enumerate() {
            let row = wt.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(xd) {
                acc += a * b;
            }
            *o = acc;
        }
        self.push(Op::MatVec { w, x }, Tensor::vector(out))
    }

    /// Elementwise sum of same-shaped tensors.
    pub fn add_n(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty());
        let mut out = self.value(xs[0]).clone();
        for &v in &xs[1..] {
            let t = self.value(v);
            assert!(out.same_shape(t), "add_n shape mismatch");
            let od = out.data_mut();
            for (o, a) in od.iter_mut().zip(t.data()) {
                *o += a;
            }
        }
        self.push(Op::AddN(xs.to_vec()), out)
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (at, bt) = (self.value(a), self.value(b));
        assert!(at.same_shape(bt), "mul shape mismatch");
        let data = at.data().iter().zip(bt.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::from_parts(at.shape().to_vec(), data);
        self.push(Op::Mul(a, b), out)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        self.push(Op::Sigmoid(x), out)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(tanh);
        self.push(Op::Tanh(x), out)
    }

    /// 1 − x, elementwise.
    pub fn one_minus(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| 1.0 - v);
        self.push(Op::OneMinus(x), out)
    }

    /// Concatenation of vectors into one vector.
    pub fn concat(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty());
        let mut data = Vec::new();
        for &v in xs {
            data.extend_from_slice(self.value(v).data());
        }
        self.push(Op::Concat(xs.to_vec()), Tensor::vector(data))
    }

    /// One row of a `[V, d]` embedding table.
    pub fn row(&mut self, table: Var, row: usize) -> Var {
        let t = self.value(table);
        assert!(row < t.rows(), "row {row} out of {}", t.rows());
        let out = Tensor::vector(t.row(row).to_vec());
        self.push(Op::Row { table, row }, out)
    }

    /// Elementwise product with a constant mask (dropout). The mask gets no
    /// gradient.
    pub fn mul_mask(&mut self, x: Var, mask: Tensor) -> Var {
        let xt = self.value(x);
        assert_eq!(xt.numel(), mask.numel(), "mask length mismatch");
        let data = xt.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect();
        let out = Tensor::from_parts(xt.shape().to_vec(), data);
        self.push(Op::MulMask { x, mask }, out)
    }

    /// Σ xᵢ², a scalar.
    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data().iter().map(|v| v * v).sum();
        self.push(Op::SumSquares(x), Tensor::scalar(s))
    }

    /// c · x, elementwise with a compile-time constant.
    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let out = self.value(x).map(|v| c * v);
        self.push(Op::Scale { x, c }, out)
    }

    /// Mean of scalar nodes.
    pub fn mean_scalars(&mut self, xs: &[Var]) -> Var {
        let sum = self.add_n(xs);
        self.scale(sum, 1.0 / xs.len() as f64)
    }

    /// Records a composite op with a hand-derived backward pass.
    pub fn custom(&mut self, inputs: Vec<Var>, op: Box<dyn CustomOp>) -> Var {
        let tensors: Vec<&Tensor> = inputs.iter().map(|&v| self.value(v)).collect();
        let value = op.forward(&tensors);
        self.push(Op::Custom { inputs, op }, value)
    }

    /// Accumulates d(loss)/d(node) for every node. `loss` must be scalar.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.value(loss).numel(), 1, "loss must be scalar");
        let mut grads: Vec<Tensor> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros_like(&n.value))
            .collect();
        grads[loss.0].data_mut()[0] = 1.0;

        for i in (0..self.nodes.len()).rev() {
            let (lower, upper) = grads.split_at_mut(i);
            let g = &upper[0];
            if g.data().iter().all(|&v| v == 0.0) {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatVec { w, x } => {
                    let wt = &self.nodes[w.0].value;
                    let xt = &self.nodes[x.0].value;
                    let gd = g.data();
                    {
                        let dw = lower[w.0].data_mut();
                        let n = xt.numel();
                        for (i_row, &gi) in gd.iter().enumerate() {
                            if gi == 0.0 {
                                continue;
                            }
                            let drow = &mut dw[i_row * n..(i_row + 1) * n];
                            for (d, xv) in drow.iter_mut().zip(xt.data()) {
                                *d += gi * xv;
                            }
                        }
                    }
                    {
                        let dx = lower[x.0].data_mut();
                        let n = xt.numel();
                        for (i_row, &gi) in gd.iter().enumerate() {
                            if gi == 0.0 {
                                continue;
                            }
                            let row = &wt.data()[i_row * n..(i_row + 1) * n];
                            for (d, wv) in dx.iter_mut().zip(row) {
                                *d += gi * wv;
                            }
                        }
                    }
                }
                Op::AddN(xs) => {
                    for v in xs {
                        accumulate(&mut lower[v.0], g.data());
                    }
                }
                Op::Mul(a, b) => {
                    let at = self.nodes[a.0].value.data().to_vec();
                    let bt = self.nodes[b.0].value.data().to_vec();
                    for ((d, gv), bv) in lower[a.0].data_mut().iter_mut().zip(g.data()).zip(&bt) {
                        *d += gv * bv;
                    }
                    for ((d, gv), av) in lower[b.0].data_mut().iter_mut().zip(g.data()).zip(&at) {
                        *d += gv * av;
                    }
                }
                Op::Sigmoid(x) => {
                    let y = node.value.data();
                    for ((d, gv), yv) in lower[x.0].data_mut().iter_mut().zip(g.data()).zip(y) {
                        *d += gv * yv * (1.0 - yv);
                    }
                }
                Op::Tanh(x) => {
                    let y = node.value.data();
                    for ((d, gv), yv) in lower[x.0].data_mut().iter_mut().zip(g.data()).zip(y) {
                        *d += gv * (1.0 - yv * yv);
                    }
                }
                Op::OneMinus(x) => {
                    for (d, gv) in lower[x.0].data_mut().iter_mut().zip(g.data()) {
                        *d -= gv;
                    }
                }
                Op::Concat(xs) => {
                    let mut offset = 0;
                    for v in xs {
                        let len = self.nodes[v.0].value.numel();
                        accumulate(&mut lower[v.0], &g.data()[offset..offset + len]);
                        offset += len;
                    }
                }
                Op::Row { table, row } => {
                    let cols = self.nodes[table.0].value.cols();
                    let dt = lower[table.0].data_mut();
                    let drow = &mut dt[row * cols..(row + 1) * cols];
                    for (d, gv) in drow.iter_mut().zip(g.data()) {
                        *d += gv;
                    }
                }
                Op::MulMask { x, mask } => {
                    for ((d, gv), m) in lower[x.0]
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(mask.data())
                    {
                        *d += gv * m;
                    }
                }
                Op::SumSquares(x) => {
                    let gv = g.item();
                    let xt = self.nodes[x.0].value.data().to_vec();
                    for (d, xv) in lower[x.0].data_mut().iter_mut().zip(&xt) {
                        *d += 2.0 * gv * xv;
                    }
                }
                Op::Scale { x, c } => {
                    for (d, gv) in lower[x.0].data_mut().iter_mut().zip(g.data()) {
                        *d += c * gv;
                    }
                }
                Op::Custom { inputs, op } => {
                    let tensors: Vec<&Tensor> =
                        inputs.iter().map(|v| &self.nodes[v.0].value).collect();
                    let contributions = op.backward(&tensors, &node.value, g);
                    debug_assert_eq!(contributions.len(), inputs.len());
                    for (v, c) in inputs.iter().zip(contributions) {
                        debug_assert!(lower[v.0].same_shape(&c), "{} backward shape", op.name());
                        accumulate(&mut lower[v.0], c.data());
                    }
                }
            }
        }
        Grads { grads }
    }
}

fn accumulate(dst: &mut Tensor, src: &[f64]) {
    for (d, s) in dst.data_mut().iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    /// Central-difference check of every tape gradient against the scalar
    /// loss produced by `build`, which must construct the same graph for
    /// the same inputs.
    fn fd_check(inputs: &[Tensor], build: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
        let eval = |tensors: &[Tensor]| -> f64 {
            let mut tape = Tape::new();
            let vars: Vec<Var> = tensors.iter().map(|t| tape.input(t.clone())).collect();
            let loss = build(&mut tape, &vars);
            tape.value(loss).item()
        };

        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
        let loss = build(&mut tape, &vars);
        let grads = tape.backward(loss);

        let eps = 1e-6;
        let mut worst = 0.0f64;
        for (k, input) in inputs.iter().enumerate() {
            for j in 0..input.numel() {
                let mut plus = inputs.to_vec();
                plus[k].data_mut()[j] += eps;
                let mut minus = inputs.to_vec();
                minus[k].data_mut()[j] -= eps;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * eps);
                let an = grads.of(vars[k]).data()[j];
                let denom = an.abs().max(fd.abs()).max(1e-6);
                worst = worst.max((an - fd).abs() / denom);
            }
        }
        worst
    }

    fn rand_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::from_parts(shape, (0..n).map(|_| rng.random_range(-1.5..1.5)).collect())
    }

    #[test]
    fn matvec_value() {
        let mut tape = Tape::new();
        let w = tape.input(Tensor::matrix(2, 3, vec![1.0, 0.0, 2.0, -1.0, 3.0, 0.5]).unwrap());
        let x = tape.input(Tensor::vector(vec![2.0, 1.0, -1.0]));
        let y = tape.matvec(w, x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.5]);
    }

    #[test]
    fn gradients_match_finite_differences_per_op() {
        let mut rng = seeded(99);
        // matvec -> tanh -> sum_squares
        let err = fd_check(
            &[rand_tensor(vec![3, 4], &mut rng), rand_tensor(vec![4], &mut rng)],
            |t, v| {
                let y = t.matvec(v[0], v[1]);
                let z = t.tanh(y);
                t.sum_squares(z)
            },
        );
        assert!(err < 1e-4, "matvec/tanh err {err}");

        // sigmoid, one_minus, mul, add_n
        let err = fd_check(
            &[rand_tensor(vec![5], &mut rng), rand_tensor(vec![5], &mut rng)],
            |t, v| {
                let s = t.sigmoid(v[0]);
                let o = t.one_minus(s);
                let m = t.mul(o, v[1]);
                let a = t.add_n(&[m, v[0]]);
                t.sum_squares(a)
            },
        );
        assert!(err < 1e-4, "elementwise err {err}");

        // concat + scale + row
        let err = fd_check(
            &[rand_tensor(vec![4, 3], &mut rng), rand_tensor(vec![2], &mut rng)],
            |t, v| {
                let r1 = t.row(v[0], 1);
                let r3 = t.row(v[0], 3);
                let c = t.concat(&[r1, v[1], r3]);
                let s = t.scale(c, 0.7);
                t.sum_squares(s)
            },
        );
        assert!(err < 1e-4, "concat/row err {err}");
    }

    #[test]
    fn mask_multiplication_gradient() {
        let mut rng = seeded(5);
        let mask = Tensor::vector(vec![2.0, 0.0, 2.0, 0.0]);
        let err = fd_check(&[rand_tensor(vec![4], &mut rng)], |t, v| {
            let m = t.mul_mask(v[0], mask.clone());
            t.sum_squares(m)
        });
        assert!(err < 1e-4, "mask err {err}");
    }

    #[test]
    fn repeated_row_lookup_accumulates() {
        let mut tape = Tape::new();
        let table = tape.input(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let a = tape.row(table, 0);
        let b = tape.row(table, 0);
        let s = tape.add_n(&[a, b]);
        let loss = tape.sum_squares(s);
        let grads = tape.backward(loss);
        // d/dtable of (2*row0)^2 touches row 0 twice, row 1 never.
        assert_eq!(grads.of(table).row(1), &[0.0, 0.0]);
        assert_eq!(grads.of(table).row(0), &[8.0, 16.0]);
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::vector(vec![1.0, 2.0]));
        let c = tape.constant(Tensor::scalar(5.0));
        let grads = tape.backward(c);
        assert_eq!(grads.of(x).data(), &[0.0, 0.0]);
    }
}
