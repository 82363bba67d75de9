//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records one forward computation (typically one sentence).
//! Nodes that do not depend on a trainable parameter are never visited by
//! the backward pass, so frozen sub-networks cost nothing to backpropagate.

use std::collections::HashMap;

use ndarray::{concatenate, s, Axis, Zip};
use rand::Rng;

use super::lstm::{self, LstmCache};
use super::params::{Gradients, Matrix, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

enum Op {
    Input,
    Param(ParamId),
    GatherParam { param: ParamId, rows: Vec<usize> },
    GatherRows { src: NodeId, rows: Vec<usize> },
    MatMul(NodeId, NodeId),
    MatMulBt(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Tanh(NodeId),
    LeakyRelu(NodeId, f64),
    Dropout(NodeId, Matrix),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceRows(NodeId, usize),
    AppendOnes(NodeId),
    Lstm {
        x: NodeId,
        w_ih: NodeId,
        w_hh: NodeId,
        bias: NodeId,
        reverse: bool,
        cache: LstmCache,
    },
    Bilinear {
        dep: NodeId,
        head: NodeId,
        weight: NodeId,
    },
    SoftmaxXent {
        logits: NodeId,
        targets: Vec<Option<usize>>,
        probs: Matrix,
    },
    Sum(Vec<NodeId>),
    Scale(NodeId, f64),
}

struct Node {
    /// Empty for parameter nodes, whose value lives in the store.
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
}

fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Row-wise softmax, outside of any tape.
pub fn softmax(x: &Matrix) -> Matrix {
    softmax_rows(x)
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        match self.nodes[id.0].op {
            Op::Param(p) => self.store.value(p),
            _ => &self.nodes[id.0].value,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Input, false)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        let trainable = self.store.get(id).trainable;
        let n = self.push(Matrix::zeros((0, 0)), Op::Param(id), trainable);
        self.param_nodes.insert(id, n);
        n
    }

    /// Rows of a parameter matrix (embedding lookup).
    pub fn gather_param(&mut self, param: ParamId, rows: Vec<usize>) -> NodeId {
        let table = self.store.value(param);
        let value = table.select(Axis(0), &rows);
        let trainable = self.store.get(param).trainable;
        self.push(value, Op::GatherParam { param, rows }, trainable)
    }

    pub fn gather_rows(&mut self, src: NodeId, rows: Vec<usize>) -> NodeId {
        let value = self.value(src).select(Axis(0), &rows);
        let rg = self.rg(src);
        self.push(value, Op::GatherRows { src, rows }, rg)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).dot(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMul(a, b), rg)
    }

    /// `a · bᵀ`
    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).dot(&self.value(b).t());
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMulBt(a, b), rg)
    }

    /// Add a 1×k row to every row of `a`.
    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let value = self.value(a) + self.value(bias);
        let rg = self.rg(a) || self.rg(bias);
        self.push(value, Op::AddBias(a, bias), rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a) + self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Add(a, b), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).mapv(f64::tanh);
        let rg = self.rg(a);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let value = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(a);
        self.push(value, Op::LeakyRelu(a, slope), rg)
    }

    /// Inverted dropout; a no-op when `p == 0`.
    pub fn dropout(&mut self, a: NodeId, p: f64, rng: &mut impl Rng) -> NodeId {
        if p <= 0.0 {
            return a;
        }
        let keep = 1.0 - p;
        let shape = self.value(a).dim();
        let mask = Matrix::from_shape_fn(shape, |_| {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let value = self.value(a) * &mask;
        let rg = self.rg(a);
        self.push(value, Op::Dropout(a, mask), rg)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        if parts.len() == 1 {
            return parts[0];
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(1), &views).expect("row counts must agree");
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        if parts.len() == 1 {
            return parts[0];
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(0), &views).expect("column counts must agree");
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(value, Op::ConcatRows(parts.to_vec()), rg)
    }

    /// Rows `start..` of `a`.
    pub fn slice_rows_from(&mut self, a: NodeId, start: usize) -> NodeId {
        let value = self.value(a).slice(s![start.., ..]).to_owned();
        let rg = self.rg(a);
        self.push(value, Op::SliceRows(a, start), rg)
    }

    /// `[a, 1]`
    pub fn append_ones(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let mut value = Matrix::ones((v.nrows(), v.ncols() + 1));
        value.slice_mut(s![.., ..v.ncols()]).assign(v);
        let rg = self.rg(a);
        self.push(value, Op::AppendOnes(a), rg)
    }

    pub fn lstm(&mut self, x: NodeId, w_ih: ParamId, w_hh: ParamId, bias: ParamId, reverse: bool) -> NodeId {
        let (w_ih, w_hh, bias) = (self.param(w_ih), self.param(w_hh), self.param(bias));
        let (value, cache) = lstm::forward(
            self.value(x),
            self.value(w_ih),
            self.value(w_hh),
            self.value(bias),
            reverse,
        );
        let rg = self.rg(x) || self.rg(w_ih) || self.rg(w_hh) || self.rg(bias);
        self.push(
            value,
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                bias,
                reverse,
                cache,
            },
            rg,
        )
    }

    /// Row-wise bilinear scores: `out[i][r] = dep_i · U_r · head_i` where
    /// `weight` stacks the `U_r` blocks vertically.
    pub fn bilinear(&mut self, dep: NodeId, head: NodeId, weight: NodeId) -> NodeId {
        let value = bilinear_forward(self.value(dep), self.value(head), self.value(weight));
        let rg = self.rg(dep) || self.rg(head) || self.rg(weight);
        self.push(value, Op::Bilinear { dep, head, weight }, rg)
    }

    /// Summed softmax cross-entropy over rows with a target.
    pub fn softmax_xent(&mut self, logits: NodeId, targets: Vec<Option<usize>>) -> NodeId {
        let probs = softmax_rows(self.value(logits));
        let mut loss = 0.0;
        for (row, t) in targets.iter().enumerate() {
            if let Some(t) = *t {
                loss -= probs[[row, t]].max(f64::MIN_POSITIVE).ln();
            }
        }
        let rg = self.rg(logits);
        self.push(
            Matrix::from_elem((1, 1), loss),
            Op::SoftmaxXent {
                logits,
                targets,
                probs,
            },
            rg,
        )
    }

    pub fn sum(&mut self, parts: &[NodeId]) -> NodeId {
        let mut value = Matrix::zeros(self.value(parts[0]).dim());
        for &p in parts {
            value += self.value(p);
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(value, Op::Sum(parts.to_vec()), rg)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.value(a) * factor;
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, factor), rg)
    }

    /// Linear layer `x·W + b`.
    pub fn linear(&mut self, x: NodeId, weight: ParamId, bias: ParamId) -> NodeId {
        let w = self.param(weight);
        let b = self.param(bias);
        let xw = self.matmul(x, w);
        self.add_bias(xw, b)
    }

    /// Backpropagate from the scalar node `loss`, scaled by `seed`, adding
    /// parameter gradients into `grads`.
    pub fn backward(&self, loss: NodeId, seed: f64, grads: &mut Gradients) {
        let mut g: Vec<Option<Matrix>> = Vec::with_capacity(self.nodes.len());
        g.resize_with(self.nodes.len(), || None);
        g[loss.0] = Some(Matrix::from_elem((1, 1), seed));

        fn acc(g: &mut [Option<Matrix>], id: NodeId, delta: Matrix) {
            match &mut g[id.0] {
                Some(a) => *a += &delta,
                slot @ None => *slot = Some(delta),
            }
        }

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(go) = g[idx].take() else { continue };
            match &node.op {
                Op::Input => {}
                Op::Param(p) => grads.accumulate(*p, &go),
                Op::GatherParam { param, rows } => {
                    let shape = self.store.value(*param).dim();
                    let slot = grads.slot(*param, shape);
                    for (r, &src) in rows.iter().enumerate() {
                        let mut dst = slot.row_mut(src);
                        dst += &go.row(r);
                    }
                }
                Op::GatherRows { src, rows } => {
                    if self.rg(*src) {
                        let mut d = Matrix::zeros(self.value(*src).dim());
                        for (r, &s) in rows.iter().enumerate() {
                            let mut dst = d.row_mut(s);
                            dst += &go.row(r);
                        }
                        acc(&mut g, *src, d);
                    }
                }
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        acc(&mut g, *a, go.dot(&self.value(*b).t()));
                    }
                    if self.rg(*b) {
                        acc(&mut g, *b, self.value(*a).t().dot(&go));
                    }
                }
                Op::MatMulBt(a, b) => {
                    if self.rg(*a) {
                        acc(&mut g, *a, go.dot(self.value(*b)));
                    }
                    if self.rg(*b) {
                        acc(&mut g, *b, go.t().dot(self.value(*a)));
                    }
                }
                Op::AddBias(a, b) => {
                    if self.rg(*b) {
                        acc(&mut g, *b, go.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.rg(*a) {
                        acc(&mut g, *a, go);
                    }
                }
                Op::Add(a, b) => {
                    if self.rg(*b) {
                        acc(&mut g, *b, go.clone());
                    }
                    if self.rg(*a) {
                        acc(&mut g, *a, go);
                    }
                }
                Op::Tanh(a) => {
                    let mut d = go;
                    Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= 1.0 - y * y);
                    acc(&mut g, *a, d);
                }
                Op::LeakyRelu(a, slope) => {
                    let mut d = go;
                    Zip::from(&mut d)
                        .and(self.value(*a))
                        .for_each(|d, &x| {
                            if x <= 0.0 {
                                *d *= slope
                            }
                        });
                    acc(&mut g, *a, d);
                }
                Op::Dropout(a, mask) => acc(&mut g, *a, go * mask),
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        if self.rg(p) {
                            acc(&mut g, p, go.slice(s![.., off..off + w]).to_owned());
                        }
                        off += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let h = self.value(p).nrows();
                        if self.rg(p) {
                            acc(&mut g, p, go.slice(s![off..off + h, ..]).to_owned());
                        }
                        off += h;
                    }
                }
                Op::SliceRows(a, start) => {
                    let mut d = Matrix::zeros(self.value(*a).dim());
                    d.slice_mut(s![*start.., ..]).assign(&go);
                    acc(&mut g, *a, d);
                }
                Op::AppendOnes(a) => {
                    let w = self.value(*a).ncols();
                    acc(&mut g, *a, go.slice(s![.., ..w]).to_owned());
                }
                Op::Lstm {
                    x,
                    w_ih,
                    w_hh,
                    bias,
                    reverse,
                    cache,
                } => {
                    let d = lstm::backward(
                        &go,
                        self.value(*x),
                        self.value(*w_ih),
                        self.value(*w_hh),
                        &node.value,
                        cache,
                        *reverse,
                    );
                    if self.rg(*x) {
                        acc(&mut g, *x, d.x);
                    }
                    if self.rg(*w_ih) {
                        acc(&mut g, *w_ih, d.w_ih);
                    }
                    if self.rg(*w_hh) {
                        acc(&mut g, *w_hh, d.w_hh);
                    }
                    if self.rg(*bias) {
                        acc(&mut g, *bias, d.bias);
                    }
                }
                Op::Bilinear { dep, head, weight } => {
                    let (dd, dh, dw) = bilinear_backward(
                        &go,
                        self.value(*dep),
                        self.value(*head),
                        self.value(*weight),
                    );
                    if self.rg(*dep) {
                        acc(&mut g, *dep, dd);
                    }
                    if self.rg(*head) {
                        acc(&mut g, *head, dh);
                    }
                    if self.rg(*weight) {
                        acc(&mut g, *weight, dw);
                    }
                }
                Op::SoftmaxXent {
                    logits,
                    targets,
                    probs,
                } => {
                    let scale = go[[0, 0]];
                    let mut d = Matrix::zeros(probs.dim());
                    for (row, t) in targets.iter().enumerate() {
                        if let Some(t) = *t {
                            let mut dr = d.row_mut(row);
                            dr.assign(&probs.row(row));
                            dr[t] -= 1.0;
                            dr.mapv_inplace(|v| v * scale);
                        }
                    }
                    acc(&mut g, *logits, d);
                }
                Op::Sum(parts) => {
                    for &p in parts {
                        if self.rg(p) {
                            acc(&mut g, p, go.clone());
                        }
                    }
                }
                Op::Scale(a, f) => acc(&mut g, *a, go * *f),
            }
        }
    }
}

pub(crate) fn bilinear_forward(dep: &Matrix, head: &Matrix, weight: &Matrix) -> Matrix {
    let p = dep.ncols();
    let labels = weight.nrows() / p;
    let mut out = Matrix::zeros((dep.nrows(), labels));
    for r in 0..labels {
        let u = weight.slice(s![r * p..(r + 1) * p, ..]);
        let t = dep.dot(&u);
        for i in 0..dep.nrows() {
            out[[i, r]] = t.row(i).dot(&head.row(i));
        }
    }
    out
}

fn bilinear_backward(go: &Matrix, dep: &Matrix, head: &Matrix, weight: &Matrix) -> (Matrix, Matrix, Matrix) {
    let p = dep.ncols();
    let labels = weight.nrows() / p;
    let mut d_dep = Matrix::zeros(dep.dim());
    let mut d_head = Matrix::zeros(head.dim());
    let mut d_w = Matrix::zeros(weight.dim());
    for r in 0..labels {
        let u = weight.slice(s![r * p..(r + 1) * p, ..]);
        let gr = go.column(r).insert_axis(Axis(1));
        let scaled_dep = dep * &gr;
        d_w.slice_mut(s![r * p..(r + 1) * p, ..])
            .assign(&scaled_dep.t().dot(head));
        d_dep += &((head * &gr).dot(&u.t()));
        d_head += &(dep.dot(&u) * gr);
    }
    (d_dep, d_head, d_w)
}
