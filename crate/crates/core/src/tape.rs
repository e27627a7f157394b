//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every operation of one forward pass in execution
//! order. Because inputs always precede the node that consumes them, the
//! node list is already topologically sorted, and a backward sweep is a
//! single walk over it in reverse.
//!
//! Backward passes borrow the tape immutably, so one forward pass can feed
//! several vector-Jacobian products (one per output coordinate when a full
//! Jacobian is needed). The tape is dropped once the caller is done with it.
//!
//! Values may be borrowed (`*_ref` constructors), which lets model
//! parameters enter a graph without being copied.
//!
//! Broadcasting in binary ops covers exactly two cases: a scalar against any
//! tensor, and a row vector (`[n]` or `[1, n]`) against a matrix whose last
//! dimension is `n`.

use std::borrow::Cow;
use std::sync::Arc;

use crate::error::{Result, VlxError};
use crate::tensor::{gemm, gemm_strided, Tensor};

/// Rows whose Euclidean norm falls below this are rejected by
/// [`Tape::l2_normalize_rows`].
pub const NORMALIZE_EPS: f64 = 1e-12;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// GELU, tanh approximation: `0.5·x·(1 + tanh(c·(x + a·x³)))`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

/// Exact derivative of [`gelu`].
pub fn gelu_derivative(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug)]
enum BinOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bcast {
    Same,
    LhsScalar,
    RhsScalar,
    LhsRow,
    RhsRow,
}

impl Bcast {
    #[inline]
    fn lhs_index(self, idx: usize, cols: usize) -> usize {
        match self {
            Bcast::LhsScalar => 0,
            Bcast::LhsRow => idx % cols,
            _ => idx,
        }
    }

    #[inline]
    fn rhs_index(self, idx: usize, cols: usize) -> usize {
        match self {
            Bcast::RhsScalar => 0,
            Bcast::RhsRow => idx % cols,
            _ => idx,
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Binary(BinOp, Var, Var, Bcast),
    Scale(Var, f64),
    Gelu(Var),
    Relu(Var),
    L2NormalizeRows(Var),
    MeanPoolRows(Var, Vec<usize>),
    Gather(Var, Arc<[usize]>),
    GatherRows(Var, Vec<usize>),
    Reshape(Var),
    Sum(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Binary(BinOp::Add, ..) => "add",
            Op::Binary(BinOp::Sub, ..) => "sub",
            Op::Binary(BinOp::Mul, ..) => "mul",
            Op::Scale(..) => "scale",
            Op::Gelu(_) => "gelu",
            Op::Relu(_) => "relu",
            Op::L2NormalizeRows(_) => "l2_normalize_rows",
            Op::MeanPoolRows(..) => "mean_pool_rows",
            Op::Gather(..) => "gather",
            Op::GatherRows(..) => "gather_rows",
            Op::Reshape(_) => "reshape",
            Op::Sum(_) => "sum",
            Op::SoftmaxRows(_) => "softmax_rows",
            Op::LogSoftmaxRows(_) => "log_softmax_rows",
        }
    }
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    requires_grad: bool,
    op: Op,
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients produced by one backward sweep, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `var`. Every leaf created with `requires_grad` has one
    /// (zero when the output does not depend on it).
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(|g| g.take())
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Differentiable input owning its value.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_leaf(Cow::Owned(value), true)
    }

    /// Differentiable input borrowing its value.
    pub fn leaf_ref(&mut self, value: &'a Tensor) -> Var {
        self.push_leaf(Cow::Borrowed(value), true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(Cow::Owned(value), false)
    }

    pub fn constant_ref(&mut self, value: &'a Tensor) -> Var {
        self.push_leaf(Cow::Borrowed(value), false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push_leaf(&mut self, value: Cow<'a, Tensor>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if cfg!(debug_assertions) && !value.is_finite() {
            return Err(VlxError::NonFinite(op.name().to_string()));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Cow::Owned(value),
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(VlxError::Dimension {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let out = gemm(m, k, n, ta.data(), tb.data());
        self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.shape().len() != 2 {
            return Err(VlxError::Dimension {
                op: "transpose",
                lhs: t.shape().to_vec(),
                rhs: vec![],
            });
        }
        let (r, c) = (t.shape()[0], t.shape()[1]);
        let out = transpose_data(t.data(), r, c);
        self.push(Tensor::from_parts(vec![c, r], out), Op::Transpose(a), &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinOp::Mul, a, b)
    }

    fn binary(&mut self, op: BinOp, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (bcast, shape) = broadcast(op, ta, tb)?;
        let n: usize = shape.iter().product();
        let cols = match bcast {
            Bcast::LhsRow => ta.numel(),
            Bcast::RhsRow => tb.numel(),
            _ => 1,
        };
        let (da, db) = (ta.data(), tb.data());
        let out: Vec<f64> = (0..n)
            .map(|i| {
                let x = da[bcast.lhs_index(i, cols)];
                let y = db[bcast.rhs_index(i, cols)];
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                }
            })
            .collect();
        self.push(
            Tensor::from_parts(shape, out),
            Op::Binary(op, a, b, bcast),
            &[a, b],
        )
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let t = self.value(a);
        let out = t.data().iter().map(|v| v * factor).collect();
        let shape = t.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::Scale(a, factor), &[a])
    }

    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let out = t.data().iter().map(|&v| gelu(v)).collect();
        let shape = t.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::Gelu(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let out = t.data().iter().map(|&v| v.max(0.0)).collect();
        let shape = t.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::Relu(a), &[a])
    }

    /// Divides each row by its Euclidean norm.
    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (rows, cols) = t.matrix_dims();
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(cols.max(1)).take(rows) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < NORMALIZE_EPS {
                return Err(VlxError::DegenerateEmbedding {
                    norm,
                    eps: NORMALIZE_EPS,
                });
            }
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        let shape = t.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::L2NormalizeRows(a), &[a])
    }

    /// Averages consecutive row segments: the output has one row per entry
    /// of `segments`, which must be non-zero and sum to the input row count.
    pub fn mean_pool_rows(&mut self, a: Var, segments: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let (rows, cols) = t.matrix_dims();
        if segments.contains(&0) || segments.iter().sum::<usize>() != rows {
            return Err(VlxError::Dimension {
                op: "mean_pool_rows",
                lhs: t.shape().to_vec(),
                rhs: segments.to_vec(),
            });
        }
        let data = t.data();
        let mut out = vec![0.0; segments.len() * cols];
        let mut start = 0;
        for (s, &len) in segments.iter().enumerate() {
            let dst = &mut out[s * cols..(s + 1) * cols];
            for r in start..start + len {
                for (d, v) in dst.iter_mut().zip(&data[r * cols..(r + 1) * cols]) {
                    *d += v;
                }
            }
            let inv = 1.0 / len as f64;
            for d in dst.iter_mut() {
                *d *= inv;
            }
            start += len;
        }
        self.push(
            Tensor::from_parts(vec![segments.len(), cols], out),
            Op::MeanPoolRows(a, segments.to_vec()),
            &[a],
        )
    }

    /// `out[i] = a.flat[indices[i]]`, reshaped to `shape`.
    pub fn gather(&mut self, a: Var, indices: Arc<[usize]>, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(a);
        if shape.iter().product::<usize>() != indices.len()
            || indices.iter().any(|&i| i >= t.numel())
        {
            return Err(VlxError::Dimension {
                op: "gather",
                lhs: t.shape().to_vec(),
                rhs: shape,
            });
        }
        let data = t.data();
        let out = indices.iter().map(|&i| data[i]).collect();
        self.push(Tensor::from_parts(shape, out), Op::Gather(a, indices), &[a])
    }

    /// Row lookup into a `[vocab, dim]` table.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let (rows, cols) = t.matrix_dims();
        if t.shape().len() != 2 || ids.iter().any(|&i| i >= rows) {
            return Err(VlxError::Dimension {
                op: "gather_rows",
                lhs: t.shape().to_vec(),
                rhs: ids.to_vec(),
            });
        }
        let data = t.data();
        let mut out = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            out.extend_from_slice(&data[id * cols..(id + 1) * cols]);
        }
        self.push(
            Tensor::from_parts(vec![ids.len(), cols], out),
            Op::GatherRows(table, ids.to_vec()),
            &[table],
        )
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(a).clone().reshaped(shape)?;
        self.push(t, Op::Reshape(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    /// `sum(a ⊙ b)`.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let p = self.mul(a, b)?;
        self.sum(p)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (_, cols) = t.matrix_dims();
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(cols.max(1)) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                z += *v;
            }
            for v in row.iter_mut() {
                *v /= z;
            }
        }
        let shape = t.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::SoftmaxRows(a), &[a])
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (_, cols) = t.matrix_dims();
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(cols.max(1)) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        let shape = t.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::LogSoftmaxRows(a), &[a])
    }

    /// dLoss/dVar for every differentiable node reachable from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let value = self.value(loss);
        if !value.is_scalar() {
            return Err(VlxError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                value.shape()
            )));
        }
        self.vjp(loss, Tensor::full(value.shape(), 1.0))
    }

    /// Vector-Jacobian product: propagates `seed` (shaped like `output`)
    /// back through the graph.
    pub fn vjp(&self, output: Var, seed: Tensor) -> Result<Gradients> {
        if output.0 >= self.nodes.len() {
            return Err(VlxError::Contract("output is not on this tape".into()));
        }
        let out_value = self.value(output);
        if seed.numel() != out_value.numel() {
            return Err(VlxError::Dimension {
                op: "vjp",
                lhs: out_value.shape().to_vec(),
                rhs: seed.shape().to_vec(),
            });
        }
        let seed = Tensor::from_parts(out_value.shape().to_vec(), seed.into_data());

        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        if self.nodes[output.0].requires_grad {
            grads[output.0] = Some(seed);
        }

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let (lower, upper) = grads.split_at_mut(i);
            let Some(g) = upper[0].as_ref() else {
                continue;
            };
            self.backward_node(node, g, lower);
            // Intermediate gradients are not part of the result.
            upper[0] = None;
        }

        for (node, g) in self.nodes.iter().zip(grads.iter_mut()) {
            if matches!(node.op, Op::Leaf) && node.requires_grad && g.is_none() {
                *g = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(Gradients { grads })
    }

    fn grad_slot<'g>(&self, grads: &'g mut [Option<Tensor>], v: Var) -> Option<&'g mut Tensor> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(grads[v.0].get_or_insert_with(|| Tensor::zeros(node.value.shape())))
    }

    fn backward_node(&self, node: &Node<'_>, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if let Some(ga) = self.grad_slot(grads, *a) {
                    // ga += g · bᵀ
                    gemm_strided(m, n, k, gd, (n, 1), tb.data(), (1, n), ga.data_mut(), 1.0);
                }
                if let Some(gb) = self.grad_slot(grads, *b) {
                    // gb += aᵀ · g
                    gemm_strided(k, m, n, ta.data(), (1, k), gd, (n, 1), gb.data_mut(), 1.0);
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (g.shape()[0], g.shape()[1]);
                let back = transpose_data(gd, r, c);
                if let Some(ga) = self.grad_slot(grads, *a) {
                    for (x, y) in ga.data_mut().iter_mut().zip(back) {
                        *x += y;
                    }
                }
            }
            Op::Binary(op, a, b, bcast) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let cols = match bcast {
                    Bcast::LhsRow => ta.numel(),
                    Bcast::RhsRow => tb.numel(),
                    _ => 1,
                };
                if let Some(ga) = self.grad_slot(grads, *a) {
                    let ga = ga.data_mut();
                    for (i, &gi) in gd.iter().enumerate() {
                        let ia = bcast.lhs_index(i, cols);
                        ga[ia] += match op {
                            BinOp::Add | BinOp::Sub => gi,
                            BinOp::Mul => gi * tb.data()[bcast.rhs_index(i, cols)],
                        };
                    }
                }
                if let Some(gb) = self.grad_slot(grads, *b) {
                    let gb = gb.data_mut();
                    for (i, &gi) in gd.iter().enumerate() {
                        let ib = bcast.rhs_index(i, cols);
                        gb[ib] += match op {
                            BinOp::Add => gi,
                            BinOp::Sub => -gi,
                            BinOp::Mul => gi * ta.data()[bcast.lhs_index(i, cols)],
                        };
                    }
                }
            }
            Op::Scale(a, factor) => {
                if let Some(ga) = self.grad_slot(grads, *a) {
                    for (x, gi) in ga.data_mut().iter_mut().zip(gd) {
                        *x += factor * gi;
                    }
                }
            }
            Op::Gelu(a) => {
                let input = self.value(*a).data();
                if let Some(ga) = self.grad_slot(grads, *a) {
                    for ((x, gi), v) in ga.data_mut().iter_mut().zip(gd).zip(input) {
                        *x += gi * gelu_derivative(*v);
                    }
                }
            }
            Op::Relu(a) => {
                let input = self.value(*a).data();
                if let Some(ga) = self.grad_slot(grads, *a) {
                    for ((x, gi), v) in ga.data_mut().iter_mut().zip(gd).zip(input) {
                        if *v > 0.0 {
                            *x += gi;
                        }
                    }
                }
            }
            Op::L2NormalizeRows(a) => {
                let input = self.value(*a);
                let (_, cols) = input.matrix_dims();
                let y = node.value.data();
                if let Some(ga) = self.grad_slot(grads, *a) {
                    let cols = cols.max(1);
                    for (r, dst) in ga.data_mut().chunks_mut(cols).enumerate() {
                        let span = r * cols..(r + 1) * cols;
                        let x = &input.data()[span.clone()];
                        let (yr, gr) = (&y[span.clone()], &gd[span]);
                        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let proj: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((d, yi), gi) in dst.iter_mut().zip(yr).zip(gr) {
                            *d += (gi - yi * proj) / norm;
                        }
                    }
                }
            }
            Op::MeanPoolRows(a, segments) => {
                let cols = g.shape()[1];
                if let Some(ga) = self.grad_slot(grads, *a) {
                    let ga = ga.data_mut();
                    let mut start = 0;
                    for (s, &len) in segments.iter().enumerate() {
                        let inv = 1.0 / len as f64;
                        let src = &gd[s * cols..(s + 1) * cols];
                        for r in start..start + len {
                            for (d, v) in ga[r * cols..(r + 1) * cols].iter_mut().zip(src) {
                                *d += v * inv;
                            }
                        }
                        start += len;
                    }
                }
            }
            Op::Gather(a, indices) => {
                if let Some(ga) = self.grad_slot(grads, *a) {
                    let ga = ga.data_mut();
                    for (&idx, gi) in indices.iter().zip(gd) {
                        ga[idx] += gi;
                    }
                }
            }
            Op::GatherRows(table, ids) => {
                let cols = g.shape()[1];
                if let Some(gt) = self.grad_slot(grads, *table) {
                    let gt = gt.data_mut();
                    for (r, &id) in ids.iter().enumerate() {
                        for (d, v) in gt[id * cols..(id + 1) * cols]
                            .iter_mut()
                            .zip(&gd[r * cols..(r + 1) * cols])
                        {
                            *d += v;
                        }
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(ga) = self.grad_slot(grads, *a) {
                    for (x, gi) in ga.data_mut().iter_mut().zip(gd) {
                        *x += gi;
                    }
                }
            }
            Op::Sum(a) => {
                let gi = gd[0];
                if let Some(ga) = self.grad_slot(grads, *a) {
                    for x in ga.data_mut() {
                        *x += gi;
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                let y = node.value.data();
                let (_, cols) = node.value.matrix_dims();
                if let Some(ga) = self.grad_slot(grads, *a) {
                    let cols = cols.max(1);
                    for (r, dst) in ga.data_mut().chunks_mut(cols).enumerate() {
                        let span = r * cols..(r + 1) * cols;
                        let (yr, gr) = (&y[span.clone()], &gd[span]);
                        let dotp: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((d, yi), gi) in dst.iter_mut().zip(yr).zip(gr) {
                            *d += yi * (gi - dotp);
                        }
                    }
                }
            }
            Op::LogSoftmaxRows(a) => {
                let y = node.value.data();
                let (_, cols) = node.value.matrix_dims();
                if let Some(ga) = self.grad_slot(grads, *a) {
                    let cols = cols.max(1);
                    for (r, dst) in ga.data_mut().chunks_mut(cols).enumerate() {
                        let span = r * cols..(r + 1) * cols;
                        let (yr, gr) = (&y[span.clone()], &gd[span]);
                        let total: f64 = gr.iter().sum();
                        for ((d, yi), gi) in dst.iter_mut().zip(yr).zip(gr) {
                            *d += gi - yi.exp() * total;
                        }
                    }
                }
            }
        }
    }
}

fn transpose_data(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

fn is_row(t: &Tensor) -> bool {
    match t.shape() {
        [_] => true,
        [1, _] => true,
        _ => false,
    }
}

fn broadcast(op: BinOp, a: &Tensor, b: &Tensor) -> Result<(Bcast, Vec<usize>)> {
    if a.shape() == b.shape() {
        return Ok((Bcast::Same, a.shape().to_vec()));
    }
    if b.numel() == 1 {
        return Ok((Bcast::RhsScalar, a.shape().to_vec()));
    }
    if a.numel() == 1 {
        return Ok((Bcast::LhsScalar, b.shape().to_vec()));
    }
    if a.shape().len() >= 2 && is_row(b) && a.matrix_dims().1 == b.numel() {
        return Ok((Bcast::RhsRow, a.shape().to_vec()));
    }
    if b.shape().len() >= 2 && is_row(a) && b.matrix_dims().1 == a.numel() {
        return Ok((Bcast::LhsRow, b.shape().to_vec()));
    }
    Err(VlxError::Dimension {
        op: match op {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
        },
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    })
}
