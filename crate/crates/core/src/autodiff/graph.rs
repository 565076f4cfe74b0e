//! Define-by-run tape for reverse-mode differentiation.
//!
//! A [`Graph`] is an append-only list of nodes. Every op evaluates eagerly,
//! stores its output, and records its parents, so parents always precede
//! children and [`Graph::backward`] is a single reverse sweep.

use std::collections::BTreeMap;

use super::params::{Gradients, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Input,
    Param(String),
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Concat { parts: Vec<Var>, axis: usize },
    Slice { src: Var, axis: usize, start: usize },
    Transpose(Var),
    Reshape(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, normalized: Tensor, inv_std: Vec<f64> },
    Mean(Var),
    Mse(Var, Var),
    GatherRows { src: Var, rows: Vec<usize> },
    SplitHeads { src: Var, batch: usize, seq: usize, heads: usize },
    MergeHeads { src: Var, batch: usize, seq: usize, heads: usize },
    BroadcastCols(Var),
    GroupMeanRows { src: Var, group: usize },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::AddBias(..) => "add_bias",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Transpose(..) => "transpose",
            Op::Reshape(..) => "reshape",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::Exp(..) => "exp",
            Op::Softmax(..) => "row_softmax",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Mean(..) => "mean",
            Op::Mse(..) => "mse",
            Op::GatherRows { .. } => "gather_rows",
            Op::SplitHeads { .. } => "split_heads",
            Op::MergeHeads { .. } => "merge_heads",
            Op::BroadcastCols(..) => "broadcast_cols",
            Op::GroupMeanRows { .. } => "group_mean_rows",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Recorded computation. Rebuild one per mini-batch.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: BTreeMap<String, Var>,
}

/// `c (m×n) = op(a) (m×k) · op(b) (k×n)`, optionally accumulating into `c`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths are checked by the callers against m, k, n and the
    // strides describe exactly those row-major / transposed layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Leading batch count and matrix dims for a rank-2 or rank-3 matmul operand.
fn mat_dims(t: &Tensor) -> Option<(usize, usize, usize)> {
    match *t.shape() {
        [r, c] => Some((1, r, c)),
        [b, r, c] => Some((b, r, c)),
        _ => None,
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
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

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    /// Parameter name if `v` is a parameter leaf.
    pub fn param_name(&self, v: Var) -> Option<&str> {
        match &self.nodes[v.0].op {
            Op::Param(name) => Some(name),
            _ => None,
        }
    }

    /// Indices of the parents of `v`, in argument order.
    pub fn parents(&self, v: Var) -> Vec<Var> {
        op_parents(&self.nodes[v.0].op)
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::Numeric {
                op: op.name(),
                detail: format!("non-finite output of shape {:?}", value.shape()),
            });
        }
        let needs_grad = match &op {
            Op::Input => false,
            Op::Param(_) => true,
            _ => op_parents(&op).iter().any(|p| self.nodes[p.0].needs_grad),
        };
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Constant leaf; never receives a gradient.
    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        self.push(Op::Input, value)
    }

    /// Trainable leaf bound to `params[name]`. Repeated calls return the same node.
    pub fn param(&mut self, params: &Params, name: &str) -> Result<Var> {
        if let Some(&v) = self.param_nodes.get(name) {
            return Ok(v);
        }
        let value = params.get(name)?.clone();
        let v = self.push(Op::Param(name.to_string()), value)?;
        self.param_nodes.insert(name.to_string(), v);
        Ok(v)
    }

    /// Matrix product of rank-2 operands, or batched product of rank-3 operands.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let bad = || {
            Error::shape(
                "matmul",
                format!("{:?} x {:?}", ta.shape(), tb.shape()),
            )
        };
        let (ba, m, k) = mat_dims(ta).ok_or_else(bad)?;
        let (bb, k2, n) = mat_dims(tb).ok_or_else(bad)?;
        if k != k2 || ba != bb || ta.shape().len() != tb.shape().len() {
            return Err(bad());
        }
        let mut out = vec![0.0; ba * m * n];
        for i in 0..ba {
            gemm(
                m,
                k,
                n,
                &ta.values()[i * m * k..(i + 1) * m * k],
                false,
                &tb.values()[i * k * n..(i + 1) * k * n],
                false,
                &mut out[i * m * n..(i + 1) * m * n],
                false,
            );
        }
        let shape = if ta.shape().len() == 2 {
            vec![m, n]
        } else {
            vec![ba, m, n]
        };
        let value = Tensor::new(shape, out)?;
        self.push(Op::MatMul(a, b), value)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip(self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), value)
    }

    /// Adds a length-`cols` vector to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let cols = ta.cols();
        if tb.len() != cols {
            return Err(Error::shape(
                "add_bias",
                format!("{:?} + bias {:?}", ta.shape(), tb.shape()),
            ));
        }
        let mut value = ta.clone();
        for row in value.values_mut().chunks_mut(cols.max(1)) {
            for (x, b) in row.iter_mut().zip(tb.values()) {
                *x += b;
            }
        }
        self.push(Op::AddBias(a, bias), value)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip(self.value(b), |x, y| x - y);
        self.push(Op::Sub(a, b), value)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip(self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), value)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x * factor);
        self.push(Op::Scale(a, factor), value)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x + c);
        self.push(Op::AddScalar(a), value)
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        let neg = self.scale(a, -1.0)?;
        self.add_scalar(neg, 1.0)
    }

    /// Concatenates rank-2 tensors along rows (`axis = 0`) or columns (`axis = 1`).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() || axis > 1 {
            return Err(Error::shape("concat", format!("{} parts, axis {axis}", parts.len())));
        }
        let shapes: Vec<&[usize]> = parts.iter().map(|&p| self.value(p).shape()).collect();
        if shapes.iter().any(|s| s.len() != 2) {
            return Err(Error::shape("concat", format!("non-matrix operands {shapes:?}")));
        }
        let other = 1 - axis;
        if shapes.iter().any(|s| s[other] != shapes[0][other]) {
            return Err(Error::shape("concat", format!("axis {axis}: {shapes:?}")));
        }
        let total: usize = shapes.iter().map(|s| s[axis]).sum();
        let value = if axis == 0 {
            let mut out = Vec::with_capacity(total * shapes[0][1]);
            for &p in parts {
                out.extend_from_slice(self.value(p).values());
            }
            Tensor::new(vec![total, shapes[0][1]], out)?
        } else {
            let rows = shapes[0][0];
            let mut out = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for &p in parts {
                    out.extend_from_slice(self.value(p).row(r));
                }
            }
            Tensor::new(vec![rows, total], out)?
        };
        self.push(
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            value,
        )
    }

    /// Rows (`axis = 0`) or columns (`axis = 1`) `start..end` of a rank-2 tensor.
    pub fn slice(&mut self, src: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let t = self.value(src);
        let shape = t.shape();
        if shape.len() != 2 || axis > 1 || start >= end || end > shape[axis] {
            return Err(Error::shape(
                "slice",
                format!("{shape:?} axis {axis} range {start}..{end}"),
            ));
        }
        let (rows, cols) = (shape[0], shape[1]);
        let value = if axis == 0 {
            Tensor::new(vec![end - start, cols], t.values()[start * cols..end * cols].to_vec())?
        } else {
            let w = end - start;
            let mut out = Vec::with_capacity(rows * w);
            for r in 0..rows {
                out.extend_from_slice(&t.row(r)[start..end]);
            }
            Tensor::new(vec![rows, w], out)?
        };
        self.push(Op::Slice { src, axis, start }, value)
    }

    /// Swaps the last two dimensions.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (b, r, c) = mat_dims(t)
            .ok_or_else(|| Error::shape("transpose", format!("{:?}", t.shape())))?;
        let value = transpose_values(t.values(), b, r, c);
        let shape = if t.shape().len() == 2 {
            vec![c, r]
        } else {
            vec![b, c, r]
        };
        let value = Tensor::new(shape, value)?;
        self.push(Op::Transpose(a), value)
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        self.push(Op::Reshape(a), value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), value)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), value)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), value)
    }

    /// Softmax over the last dimension.
    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let mut value = self.value(a).clone();
        let cols = value.cols();
        for row in value.values_mut().chunks_mut(cols.max(1)) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        self.push(Op::Softmax(a), value)
    }

    /// Row-wise normalization followed by the affine `gamma * x + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let t = self.value(x);
        let cols = t.cols();
        if self.value(gamma).len() != cols || self.value(beta).len() != cols {
            return Err(Error::shape(
                "layer_norm",
                format!(
                    "{:?} with gamma {:?}, beta {:?}",
                    t.shape(),
                    self.value(gamma).shape(),
                    self.value(beta).shape()
                ),
            ));
        }
        let mut normalized = t.clone();
        let mut inv_std = Vec::with_capacity(t.rows());
        for row in normalized.values_mut().chunks_mut(cols) {
            let n = cols as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let r = 1.0 / (var + eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * r;
            }
            inv_std.push(r);
        }
        let (g, b) = (self.value(gamma).values(), self.value(beta).values());
        let mut value = normalized.clone();
        for row in value.values_mut().chunks_mut(cols) {
            for ((v, gi), bi) in row.iter_mut().zip(g).zip(b) {
                *v = *v * gi + bi;
            }
        }
        self.push(
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            },
            value,
        )
    }

    /// Mean of all entries, as a `[1]` tensor.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(Error::shape("mean", "empty tensor"));
        }
        let value = Tensor::scalar(t.sum() / t.len() as f64);
        self.push(Op::Mean(a), value)
    }

    /// Mean squared error over every entry.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("mse", pred, target)?;
        let (p, t) = (self.value(pred), self.value(target));
        if p.is_empty() {
            return Err(Error::shape("mse", "empty tensor"));
        }
        let sse: f64 = p
            .values()
            .iter()
            .zip(t.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let value = Tensor::scalar(sse / p.len() as f64);
        self.push(Op::Mse(pred, target), value)
    }

    /// Selects rows (flattening leading dims) into a `[rows.len(), cols]` matrix.
    pub fn gather_rows(&mut self, src: Var, rows: &[usize]) -> Result<Var> {
        let t = self.value(src);
        let (n, cols) = (t.rows(), t.cols());
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::shape(
                "gather_rows",
                format!("row {bad} out of range for {:?}", t.shape()),
            ));
        }
        let mut out = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            out.extend_from_slice(t.row(r));
        }
        let value = Tensor::new(vec![rows.len(), cols], out)?;
        self.push(
            Op::GatherRows {
                src,
                rows: rows.to_vec(),
            },
            value,
        )
    }

    /// `[batch*seq, heads*dh]` → `[batch*heads, seq, dh]`.
    pub fn split_heads(&mut self, src: Var, batch: usize, seq: usize, heads: usize) -> Result<Var> {
        let t = self.value(src);
        let width = t.cols();
        if t.shape().len() != 2 || t.rows() != batch * seq || heads == 0 || width % heads != 0 {
            return Err(Error::shape(
                "split_heads",
                format!("{:?} into batch {batch}, seq {seq}, heads {heads}", t.shape()),
            ));
        }
        let dh = width / heads;
        let mut out = vec![0.0; t.len()];
        for b in 0..batch {
            for s in 0..seq {
                let row = t.row(b * seq + s);
                for h in 0..heads {
                    let dst = ((b * heads + h) * seq + s) * dh;
                    out[dst..dst + dh].copy_from_slice(&row[h * dh..(h + 1) * dh]);
                }
            }
        }
        let value = Tensor::new(vec![batch * heads, seq, dh], out)?;
        self.push(
            Op::SplitHeads {
                src,
                batch,
                seq,
                heads,
            },
            value,
        )
    }

    /// Inverse of [`Graph::split_heads`].
    pub fn merge_heads(&mut self, src: Var, batch: usize, seq: usize, heads: usize) -> Result<Var> {
        let t = self.value(src);
        let ok = matches!(*t.shape(), [bh, s, _] if bh == batch * heads && s == seq);
        if !ok {
            return Err(Error::shape(
                "merge_heads",
                format!("{:?} from batch {batch}, seq {seq}, heads {heads}", t.shape()),
            ));
        }
        let dh = t.cols();
        let mut out = vec![0.0; t.len()];
        for b in 0..batch {
            for h in 0..heads {
                for s in 0..seq {
                    let srcoff = ((b * heads + h) * seq + s) * dh;
                    let dst = (b * seq + s) * heads * dh + h * dh;
                    out[dst..dst + dh].copy_from_slice(&t.values()[srcoff..srcoff + dh]);
                }
            }
        }
        let value = Tensor::new(vec![batch * seq, heads * dh], out)?;
        self.push(
            Op::MergeHeads {
                src,
                batch,
                seq,
                heads,
            },
            value,
        )
    }

    /// Repeats a single-column matrix `[r, 1]` across `cols` columns.
    pub fn broadcast_cols(&mut self, src: Var, cols: usize) -> Result<Var> {
        let t = self.value(src);
        if t.shape().len() != 2 || t.cols() != 1 {
            return Err(Error::shape("broadcast_cols", format!("{:?}", t.shape())));
        }
        let out: Vec<f64> = t
            .values()
            .iter()
            .flat_map(|&v| std::iter::repeat(v).take(cols))
            .collect();
        let value = Tensor::new(vec![t.rows(), cols], out)?;
        self.push(Op::BroadcastCols(src), value)
    }

    /// Averages each consecutive block of `group` rows.
    pub fn group_mean_rows(&mut self, src: Var, group: usize) -> Result<Var> {
        let t = self.value(src);
        if group == 0 || t.rows() % group != 0 {
            return Err(Error::shape(
                "group_mean_rows",
                format!("{:?} in groups of {group}", t.shape()),
            ));
        }
        let cols = t.cols();
        let n = t.rows() / group;
        let mut out = vec![0.0; n * cols];
        for g in 0..n {
            let dst = &mut out[g * cols..(g + 1) * cols];
            for r in 0..group {
                for (o, v) in dst.iter_mut().zip(t.row(g * group + r)) {
                    *o += v;
                }
            }
            for o in dst.iter_mut() {
                *o /= group as f64;
            }
        }
        let value = Tensor::new(vec![n, cols], out)?;
        self.push(Op::GroupMeanRows { src, group }, value)
    }

    /// Reverse sweep from a scalar `loss`, returning gradients of every
    /// parameter leaf that the loss depends on.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if let Op::Param(_) = node.op {
                grads[i] = Some(g);
                continue;
            }
            for (parent, delta) in self.local_grads(i, &g)? {
                if !self.nodes[parent.0].needs_grad {
                    continue;
                }
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&delta),
                    slot @ None => *slot = Some(delta),
                }
            }
        }

        let mut out = Gradients::default();
        for (name, v) in &self.param_nodes {
            if v.0 <= loss.0 {
                if let Some(g) = grads[v.0].take() {
                    out.grads.insert(name.clone(), g);
                }
            }
        }
        Ok(out)
    }

    /// Vector-Jacobian products of node `i` for upstream gradient `g`.
    fn local_grads(&self, i: usize, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let node = &self.nodes[i];
        let out = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].needs_grad;
        let res = match &node.op {
            Op::Input | Op::Param(_) => vec![],
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (batch, m, k) = mat_dims(ta).expect("checked in forward");
                let n = tb.cols();
                let mut res = Vec::new();
                if wants(*a) {
                    let mut da = vec![0.0; ta.len()];
                    for j in 0..batch {
                        gemm(
                            m,
                            n,
                            k,
                            &g.values()[j * m * n..(j + 1) * m * n],
                            false,
                            &tb.values()[j * k * n..(j + 1) * k * n],
                            true,
                            &mut da[j * m * k..(j + 1) * m * k],
                            false,
                        );
                    }
                    res.push((*a, Tensor::new(ta.shape().to_vec(), da)?));
                }
                if wants(*b) {
                    let mut db = vec![0.0; tb.len()];
                    for j in 0..batch {
                        gemm(
                            k,
                            m,
                            n,
                            &ta.values()[j * m * k..(j + 1) * m * k],
                            true,
                            &g.values()[j * m * n..(j + 1) * m * n],
                            false,
                            &mut db[j * k * n..(j + 1) * k * n],
                            false,
                        );
                    }
                    res.push((*b, Tensor::new(tb.shape().to_vec(), db)?));
                }
                res
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::AddBias(a, bias) => {
                let cols = g.cols();
                let mut db = vec![0.0; cols];
                for row in g.values().chunks(cols) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                let db = Tensor::new(val(*bias).shape().to_vec(), db)?;
                vec![(*a, g.clone()), (*bias, db)]
            }
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.map(|x| -x))],
            Op::Mul(a, b) => vec![
                (*a, g.zip(val(*b), |x, y| x * y)),
                (*b, g.zip(val(*a), |x, y| x * y)),
            ],
            Op::Scale(a, f) => vec![(*a, g.map(|x| x * f))],
            Op::AddScalar(a) => vec![(*a, g.clone())],
            Op::Concat { parts, axis } => {
                let mut res = Vec::with_capacity(parts.len());
                if *axis == 0 {
                    let mut offset = 0;
                    for &p in parts {
                        let n = val(p).len();
                        let d = Tensor::new(
                            val(p).shape().to_vec(),
                            g.values()[offset..offset + n].to_vec(),
                        )?;
                        offset += n;
                        res.push((p, d));
                    }
                } else {
                    let mut offset = 0;
                    for &p in parts {
                        let w = val(p).cols();
                        let mut d = Vec::with_capacity(val(p).len());
                        for r in 0..g.rows() {
                            d.extend_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        offset += w;
                        res.push((p, Tensor::new(val(p).shape().to_vec(), d)?));
                    }
                }
                res
            }
            Op::Slice { src, axis, start } => {
                let ts = val(*src);
                let mut d = Tensor::zeros(ts.shape());
                let cols = ts.cols();
                if *axis == 0 {
                    let off = start * cols;
                    d.values_mut()[off..off + g.len()].copy_from_slice(g.values());
                } else {
                    let w = g.cols();
                    for r in 0..ts.rows() {
                        d.values_mut()[r * cols + start..r * cols + start + w]
                            .copy_from_slice(g.row(r));
                    }
                }
                vec![(*src, d)]
            }
            Op::Transpose(a) => {
                let (b, r, c) = mat_dims(g).expect("checked in forward");
                let d = transpose_values(g.values(), b, r, c);
                vec![(*a, Tensor::new(val(*a).shape().to_vec(), d)?)]
            }
            Op::Reshape(a) => vec![(*a, g.clone().reshape(val(*a).shape().to_vec())?)],
            Op::Sigmoid(a) => vec![(*a, g.zip(out, |gi, y| gi * y * (1.0 - y)))],
            Op::Tanh(a) => vec![(*a, g.zip(out, |gi, y| gi * (1.0 - y * y)))],
            Op::Relu(a) => vec![(*a, g.zip(val(*a), |gi, x| if x > 0.0 { gi } else { 0.0 }))],
            Op::Exp(a) => vec![(*a, g.zip(out, |gi, y| gi * y))],
            Op::Softmax(a) => {
                let cols = out.cols();
                let mut d = g.clone();
                for (drow, yrow) in d.values_mut().chunks_mut(cols).zip(out.values().chunks(cols)) {
                    let dot: f64 = drow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    for (di, yi) in drow.iter_mut().zip(yrow) {
                        *di = yi * (*di - dot);
                    }
                }
                vec![(*a, d)]
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            } => {
                let cols = out.cols();
                let n = cols as f64;
                let gam = val(*gamma).values();
                let mut dx = vec![0.0; g.len()];
                let mut dgamma = vec![0.0; cols];
                let mut dbeta = vec![0.0; cols];
                let mut dxhat = vec![0.0; cols];
                for (r, &rs) in inv_std.iter().enumerate() {
                    let grow = g.row(r);
                    let xhat = normalized.row(r);
                    for j in 0..cols {
                        dxhat[j] = grow[j] * gam[j];
                        dgamma[j] += grow[j] * xhat[j];
                        dbeta[j] += grow[j];
                    }
                    let sum_d: f64 = dxhat.iter().sum();
                    let sum_dx: f64 = dxhat.iter().zip(xhat).map(|(a, b)| a * b).sum();
                    for j in 0..cols {
                        dx[r * cols + j] = rs / n * (n * dxhat[j] - sum_d - xhat[j] * sum_dx);
                    }
                }
                vec![
                    (*x, Tensor::new(val(*x).shape().to_vec(), dx)?),
                    (*gamma, Tensor::new(val(*gamma).shape().to_vec(), dgamma)?),
                    (*beta, Tensor::new(val(*beta).shape().to_vec(), dbeta)?),
                ]
            }
            Op::Mean(a) => {
                let n = val(*a).len() as f64;
                vec![(*a, Tensor::full(val(*a).shape(), g.values()[0] / n))]
            }
            Op::Mse(p, t) => {
                let (tp, tt) = (val(*p), val(*t));
                let c = 2.0 * g.values()[0] / tp.len() as f64;
                let dp = tp.zip(tt, |a, b| c * (a - b));
                let dt = dp.map(|x| -x);
                vec![(*p, dp), (*t, dt)]
            }
            Op::GatherRows { src, rows } => {
                let ts = val(*src);
                let cols = ts.cols();
                let mut d = Tensor::zeros(ts.shape());
                for (i, &r) in rows.iter().enumerate() {
                    let dst = &mut d.values_mut()[r * cols..(r + 1) * cols];
                    for (o, v) in dst.iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
                vec![(*src, d)]
            }
            Op::SplitHeads {
                src,
                batch,
                seq,
                heads,
            } => {
                let dh = g.cols();
                let mut d = vec![0.0; g.len()];
                for b in 0..*batch {
                    for h in 0..*heads {
                        for s in 0..*seq {
                            let from = ((b * heads + h) * seq + s) * dh;
                            let to = (b * seq + s) * heads * dh + h * dh;
                            d[to..to + dh].copy_from_slice(&g.values()[from..from + dh]);
                        }
                    }
                }
                vec![(*src, Tensor::new(val(*src).shape().to_vec(), d)?)]
            }
            Op::MergeHeads {
                src,
                batch,
                seq,
                heads,
            } => {
                let dh = val(*src).cols();
                let mut d = vec![0.0; g.len()];
                for b in 0..*batch {
                    for s in 0..*seq {
                        for h in 0..*heads {
                            let from = (b * seq + s) * heads * dh + h * dh;
                            let to = ((b * heads + h) * seq + s) * dh;
                            d[to..to + dh].copy_from_slice(&g.values()[from..from + dh]);
                        }
                    }
                }
                vec![(*src, Tensor::new(val(*src).shape().to_vec(), d)?)]
            }
            Op::BroadcastCols(src) => {
                let sums: Vec<f64> = (0..g.rows()).map(|r| g.row(r).iter().sum()).collect();
                vec![(*src, Tensor::new(val(*src).shape().to_vec(), sums)?)]
            }
            Op::GroupMeanRows { src, group } => {
                let ts = val(*src);
                let cols = ts.cols();
                let mut d = vec![0.0; ts.len()];
                for r in 0..ts.rows() {
                    let grow = g.row(r / group);
                    for (o, v) in d[r * cols..(r + 1) * cols].iter_mut().zip(grow) {
                        *o = v / *group as f64;
                    }
                }
                vec![(*src, Tensor::new(ts.shape().to_vec(), d)?)]
            }
        };
        Ok(res)
    }
}

fn op_parents(op: &Op) -> Vec<Var> {
    match op {
        Op::Input | Op::Param(_) => vec![],
        Op::MatMul(a, b) | Op::Add(a, b) | Op::AddBias(a, b) | Op::Sub(a, b) => vec![*a, *b],
        Op::Mul(a, b) | Op::Mse(a, b) => vec![*a, *b],
        Op::Concat { parts, .. } => parts.clone(),
        Op::LayerNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
        Op::Scale(a, _)
        | Op::AddScalar(a)
        | Op::Transpose(a)
        | Op::Reshape(a)
        | Op::Sigmoid(a)
        | Op::Tanh(a)
        | Op::Relu(a)
        | Op::Exp(a)
        | Op::Softmax(a)
        | Op::Mean(a)
        | Op::BroadcastCols(a) => vec![*a],
        Op::Slice { src, .. }
        | Op::GatherRows { src, .. }
        | Op::SplitHeads { src, .. }
        | Op::MergeHeads { src, .. }
        | Op::GroupMeanRows { src, .. } => vec![*src],
    }
}

fn transpose_values(values: &[f64], batch: usize, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for b in 0..batch {
        let base = b * rows * cols;
        for r in 0..rows {
            for c in 0..cols {
                out[base + c * rows + r] = values[base + r * cols + c];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_with(name: &str, t: Tensor) -> Params {
        let mut p = Params::new();
        p.insert(name, t);
        p
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(&[1, 3])).unwrap();
        let y = g.row_softmax(x).unwrap();
        for &v in g.value(y).values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let mut g = Graph::new();
        let x = g.input(Tensor::scalar(0.0)).unwrap();
        let y = g.sigmoid(x).unwrap();
        assert_eq!(g.value(y).item(), Some(0.5));
    }

    #[test]
    fn mse_hand_value() {
        let mut g = Graph::new();
        let p = g.input(Tensor::from_vec(vec![1.0, 2.0])).unwrap();
        let t = g.input(Tensor::from_vec(vec![0.0, 0.0])).unwrap();
        let l = g.mse(p, t).unwrap();
        assert_eq!(g.value(l).item(), Some(2.5));
    }

    #[test]
    fn square_gradient() {
        let params = params_with("w", Tensor::scalar(3.0));
        let mut g = Graph::new();
        let w = g.param(&params, "w").unwrap();
        let l = g.mul(w, w).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get("w").unwrap().item(), Some(6.0));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let params = params_with("w", Tensor::zeros(&[2]));
        let mut g = Graph::new();
        let w = g.param(&params, "w").unwrap();
        assert!(matches!(g.backward(w), Err(Error::Contract(_))));
    }

    #[test]
    fn matmul_shape_error_names_op() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(&[2, 3])).unwrap();
        let b = g.input(Tensor::zeros(&[2, 3])).unwrap();
        let err = g.matmul(a, b).unwrap_err();
        assert!(err.to_string().contains("matmul"), "{err}");
        assert!(err.to_string().contains("[2, 3]"), "{err}");
    }

    #[test]
    fn non_finite_output_raises() {
        let mut g = Graph::new();
        let a = g.input(Tensor::scalar(1000.0)).unwrap();
        assert!(matches!(g.exp(a), Err(Error::Numeric { op: "exp", .. })));
    }

    #[test]
    fn parents_precede_children() {
        let params = params_with("w", Tensor::zeros(&[2, 2]));
        let mut g = Graph::new();
        let w = g.param(&params, "w").unwrap();
        let x = g.input(Tensor::zeros(&[2, 2])).unwrap();
        let y = g.matmul(x, w).unwrap();
        let z = g.tanh(y).unwrap();
        for i in 0..g.len() {
            for p in g.parents(Var(i)) {
                assert!(p.index() < i);
            }
        }
        assert_eq!(g.op_name(z), "tanh");
    }

    #[test]
    fn input_leaves_get_no_gradient() {
        let params = params_with("w", Tensor::scalar(2.0));
        let mut g = Graph::new();
        let w = g.param(&params, "w").unwrap();
        let x = g.input(Tensor::scalar(5.0)).unwrap();
        let y = g.mul(w, x).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.iter().count(), 1);
        assert_eq!(grads.get("w").unwrap().item(), Some(5.0));
    }

    #[test]
    fn split_merge_heads_round_trip() {
        let vals: Vec<f64> = (0..2 * 3 * 4).map(|v| v as f64).collect();
        let mut g = Graph::new();
        let x = g.input(Tensor::new(vec![6, 4], vals.clone()).unwrap()).unwrap();
        let s = g.split_heads(x, 2, 3, 2).unwrap();
        assert_eq!(g.value(s).shape(), &[4, 3, 2]);
        // batch 0, head 1, step 2 holds cols 2..4 of row 2
        assert_eq!(&g.value(s).values()[(3 + 2) * 2..(3 + 2) * 2 + 2], &[10.0, 11.0]);
        let m = g.merge_heads(s, 2, 3, 2).unwrap();
        assert_eq!(g.value(m).values(), &vals[..]);
    }
}
