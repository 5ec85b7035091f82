use rand::Rng as _;

use super::rng::Rng;
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Square(Var),
    Sqrt(Var),
    Sum(Var),
    Softmax {
        x: Var,
        axis: usize,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    SliceRows {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows {
        table: Var,
        rows: Vec<usize>,
    },
    Mask {
        x: Var,
        mask: Vec<f64>,
    },
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A single-threaded autodiff tape.
///
/// Nodes are appended in evaluation order, so a reverse sweep over indices
/// is a valid topological order for backpropagation. Gradients of leaves
/// persist across [`Graph::backward`] calls and accumulate until
/// [`Graph::zero_grad`].
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    leaf_grads: Vec<Option<Vec<f64>>>,
}

fn slot(g: &mut [Option<Vec<f64>>], idx: usize, len: usize) -> &mut Vec<f64> {
    g[idx].get_or_insert_with(|| vec![0.0; len])
}

// c[m,n] += a[m,k] * b[k,n]
fn gemm_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cj, bj) in crow.iter_mut().zip(brow) {
                *cj += aip * bj;
            }
        }
    }
}

// c[m,n] += a[m,k] * b[n,k]^T
fn gemm_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            c[i * n + j] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

// c[k,n] += a[m,k]^T * b[m,n]
fn gemm_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cj, bj) in crow.iter_mut().zip(brow) {
                *cj += aip * bj;
            }
        }
    }
}

/// Splits a shape around `axis` into (outer, axis extent, inner).
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.leaf_grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.leaf_grads[v.0].as_ref().map(|g| Tensor {
            shape: self.nodes[v.0].value.shape.clone(),
            data: g.clone(),
            precision: super::Precision::Binary64,
        })
    }

    pub fn zero_grad(&mut self) {
        self.leaf_grads.iter_mut().for_each(|g| *g = None);
    }

    fn dims2(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            other => Err(Error::shape(op, other, &[0, 0])),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ` for `a: [m, k]`, `b: [n, k]`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a, "matmul_t")?;
        let (n, k2) = self.dims2(b, "matmul_t")?;
        if k != k2 {
            return Err(Error::shape("matmul_t", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm_nt(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMulT(a, b), rg))
    }

    fn zip_same(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(name, self.shape(a), self.shape(b)));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let value = Tensor::new(self.shape(a), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "div", |x, y| x / y, Op::Div(a, b))
    }

    /// Adds a bias vector `b: [n]` to every row of `a: [.., n]`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let n = *self.shape(b).last().unwrap_or(&0);
        if self.shape(b).len() != 1 || self.shape(a).last() != Some(&n) {
            return Err(Error::shape("add_row", self.shape(a), self.shape(b)));
        }
        let bias = self.value(b).data();
        let data = self
            .value(a)
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(bias).map(|(x, y)| x + y))
            .collect();
        let value = Tensor::new(self.shape(a), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::AddRow(a, b), rg))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let src = self.value(a);
        let value = Tensor {
            shape: src.shape.clone(),
            data: src.data.iter().map(|x| f(*x)).collect(),
            precision: super::Precision::Binary64,
        };
        let rg = self.needs(&[a]);
        self.push(value, op, rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, |x| x * x, Op::Square(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.map(a, f64::sqrt, Op::Sqrt(a))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).numel() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Max-shifted softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Contract(format!(
                "softmax axis {axis} out of range for shape {shape:?}"
            )));
        }
        let (outer, len, inner) = axis_split(&shape, axis);
        let src = self.value(x).data();
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| o * len * inner + j * inner + i;
                let max = (0..len).map(|j| src[at(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..len {
                    let e = (src[at(j)] - max).exp();
                    out[at(j)] = e;
                    total += e;
                }
                for j in 0..len {
                    out[at(j)] /= total;
                }
            }
        }
        let rg = self.needs(&[x]);
        Ok(self.push(Tensor::new(&shape, out)?, Op::Softmax { x, axis }, rg))
    }

    /// Normalizes over the last axis, then applies `gain ⊙ x̂ + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let n = *shape.last().unwrap_or(&0);
        if n == 0 || self.shape(gain) != [n] || self.shape(bias) != [n] {
            return Err(Error::shape("layer_norm", &shape, self.shape(gain)));
        }
        let src = self.value(x).data();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let rows = src.len() / n;
        let mut normalized = vec![0.0; src.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; src.len()];
        for r in 0..rows {
            let row = &src[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std[r] = inv;
            for j in 0..n {
                let xh = (row[j] - mean) * inv;
                normalized[r * n + j] = xh;
                out[r * n + j] = g[j] * xh + b[j];
            }
        }
        let rg = self.needs(&[x, gain, bias]);
        let op = Op::LayerNorm {
            x,
            gain,
            bias,
            normalized,
            inv_std,
        };
        Ok(self.push(Tensor::new(&shape, out)?, op, rg))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims2(x, "slice_cols")?;
        if start >= end || end > n {
            return Err(Error::Contract(format!(
                "column slice {start}..{end} of width {n}"
            )));
        }
        let src = self.value(x).data();
        let w = end - start;
        let mut out = Vec::with_capacity(m * w);
        for r in 0..m {
            out.extend_from_slice(&src[r * n + start..r * n + end]);
        }
        let rg = self.needs(&[x]);
        Ok(self.push(Tensor::matrix(m, w, out)?, Op::SliceCols { x, start }, rg))
    }

    /// Rows `start..end` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims2(x, "slice_rows")?;
        if start >= end || end > m {
            return Err(Error::Contract(format!(
                "row slice {start}..{end} of height {m}"
            )));
        }
        let out = self.value(x).data()[start * n..end * n].to_vec();
        let rg = self.needs(&[x]);
        Ok(self.push(
            Tensor::matrix(end - start, n, out)?,
            Op::SliceRows { x, start },
            rg,
        ))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_cols of nothing".into()))?;
        let (m, _) = self.dims2(first, "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims2(p, "concat_cols")?;
            if r != m {
                return Err(Error::shape("concat_cols", self.shape(first), self.shape(p)));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for r in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let rg = self.needs(parts);
        Ok(self.push(
            Tensor::matrix(m, total, out)?,
            Op::ConcatCols(parts.to_vec()),
            rg,
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_rows of nothing".into()))?;
        let (_, n) = self.dims2(first, "concat_rows")?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = self.dims2(p, "concat_rows")?;
            if c != n {
                return Err(Error::shape("concat_rows", self.shape(first), self.shape(p)));
            }
            rows += r;
            out.extend_from_slice(self.value(p).data());
        }
        let rg = self.needs(parts);
        Ok(self.push(
            Tensor::matrix(rows, n, out)?,
            Op::ConcatRows(parts.to_vec()),
            rg,
        ))
    }

    /// Embedding lookup: the listed rows of `table: [V, d]`.
    pub fn gather_rows(&mut self, table: Var, rows: &[usize]) -> Result<Var> {
        let (v, d) = self.dims2(table, "gather_rows")?;
        let src = self.value(table).data();
        let mut out = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            if r >= v {
                return Err(Error::Contract(format!("row {r} outside table of {v} rows")));
            }
            out.extend_from_slice(&src[r * d..(r + 1) * d]);
        }
        let rg = self.needs(&[table]);
        let op = Op::GatherRows {
            table,
            rows: rows.to_vec(),
        };
        Ok(self.push(Tensor::matrix(rows.len(), d, out)?, op, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Inverted dropout. Identity unless `training` and `p > 0`.
    pub fn dropout(&mut self, x: Var, p: f64, training: bool, rng: &mut Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Contract(format!("dropout probability {p} not in [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.value(x).numel())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let src = self.value(x);
        let value = Tensor {
            shape: src.shape.clone(),
            data: src.data.iter().zip(&mask).map(|(a, m)| a * m).collect(),
            precision: super::Precision::Binary64,
        };
        let rg = self.needs(&[x]);
        Ok(self.push(value, Op::Mask { x, mask }, rg))
    }

    /// Backpropagates from a scalar `loss`, adding into leaf gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut g: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        g[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(gi) = g[i].take() else { continue };
            self.propagate(i, &gi, &mut g);
            if matches!(self.nodes[i].op, Op::Leaf) {
                let acc = slot(&mut self.leaf_grads, i, gi.len());
                acc.iter_mut().zip(&gi).for_each(|(a, b)| *a += b);
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, gi: &[f64], g: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let rg = |v: &Var| self.nodes[v.0].requires_grad;
        let val = |v: &Var| self.nodes[v.0].value.data();
        let len = |v: &Var| self.nodes[v.0].value.numel();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.nodes[a.0].value.as_matrix_dims().unwrap();
                let n = node.value.shape()[1];
                if rg(a) {
                    gemm_nt(gi, val(b), slot(g, a.0, m * k), m, n, k);
                }
                if rg(b) {
                    gemm_tn(val(a), gi, slot(g, b.0, k * n), m, k, n);
                }
            }
            Op::MatMulT(a, b) => {
                let (m, k) = self.nodes[a.0].value.as_matrix_dims().unwrap();
                let n = node.value.shape()[1];
                if rg(a) {
                    gemm_nn(gi, val(b), slot(g, a.0, m * k), m, n, k);
                }
                if rg(b) {
                    gemm_tn(gi, val(a), slot(g, b.0, n * k), m, n, k);
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if rg(a) {
                    let s = slot(g, a.0, gi.len());
                    s.iter_mut().zip(gi).for_each(|(x, y)| *x += y);
                }
                if rg(b) {
                    let s = slot(g, b.0, gi.len());
                    s.iter_mut().zip(gi).for_each(|(x, y)| *x += sign * y);
                }
            }
            Op::Mul(a, b) => {
                if rg(a) {
                    let bv = val(b);
                    let s = slot(g, a.0, gi.len());
                    for j in 0..gi.len() {
                        s[j] += gi[j] * bv[j];
                    }
                }
                if rg(b) {
                    let av = val(a);
                    let s = slot(g, b.0, gi.len());
                    for j in 0..gi.len() {
                        s[j] += gi[j] * av[j];
                    }
                }
            }
            Op::Div(a, b) => {
                let (av, bv) = (val(a), val(b));
                if rg(a) {
                    let s = slot(g, a.0, gi.len());
                    for j in 0..gi.len() {
                        s[j] += gi[j] / bv[j];
                    }
                }
                if rg(b) {
                    let s = slot(g, b.0, gi.len());
                    for j in 0..gi.len() {
                        s[j] -= gi[j] * av[j] / (bv[j] * bv[j]);
                    }
                }
            }
            Op::AddRow(a, b) => {
                if rg(a) {
                    let s = slot(g, a.0, gi.len());
                    s.iter_mut().zip(gi).for_each(|(x, y)| *x += y);
                }
                if rg(b) {
                    let n = len(b);
                    let s = slot(g, b.0, n);
                    for row in gi.chunks(n) {
                        s.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Scale(a, c) => {
                let s = slot(g, a.0, gi.len());
                s.iter_mut().zip(gi).for_each(|(x, y)| *x += c * y);
            }
            Op::Relu(a) => {
                let av = val(a);
                let s = slot(g, a.0, gi.len());
                for j in 0..gi.len() {
                    if av[j] > 0.0 {
                        s[j] += gi[j];
                    }
                }
            }
            Op::Square(a) => {
                let av = val(a);
                let s = slot(g, a.0, gi.len());
                for j in 0..gi.len() {
                    s[j] += 2.0 * av[j] * gi[j];
                }
            }
            Op::Sqrt(a) => {
                let out = node.value.data();
                let s = slot(g, a.0, gi.len());
                for j in 0..gi.len() {
                    s[j] += gi[j] / (2.0 * out[j]);
                }
            }
            Op::Sum(a) => {
                let s = slot(g, a.0, len(a));
                s.iter_mut().for_each(|x| *x += gi[0]);
            }
            Op::Softmax { x, axis } => {
                let (outer, n, inner) = axis_split(node.value.shape(), *axis);
                let y = node.value.data();
                let s = slot(g, x.0, gi.len());
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| o * n * inner + j * inner + i;
                        let dot: f64 = (0..n).map(|j| gi[at(j)] * y[at(j)]).sum();
                        for j in 0..n {
                            s[at(j)] += y[at(j)] * (gi[at(j)] - dot);
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let n = len(gain);
                let gv = val(gain);
                let rows = gi.len() / n;
                if rg(x) {
                    let s = slot(g, x.0, gi.len());
                    for r in 0..rows {
                        let dy = &gi[r * n..(r + 1) * n];
                        let xh = &normalized[r * n..(r + 1) * n];
                        let dxh: Vec<f64> = dy.iter().zip(gv).map(|(a, b)| a * b).collect();
                        let m1 = dxh.iter().sum::<f64>() / n as f64;
                        let m2 = dxh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                        for j in 0..n {
                            s[r * n + j] += inv_std[r] * (dxh[j] - m1 - xh[j] * m2);
                        }
                    }
                }
                if rg(gain) {
                    let s = slot(g, gain.0, n);
                    for r in 0..rows {
                        for j in 0..n {
                            s[j] += gi[r * n + j] * normalized[r * n + j];
                        }
                    }
                }
                if rg(bias) {
                    let s = slot(g, bias.0, n);
                    for r in 0..rows {
                        for j in 0..n {
                            s[j] += gi[r * n + j];
                        }
                    }
                }
            }
            Op::SliceCols { x, start } => {
                let (m, n) = self.nodes[x.0].value.as_matrix_dims().unwrap();
                let w = node.value.shape()[1];
                let s = slot(g, x.0, m * n);
                for r in 0..m {
                    for j in 0..w {
                        s[r * n + start + j] += gi[r * w + j];
                    }
                }
            }
            Op::SliceRows { x, start } => {
                let n = node.value.shape()[1];
                let s = slot(g, x.0, len(x));
                for (j, v) in gi.iter().enumerate() {
                    s[start * n + j] += v;
                }
            }
            Op::ConcatCols(parts) => {
                let m = node.value.shape()[0];
                let total = node.value.shape()[1];
                let mut offset = 0;
                for p in parts {
                    let w = self.nodes[p.0].value.shape()[1];
                    if rg(p) {
                        let s = slot(g, p.0, m * w);
                        for r in 0..m {
                            for j in 0..w {
                                s[r * w + j] += gi[r * total + offset + j];
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = len(p);
                    if rg(p) {
                        let s = slot(g, p.0, n);
                        s.iter_mut()
                            .zip(&gi[offset..offset + n])
                            .for_each(|(x, y)| *x += y);
                    }
                    offset += n;
                }
            }
            Op::GatherRows { table, rows } => {
                let d = node.value.shape()[1];
                let s = slot(g, table.0, len(table));
                for (k, &r) in rows.iter().enumerate() {
                    for j in 0..d {
                        s[r * d + j] += gi[k * d + j];
                    }
                }
            }
            Op::Mask { x, mask } => {
                let s = slot(g, x.0, gi.len());
                for j in 0..gi.len() {
                    s[j] += gi[j] * mask[j];
                }
            }
            Op::Reshape(x) => {
                let s = slot(g, x.0, gi.len());
                s.iter_mut().zip(gi).for_each(|(a, b)| *a += b);
            }
        }
    }
}
