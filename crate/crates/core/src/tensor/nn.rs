//! Composite layers built from [`Graph`] primitives.

use super::rng::Rng;
use super::{Bound, Graph, ParamId, ParamStore, Var};
use crate::error::{Error, Result};

/// Dropout switch threaded through a forward pass. Inference passes carry
/// no generator and never drop.
pub struct Dropout<'r> {
    p: f64,
    rng: Option<&'r mut Rng>,
}

impl<'r> Dropout<'r> {
    pub fn inference() -> Self {
        Dropout { p: 0.0, rng: None }
    }

    pub fn training(p: f64, rng: &'r mut Rng) -> Self {
        Dropout { p, rng: Some(rng) }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn apply(&mut self, g: &mut Graph, x: Var) -> Result<Var> {
        match self.rng.as_deref_mut() {
            Some(rng) => g.dropout(x, self.p, true, rng),
            None => Ok(x),
        }
    }
}

/// `x Wᵀ + b` for `W: [out, in]`. A rank-1 `x` is treated as a single row and
/// the result is rank-1 again.
pub fn linear(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var> {
    let as_row = g.shape(x).len() == 1;
    let (out_dim, in_dim) = match g.shape(w) {
        [o, i] => (*o, *i),
        s => return Err(Error::shape("linear", s, g.shape(x))),
    };
    if g.shape(x).last() != Some(&in_dim) || g.shape(b) != [out_dim] {
        return Err(Error::shape("linear", g.shape(x), g.shape(w)));
    }
    let x2 = if as_row { g.reshape(x, &[1, in_dim])? } else { x };
    let y = g.matmul_t(x2, w)?;
    let y = g.add_row(y, b)?;
    if as_row {
        g.reshape(y, &[out_dim])
    } else {
        Ok(y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl LinearParams {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        out_dim: usize,
        in_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(LinearParams {
            weight: store.add_weight(format!("{prefix}.weight"), out_dim, in_dim, rng)?,
            bias: store.add_zeros(format!("{prefix}.bias"), out_dim)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        linear(g, x, p.get(self.weight), p.get(self.bias))
    }
}

/// Two-layer perceptron `W₂ ReLU(W₁x + b₁) + b₂`.
#[derive(Debug, Clone, Copy)]
pub struct FeedForwardParams {
    pub first: LinearParams,
    pub second: LinearParams,
}

impl FeedForwardParams {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(FeedForwardParams {
            first: LinearParams::new(store, &format!("{prefix}.0"), hidden, in_dim, rng)?,
            second: LinearParams::new(store, &format!("{prefix}.1"), out_dim, hidden, rng)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        let h = self.first.forward(g, p, x)?;
        let h = g.relu(h);
        self.second.forward(g, p, h)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNormParams {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNormParams {
    pub fn new(store: &mut ParamStore, prefix: &str, dim: usize) -> Result<Self> {
        Ok(LayerNormParams {
            gain: store.add_ones(format!("{prefix}.gain"), dim)?,
            bias: store.add_zeros(format!("{prefix}.bias"), dim)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        g.layer_norm(x, p.get(self.gain), p.get(self.bias))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub query: LinearParams,
    pub key: LinearParams,
    pub value: LinearParams,
    pub output: LinearParams,
}

impl AttentionParams {
    pub fn new(store: &mut ParamStore, prefix: &str, dim: usize, rng: &mut Rng) -> Result<Self> {
        Ok(AttentionParams {
            query: LinearParams::new(store, &format!("{prefix}.q"), dim, dim, rng)?,
            key: LinearParams::new(store, &format!("{prefix}.k"), dim, dim, rng)?,
            value: LinearParams::new(store, &format!("{prefix}.v"), dim, dim, rng)?,
            output: LinearParams::new(store, &format!("{prefix}.o"), dim, dim, rng)?,
        })
    }
}

/// Scaled dot-product attention split over `heads`, concatenated and passed
/// through the output projection.
///
/// `queries: [m, d]` attend over `keys`/`values: [n, d]`; the result is
/// `[m, d]`. Nothing here depends on slot position, so permuting the
/// key/value rows together leaves the output unchanged up to summation order.
pub fn multi_head_attention(
    g: &mut Graph,
    p: &Bound,
    attn: &AttentionParams,
    queries: Var,
    keys: Var,
    values: Var,
    heads: usize,
    dropout: &mut Dropout<'_>,
) -> Result<Var> {
    let dim = *g.shape(queries).last().unwrap_or(&0);
    if heads == 0 || dim % heads != 0 {
        return Err(Error::Config(format!(
            "model dimension {dim} is not divisible into {heads} heads"
        )));
    }
    let head_dim = dim / heads;
    let q = attn.query.forward(g, p, queries)?;
    let k = attn.key.forward(g, p, keys)?;
    let v = attn.value.forward(g, p, values)?;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut outputs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (lo, hi) = (h * head_dim, (h + 1) * head_dim);
        let qh = g.slice_cols(q, lo, hi)?;
        let kh = g.slice_cols(k, lo, hi)?;
        let vh = g.slice_cols(v, lo, hi)?;
        let scores = g.matmul_t(qh, kh)?;
        let scores = g.scale(scores, scale);
        let weights = g.softmax(scores, 1)?;
        let weights = dropout.apply(g, weights)?;
        outputs.push(g.matmul(weights, vh)?);
    }
    let joined = if heads == 1 {
        outputs[0]
    } else {
        g.concat_cols(&outputs)?
    };
    attn.output.forward(g, p, joined)
}

/// Cosine similarity of two equally shaped tensors, as a scalar node.
pub fn cosine(g: &mut Graph, a: Var, b: Var) -> Result<Var> {
    if g.value(a).l2_norm() == 0.0 || g.value(b).l2_norm() == 0.0 {
        return Err(Error::Numeric("cosine of a zero-norm embedding".into()));
    }
    let prod = g.mul(a, b)?;
    let dot = g.sum(prod);
    let sa = g.square(a);
    let sa = g.sum(sa);
    let na = g.sqrt(sa);
    let sb = g.square(b);
    let sb = g.sum(sb);
    let nb = g.sqrt(sb);
    let denom = g.mul(na, nb)?;
    g.div(dot, denom)
}
