//! Post-norm transformer encoder over a batch of equal-length sequences.

use crate::autodiff::{Graph, Params, Tensor, Var};
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Fixed sinusoidal table, `[seq, d_model]`.
pub fn positional_encoding(seq: usize, d_model: usize) -> Tensor {
    let mut v = vec![0.0; seq * d_model];
    for pos in 0..seq {
        for i in 0..d_model {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / d_model as f64);
            v[pos * d_model + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::new(vec![seq, d_model], v).expect("consistent shape")
}

#[derive(Clone, Copy, Debug)]
pub struct EncoderShape {
    pub batch: usize,
    pub seq: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub positional: bool,
}

#[derive(Clone, Debug)]
pub struct EncodedOutput {
    /// `[batch * seq, d_model]`
    pub output: Var,
    /// Per layer: `[batch * n_heads, seq, seq]` row-stochastic attention.
    pub attention: Vec<Var>,
}

fn linear(g: &mut Graph, params: &Params, x: Var, prefix: &str, name: &str) -> Result<Var> {
    let w = g.param(params, &format!("{prefix}.w_{name}"))?;
    let b = g.param(params, &format!("{prefix}.b_{name}"))?;
    let y = g.matmul(x, w)?;
    g.add_bias(y, b)
}

/// Adds positional encoding (optional), then per layer:
/// multi-head self-attention `softmax(Q Kᵀ / √d_k) V`, residual + layer norm,
/// ReLU feed-forward, residual + layer norm.
pub fn transformer_encode(
    g: &mut Graph,
    params: &Params,
    input: Var,
    shape: EncoderShape,
) -> Result<EncodedOutput> {
    let t = g.value(input);
    let d_model = t.cols();
    if t.shape().len() != 2 || t.rows() != shape.batch * shape.seq {
        return Err(Error::shape(
            "transformer_encode",
            format!(
                "input {:?} for batch {} × seq {}",
                t.shape(),
                shape.batch,
                shape.seq
            ),
        ));
    }
    if shape.n_heads == 0 || d_model % shape.n_heads != 0 {
        return Err(Error::shape(
            "transformer_encode",
            format!("d_model {d_model} not divisible by {} heads", shape.n_heads),
        ));
    }
    let d_k = d_model / shape.n_heads;
    let (b, s, nh) = (shape.batch, shape.seq, shape.n_heads);

    let mut h = input;
    if shape.positional {
        let pe = positional_encoding(s, d_model);
        let tiled: Vec<f64> = (0..b).flat_map(|_| pe.values().iter().copied()).collect();
        let pe = g.input(Tensor::new(vec![b * s, d_model], tiled)?)?;
        h = g.add(h, pe)?;
    }

    let mut attention = Vec::with_capacity(shape.n_layers);
    for layer in 0..shape.n_layers {
        let p = format!("enc.{layer}");
        let q = linear(g, params, h, &p, "q")?;
        let k = linear(g, params, h, &p, "k")?;
        let v = linear(g, params, h, &p, "v")?;
        let qh = g.split_heads(q, b, s, nh)?;
        let kh = g.split_heads(k, b, s, nh)?;
        let vh = g.split_heads(v, b, s, nh)?;
        let kt = g.transpose(kh)?;
        let scores = g.matmul(qh, kt)?;
        let scores = g.scale(scores, 1.0 / (d_k as f64).sqrt())?;
        let att = g.row_softmax(scores)?;
        attention.push(att);
        let ctx = g.matmul(att, vh)?;
        let ctx = g.merge_heads(ctx, b, s, nh)?;
        let o = linear(g, params, ctx, &p, "o")?;

        let res = g.add(h, o)?;
        let gamma = g.param(params, &format!("{p}.ln1.gamma"))?;
        let beta = g.param(params, &format!("{p}.ln1.beta"))?;
        let h1 = g.layer_norm(res, gamma, beta, LAYER_NORM_EPS)?;

        let f = linear(g, params, h1, &p, "ff1")?;
        let f = g.relu(f)?;
        let f = linear(g, params, f, &p, "ff2")?;
        let res = g.add(h1, f)?;
        let gamma = g.param(params, &format!("{p}.ln2.gamma"))?;
        let beta = g.param(params, &format!("{p}.ln2.beta"))?;
        h = g.layer_norm(res, gamma, beta, LAYER_NORM_EPS)?;
    }
    Ok(EncodedOutput {
        output: h,
        attention,
    })
}

/// `(name, shape)` of every encoder parameter.
pub fn encoder_param_shapes(
    n_layers: usize,
    d_model: usize,
    ffn_dim: usize,
) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for l in 0..n_layers {
        let p = format!("enc.{l}");
        for n in ["q", "k", "v", "o"] {
            out.push((format!("{p}.w_{n}"), vec![d_model, d_model]));
            out.push((format!("{p}.b_{n}"), vec![d_model]));
        }
        out.push((format!("{p}.w_ff1"), vec![d_model, ffn_dim]));
        out.push((format!("{p}.b_ff1"), vec![ffn_dim]));
        out.push((format!("{p}.w_ff2"), vec![ffn_dim, d_model]));
        out.push((format!("{p}.b_ff2"), vec![d_model]));
        for ln in ["ln1", "ln2"] {
            out.push((format!("{p}.{ln}.gamma"), vec![d_model]));
            out.push((format!("{p}.{ln}.beta"), vec![d_model]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positional_table_first_row() {
        let pe = positional_encoding(3, 4);
        assert_eq!(pe.row(0), &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe.row(1)[0] - 1f64.sin()).abs() < 1e-15);
    }
}
