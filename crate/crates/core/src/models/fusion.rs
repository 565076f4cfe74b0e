//! Per-step fusion of structured features with the signal row `[s ‖ c]`.

use super::config::GateMode;
use crate::autodiff::{Graph, Params, Tensor, Var};
use crate::error::Result;

/// `[x ‖ s ‖ c]`.
pub fn concat_fuse(x: &[f64], s: &[f64; 3], c: f64) -> Vec<f64> {
    let mut z = Vec::with_capacity(x.len() + 4);
    z.extend_from_slice(x);
    z.extend_from_slice(s);
    z.push(c);
    z
}

/// Output of [`gated_fuse`].
#[derive(Clone, Copy, Debug)]
pub struct Gated {
    pub fused: Var,
    /// Gate values, `[rows, d_model]` in vector mode or `[rows, 1]` in scalar mode.
    pub gate: Var,
}

/// Dynamic gating over projected branches:
///
/// ```text
/// g = sigmoid(W_g [x ‖ s ‖ c] + b_g)
/// fused = g ⊙ (W_s [s ‖ c]) + (1 − g) ⊙ (W_x x)
/// ```
///
/// `x` is `[rows, d_f]`, `signals` is `[rows, 4]`. `gate_override` replaces
/// the computed gate with a constant.
pub fn gated_fuse(
    g: &mut Graph,
    params: &Params,
    x: Var,
    signals: Var,
    mode: GateMode,
    gate_override: Option<f64>,
) -> Result<Gated> {
    let w_x = g.param(params, "embed.w_x")?;
    let w_s = g.param(params, "embed.w_s")?;
    let x_hat = g.matmul(x, w_x)?;
    let s_hat = g.matmul(signals, w_s)?;
    let d_model = g.value(x_hat).cols();

    let gate = match gate_override {
        Some(v) => {
            let width = match mode {
                GateMode::Vector => d_model,
                GateMode::Scalar => 1,
            };
            let rows = g.value(x).rows();
            g.input(Tensor::full(&[rows, width], v))?
        }
        None => {
            let z = g.concat(&[x, signals], 1)?;
            let w_g = g.param(params, "gate.w")?;
            let b_g = g.param(params, "gate.b")?;
            let pre = g.matmul(z, w_g)?;
            let pre = g.add_bias(pre, b_g)?;
            g.sigmoid(pre)?
        }
    };
    let wide = match mode {
        GateMode::Vector => gate,
        GateMode::Scalar => g.broadcast_cols(gate, d_model)?,
    };
    let keep = g.one_minus(wide)?;
    let sig_part = g.mul(wide, s_hat)?;
    let feat_part = g.mul(keep, x_hat)?;
    let fused = g.add(sig_part, feat_part)?;
    Ok(Gated { fused, gate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_layout_and_width() {
        let z = concat_fuse(&[0.0; 10], &[1.0, 0.0, 0.0], 0.9);
        assert_eq!(z.len(), 14);
        assert_eq!(&z[10..], &[1.0, 0.0, 0.0, 0.9]);
    }

    fn fixture(bias: f64, mode: GateMode) -> (Params, Tensor, Tensor) {
        let (d_f, d) = (3, 4);
        let gate_w = match mode {
            GateMode::Vector => d,
            GateMode::Scalar => 1,
        };
        let mut p = Params::new();
        let w_x: Vec<f64> = (0..d_f * d).map(|i| 0.1 * i as f64 - 0.4).collect();
        let w_s: Vec<f64> = (0..4 * d).map(|i| 0.3 - 0.05 * i as f64).collect();
        p.insert("embed.w_x", Tensor::new(vec![d_f, d], w_x).unwrap());
        p.insert("embed.w_s", Tensor::new(vec![4, d], w_s).unwrap());
        p.insert("gate.w", Tensor::zeros(&[d_f + 4, gate_w]));
        p.insert("gate.b", Tensor::full(&[gate_w], bias));
        let x = Tensor::new(vec![2, d_f], vec![0.5, -1.0, 2.0, 0.1, 0.2, -0.3]).unwrap();
        let s = Tensor::new(vec![2, 4], vec![1.0, 0.0, 0.0, 0.8, 0.0, 0.0, 1.0, 0.4]).unwrap();
        (p, x, s)
    }

    fn branches(p: &Params, x: &Tensor, s: &Tensor) -> (Tensor, Tensor, Tensor) {
        let mut g = Graph::new();
        let (xv, sv) = (g.input(x.clone()).unwrap(), g.input(s.clone()).unwrap());
        let out = gated_fuse(&mut g, p, xv, sv, GateMode::Vector, None).unwrap();
        let wx = g.param(p, "embed.w_x").unwrap();
        let ws = g.param(p, "embed.w_s").unwrap();
        let xh = g.matmul(xv, wx).unwrap();
        let sh = g.matmul(sv, ws).unwrap();
        (g.value(out.fused).clone(), g.value(xh).clone(), g.value(sh).clone())
    }

    #[test]
    fn saturated_gate_selects_signal_branch() {
        let (p, x, s) = fixture(20.0, GateMode::Vector);
        let (fused, _, sh) = branches(&p, &x, &s);
        for (a, b) in fused.values().iter().zip(sh.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn closed_gate_selects_feature_branch() {
        let (p, x, s) = fixture(-20.0, GateMode::Vector);
        let (fused, xh, _) = branches(&p, &x, &s);
        for (a, b) in fused.values().iter().zip(xh.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_gate_logits_average_branches() {
        let (p, x, s) = fixture(0.0, GateMode::Vector);
        let (fused, xh, sh) = branches(&p, &x, &s);
        for ((f, a), b) in fused.values().iter().zip(xh.values()).zip(sh.values()) {
            assert!((f - (a + b) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_gate_is_broadcast() {
        let (p, x, s) = fixture(0.3, GateMode::Scalar);
        let mut g = Graph::new();
        let (xv, sv) = (g.input(x).unwrap(), g.input(s).unwrap());
        let out = gated_fuse(&mut g, &p, xv, sv, GateMode::Scalar, None).unwrap();
        assert_eq!(g.value(out.gate).shape(), &[2, 1]);
        assert_eq!(g.value(out.fused).shape(), &[2, 4]);
    }
}
