use super::graph::{Graph, Var};
use super::params::Params;
use crate::error::{Error, Result};

/// Denominator floor of the relative error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-5;

/// Largest relative disagreement between reverse-mode gradients and central
/// differences over every parameter entry:
/// `|g_ad - g_fd| / max(GRAD_CHECK_FLOOR, |g_ad| + |g_fd|)`. The floor keeps
/// entries whose true gradient is zero from being scored on rounding noise.
///
/// `f` records a scalar loss on a fresh graph from the given parameters.
pub fn grad_check<F>(mut f: F, params: &Params, h: f64) -> Result<f64>
where
    F: FnMut(&mut Graph, &Params) -> Result<Var>,
{
    if !(h > 0.0) {
        return Err(Error::Contract(format!("finite-difference step must be positive, got {h}")));
    }
    let mut g = Graph::new();
    let loss = f(&mut g, params)?;
    let analytic = g.backward(loss)?;

    let eval = |f: &mut F, p: &Params| -> Result<f64> {
        let mut g = Graph::new();
        let l = f(&mut g, p)?;
        let v = g.value(l).item().ok_or_else(|| {
            Error::Contract("grad_check objective must be scalar".to_string())
        })?;
        if !v.is_finite() {
            return Err(Error::Numeric {
                op: "grad_check",
                detail: "objective is not finite".to_string(),
            });
        }
        Ok(v)
    };

    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let names: Vec<String> = params.names().cloned().collect();
    for name in names {
        let n = params.get(&name)?.len();
        for i in 0..n {
            let orig = params.get(&name)?.values()[i];
            probe.get_mut(&name)?.values_mut()[i] = orig + h;
            let up = eval(&mut f, &probe)?;
            probe.get_mut(&name)?.values_mut()[i] = orig - h;
            let down = eval(&mut f, &probe)?;
            probe.get_mut(&name)?.values_mut()[i] = orig;

            let fd = (up - down) / (2.0 * h);
            let ad = analytic.get(&name).map_or(0.0, |t| t.values()[i]);
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(GRAD_CHECK_FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
