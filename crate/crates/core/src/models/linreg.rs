//! Closed-form ridge regression on flattened look-back windows.

use crate::error::{Error, Result};

/// Fitted `y ≈ x·w + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl RidgeFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Minimizes `mean((y - Xw - b)²) + λ‖w‖²` with an unpenalized intercept.
///
/// Columns are centered, then the augmented least-squares system
/// `[Xc/√n ; √λ I] w = [yc/√n ; 0]` is solved by Householder QR.
pub fn fit_ridge(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<RidgeFit> {
    let n = rows.len();
    if n == 0 || n != y.len() {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if !(lambda >= 0.0) {
        return Err(Error::Config("ridge lambda must be non-negative".into()));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::shape("fit_ridge", "ragged design matrix"));
    }
    let nf = n as f64;
    let mut x_mean = vec![0.0; p];
    for r in rows {
        for (m, v) in x_mean.iter_mut().zip(r) {
            *m += v / nf;
        }
    }
    let y_mean = y.iter().sum::<f64>() / nf;

    // Column-major augmented system, m × p.
    let m = n + p;
    let scale = 1.0 / nf.sqrt();
    let mut a = vec![0.0; m * p];
    for j in 0..p {
        let col = &mut a[j * m..(j + 1) * m];
        for (i, r) in rows.iter().enumerate() {
            col[i] = (r[j] - x_mean[j]) * scale;
        }
        col[n + j] = lambda.sqrt();
    }
    let mut rhs = vec![0.0; m];
    for (i, v) in y.iter().enumerate() {
        rhs[i] = (v - y_mean) * scale;
    }

    let w = householder_solve(&mut a, &mut rhs, m, p)?;
    let intercept = y_mean - w.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    Ok(RidgeFit { weights: w, intercept })
}

/// Least-squares solve of a column-major `m × p` system in place.
fn householder_solve(a: &mut [f64], b: &mut [f64], m: usize, p: usize) -> Result<Vec<f64>> {
    let mut diag = vec![0.0; p];
    let col_norm_max = (0..p)
        .map(|j| a[j * m..(j + 1) * m].iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    for k in 0..p {
        let (head, tail) = a.split_at_mut(k * m);
        let _ = head;
        let col = &mut tail[..m];
        let norm = col[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12 * col_norm_max.max(1e-300)) {
            return Err(Error::Numeric {
                op: "fit_ridge",
                detail: format!("design matrix is rank deficient at column {k}"),
            });
        }
        let alpha = if col[k] > 0.0 { -norm } else { norm };
        col[k] -= alpha;
        let vnorm2 = col[k..].iter().map(|v| v * v).sum::<f64>();
        diag[k] = alpha;
        let v: Vec<f64> = col[k..].to_vec();
        for j in k + 1..p {
            let cj = &mut a[j * m..(j + 1) * m];
            let dot: f64 = v.iter().zip(&cj[k..]).map(|(x, y)| x * y).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in cj[k..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&b[k..]).map(|(x, y)| x * y).sum();
        let f = 2.0 * dot / vnorm2;
        for (c, vi) in b[k..].iter_mut().zip(&v) {
            *c -= f * vi;
        }
    }
    let mut w = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = b[k];
        for j in k + 1..p {
            s -= a[j * m + k] * w[j];
        }
        w[k] = s / diag[k];
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            op: "fit_ridge",
            detail: "non-finite coefficients".into(),
        });
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_plane() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64, ((i * 7) % 5) as f64])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let fit = fit_ridge(&rows, &y, 0.0).unwrap();
        assert!((fit.weights[0] - 2.0).abs() < 1e-10);
        assert!((fit.weights[1] + 0.5).abs() < 1e-10);
        assert!((fit.intercept - 3.0).abs() < 1e-9);
    }

    #[test]
    fn penalty_matches_normal_equations() {
        // one column: w = cov(x,y) / (var(x) + λ)
        let x = [1.0, 2.0, 4.0, 7.0];
        let y = [2.0, 1.0, 5.0, 6.0];
        let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
        let (mx, my) = (3.5, 3.5);
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / 4.0;
        let var: f64 = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / 4.0;
        let fit = fit_ridge(&rows, &y, 0.7).unwrap();
        assert!((fit.weights[0] - cov / (var + 0.7)).abs() < 1e-12);
    }

    #[test]
    fn collinear_without_penalty_is_numeric_error() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(fit_ridge(&rows, &y, 0.0), Err(Error::Numeric { .. })));
        assert!(fit_ridge(&rows, &y, 1e-3).is_ok());
    }
}
