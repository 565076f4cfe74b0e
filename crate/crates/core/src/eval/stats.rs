//! Paired t-test, Cohen's d and t-based confidence intervals.
//!
//! The Student-t CDF goes through the regularized incomplete beta function,
//! evaluated with a continued fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p_two_tailed: f64,
    pub df: usize,
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// `P(T ≤ t)` for Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Quantile of Student's t by bisection on the CDF.
pub fn student_t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) || !(df > 0.0) {
        return Err(Error::Domain(format!("t quantile needs p in (0,1) and df > 0, got p={p}, df={df}")));
    }
    if p < 0.5 {
        return Ok(-student_t_quantile(1.0 - p, df)?);
    }
    let mut hi = 1.0;
    while student_t_cdf(hi, df) < p {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numeric {
                op: "student_t_quantile",
                detail: "bracket search did not converge".into(),
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn need_two(n: usize, op: &str) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("{op} needs at least 2 values, got {n}")));
    }
    Ok(())
}

/// Two-tailed paired t-test on `d_i = a_i - b_i`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    need_two(a.len(), "paired t-test")?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (m, sd) = mean_sd(&d);
    if !(sd > 0.0) {
        return Err(Error::DegenerateVariance("paired differences have zero variance".into()));
    }
    let n = d.len();
    let t = m * (n as f64).sqrt() / sd;
    let df = n - 1;
    let p = incomplete_beta(df as f64 / 2.0, 0.5, df as f64 / (df as f64 + t * t));
    Ok(TTest {
        t,
        p_two_tailed: p.clamp(0.0, 1.0),
        df,
    })
}

/// `mean(d) / sd(d)` with the sample standard deviation.
pub fn cohens_d_paired(diffs: &[f64]) -> Result<f64> {
    need_two(diffs.len(), "Cohen's d")?;
    let (m, sd) = mean_sd(diffs);
    if !(sd > 0.0) {
        return Err(Error::DegenerateVariance("differences have zero variance".into()));
    }
    Ok(m / sd)
}

/// `(mean, lo, hi)` with half-width `t_{0.975, n-1} · sd / √n`.
pub fn mean_ci95(samples: &[f64]) -> Result<(f64, f64, f64)> {
    need_two(samples.len(), "a confidence interval")?;
    let (m, sd) = mean_sd(samples);
    let q = student_t_quantile(0.975, (samples.len() - 1) as f64)?;
    let half = q * sd / (samples.len() as f64).sqrt();
    Ok((m, m - half, m + half))
}
