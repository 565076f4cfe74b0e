mod common;

use common::*;
use signalfuse::eval::{cohens_d_paired, mean_ci95, paired_t_test, student_t_quantile};

const TOL: f64 = 1e-6;

#[test]
fn paired_t_matches_reference() {
    for d in oracle_vectors() {
        let zeros = vec![0.0; d.len()];
        let got = paired_t_test(&d, &zeros).unwrap();
        let (m, sd) = oracle_mean_sd(&d);
        let t = m * (d.len() as f64).sqrt() / sd;
        let df = (d.len() - 1) as f64;
        assert!((got.t - t).abs() < TOL * t.abs().max(1.0), "{d:?}");
        assert_eq!(got.df, d.len() - 1);
        let p = oracle_p_two_tailed(t, df);
        assert!((got.p_two_tailed - p).abs() < TOL, "{d:?}: {} vs {p}", got.p_two_tailed);
    }
}

#[test]
fn cohens_d_matches_reference() {
    for d in oracle_vectors() {
        let (m, sd) = oracle_mean_sd(&d);
        assert!((cohens_d_paired(&d).unwrap() - m / sd).abs() < TOL, "{d:?}");
    }
}

#[test]
fn interval_matches_reference() {
    for d in oracle_vectors() {
        let (m, sd) = oracle_mean_sd(&d);
        let q = oracle_t_quantile(0.975, (d.len() - 1) as f64);
        let half = q * sd / (d.len() as f64).sqrt();
        let (gm, lo, hi) = mean_ci95(&d).unwrap();
        assert!((gm - m).abs() < TOL);
        assert!((lo - (m - half)).abs() < TOL * half.max(1.0), "{d:?}");
        assert!((hi - (m + half)).abs() < TOL * half.max(1.0), "{d:?}");
    }
}

#[test]
fn hand_worked_values() {
    let d = [1.0, 2.0, 3.0, 4.0, 5.0];
    let r = paired_t_test(&d, &[0.0; 5]).unwrap();
    assert!((r.t - 4.242640687).abs() < 1e-6);
    assert_eq!(r.df, 4);
    assert!((r.p_two_tailed - 0.013236).abs() < 5e-5);
    assert!((cohens_d_paired(&d).unwrap() - 1.897366596).abs() < 1e-6);
    assert!((student_t_quantile(0.975, 9.0).unwrap() - 2.262157).abs() < 1e-6);
}

#[test]
fn quantile_inverts_reference_cdf() {
    for df in [1.0, 2.0, 4.0, 9.0, 30.0] {
        let q = student_t_quantile(0.975, df).unwrap();
        assert!((q - oracle_t_quantile(0.975, df)).abs() < 1e-6, "df {df}");
    }
}
