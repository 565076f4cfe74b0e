use crate::error::{Error, Result};

fn check(preds: &[f64], targets: &[f64]) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Contract("metrics need at least one value".into()));
    }
    Ok(())
}

pub fn rmse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check(preds, targets)?;
    let sse: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / preds.len() as f64).sqrt())
}

pub fn mae(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check(preds, targets)?;
    let sae: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum();
    Ok(sae / preds.len() as f64)
}

/// `1 - SSE/SST`, with SST about the target mean.
pub fn r2(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check(preds, targets)?;
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let sst: f64 = targets.iter().map(|t| (t - mean).powi(2)).sum();
    if !(sst > 0.0) {
        return Err(Error::DegenerateVariance("targets are constant, R² is undefined".into()));
    }
    let sse: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

/// Pearson correlation; errors when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if !(saa > 0.0 && sbb > 0.0) {
        return Err(Error::DegenerateVariance("correlation of a constant series".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let t = [1.0, 2.0, 4.0];
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
        assert_eq!(mae(&t, &t).unwrap(), 0.0);
        assert_eq!(r2(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn mean_prediction_has_zero_r2() {
        let t = [1.0, 2.0, 6.0];
        assert!(r2(&[3.0; 3], &t).unwrap().abs() < 1e-15);
    }

    #[test]
    fn hand_values() {
        assert!((rmse(&[1.0, 2.0], &[0.0, 0.0]).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 1.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(r2(&[1.0, 2.0], &[3.0, 3.0]), Err(Error::DegenerateVariance(_))));
        assert!(rmse(&[], &[]).is_err());
    }
}
