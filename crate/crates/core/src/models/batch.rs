use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::synthdata::WindowSample;

/// Mini-batch laid out for the graph: per-step rows are stacked sample by
/// sample, so row `b * steps + t` is step `t` of sample `b`.
#[derive(Clone, Debug)]
pub struct Batch {
    pub size: usize,
    pub steps: usize,
    /// `[size * steps, d_f]`
    pub features: Tensor,
    /// `[size * steps, 4]`: one-hot direction then confidence.
    pub signals: Tensor,
    /// `[size, 1]` standardized last observed price.
    pub anchor: Tensor,
    /// `[size, 1]` standardized next price.
    pub target: Tensor,
}

impl Batch {
    pub fn new(samples: &[&WindowSample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Contract("empty batch".to_string()))?;
        let (steps, d_f) = (first.steps(), first.d_f);
        let mut features = Vec::with_capacity(samples.len() * steps * d_f);
        let mut signals = Vec::with_capacity(samples.len() * steps * 4);
        let mut anchor = Vec::with_capacity(samples.len());
        let mut target = Vec::with_capacity(samples.len());
        for s in samples {
            if s.steps() != steps || s.d_f != d_f || s.features.len() != steps * d_f {
                return Err(Error::shape(
                    "batch",
                    format!("window t={} does not match {steps}×{d_f}", s.t),
                ));
            }
            features.extend_from_slice(&s.features);
            for sig in &s.signals {
                signals.extend_from_slice(&sig.as_row());
            }
            anchor.push(s.anchor);
            target.push(s.target);
        }
        let n = samples.len();
        Ok(Batch {
            size: n,
            steps,
            features: Tensor::new(vec![n * steps, d_f], features)?,
            signals: Tensor::new(vec![n * steps, 4], signals)?,
            anchor: Tensor::new(vec![n, 1], anchor)?,
            target: Tensor::new(vec![n, 1], target)?,
        })
    }

    pub fn from_slice(samples: &[WindowSample]) -> Result<Self> {
        let refs: Vec<&WindowSample> = samples.iter().collect();
        Batch::new(&refs)
    }

    pub fn d_f(&self) -> usize {
        self.features.cols()
    }

    /// Row index of the last step of every sample.
    pub fn last_rows(&self) -> Vec<usize> {
        (0..self.size).map(|b| b * self.steps + self.steps - 1).collect()
    }
}
