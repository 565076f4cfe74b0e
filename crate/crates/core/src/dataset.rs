//! End-to-end data preparation: series, signals, split, scaling, windows.

use crate::error::{Error, Result};
use crate::signalgen::{signal_series, LlmSignal, SignalConfig};
use crate::synthdata::{
    fit_stats, generate_series, make_windows, split_chronological, standardize, FeatureStats,
    GenConfig, MarketSeries, Partition, SplitSpec, WindowSample,
};

#[derive(Clone, Debug)]
pub struct Dataset {
    pub series: MarketSeries,
    pub signals: Vec<LlmSignal>,
    pub stats: FeatureStats,
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
}

impl Dataset {
    /// Builds windows from an existing series and aligned signals.
    pub fn from_parts(
        series: MarketSeries,
        signals: Vec<LlmSignal>,
        split: &SplitSpec,
        k: usize,
    ) -> Result<Self> {
        if signals.len() != series.len() {
            return Err(Error::LengthMismatch {
                left: series.len(),
                right: signals.len(),
            });
        }
        let (tr, va, te) = split_chronological(&series, split)?;
        let stats = fit_stats(&tr)?;
        let windows = |p: &Partition| {
            let sig = &signals[p.range()];
            make_windows(&standardize(p, &stats), sig, k)
        };
        let train = windows(&tr)?;
        let val = windows(&va)?;
        let test = windows(&te)?;
        Ok(Dataset {
            series,
            signals,
            stats,
            train,
            val,
            test,
        })
    }

    pub fn d_f(&self) -> usize {
        self.stats.columns.len()
    }

    /// Raw next prices of the test windows.
    pub fn test_targets_raw(&self) -> Vec<f64> {
        self.test.iter().map(|s| s.target_raw).collect()
    }
}

pub fn prepare_dataset(
    gen: &GenConfig,
    sig: &SignalConfig,
    split: &SplitSpec,
    k: usize,
) -> Result<Dataset> {
    let series = generate_series(gen)?;
    let signals = signal_series(&series, sig)?;
    Dataset::from_parts(series, signals, split, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_window_counts() {
        let d = prepare_dataset(
            &GenConfig::default(),
            &SignalConfig::default(),
            &SplitSpec::default(),
            30,
        )
        .unwrap();
        assert_eq!((d.train.len(), d.val.len(), d.test.len()), (2069, 419, 419));
        assert_eq!(d.d_f(), 9);
        assert_eq!(d.test[0].t, 2550 + 30);
    }
}
