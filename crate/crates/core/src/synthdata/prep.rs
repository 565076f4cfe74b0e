use serde::{Deserialize, Serialize};

use super::generate::{Bar, MarketSeries};
use crate::error::{Error, Result};
use crate::signalgen::LlmSignal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.7,
            val_frac: 0.15,
            test_frac: 0.15,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::Config(format!("split fractions must lie in (0,1): {fracs:?}")));
        }
        if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1: {fracs:?}")));
        }
        Ok(())
    }
}

/// Contiguous slice of a series; `offset` is the time index of its first bar.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub offset: usize,
    pub bars: Vec<Bar>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.bars.len()
    }
}

/// Chronological train/val/test split. Train and val sizes are floored,
/// test takes the remainder.
pub fn split_chronological(
    series: &MarketSeries,
    spec: &SplitSpec,
) -> Result<(Partition, Partition, Partition)> {
    spec.validate()?;
    let n = series.len();
    let floor = |f: f64| (n as f64 * f + 1e-9).floor() as usize;
    let n_train = floor(spec.train_frac);
    let n_val = floor(spec.val_frac);
    let n_test = n.saturating_sub(n_train + n_val);
    for (name, size) in [("train", n_train), ("val", n_val), ("test", n_test)] {
        if size == 0 {
            return Err(Error::Split(format!(
                "{name} partition would be empty for {n} bars and {spec:?}"
            )));
        }
    }
    let part = |start: usize, end: usize| Partition {
        offset: start,
        bars: series.bars[start..end].to_vec(),
    };
    Ok((
        part(0, n_train),
        part(n_train, n_train + n_val),
        part(n_train + n_val, n),
    ))
}

/// Column order of the structured feature matrix.
pub fn feature_columns(n_extra_feats: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["price", "open", "high", "low", "close", "volume"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((1..=n_extra_feats).map(|i| format!("feat_{i}")));
    cols
}

/// Index of `price` in [`feature_columns`].
pub const PRICE_COLUMN: usize = 0;

pub fn feature_row(bar: &Bar) -> Vec<f64> {
    let mut row = vec![bar.price, bar.open, bar.high, bar.low, bar.close, bar.volume];
    row.extend_from_slice(&bar.feats);
    row
}

/// Per-column z-score parameters (population std), fit on training data only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Fits column statistics on a row-major table.
    pub fn fit_rows(columns: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Standardize("no rows to fit".to_string()));
        }
        let d = columns.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Standardize("row width differs from column count".to_string()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        for (j, s) in std.iter_mut().enumerate() {
            *s = (*s / n).sqrt();
            if !(*s > 0.0) {
                return Err(Error::Standardize(format!(
                    "column `{}` is constant",
                    columns[j]
                )));
            }
        }
        Ok(FeatureStats { columns, mean, std })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn price_to_std(&self, price: f64) -> f64 {
        (price - self.mean[PRICE_COLUMN]) / self.std[PRICE_COLUMN]
    }

    pub fn price_from_std(&self, z: f64) -> f64 {
        z * self.std[PRICE_COLUMN] + self.mean[PRICE_COLUMN]
    }
}

pub fn fit_stats(train: &Partition) -> Result<FeatureStats> {
    let cols = feature_columns(train.bars.first().map_or(0, |b| b.feats.len()));
    let rows: Vec<Vec<f64>> = train.bars.iter().map(feature_row).collect();
    FeatureStats::fit_rows(cols, &rows)
}

/// A partition with standardized feature rows alongside raw prices.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizedPartition {
    pub offset: usize,
    pub features: Vec<Vec<f64>>,
    pub prices: Vec<f64>,
    pub prices_std: Vec<f64>,
}

impl StandardizedPartition {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

pub fn standardize(part: &Partition, stats: &FeatureStats) -> StandardizedPartition {
    StandardizedPartition {
        offset: part.offset,
        features: part
            .bars
            .iter()
            .map(|b| stats.transform_row(&feature_row(b)))
            .collect(),
        prices: part.bars.iter().map(|b| b.price).collect(),
        prices_std: part.bars.iter().map(|b| stats.price_to_std(b.price)).collect(),
    }
}

/// One look-back window ending at time `t`, targeting the price at `t + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    pub t: usize,
    /// Row-major `(k+1) × d_f` standardized features for steps `t-k ..= t`.
    pub features: Vec<f64>,
    pub d_f: usize,
    pub signals: Vec<LlmSignal>,
    /// Standardized price at `t + 1`.
    pub target: f64,
    pub target_raw: f64,
    /// Standardized price at `t`, the last observed level.
    pub anchor: f64,
    pub anchor_raw: f64,
}

impl WindowSample {
    pub fn steps(&self) -> usize {
        self.signals.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d_f..(i + 1) * self.d_f]
    }
}

/// Every window `t ∈ [k, L-2]` of a standardized partition; `L - k - 1` samples.
pub fn make_windows(
    part: &StandardizedPartition,
    signals: &[LlmSignal],
    k: usize,
) -> Result<Vec<WindowSample>> {
    let l = part.len();
    if l < k + 2 {
        return Err(Error::Window(format!(
            "partition of {l} bars is too short for look-back {k} (needs {})",
            k + 2
        )));
    }
    if signals.len() != l {
        return Err(Error::Window(format!(
            "{} signals for a partition of {l} bars",
            signals.len()
        )));
    }
    let d_f = part.features[0].len();
    let mut out = Vec::with_capacity(l - k - 1);
    for t in k..=l - 2 {
        let mut features = Vec::with_capacity((k + 1) * d_f);
        for row in &part.features[t - k..=t] {
            features.extend_from_slice(row);
        }
        out.push(WindowSample {
            t: part.offset + t,
            features,
            d_f,
            signals: signals[t - k..=t].to_vec(),
            target: part.prices_std[t + 1],
            target_raw: part.prices[t + 1],
            anchor: part.prices_std[t],
            anchor_raw: part.prices[t],
        });
    }
    Ok(out)
}
