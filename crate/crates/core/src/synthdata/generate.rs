use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowest price the random walk may reach.
pub const PRICE_FLOOR: f64 = 0.01;

/// Wick noise scale as a fraction of step volatility.
const WICK_FRACTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub n: usize,
    pub start_price: f64,
    /// Expected price change per step.
    pub drift: f64,
    /// Standard deviation of the per-step price shock.
    pub volatility: f64,
    pub volume_mean: f64,
    pub volume_std: f64,
    pub n_extra_feats: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    /// Defaults land the 3000-step series on a mean of about 390 and a
    /// standard deviation of about 250, with volume around 5000 ± 1840.
    fn default() -> Self {
        GenConfig {
            n: 3000,
            start_price: 10.0,
            drift: 0.27,
            volatility: 1.0,
            volume_mean: 5000.0,
            volume_std: 1837.0,
            n_extra_feats: 3,
            seed: 42,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.n < 2 {
            return fail("n must be at least 2");
        }
        if !(self.start_price > 0.0) || !self.start_price.is_finite() {
            return fail("start_price must be positive");
        }
        if !self.drift.is_finite() {
            return fail("drift must be finite");
        }
        if !(self.volatility >= 0.0) || !self.volatility.is_finite() {
            return fail("volatility must be non-negative");
        }
        if !(self.volume_mean > 0.0) || !self.volume_mean.is_finite() {
            return fail("volume_mean must be positive");
        }
        if !(self.volume_std >= 0.0) || !self.volume_std.is_finite() {
            return fail("volume_std must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub time: usize,
    pub price: f64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
    /// Price of the following bar; `None` only for the final bar.
    pub next_price: Option<f64>,
    pub feats: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarketSeries {
    pub bars: Vec<Bar>,
    /// Generator settings, when the series came from [`generate_series`].
    pub gen_config: Option<GenConfig>,
}

impl MarketSeries {
    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.price).collect()
    }

    pub fn n_extra_feats(&self) -> usize {
        self.bars.first().map_or(0, |b| b.feats.len())
    }

    /// Checks time indexing, OHLC ordering and next-price linkage.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, b) in self.bars.iter().enumerate() {
            let bad = |m: &str| Err(Error::Domain(format!("bar {i}: {m}")));
            if b.time != i {
                return bad("time index is not consecutive");
            }
            if !(b.low <= b.open.min(b.close) && b.high >= b.open.max(b.close)) {
                return bad("OHLC ordering violated");
            }
            if !(b.volume > 0.0) {
                return bad("volume must be positive");
            }
            if b.price != b.close {
                return bad("price differs from close");
            }
            let expected = self.bars.get(i + 1).map(|n| n.price);
            if b.next_price != expected {
                return bad("next_price does not match the following bar");
            }
        }
        Ok(())
    }
}

/// Arithmetic random walk with drift, OHLC wicks, volume and noise features.
///
/// Deterministic for a given config (including seed).
pub fn generate_series(config: &GenConfig) -> Result<MarketSeries> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };

    let wick = WICK_FRACTION * config.volatility;
    let mut bars: Vec<Bar> = Vec::with_capacity(config.n);
    let mut prev_close = config.start_price;
    for t in 0..config.n {
        let close = if t == 0 {
            config.start_price
        } else {
            (prev_close + config.drift + config.volatility * normal()).max(PRICE_FLOOR)
        };
        let open = prev_close;
        let high = open.max(close) + wick * normal().abs();
        let low = (open.min(close) - wick * normal().abs()).max(0.0);
        let volume = (config.volume_mean + config.volume_std * normal()).max(1.0);
        let feats = (0..config.n_extra_feats).map(|_| normal()).collect();
        if let Some(last) = bars.last_mut() {
            last.next_price = Some(close);
        }
        bars.push(Bar {
            time: t,
            price: close,
            open,
            high,
            low,
            close,
            volume,
            next_price: None,
            feats,
        });
        prev_close = close;
    }
    Ok(MarketSeries {
        bars,
        gen_config: Some(config.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_flat() {
        let cfg = GenConfig {
            n: 10,
            drift: 0.0,
            volatility: 0.0,
            start_price: 100.0,
            ..GenConfig::default()
        };
        let s = generate_series(&cfg).unwrap();
        assert_eq!(s.len(), 10);
        for b in &s.bars {
            assert_eq!(b.price, 100.0);
            assert_eq!(b.high, 100.0);
            assert_eq!(b.low, 100.0);
        }
    }

    #[test]
    fn same_seed_same_series() {
        let cfg = GenConfig { n: 500, ..GenConfig::default() };
        assert_eq!(generate_series(&cfg).unwrap(), generate_series(&cfg).unwrap());
        let other = GenConfig { seed: 7, ..cfg.clone() };
        assert_ne!(generate_series(&cfg).unwrap(), generate_series(&other).unwrap());
    }

    #[test]
    fn invariants_hold() {
        let s = generate_series(&GenConfig::default()).unwrap();
        s.check_invariants().unwrap();
        assert!(s.bars.last().unwrap().next_price.is_none());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            GenConfig { n: 1, ..GenConfig::default() },
            GenConfig { start_price: 0.0, ..GenConfig::default() },
            GenConfig { volatility: -1.0, ..GenConfig::default() },
            GenConfig { volume_mean: 0.0, ..GenConfig::default() },
            GenConfig { volume_std: -0.5, ..GenConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(generate_series(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn prices_respect_floor() {
        let cfg = GenConfig {
            n: 2000,
            start_price: 0.5,
            drift: -0.5,
            volatility: 2.0,
            ..GenConfig::default()
        };
        let s = generate_series(&cfg).unwrap();
        assert!(s.bars.iter().all(|b| b.price >= PRICE_FLOOR));
        s.check_invariants().unwrap();
    }
}
