//! Mock directional signal generator.
//!
//! Stands in for a language model that reads the news at step `t` and
//! emits a trend call for the `t → t+1` move together with a confidence.
//! The oracle knows the realized direction and is right with a configured
//! probability; confidence is the max of a softmax over mock logits in
//! which the emitted class is always the argmax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthdata::MarketSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Flat,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Up, Direction::Down, Direction::Flat];

    /// Position in the `(up, down, flat)` one-hot layout.
    pub fn index(self) -> usize {
        match self {
            Direction::Up => 0,
            Direction::Down => 1,
            Direction::Flat => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Direction> {
        Direction::ALL.get(i).copied()
    }

    pub fn from_one_hot(v: &[f64; 3]) -> Option<Direction> {
        let ones = v.iter().filter(|&&x| x == 1.0).count();
        let zeros = v.iter().filter(|&&x| x == 0.0).count();
        if ones != 1 || zeros != 2 {
            return None;
        }
        v.iter().position(|&x| x == 1.0).and_then(Direction::from_index)
    }
}

pub fn encode_one_hot(d: Direction) -> [f64; 3] {
    let mut v = [0.0; 3];
    v[d.index()] = 1.0;
    v
}

/// Direction of the move from `p_t` to `p_next`, with returns inside
/// `±flat_band` counted as flat.
pub fn realized_direction(p_t: f64, p_next: f64, flat_band: f64) -> Result<Direction> {
    if !(p_t > 0.0) {
        return Err(Error::Domain(format!("reference price must be positive, got {p_t}")));
    }
    let r = (p_next - p_t) / p_t;
    Ok(if r > flat_band {
        Direction::Up
    } else if r < -flat_band {
        Direction::Down
    } else {
        Direction::Flat
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmSignal {
    pub direction: Direction,
    pub one_hot: [f64; 3],
    pub confidence: f64,
    /// False for the placeholder on the final bar, which has no next move.
    pub usable: bool,
}

impl LlmSignal {
    pub fn placeholder() -> Self {
        LlmSignal {
            direction: Direction::Flat,
            one_hot: encode_one_hot(Direction::Flat),
            confidence: 1.0 / 3.0,
            usable: false,
        }
    }

    /// `[s_up, s_down, s_flat, confidence]`.
    pub fn as_row(&self) -> [f64; 4] {
        [self.one_hot[0], self.one_hot[1], self.one_hot[2], self.confidence]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalConfig {
    /// Probability that the emitted direction equals the realized one.
    pub accuracy: f64,
    /// Relative return band treated as flat.
    pub flat_band: f64,
    pub logit_boost_correct: f64,
    pub logit_boost_wrong: f64,
    pub logit_noise_std: f64,
    pub seed: u64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            accuracy: 0.70,
            flat_band: 0.001,
            logit_boost_correct: 2.0,
            logit_boost_wrong: 0.8,
            logit_noise_std: 0.5,
            seed: 7,
        }
    }
}

impl SignalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::Config(format!("accuracy must be in [0,1], got {}", self.accuracy)));
        }
        if !(self.flat_band >= 0.0) {
            return Err(Error::Config("flat_band must be non-negative".to_string()));
        }
        if !(self.logit_noise_std >= 0.0) {
            return Err(Error::Config("logit_noise_std must be non-negative".to_string()));
        }
        // The argmax repair loop only terminates for positive boosts.
        if !(self.logit_boost_correct > 0.0 && self.logit_boost_wrong > 0.0) {
            return Err(Error::Config("logit boosts must be positive".to_string()));
        }
        Ok(())
    }
}

/// `max(softmax(logits))`.
pub fn confidence_from_logits(logits: &[f64; 3]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    1.0 / sum
}

fn argmax(v: &[f64; 3]) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Strict argmax: `i` beats every other entry.
fn is_strict_argmax(v: &[f64; 3], i: usize) -> bool {
    (0..3).all(|j| j == i || v[i] > v[j])
}

/// Draws one signal for a realized direction.
pub fn generate_signal<R: Rng + ?Sized>(
    true_dir: Direction,
    cfg: &SignalConfig,
    rng: &mut R,
) -> LlmSignal {
    let correct = rng.gen::<f64>() < cfg.accuracy;
    let emitted = if correct {
        true_dir
    } else {
        let step = if rng.gen::<bool>() { 1 } else { 2 };
        Direction::ALL[(true_dir.index() + step) % 3]
    };
    let boost = if emitted == true_dir {
        cfg.logit_boost_correct
    } else {
        cfg.logit_boost_wrong
    };
    let mut logits = [0.0; 3];
    for l in &mut logits {
        *l = cfg.logit_noise_std * rng.sample::<f64, _>(StandardNormal);
    }
    let e = emitted.index();
    logits[e] += boost;
    while !is_strict_argmax(&logits, e) {
        logits[e] += boost;
    }
    debug_assert_eq!(argmax(&logits), e);
    LlmSignal {
        direction: emitted,
        one_hot: encode_one_hot(emitted),
        confidence: confidence_from_logits(&logits),
        usable: true,
    }
}

/// One signal per bar predicting the move into the next bar. The final
/// bar gets an unusable flat placeholder.
pub fn signal_series(series: &MarketSeries, cfg: &SignalConfig) -> Result<Vec<LlmSignal>> {
    cfg.validate()?;
    if series.len() < 2 {
        return Err(Error::Domain(format!(
            "signal generation needs at least 2 bars, got {}",
            series.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(series.len());
    for pair in series.bars.windows(2) {
        let dir = realized_direction(pair[0].price, pair[1].price, cfg.flat_band)?;
        out.push(generate_signal(dir, cfg, &mut rng));
    }
    out.push(LlmSignal::placeholder());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{generate_series, GenConfig};

    #[test]
    fn realized_direction_examples() {
        assert_eq!(realized_direction(100.0, 103.0, 0.01).unwrap(), Direction::Up);
        assert_eq!(realized_direction(100.0, 100.0, 0.01).unwrap(), Direction::Flat);
        assert_eq!(realized_direction(100.0, 99.95, 0.01).unwrap(), Direction::Flat);
        assert_eq!(realized_direction(100.0, 95.0, 0.01).unwrap(), Direction::Down);
        assert!(matches!(realized_direction(0.0, 1.0, 0.01), Err(Error::Domain(_))));
    }

    #[test]
    fn one_hot_layout() {
        assert_eq!(encode_one_hot(Direction::Up), [1.0, 0.0, 0.0]);
        assert_eq!(encode_one_hot(Direction::Down), [0.0, 1.0, 0.0]);
        assert_eq!(encode_one_hot(Direction::Flat), [0.0, 0.0, 1.0]);
        for d in Direction::ALL {
            assert_eq!(Direction::from_one_hot(&encode_one_hot(d)), Some(d));
        }
    }

    #[test]
    fn softmax_max_closed_form() {
        let c = confidence_from_logits(&[2f64.ln(), 0.0, 0.0]);
        assert!((c - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_accuracy_always_matches() {
        let cfg = SignalConfig { accuracy: 1.0, ..SignalConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..10_000 {
            let d = Direction::ALL[i % 3];
            assert_eq!(generate_signal(d, &cfg, &mut rng).direction, d);
        }
    }

    #[test]
    fn emitted_class_is_argmax_even_with_large_noise() {
        let cfg = SignalConfig { logit_noise_std: 5.0, accuracy: 0.5, ..SignalConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5_000 {
            let s = generate_signal(Direction::Up, &cfg, &mut rng);
            assert!(s.confidence >= 1.0 / 3.0 && s.confidence <= 1.0);
            assert_eq!(s.one_hot.iter().sum::<f64>(), 1.0);
            assert_eq!(Direction::from_one_hot(&s.one_hot), Some(s.direction));
        }
    }

    #[test]
    fn series_signals_are_aligned_and_deterministic() {
        let s = generate_series(&GenConfig::default()).unwrap();
        let cfg = SignalConfig { accuracy: 1.0, ..SignalConfig::default() };
        let sig = signal_series(&s, &cfg).unwrap();
        assert_eq!(sig.len(), 3000);
        assert!(!sig[2999].usable);
        assert!(sig[..2999].iter().all(|x| x.usable));
        for t in 0..2999 {
            let d = realized_direction(s.bars[t].price, s.bars[t + 1].price, cfg.flat_band).unwrap();
            assert_eq!(sig[t].direction, d);
        }
        assert_eq!(sig, signal_series(&s, &cfg).unwrap());
    }

    #[test]
    fn short_series_is_rejected() {
        let s = generate_series(&GenConfig { n: 2, ..GenConfig::default() }).unwrap();
        let mut one = s.clone();
        one.bars.truncate(1);
        assert!(signal_series(&one, &SignalConfig::default()).is_err());
        assert_eq!(signal_series(&s, &SignalConfig::default()).unwrap().len(), 2);
    }

    #[test]
    fn invalid_config() {
        let bad = SignalConfig { accuracy: 1.5, ..SignalConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SignalConfig { logit_noise_std: -1.0, ..SignalConfig::default() };
        assert!(bad.validate().is_err());
    }
}
