//! Forecasting next-step prices from structured market features fused with
//! directional trend signals.
//!
//! The crate is organized bottom-up:
//!
//! - [`synthdata`]: synthetic OHLCV series, CSV I/O, splits, scaling, windows.
//! - [`signalgen`]: mock directional signal oracle with softmax confidence.
//! - [`autodiff`]: tape-based reverse-mode differentiation and Adam.
//! - [`models`]: linear, LSTM, GRU, vanilla transformer and gated-fusion hybrid.
//! - [`eval`]: metrics, paired statistics, ablation, noise sweep, traces.
//! - [`config`] and [`report`]: experiment configuration and CSV/SVG output.

pub mod autodiff;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod models;
pub mod report;
pub mod signalgen;
pub mod synthdata;
pub mod util;

pub use error::{Error, Result};
