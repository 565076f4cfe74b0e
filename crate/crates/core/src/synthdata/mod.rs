//! Synthetic OHLCV series: generation, CSV persistence, chronological
//! splits, train-only standardization and look-back windowing.

mod csv;
mod generate;
mod prep;

pub use self::csv::{
    fmt_f64, header as csv_header, parse_csv, read_csv, read_csv_with_signals, to_csv_string,
    write_csv, write_csv_with_signals,
};
pub use generate::{generate_series, Bar, GenConfig, MarketSeries, PRICE_FLOOR};
pub use prep::{
    feature_columns, feature_row, fit_stats, make_windows, split_chronological, standardize,
    FeatureStats, Partition, SplitSpec, StandardizedPartition, WindowSample, PRICE_COLUMN,
};
