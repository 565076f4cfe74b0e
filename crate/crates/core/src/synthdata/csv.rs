//! Dataset CSV: UTF-8, LF line endings, fixed column order
//! `time,price,open,high,low,close,volume,next_price,feat_1..feat_m`,
//! optionally followed by `sig_up,sig_down,sig_flat,confidence`.
//!
//! Floats carry 17 significant digits so values survive a round trip
//! exactly. The final bar's `next_price` cell is empty.

use std::fmt::Write as _;
use std::path::Path;

use super::generate::{Bar, MarketSeries};
use crate::error::{Error, Result};
use crate::signalgen::{Direction, LlmSignal};
use crate::util::write_atomic;

const BASE_COLUMNS: [&str; 8] = [
    "time",
    "price",
    "open",
    "high",
    "low",
    "close",
    "volume",
    "next_price",
];
const SIGNAL_COLUMNS: [&str; 4] = ["sig_up", "sig_down", "sig_flat", "confidence"];

/// 17 significant digits, scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn header(n_feats: usize, with_signals: bool) -> String {
    let mut cols: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend((1..=n_feats).map(|i| format!("feat_{i}")));
    if with_signals {
        cols.extend(SIGNAL_COLUMNS.iter().map(|s| s.to_string()));
    }
    cols.join(",")
}

pub fn to_csv_string(series: &MarketSeries, signals: Option<&[LlmSignal]>) -> Result<String> {
    if let Some(sig) = signals {
        if sig.len() != series.len() {
            return Err(Error::LengthMismatch {
                left: series.len(),
                right: sig.len(),
            });
        }
    }
    let mut out = header(series.n_extra_feats(), signals.is_some());
    out.push('\n');
    for (i, b) in series.bars.iter().enumerate() {
        write!(
            out,
            "{},{},{},{},{},{},{},",
            b.time,
            fmt_f64(b.price),
            fmt_f64(b.open),
            fmt_f64(b.high),
            fmt_f64(b.low),
            fmt_f64(b.close),
            fmt_f64(b.volume)
        )
        .expect("write to string");
        if let Some(np) = b.next_price {
            out.push_str(&fmt_f64(np));
        }
        for f in &b.feats {
            out.push(',');
            out.push_str(&fmt_f64(*f));
        }
        if let Some(sig) = signals {
            let s = &sig[i];
            for v in s.one_hot {
                out.push(',');
                out.push_str(&fmt_f64(v));
            }
            out.push(',');
            out.push_str(&fmt_f64(s.confidence));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(series: &MarketSeries, path: &Path) -> Result<()> {
    write_atomic(path, to_csv_string(series, None)?.as_bytes())
}

/// Writes the dataset with the four signal columns appended.
pub fn write_csv_with_signals(
    series: &MarketSeries,
    signals: &[LlmSignal],
    path: &Path,
) -> Result<()> {
    write_atomic(path, to_csv_string(series, Some(signals))?.as_bytes())
}

pub fn read_csv(path: &Path) -> Result<MarketSeries> {
    Ok(read_csv_with_signals(path)?.0)
}

pub fn read_csv_with_signals(path: &Path) -> Result<(MarketSeries, Option<Vec<LlmSignal>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

fn parse_err(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Parses dataset text. Rows are numbered from 1 (the header).
pub fn parse_csv(text: &str) -> Result<(MarketSeries, Option<Vec<LlmSignal>>)> {
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| parse_err(1, "<header>", "file is empty"))?;
    let cols: Vec<&str> = header_line.split(',').collect();

    for (i, want) in BASE_COLUMNS.iter().enumerate() {
        match cols.get(i) {
            Some(c) if c == want => {}
            Some(c) => {
                return Err(parse_err(
                    1,
                    want,
                    format!("expected column `{want}` at position {}, found `{c}`", i + 1),
                ))
            }
            None => return Err(parse_err(1, want, "missing column")),
        }
    }
    let with_signals = cols.len() >= BASE_COLUMNS.len() + SIGNAL_COLUMNS.len()
        && cols[cols.len() - SIGNAL_COLUMNS.len()..] == SIGNAL_COLUMNS;
    let feat_end = cols.len() - if with_signals { SIGNAL_COLUMNS.len() } else { 0 };
    let feat_cols = &cols[BASE_COLUMNS.len()..feat_end];
    for (i, c) in feat_cols.iter().enumerate() {
        let want = format!("feat_{}", i + 1);
        if *c != want {
            return Err(parse_err(1, c, format!("expected `{want}`")));
        }
    }

    let mut bars = Vec::new();
    let mut signals = Vec::new();
    for (li, line) in lines.enumerate() {
        let row = li + 2;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            let column = cols.get(cells.len()).unwrap_or(&"<extra>");
            return Err(parse_err(
                row,
                column,
                format!("expected {} cells, found {}", cols.len(), cells.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            let v: f64 = cells[i]
                .parse()
                .map_err(|_| parse_err(row, cols[i], format!("not a number: `{}`", cells[i])))?;
            if !v.is_finite() {
                return Err(parse_err(row, cols[i], "non-finite value"));
            }
            Ok(v)
        };
        let time: usize = cells[0]
            .parse()
            .map_err(|_| parse_err(row, "time", format!("not an index: `{}`", cells[0])))?;
        let next_price = if cells[7].is_empty() {
            None
        } else {
            Some(num(7)?)
        };
        let feats = (BASE_COLUMNS.len()..feat_end)
            .map(num)
            .collect::<Result<Vec<_>>>()?;
        bars.push(Bar {
            time,
            price: num(1)?,
            open: num(2)?,
            high: num(3)?,
            low: num(4)?,
            close: num(5)?,
            volume: num(6)?,
            next_price,
            feats,
        });
        if with_signals {
            let one_hot = [num(feat_end)?, num(feat_end + 1)?, num(feat_end + 2)?];
            let confidence = num(feat_end + 3)?;
            let direction = Direction::from_one_hot(&one_hot)
                .ok_or_else(|| parse_err(row, "sig_up", "signal columns are not one-hot"))?;
            signals.push(LlmSignal {
                direction,
                one_hot,
                confidence,
                usable: true,
            });
        }
    }
    if let Some(last) = signals.last_mut() {
        last.usable = false;
    }
    let series = MarketSeries {
        bars,
        gen_config: None,
    };
    Ok((series, with_signals.then_some(signals)))
}
