//! CSV/JSON artifacts and standalone SVG figures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{AttentionTrace, EvalReport, GateRow, NoiseCurve, RunResult};
use crate::models::ModelKind;
use crate::util::write_atomic;

pub const DASH: &str = "—";

pub const REPORT_HEADER: &str =
    "Model,RMSE,95 % CI,% Improvement vs Vanilla,p-value (paired t),Cohen's d";

fn cell(v: Option<String>) -> String {
    v.unwrap_or_else(|| DASH.to_string())
}

fn quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn format_p(p: f64) -> String {
    if p < 1e-4 {
        "< 0.0001".to_string()
    } else {
        format!("{p:.4}")
    }
}

/// Table-3-shaped summary, one row per model kind.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for row in &report.rows {
        let c = row.comparison;
        let cells = [
            row.kind.display_name().to_string(),
            cell(row.mean_rmse.map(|v| format!("{v:.4}"))),
            cell(row.ci95.map(|(lo, hi)| format!("[{lo:.4}, {hi:.4}]"))),
            cell(c.map(|c| format!("{:+.2}%", 100.0 * c.improvement))),
            cell(c.map(|c| format_p(c.p_value))),
            cell(c.map(|c| format!("{:.4}", c.cohens_d))),
        ];
        let line: Vec<String> = cells.iter().map(|s| quote(s)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn runs_csv(runs: &[RunResult]) -> String {
    let mut out = String::from("model,seed,rmse,mae,r2,best_epoch\n");
    for r in runs {
        writeln!(out, "{},{},{},{},{},{}", r.kind, r.seed, r.rmse, r.mae, r.r2, r.best_epoch).unwrap();
    }
    out
}

pub fn noise_csv(curve: &NoiseCurve) -> String {
    let mut out = String::from("model,sigma,mean_rmse,ci_lo,ci_hi,pct_increase\n");
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.kind, p.sigma, p.mean_rmse, p.ci_lo, p.ci_hi, p.pct_increase
        )
        .unwrap();
    }
    out
}

/// Rows carry the confidence of the key row.
pub fn attention_csv(trace: &AttentionTrace) -> String {
    let mut out = String::from("layer,head,query_row,key_row,weight,confidence\n");
    for (l, layer) in trace.weights.iter().enumerate() {
        for (h, head) in layer.iter().enumerate() {
            for (q, row) in head.iter().enumerate() {
                for (k, w) in row.iter().enumerate() {
                    writeln!(out, "{l},{h},{q},{k},{w},{}", trace.confidence[k]).unwrap();
                }
            }
        }
    }
    out
}

pub fn gate_csv(rows: &[GateRow]) -> String {
    let mut out = String::from("row,mean_gate,confidence\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.row, r.mean_gate, r.confidence).unwrap();
    }
    out
}

pub fn loss_curve_csv(train: &[f64], val: &[f64]) -> String {
    let mut out = String::from("epoch,train_mse,val_mse\n");
    for (e, (t, v)) in train.iter().zip(val).enumerate() {
        writeln!(out, "{},{t},{v}", e + 1).unwrap();
    }
    out
}

/// Element-wise mean of equal-length curves.
pub fn mean_curve<'a>(curves: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for c in curves {
        if sum.is_empty() {
            sum = vec![0.0; c.len()];
        }
        for (s, v) in sum.iter_mut().zip(c) {
            *s += v;
        }
        n += 1;
    }
    sum.iter().map(|s| s / n.max(1) as f64).collect()
}

/// Provenance written next to every artifact as `<file>.meta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub config_hash: String,
    pub seed: u64,
    pub command: String,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta");
    path.with_file_name(name)
}

/// Atomically writes `text` and its `.meta` sidecar.
pub fn write_artifact(path: &Path, text: &str, meta: &Meta) -> Result<()> {
    write_atomic(path, text.as_bytes())?;
    let m = serde_json::to_string_pretty(meta).expect("meta serializes") + "\n";
    write_atomic(&meta_path(path), m.as_bytes())
}

// ---- parsing -------------------------------------------------------------

/// Splits one CSV line, honouring double quotes.
pub fn split_csv_line(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

fn read_table(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let got = lines.next().unwrap_or("");
    if got != header {
        return Err(Error::Parse {
            row: 1,
            column: "<header>".into(),
            message: format!("{}: expected `{header}`", path.display()),
        });
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let cells = split_csv_line(l);
            if cells.len() != width {
                return Err(Error::Parse {
                    row: i + 2,
                    column: "<row>".into(),
                    message: format!("{}: expected {width} cells", path.display()),
                });
            }
            Ok(cells)
        })
        .collect()
}

fn num(cells: &[String], i: usize, row: usize, column: &str) -> Result<f64> {
    cells[i].trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.into(),
        message: format!("not a number: `{}`", cells[i]),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub rmse: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub improvement: Option<String>,
    pub p_value: Option<String>,
    pub cohens_d: Option<f64>,
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let opt = |s: &str| (s != DASH).then(|| s.to_string());
    read_table(path, REPORT_HEADER)?
        .into_iter()
        .map(|c| {
            let ci = opt(&c[2]).and_then(|s| {
                let inner = s.trim_start_matches('[').trim_end_matches(']');
                let mut it = inner.split(',').map(|x| x.trim().parse::<f64>());
                match (it.next(), it.next()) {
                    (Some(Ok(a)), Some(Ok(b))) => Some((a, b)),
                    _ => None,
                }
            });
            Ok(ReportRow {
                model: c[0].clone(),
                rmse: opt(&c[1]).and_then(|s| s.parse().ok()),
                ci,
                improvement: opt(&c[3]),
                p_value: opt(&c[4]),
                cohens_d: opt(&c[5]).and_then(|s| s.parse().ok()),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub model: String,
    pub sigma: f64,
    pub mean_rmse: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub pct_increase: f64,
}

pub fn read_noise_csv(path: &Path) -> Result<Vec<NoiseRow>> {
    read_table(path, "model,sigma,mean_rmse,ci_lo,ci_hi,pct_increase")?
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let r = i + 2;
            Ok(NoiseRow {
                model: c[0].clone(),
                sigma: num(&c, 1, r, "sigma")?,
                mean_rmse: num(&c, 2, r, "mean_rmse")?,
                ci_lo: num(&c, 3, r, "ci_lo")?,
                ci_hi: num(&c, 4, r, "ci_hi")?,
                pct_increase: num(&c, 5, r, "pct_increase")?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub model: String,
    pub train: Vec<f64>,
    pub val: Vec<f64>,
}

pub fn read_loss_csv(path: &Path, model: &str) -> Result<LossCurve> {
    let rows = read_table(path, "epoch,train_mse,val_mse")?;
    let mut curve = LossCurve {
        model: model.to_string(),
        train: Vec::new(),
        val: Vec::new(),
    };
    for (i, c) in rows.iter().enumerate() {
        curve.train.push(num(c, 1, i + 2, "train_mse")?);
        curve.val.push(num(c, 2, i + 2, "val_mse")?);
    }
    Ok(curve)
}

/// Head-averaged attention per layer, `[layer][query][key]`.
pub fn read_attention_csv(path: &Path) -> Result<Vec<Vec<Vec<f64>>>> {
    let rows = read_table(path, "layer,head,query_row,key_row,weight,confidence")?;
    let mut dims = (0usize, 0usize, 0usize);
    let mut parsed = Vec::with_capacity(rows.len());
    for (i, c) in rows.iter().enumerate() {
        let r = i + 2;
        let idx = |j: usize, name: &str| -> Result<usize> {
            c[j].parse().map_err(|_| Error::Parse {
                row: r,
                column: name.into(),
                message: format!("not an index: `{}`", c[j]),
            })
        };
        let (l, h, q, k) = (idx(0, "layer")?, idx(1, "head")?, idx(2, "query_row")?, idx(3, "key_row")?);
        dims = (dims.0.max(l + 1), dims.1.max(h + 1), dims.2.max(q.max(k) + 1));
        parsed.push((l, q, k, num(c, 4, r, "weight")?));
    }
    let (nl, nh, t) = dims;
    let mut out = vec![vec![vec![0.0; t]; t]; nl];
    for (l, q, k, w) in parsed {
        out[l][q][k] += w / nh as f64;
    }
    Ok(out)
}

// ---- SVG -----------------------------------------------------------------

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 20.0;
const PAD_T: f64 = 40.0;
const PAD_B: f64 = 80.0;
const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#b07aa1"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        esc(title)
    )
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(values: impl IntoIterator<Item = f64>, zero: bool) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.into_iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        if zero {
            lo = lo.min(0.0);
        }
        let span = if hi > lo { hi - lo } else { hi.abs().max(1.0) };
        Axis {
            lo: if zero && lo == 0.0 { 0.0 } else { lo - 0.05 * span },
            hi: hi + 0.05 * span,
        }
    }

    fn y(&self, v: f64) -> f64 {
        H - PAD_B - (v - self.lo) / (self.hi - self.lo) * (H - PAD_T - PAD_B)
    }
}

fn y_ticks(out: &mut String, axis: &Axis) {
    for i in 0..=4 {
        let v = axis.lo + (axis.hi - axis.lo) * i as f64 / 4.0;
        let y = axis.y(v);
        writeln!(
            out,
            "<line x1=\"{PAD_L}\" x2=\"{}\" y1=\"{y:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\
             <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            W - PAD_R,
            PAD_L - 6.0,
            y + 4.0,
            short(v)
        )
        .unwrap();
    }
}

fn short(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Bars with 95% CI whiskers.
pub fn bar_chart_svg(title: &str, bars: &[(String, f64, Option<(f64, f64)>)]) -> String {
    let axis = Axis::new(
        bars.iter().flat_map(|(_, v, ci)| [Some(*v), ci.map(|c| c.1)]).flatten(),
        true,
    );
    let mut out = svg_open(title);
    y_ticks(&mut out, &axis);
    let slot = (W - PAD_L - PAD_R) / bars.len().max(1) as f64;
    for (i, (label, v, ci)) in bars.iter().enumerate() {
        let x = PAD_L + slot * i as f64 + slot * 0.15;
        let bw = slot * 0.7;
        let y = axis.y(*v);
        writeln!(
            out,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bw:.1}\" height=\"{:.1}\" fill=\"{}\"/>",
            axis.y(axis.lo.max(0.0)) - y,
            PALETTE[i % PALETTE.len()]
        )
        .unwrap();
        if let Some((lo, hi)) = ci {
            let cx = x + bw / 2.0;
            let (ylo, yhi) = (axis.y(*lo), axis.y(*hi));
            writeln!(
                out,
                "<path d=\"M{cx:.1},{ylo:.1}V{yhi:.1}M{:.1},{ylo:.1}h12M{:.1},{yhi:.1}h12\" stroke=\"black\"/>",
                cx - 6.0,
                cx - 6.0
            )
            .unwrap();
        }
        writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            x + bw / 2.0,
            H - PAD_B + 16.0,
            esc(label),
            x + bw / 2.0,
            y - 6.0,
            short(*v)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// One polyline per series over shared x values, with optional CI bands.
pub fn line_chart_svg(
    title: &str,
    x_label: &str,
    xs: &[f64],
    series: &[(String, Vec<f64>, Option<Vec<(f64, f64)>>)],
) -> String {
    let axis = Axis::new(
        series.iter().flat_map(|(_, ys, band)| {
            ys.iter()
                .copied()
                .chain(band.iter().flatten().flat_map(|(a, b)| [*a, *b]))
        }),
        false,
    );
    let (x0, x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| PAD_L + (x - x0) / span * (W - PAD_L - PAD_R);
    let mut out = svg_open(title);
    y_ticks(&mut out, &axis);
    for &x in xs {
        writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            px(x),
            H - PAD_B + 16.0,
            short(x)
        )
        .unwrap();
    }
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        (PAD_L + W - PAD_R) / 2.0,
        H - PAD_B + 34.0,
        esc(x_label)
    )
    .unwrap();
    for (i, (name, ys, band)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let Some(b) = band {
            let mut d = String::new();
            for (j, (x, (lo, _))) in xs.iter().zip(b).enumerate() {
                write!(d, "{}{:.1},{:.1}", if j == 0 { "M" } else { "L" }, px(*x), axis.y(*lo)).unwrap();
            }
            for (x, (_, hi)) in xs.iter().zip(b).rev() {
                write!(d, "L{:.1},{:.1}", px(*x), axis.y(*hi)).unwrap();
            }
            writeln!(out, "<path d=\"{d}Z\" fill=\"{color}\" fill-opacity=\"0.2\"/>").unwrap();
        }
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| format!("{:.1},{:.1}", px(*x), axis.y(*y)))
            .collect();
        writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>",
            pts.join(" "),
            PAD_L + 8.0,
            PAD_T + 14.0 * (i + 1) as f64,
            esc(name)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Grayscale-to-blue heat map of a square matrix in [0, max].
pub fn heatmap_svg(title: &str, m: &[Vec<f64>]) -> String {
    let n = m.len().max(1);
    let max = m.iter().flatten().cloned().fold(0.0, f64::max).max(1e-12);
    let side = (H - PAD_T - 30.0).min(W - 2.0 * PAD_L);
    let cell = side / n as f64;
    let x0 = (W - side) / 2.0;
    let mut out = svg_open(title);
    for (q, row) in m.iter().enumerate() {
        for (k, w) in row.iter().enumerate() {
            let s = (w / max).clamp(0.0, 1.0);
            let c = |base: f64| (255.0 - s * (255.0 - base)).round() as u8;
            writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#{:02x}{:02x}{:02x}\"/>",
                x0 + k as f64 * cell,
                PAD_T + q as f64 * cell,
                cell,
                cell,
                c(8.0),
                c(48.0),
                c(107.0)
            )
            .unwrap();
        }
    }
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">key row (query rows top to bottom)</text>",
        W / 2.0,
        PAD_T + side + 18.0
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

// ---- rendering -----------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

/// Everything `render` understands in an input directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Collected {
    pub report: Option<Vec<ReportRow>>,
    pub noise: Option<Vec<NoiseRow>>,
    pub loss_curves: Vec<LossCurve>,
    pub attention: Option<Vec<Vec<Vec<f64>>>>,
}

pub fn collect(dir: &Path) -> Result<Collected> {
    let mut c = Collected::default();
    let p = dir.join("report.csv");
    if p.exists() {
        c.report = Some(read_report_csv(&p)?);
    }
    let p = dir.join("noise_curve.csv");
    if p.exists() {
        c.noise = Some(read_noise_csv(&p)?);
    }
    for kind in ModelKind::ALL {
        let p = dir.join(format!("loss_curve_{}.csv", kind.tag()));
        if p.exists() {
            c.loss_curves.push(read_loss_csv(&p, kind.tag())?);
        }
    }
    let p = dir.join("attention_trace.csv");
    if p.exists() {
        c.attention = Some(read_attention_csv(&p)?);
    }
    Ok(c)
}

fn noise_series(rows: &[NoiseRow]) -> (Vec<f64>, Vec<(String, Vec<f64>, Option<Vec<(f64, f64)>>)>) {
    let mut sigmas: Vec<f64> = Vec::new();
    let mut models: Vec<String> = Vec::new();
    for r in rows {
        if !sigmas.contains(&r.sigma) {
            sigmas.push(r.sigma);
        }
        if !models.contains(&r.model) {
            models.push(r.model.clone());
        }
    }
    let series = models
        .into_iter()
        .map(|m| {
            let pts: Vec<&NoiseRow> = rows.iter().filter(|r| r.model == m).collect();
            (
                m,
                pts.iter().map(|r| r.mean_rmse).collect(),
                Some(pts.iter().map(|r| (r.ci_lo, r.ci_hi)).collect()),
            )
        })
        .collect();
    (sigmas, series)
}

/// Renders figures from the CSVs in `in_dir` into `out_dir`; returns the written files.
pub fn render(in_dir: &Path, out_dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    let c = collect(in_dir)?;
    if c.report.is_none() && c.noise.is_none() && c.loss_curves.is_empty() && c.attention.is_none() {
        return Err(Error::Config(format!(
            "{} holds no report.csv, noise_curve.csv, loss_curve_*.csv or attention_trace.csv",
            in_dir.display()
        )));
    }
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    match format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&c).expect("json") + "\n";
            files.push((out_dir.join("report.json"), text));
        }
        Format::Csv => {
            let mut out = String::from("figure,series,x,y,lo,hi\n");
            if let Some(rows) = &c.report {
                for (i, r) in rows.iter().enumerate() {
                    if let Some(v) = r.rmse {
                        let (lo, hi) = r.ci.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
                        writeln!(out, "rmse_bars,{},{i},{v},{lo},{hi}", quote(&r.model)).unwrap();
                    }
                }
            }
            for l in &c.loss_curves {
                for (e, (t, v)) in l.train.iter().zip(&l.val).enumerate() {
                    writeln!(out, "loss_train,{},{},{t},,", l.model, e + 1).unwrap();
                    writeln!(out, "loss_val,{},{},{v},,", l.model, e + 1).unwrap();
                }
            }
            if let Some(rows) = &c.noise {
                for r in rows {
                    writeln!(out, "noise,{},{},{},{},{}", r.model, r.sigma, r.mean_rmse, r.ci_lo, r.ci_hi).unwrap();
                }
            }
            files.push((out_dir.join("plot_data.csv"), out));
        }
        Format::Svg => {
            if let Some(rows) = &c.report {
                let bars: Vec<_> = rows
                    .iter()
                    .filter_map(|r| r.rmse.map(|v| (r.model.clone(), v, r.ci)))
                    .collect();
                files.push((out_dir.join("rmse_bars.svg"), bar_chart_svg("Test RMSE (95% CI)", &bars)));
            }
            if !c.loss_curves.is_empty() {
                let n = c.loss_curves.iter().map(|l| l.val.len()).max().unwrap_or(0);
                let xs: Vec<f64> = (1..=n).map(|e| e as f64).collect();
                let mut series = Vec::new();
                for l in &c.loss_curves {
                    series.push((format!("{} train", l.model), l.train.clone(), None));
                    series.push((format!("{} val", l.model), l.val.clone(), None));
                }
                files.push((out_dir.join("loss_curves.svg"), line_chart_svg("Loss (MSE, standardized)", "epoch", &xs, &series)));
            }
            if let Some(rows) = &c.noise {
                let (xs, series) = noise_series(rows);
                files.push((out_dir.join("noise_curve.svg"), line_chart_svg("RMSE under feature noise", "sigma", &xs, &series)));
            }
            if let Some(layers) = &c.attention {
                for (l, m) in layers.iter().enumerate() {
                    files.push((
                        out_dir.join(format!("attention_layer{l}.svg")),
                        heatmap_svg(&format!("Attention, layer {l} (head mean)"), m),
                    ));
                }
            }
        }
    }
    let mut written = Vec::new();
    for (path, text) in files {
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
