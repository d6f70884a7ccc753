//! Renders a backtest output directory into a chart and a summary table.
//!
//! The chart plots index and benchmark levels on the left axis and the number
//! of trades per day as impulses on the right axis. The initial funding day is
//! left out of the trade counts, as in the backtest summary. Output is plain
//! text built with fixed-precision formatting, so identical inputs give
//! identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::backtest::{annualized_return, TradeStatistics, LEVELS_FILE, SUMMARY_FILE, TRADES_FILE};
use crate::error::{Error, Result};

pub const CHART_FILE: &str = "chart.svg";
pub const SUMMARY_TABLE_FILE: &str = "summary.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReportFormat {
    Svg,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svg" => Ok(Self::Svg),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReportSpec {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub formats: BTreeSet<ReportFormat>,
    pub title: String,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

impl ReportSpec {
    pub fn new(input_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input_dir: input_dir.into(),
            output_dir: output_dir.into(),
            formats: [ReportFormat::Svg, ReportFormat::Csv].into(),
            title: "Sentiment index vs. benchmark".into(),
            from: None,
            to: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LevelPoint {
    pub date: NaiveDate,
    pub index_level: f64,
    pub benchmark_level: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct TradeRow {
    date: NaiveDate,
    #[allow(dead_code)]
    company: String,
    #[allow(dead_code)]
    delta_weight: f64,
    #[allow(dead_code)]
    cost: f64,
}

/// One row of the summary table: label and formatted value.
pub type SummaryTable = Vec<(String, String)>;

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "missing backtest output"),
        ));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

struct ReportData {
    levels: Vec<LevelPoint>,
    /// per date in `levels`, trades excluding the funding day
    trade_counts: Vec<usize>,
}

fn load(spec: &ReportSpec) -> Result<ReportData> {
    let all_levels: Vec<LevelPoint> = read_csv(&spec.input_dir.join(LEVELS_FILE))?;
    let trades: Vec<TradeRow> = read_csv(&spec.input_dir.join(TRADES_FILE))?;
    let summary_path = spec.input_dir.join(SUMMARY_FILE);
    let summary = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    serde_json::from_str::<serde_json::Value>(&summary)
        .map_err(|e| Error::format(&summary_path, e.to_string()))?;

    let funding_day = all_levels.first().map(|l| l.date);
    let mut per_date: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for t in &trades {
        if Some(t.date) != funding_day {
            *per_date.entry(t.date).or_default() += 1;
        }
    }
    let levels: Vec<LevelPoint> = all_levels
        .into_iter()
        .filter(|l| spec.from.is_none_or(|f| l.date >= f) && spec.to.is_none_or(|t| l.date <= t))
        .collect();
    if levels.is_empty() {
        return Err(Error::Invalid(
            "date filter leaves no rows to report".into(),
        ));
    }
    let trade_counts = levels
        .iter()
        .map(|l| per_date.get(&l.date).copied().unwrap_or(0))
        .collect();
    Ok(ReportData {
        levels,
        trade_counts,
    })
}

fn pct(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.2}%", v * 100.0),
        None => "n/a".into(),
    }
}

fn summary_table(data: &ReportData) -> SummaryTable {
    let dates: Vec<NaiveDate> = data.levels.iter().map(|l| l.date).collect();
    let index: Vec<f64> = data.levels.iter().map(|l| l.index_level).collect();
    let bench: Vec<f64> = data.levels.iter().map(|l| l.benchmark_level).collect();
    let stats = TradeStatistics::from_daily_counts(data.trade_counts.iter().copied());
    let mut rows: SummaryTable = vec![
        ("start_date".into(), dates[0].to_string()),
        ("end_date".into(), dates[dates.len() - 1].to_string()),
        (
            "index_annualized_return".into(),
            pct(annualized_return(&index, &dates).ok()),
        ),
        (
            "benchmark_annualized_return".into(),
            pct(annualized_return(&bench, &dates).ok()),
        ),
        (
            "final_index_level".into(),
            format!("{:.2}", index[index.len() - 1]),
        ),
        (
            "final_benchmark_level".into(),
            format!("{:.2}", bench[bench.len() - 1]),
        ),
        ("total_trades".into(), stats.total_trades.to_string()),
        (
            "single_trade_days".into(),
            stats.single_trade_days.to_string(),
        ),
        (
            "max_trades_per_day".into(),
            stats.max_trades_per_day.to_string(),
        ),
    ];
    for (k, days) in &stats.trades_per_day_histogram {
        rows.push((format!("days_with_{k}_trades"), days.to_string()));
    }
    rows
}

fn table_csv(rows: &SummaryTable) -> String {
    let mut out = String::from("metric,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

/// Plain-text rendering of the summary table.
pub fn format_table(rows: &SummaryTable) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter()
        .map(|(k, v)| format!("{k:<width$}  {v}\n"))
        .collect()
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 70.0;
const TOP: f64 = 60.0;
const BOTTOM: f64 = 70.0;
const INDEX_COLOR: &str = "#1f4e9c";
const BENCH_COLOR: &str = "#c0392b";
const TRADE_COLOR: &str = "#7f8c8d";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Round step (1, 2, 5 x 10^k) giving roughly `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let unit = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    unit * mag
}

fn render_svg(data: &ReportData, title: &str) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let n = data.levels.len();

    let (mut lo, mut hi) = data
        .levels
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), l| {
            (
                lo.min(l.index_level).min(l.benchmark_level),
                hi.max(l.index_level).max(l.benchmark_level),
            )
        });
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let step = nice_step(hi - lo, 5.0);
    let (lo, hi) = ((lo / step).floor() * step, (hi / step).ceil() * step);
    let max_trades = data.trade_counts.iter().copied().max().unwrap_or(0).max(1);

    let first = data.levels[0].date;
    let span_days = (data.levels[n - 1].date - first).num_days().max(1) as f64;
    let x = |d: NaiveDate| LEFT + plot_w * (d - first).num_days() as f64 / span_days;
    let x = |d: NaiveDate| if n == 1 { LEFT + plot_w / 2.0 } else { x(d) };
    let y_left = |v: f64| TOP + plot_h * (1.0 - (v - lo) / (hi - lo));
    let y_right = |c: usize| TOP + plot_h * (1.0 - c as f64 / max_trades as f64);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="30" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    // left axis grid and labels
    let ticks = ((hi - lo) / step).round() as usize;
    for i in 0..=ticks {
        let v = lo + step * i as f64;
        let y = y_left(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    // right axis labels
    let rstep = nice_step(max_trades as f64, 4.0).max(1.0) as usize;
    let mut c = 0;
    while c <= max_trades {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="start" fill="{TRADE_COLOR}">{c}</text>"#,
            LEFT + plot_w + 6.0,
            y_right(c) + 4.0
        );
        c += rstep;
    }
    // x labels
    let label_every = n.div_ceil(6).max(1);
    for (i, l) in data.levels.iter().enumerate() {
        if i % label_every == 0 || i == n - 1 {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                x(l.date),
                TOP + plot_h + 18.0,
                l.date
            );
        }
    }
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#333333"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" transform="rotate(-90 20 {:.2})" text-anchor="middle">Level</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" transform="rotate(90 {:.2} {:.2})" text-anchor="middle" fill="{TRADE_COLOR}">Number of transactions</text>"#,
        WIDTH - 20.0,
        TOP + plot_h / 2.0,
        WIDTH - 20.0,
        TOP + plot_h / 2.0
    );

    // trade impulses
    let _ = writeln!(s, r#"<g stroke="{TRADE_COLOR}" stroke-width="2">"#);
    for (l, &count) in data.levels.iter().zip(&data.trade_counts) {
        if count > 0 {
            let xx = x(l.date);
            let _ = writeln!(
                s,
                r#"<line x1="{xx:.2}" y1="{:.2}" x2="{xx:.2}" y2="{:.2}"/>"#,
                y_right(0),
                y_right(count)
            );
        }
    }
    let _ = writeln!(s, "</g>");

    for (color, pick) in [
        (
            BENCH_COLOR,
            (|l: &LevelPoint| l.benchmark_level) as fn(&LevelPoint) -> f64,
        ),
        (INDEX_COLOR, |l: &LevelPoint| l.index_level),
    ] {
        let mut d = String::new();
        for (i, l) in data.levels.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2}",
                if i == 0 { "M" } else { " L" },
                x(l.date),
                y_left(pick(l))
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
    }

    // legend
    let lx = LEFT + 12.0;
    for (i, (color, label)) in [
        (INDEX_COLOR, "Sentiment index"),
        (BENCH_COLOR, "Benchmark"),
        (TRADE_COLOR, "Trades per day"),
    ]
    .iter()
    .enumerate()
    {
        let ly = TOP + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{label}</text>"#,
            lx + 24.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// What [`render_report`] produced.
#[derive(Debug, Clone)]
pub struct RenderedReport {
    pub table: SummaryTable,
    pub files: Vec<PathBuf>,
}

pub fn render_report(spec: &ReportSpec) -> Result<RenderedReport> {
    let data = load(spec)?;
    let table = summary_table(&data);
    fs::create_dir_all(&spec.output_dir).map_err(|e| Error::io(&spec.output_dir, e))?;
    let mut files = Vec::new();
    for format in &spec.formats {
        let (name, body) = match format {
            ReportFormat::Svg => (CHART_FILE, render_svg(&data, &spec.title)),
            ReportFormat::Csv => (SUMMARY_TABLE_FILE, table_csv(&table)),
        };
        let path = spec.output_dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    Ok(RenderedReport { table, files })
}
