//! Daily per-company sentiment.
//!
//! Articles are mapped onto trading dates in the market timezone: anything at
//! or after the cutoff (17:00 by default) counts toward the next calendar day,
//! and non-trading days roll forward to the next trading date. Scores are then
//! averaged per company and date, zero-filled where nothing was published, and
//! shrunk toward zero when fewer distinct sources than usual covered the
//! company:
//!
//! ```text
//! adj = u / mean(prior u)   if u < mean(prior u)
//!     = 1                   otherwise (or when there is no history)
//! ```

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use chrono::{DateTime, Days, FixedOffset, NaiveDate, NaiveTime, Timelike};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sentiment::ScoredArticle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjustmentHistory {
    /// Mean over earlier trading days on which the company had coverage.
    #[default]
    NonzeroDays,
    /// Mean over every earlier trading day, including zero-coverage days.
    AllDays,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    /// IANA timezone name.
    pub market_timezone: String,
    /// `HH:MM`, `24:00` disables the push to the next day.
    pub cutoff_local_time: String,
    pub adjustment_history: AdjustmentHistory,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            market_timezone: "Europe/Berlin".into(),
            cutoff_local_time: "17:00".into(),
            adjustment_history: AdjustmentHistory::NonzeroDays,
        }
    }
}

impl AggregationConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn timezone(&self) -> Result<Tz> {
        self.market_timezone
            .parse()
            .map_err(|_| Error::Config(format!("unknown timezone {:?}", self.market_timezone)))
    }

    pub fn cutoff(&self) -> Result<Cutoff> {
        Cutoff::parse(&self.cutoff_local_time)
    }
}

/// Local time-of-day from which articles count toward the next day, stored as
/// seconds after midnight in `0..=86400`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cutoff(u32);

impl Cutoff {
    pub const SECONDS_PER_DAY: u32 = 86_400;

    pub fn from_hm(hour: u32, minute: u32) -> Result<Self> {
        let secs = hour * 3600 + minute * 60;
        if minute >= 60 || secs > Self::SECONDS_PER_DAY {
            return Err(Error::Config(format!(
                "cutoff {hour:02}:{minute:02} out of range"
            )));
        }
        Ok(Self(secs))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cutoff {s:?} is not HH:MM"));
        let (h, m) = s.split_once(':').ok_or_else(bad)?;
        let h: u32 = h.parse().map_err(|_| bad())?;
        let m: u32 = m.parse().map_err(|_| bad())?;
        Self::from_hm(h, m)
    }

    fn is_reached_by(self, time: NaiveTime) -> bool {
        // leap-second nanos roll into the next second
        let secs = time.num_seconds_from_midnight() + u32::from(time.nanosecond() >= 1_000_000_000);
        secs >= self.0
    }
}

impl Default for Cutoff {
    fn default() -> Self {
        Self(17 * 3600)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradingCalendar {
    dates: Vec<NaiveDate>,
    timezone: Tz,
    cutoff: Cutoff,
}

impl TradingCalendar {
    pub fn new(dates: Vec<NaiveDate>, timezone: Tz, cutoff: Cutoff) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::Invalid("trading calendar is empty".into()));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!(
                "trading dates not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self {
            dates,
            timezone,
            cutoff,
        })
    }

    pub fn from_config(dates: Vec<NaiveDate>, config: &AggregationConfig) -> Result<Self> {
        Self::new(dates, config.timezone()?, config.cutoff()?)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn timezone(&self) -> Tz {
        self.timezone
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectiveDate {
    Assigned(NaiveDate),
    /// Fell before the first trading date; counted on the first date.
    ClampedToFirst(NaiveDate),
    /// Fell after the last trading date; not counted.
    AfterHorizon,
}

impl EffectiveDate {
    pub fn date(self) -> Option<NaiveDate> {
        match self {
            EffectiveDate::Assigned(d) | EffectiveDate::ClampedToFirst(d) => Some(d),
            EffectiveDate::AfterHorizon => None,
        }
    }
}

pub fn effective_trading_date(
    published_at: &DateTime<FixedOffset>,
    calendar: &TradingCalendar,
) -> EffectiveDate {
    let local = published_at.with_timezone(&calendar.timezone);
    let mut day = local.date_naive();
    if calendar.cutoff.is_reached_by(local.time()) {
        day = day + Days::new(1);
    }
    let dates = &calendar.dates;
    let idx = dates.partition_point(|d| *d < day);
    match dates.get(idx) {
        None => EffectiveDate::AfterHorizon,
        Some(&d) if day < dates[0] => EffectiveDate::ClampedToFirst(d),
        Some(&d) => EffectiveDate::Assigned(d),
    }
}

/// A score already placed on its trading date.
#[derive(Debug, Clone, PartialEq)]
pub struct DatedScore {
    pub company_id: String,
    pub date: NaiveDate,
    pub source: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawDaily {
    pub raw_mean: f64,
    pub article_count: usize,
    pub unique_sources: usize,
}

/// Zero-filled `universe x calendar` grid of raw daily means, row-major by
/// date then company (universe order). Records for companies or dates outside
/// the grid are ignored.
pub fn daily_raw_sentiment(
    records: &[DatedScore],
    universe: &[String],
    calendar: &TradingCalendar,
) -> Vec<RawDaily> {
    let company_idx: HashMap<&str, usize> = universe
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let n = universe.len();
    let mut sums = vec![0.0; n * calendar.dates.len()];
    let mut counts = vec![0usize; sums.len()];
    let mut sources: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); sums.len()];
    for r in records {
        let (Some(&c), Some(t)) = (
            company_idx.get(r.company_id.as_str()),
            calendar.index_of(r.date),
        ) else {
            continue;
        };
        let cell = t * n + c;
        sums[cell] += r.score;
        counts[cell] += 1;
        sources[cell].insert(r.source.as_str());
    }
    sums.iter()
        .zip(&counts)
        .zip(&sources)
        .map(|((&sum, &count), srcs)| RawDaily {
            raw_mean: if count == 0 { 0.0 } else { sum / count as f64 },
            article_count: count,
            unique_sources: srcs.len(),
        })
        .collect()
}

/// Shrink factor for a day with `u_today` distinct sources given the source
/// counts of earlier days.
pub fn source_adjustment(u_today: usize, prior_counts: &[usize]) -> f64 {
    adjustment_from_history(u_today, prior_counts.iter().sum(), prior_counts.len())
}

fn adjustment_from_history(u_today: usize, prior_sum: usize, prior_days: usize) -> f64 {
    if prior_days == 0 {
        return 1.0;
    }
    let mean = prior_sum as f64 / prior_days as f64;
    let u = u_today as f64;
    if u < mean {
        u / mean
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySentiment {
    pub company_id: String,
    pub date: NaiveDate,
    pub raw_mean: f64,
    pub adjusted: f64,
    pub article_count: usize,
    pub unique_sources: usize,
    pub adjustment: f64,
}

pub fn adjusted_daily_sentiment(
    company_id: &str,
    date: NaiveDate,
    raw: RawDaily,
    adjustment: f64,
) -> DailySentiment {
    DailySentiment {
        company_id: company_id.to_string(),
        date,
        raw_mean: raw.raw_mean,
        adjusted: raw.raw_mean * adjustment,
        article_count: raw.article_count,
        unique_sources: raw.unique_sources,
        adjustment,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    ClampedToFirstDate,
    AfterHorizon,
    UnknownCompany,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationDiagnostic {
    pub article_id: String,
    pub kind: DiagnosticKind,
}

#[derive(Debug, Clone, Default)]
pub struct AggregationOutput {
    /// Ordered by date, then universe order.
    pub daily: Vec<DailySentiment>,
    pub diagnostics: Vec<AggregationDiagnostic>,
}

impl AggregationOutput {
    pub fn count(&self, kind: DiagnosticKind) -> usize {
        self.diagnostics.iter().filter(|d| d.kind == kind).count()
    }
}

/// Full aggregation: date assignment, daily means, source adjustment.
pub fn aggregate(
    scored: &[ScoredArticle],
    universe: &[String],
    calendar: &TradingCalendar,
    history: AdjustmentHistory,
) -> AggregationOutput {
    let known: BTreeSet<&str> = universe.iter().map(String::as_str).collect();
    let mut diagnostics = Vec::new();
    let mut records = Vec::with_capacity(scored.len());
    for s in scored {
        if !known.contains(s.company_id.as_str()) {
            diagnostics.push(AggregationDiagnostic {
                article_id: s.id.clone(),
                kind: DiagnosticKind::UnknownCompany,
            });
            continue;
        }
        let date = match effective_trading_date(&s.published_at, calendar) {
            EffectiveDate::Assigned(d) => d,
            EffectiveDate::ClampedToFirst(d) => {
                diagnostics.push(AggregationDiagnostic {
                    article_id: s.id.clone(),
                    kind: DiagnosticKind::ClampedToFirstDate,
                });
                d
            }
            EffectiveDate::AfterHorizon => {
                diagnostics.push(AggregationDiagnostic {
                    article_id: s.id.clone(),
                    kind: DiagnosticKind::AfterHorizon,
                });
                continue;
            }
        };
        records.push(DatedScore {
            company_id: s.company_id.clone(),
            date,
            source: s.source.clone(),
            score: s.score.value(),
        });
    }

    let raw = daily_raw_sentiment(&records, universe, calendar);
    let n = universe.len();
    let mut daily = Vec::with_capacity(raw.len());
    // per company: (sum of prior u, number of prior days counted)
    let mut history_state = vec![(0usize, 0usize); n];
    for (t, &date) in calendar.dates.iter().enumerate() {
        for (c, company) in universe.iter().enumerate() {
            let cell = raw[t * n + c];
            let (sum, days) = &mut history_state[c];
            let adjustment = if cell.article_count == 0 {
                1.0
            } else {
                adjustment_from_history(cell.unique_sources, *sum, *days)
            };
            let counts_toward_history = match history {
                AdjustmentHistory::NonzeroDays => cell.unique_sources > 0,
                AdjustmentHistory::AllDays => true,
            };
            if counts_toward_history {
                *sum += cell.unique_sources;
                *days += 1;
            }
            daily.push(adjusted_daily_sentiment(company, date, cell, adjustment));
        }
    }
    AggregationOutput { daily, diagnostics }
}

#[derive(Debug, Serialize, Deserialize)]
struct SentimentRow {
    date: NaiveDate,
    company: String,
    raw_mean: f64,
    unique_sources: usize,
    adjustment: f64,
    adjusted: f64,
}

/// CSV columns: date, company, raw_mean, unique_sources, adjustment, adjusted.
pub fn write_sentiment_csv(path: impl AsRef<Path>, daily: &[DailySentiment]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for d in daily {
        w.serialize(SentimentRow {
            date: d.date,
            company: d.company_id.clone(),
            raw_mean: d.raw_mean,
            unique_sources: d.unique_sources,
            adjustment: d.adjustment,
            adjusted: d.adjusted,
        })
        .map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Adjusted sentiment laid out `[date][company]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentGrid {
    dates: Vec<NaiveDate>,
    companies: Vec<String>,
    values: Vec<f64>,
}

impl SentimentGrid {
    pub fn zeros(dates: Vec<NaiveDate>, companies: Vec<String>) -> Self {
        let values = vec![0.0; dates.len() * companies.len()];
        Self {
            dates,
            companies,
            values,
        }
    }

    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        dates: Vec<NaiveDate>,
        companies: Vec<String>,
    ) -> Result<Self> {
        if rows.len() != dates.len() || rows.iter().any(|r| r.len() != companies.len()) {
            return Err(Error::Invalid("sentiment grid shape mismatch".into()));
        }
        Ok(Self {
            dates,
            companies,
            values: rows.concat(),
        })
    }

    /// Builds the grid from `(company, date, value)` lookups; every cell must
    /// be present.
    pub fn from_lookup(
        dates: &[NaiveDate],
        companies: &[String],
        lookup: &HashMap<(String, NaiveDate), f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(dates.len() * companies.len());
        for &date in dates {
            for company in companies {
                let v = lookup
                    .get(&(company.clone(), date))
                    .copied()
                    .ok_or_else(|| Error::MissingRow {
                        what: "sentiment",
                        company: company.clone(),
                        date,
                    })?;
                if !v.is_finite() {
                    return Err(Error::Invalid(format!(
                        "non-finite sentiment for {company} on {date}"
                    )));
                }
                values.push(v);
            }
        }
        Ok(Self {
            dates: dates.to_vec(),
            companies: companies.to_vec(),
            values,
        })
    }

    pub fn from_daily(
        daily: &[DailySentiment],
        dates: &[NaiveDate],
        companies: &[String],
    ) -> Result<Self> {
        let lookup = daily
            .iter()
            .map(|d| ((d.company_id.clone(), d.date), d.adjusted))
            .collect();
        Self::from_lookup(dates, companies, &lookup)
    }

    /// Reads the `adjusted` column of a sentiment CSV (as written by
    /// [`write_sentiment_csv`]); only `date`, `company` and `adjusted` are
    /// required.
    pub fn load_csv(
        path: impl AsRef<Path>,
        dates: &[NaiveDate],
        companies: &[String],
    ) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            date: NaiveDate,
            company: String,
            adjusted: f64,
        }
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        let mut lookup = HashMap::new();
        for row in r.deserialize() {
            let row: Row = row.map_err(|e| Error::format(path, e.to_string()))?;
            lookup.insert((row.company, row.date), row.adjusted);
        }
        Self::from_lookup(dates, companies, &lookup)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn companies(&self) -> &[String] {
        &self.companies
    }

    pub fn row(&self, date_idx: usize) -> &[f64] {
        let n = self.companies.len();
        &self.values[date_idx * n..(date_idx + 1) * n]
    }

    pub fn row_mut(&mut self, date_idx: usize) -> &mut [f64] {
        let n = self.companies.len();
        &mut self.values[date_idx * n..(date_idx + 1) * n]
    }
}
