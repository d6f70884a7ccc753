//! Day-by-day simulation of the sentiment index.
//!
//! Each trading day the engine applies close-to-close returns to the weights
//! held, lets those weights drift, re-solves the weight problem against the
//! drifted prior, and charges `tc_rate` per unit of turnover. Cash (one minus
//! the invested weight) earns nothing.
//!
//! With `signal_lag_days = L >= 1`, the weights chosen at the close of day
//! `t` use sentiment dated `t - L + 1` and first earn the returns of day
//! `t + 1`. `L = 0` rebalances before day `t`'s return using day `t`
//! sentiment, which peeks at information published during the day.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::aggregation::SentimentGrid;
use crate::error::{Error, Result};
use crate::optimizer::{self, OptimizerConfig};

/// Closing prices laid out `[date][company]`, companies in ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    companies: Vec<String>,
    closes: Vec<f64>,
}

impl PriceSeries {
    /// Every company needs a positive close on every date.
    pub fn from_records(
        records: impl IntoIterator<Item = (NaiveDate, String, f64)>,
    ) -> Result<Self> {
        let mut cells: HashMap<(NaiveDate, String), f64> = HashMap::new();
        let mut dates = BTreeSet::new();
        let mut companies = BTreeSet::new();
        for (date, company, close) in records {
            if !(close.is_finite() && close > 0.0) {
                return Err(Error::NonPositivePrice {
                    company,
                    date,
                    price: close,
                });
            }
            dates.insert(date);
            companies.insert(company.clone());
            if cells.insert((date, company.clone()), close).is_some() {
                return Err(Error::Invalid(format!(
                    "duplicate price row for {company} on {date}"
                )));
            }
        }
        let dates: Vec<NaiveDate> = dates.into_iter().collect();
        let companies: Vec<String> = companies.into_iter().collect();
        let mut closes = Vec::with_capacity(dates.len() * companies.len());
        for &date in &dates {
            for company in &companies {
                let close =
                    cells
                        .get(&(date, company.clone()))
                        .ok_or_else(|| Error::MissingRow {
                            what: "price",
                            company: company.clone(),
                            date,
                        })?;
                closes.push(*close);
            }
        }
        Ok(Self {
            dates,
            companies,
            closes,
        })
    }

    /// CSV with columns `date, company, close`.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            date: NaiveDate,
            company: String,
            close: f64,
        }
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        let mut rows = Vec::new();
        for row in r.deserialize() {
            let row: Row = row.map_err(|e| Error::format(path, e.to_string()))?;
            rows.push((row.date, row.company, row.close));
        }
        Self::from_records(rows)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        w.write_record(["date", "company", "close"])
            .map_err(|e| Error::format(path, e.to_string()))?;
        for (t, date) in self.dates.iter().enumerate() {
            for (c, company) in self.companies.iter().enumerate() {
                w.serialize((date, company, self.close(t, c)))
                    .map_err(|e| Error::format(path, e.to_string()))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn companies(&self) -> &[String] {
        &self.companies
    }

    pub fn close(&self, date_idx: usize, company_idx: usize) -> f64 {
        self.closes[date_idx * self.companies.len() + company_idx]
    }

    pub fn row(&self, date_idx: usize) -> &[f64] {
        let n = self.companies.len();
        &self.closes[date_idx * n..(date_idx + 1) * n]
    }

    /// Simple returns from `date_idx - 1` to `date_idx`.
    pub fn returns(&self, date_idx: usize) -> Result<Vec<f64>> {
        let (today, prev) = (self.row(date_idx), self.row(date_idx - 1));
        today
            .iter()
            .zip(prev)
            .map(|(&p, &q)| simple_return(p, q))
            .collect()
    }
}

/// Loads a `date, level` CSV and rebases it onto `initial_level` at the first
/// trading date. Every trading date must be present.
pub fn load_benchmark_csv(
    path: impl AsRef<Path>,
    dates: &[NaiveDate],
    initial_level: f64,
) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        date: NaiveDate,
        level: f64,
    }
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut by_date = HashMap::new();
    for row in r.deserialize() {
        let row: Row = row.map_err(|e| Error::format(path, e.to_string()))?;
        if row.level.is_nan() || row.level <= 0.0 {
            return Err(Error::format(
                path,
                format!("nonpositive level on {}", row.date),
            ));
        }
        by_date.insert(row.date, row.level);
    }
    let raw: Vec<f64> = dates
        .iter()
        .map(|d| {
            by_date.get(d).copied().ok_or_else(|| Error::MissingRow {
                what: "benchmark level",
                company: "benchmark".into(),
                date: *d,
            })
        })
        .collect::<Result<_>>()?;
    let base = raw.first().copied().unwrap_or(1.0);
    Ok(raw.iter().map(|l| l / base * initial_level).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    /// Cost per unit of turnover, as a fraction of index notional.
    pub tc_rate: f64,
    pub signal_lag_days: usize,
    pub initial_level: f64,
    #[serde(flatten)]
    pub optimizer: OptimizerConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            tc_rate: 0.0005,
            signal_lag_days: 1,
            initial_level: 100.0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl BacktestConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tc_rate >= 0.0 && self.tc_rate < 1.0) {
            return Err(Error::Config(format!(
                "tc_rate must be in [0, 1), got {}",
                self.tc_rate
            )));
        }
        if !(self.initial_level > 0.0 && self.initial_level.is_finite()) {
            return Err(Error::Config("initial_level must be positive".into()));
        }
        self.optimizer.validate()
    }
}

/// `(p_t - p_prev) / p_prev`.
pub fn simple_return(p_t: f64, p_prev: f64) -> Result<f64> {
    if !(p_t > 0.0 && p_prev > 0.0) {
        return Err(Error::Invalid(format!(
            "prices must be positive, got {p_t} and {p_prev}"
        )));
    }
    Ok((p_t - p_prev) / p_prev)
}

/// Weights after one day of price moves, as fractions of the new index value.
/// `None` when the portfolio value would be non-positive.
pub fn drift_weights(weights: &[f64], returns: &[f64]) -> Option<Vec<f64>> {
    let gross: f64 = weights.iter().zip(returns).map(|(w, r)| w * r).sum();
    let denominator = 1.0 + gross;
    if denominator.is_nan() || denominator <= 0.0 {
        return None;
    }
    Some(
        weights
            .iter()
            .zip(returns)
            .map(|(w, r)| w * (1.0 + r) / denominator)
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransactionCosts {
    pub total: f64,
    pub per_name: Vec<f64>,
}

/// `tc_rate * |new - drifted|` per name, summed.
pub fn transaction_costs(new: &[f64], drifted: &[f64], tc_rate: f64) -> TransactionCosts {
    let per_name: Vec<f64> = new
        .iter()
        .zip(drifted)
        .map(|(n, d)| tc_rate * (n - d).abs())
        .collect();
    TransactionCosts {
        total: tc_rate
            * new
                .iter()
                .zip(drifted)
                .map(|(n, d)| (n - d).abs())
                .sum::<f64>(),
        per_name,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeRecord {
    pub company: String,
    pub delta_weight: f64,
    pub cost: f64,
}

/// Everything that happened on one trading day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub date: NaiveDate,
    /// Simple returns of each name over the day (zeros on the first day).
    pub returns: Vec<f64>,
    /// Weights that earned this day's return.
    pub held: Vec<f64>,
    pub gross_return: f64,
    /// Prior handed to the optimizer.
    pub prior: Vec<f64>,
    pub target: Vec<f64>,
    pub cost: f64,
    pub net_return: f64,
    pub level: f64,
    pub benchmark_level: f64,
    pub trades: Vec<TradeRecord>,
    /// The day the index was first funded.
    pub initial: bool,
}

/// Carried between days.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestState {
    /// Next day to simulate.
    pub day: usize,
    pub level: f64,
    pub benchmark_level: f64,
    /// Weights as of the last close, after any rebalance (lag >= 1) or after
    /// drift (lag 0).
    pub weights: Vec<f64>,
}

impl BacktestState {
    pub fn initial(universe: usize, cfg: &BacktestConfig) -> Self {
        Self {
            day: 0,
            level: cfg.initial_level,
            benchmark_level: cfg.initial_level,
            weights: vec![0.0; universe],
        }
    }
}

pub struct BacktestInputs<'a> {
    pub prices: &'a PriceSeries,
    pub sentiments: &'a SentimentGrid,
    /// Rebased benchmark levels; equal-weight basket when `None`.
    pub benchmark: Option<&'a [f64]>,
}

impl BacktestInputs<'_> {
    fn check(&self) -> Result<()> {
        if self.prices.dates().is_empty() {
            return Err(Error::Invalid("empty date range".into()));
        }
        if self.sentiments.dates() != self.prices.dates() {
            return Err(Error::KeyMismatch(
                "sentiment dates differ from price dates".into(),
            ));
        }
        if self.sentiments.companies() != self.prices.companies() {
            return Err(Error::KeyMismatch(
                "sentiment companies differ from price companies".into(),
            ));
        }
        if let Some(b) = self.benchmark {
            if b.len() != self.prices.dates().len() {
                return Err(Error::KeyMismatch(
                    "benchmark length differs from price dates".into(),
                ));
            }
        }
        Ok(())
    }

    fn signal(&self, k: usize, lag: usize) -> Vec<f64> {
        // sentiment that drives the weights chosen on day k
        let idx = if lag == 0 {
            Some(k)
        } else {
            (k + 1).checked_sub(lag)
        };
        match idx {
            Some(i) => self.sentiments.row(i).to_vec(),
            None => vec![0.0; self.prices.companies().len()],
        }
    }
}

/// Advances the simulation by one trading day.
pub fn step_day(
    state: &BacktestState,
    inputs: &BacktestInputs<'_>,
    cfg: &BacktestConfig,
) -> Result<(BacktestState, DayRecord)> {
    let k = state.day;
    let prices = inputs.prices;
    let date = *prices
        .dates()
        .get(k)
        .ok_or_else(|| Error::Invalid(format!("day {k} is past the last trading date")))?;
    let n = prices.companies().len();
    let returns = if k == 0 {
        vec![0.0; n]
    } else {
        prices.returns(k)?
    };
    let signal = inputs.signal(k, cfg.signal_lag_days);
    let wiped = |held: &[f64]| Error::WipedOut {
        date,
        denominator: 1.0 + held.iter().zip(&returns).map(|(w, r)| w * r).sum::<f64>(),
    };

    let (held, prior, target, next_weights) = if cfg.signal_lag_days == 0 {
        let prior = state.weights.clone();
        let target = optimizer::solve(&signal, &prior, &cfg.optimizer)?;
        let held = target.clone();
        let drifted = drift_weights(&held, &returns).ok_or_else(|| wiped(&held))?;
        (held, prior, target, drifted)
    } else {
        let held = state.weights.clone();
        let prior = drift_weights(&held, &returns).ok_or_else(|| wiped(&held))?;
        let target = optimizer::solve(&signal, &prior, &cfg.optimizer)?;
        (held, prior, target.clone(), target)
    };

    let gross_return: f64 = held.iter().zip(&returns).map(|(w, r)| w * r).sum();
    let costs = transaction_costs(&target, &prior, cfg.tc_rate);
    let net_return = gross_return - costs.total;
    let level = state.level * (1.0 + net_return);
    let benchmark_level = match inputs.benchmark {
        Some(b) => b[k],
        None => state.benchmark_level * (1.0 + returns.iter().sum::<f64>() / n as f64),
    };
    let trades = optimizer::trade_deltas(&target, &prior, cfg.optimizer.trade_epsilon)
        .into_iter()
        .map(|(i, d)| TradeRecord {
            company: prices.companies()[i].clone(),
            delta_weight: d,
            cost: costs.per_name[i],
        })
        .collect();

    let record = DayRecord {
        date,
        returns,
        held,
        gross_return,
        prior,
        target,
        cost: costs.total,
        net_return,
        level,
        benchmark_level,
        trades,
        initial: k == 0,
    };
    let next = BacktestState {
        day: k + 1,
        level,
        benchmark_level,
        weights: next_weights,
    };
    Ok((next, record))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TradeStatistics {
    pub total_trades: usize,
    pub trading_days: usize,
    pub single_trade_days: usize,
    pub max_trades_per_day: usize,
    /// trades-per-day -> number of days with exactly that many trades
    pub trades_per_day_histogram: BTreeMap<usize, usize>,
}

impl TradeStatistics {
    /// From per-day trade counts (initial day already excluded).
    pub fn from_daily_counts(counts: impl IntoIterator<Item = usize>) -> Self {
        let mut stats = Self::default();
        for k in counts.into_iter().filter(|&k| k > 0) {
            stats.total_trades += k;
            stats.trading_days += 1;
            *stats.trades_per_day_histogram.entry(k).or_default() += 1;
            stats.max_trades_per_day = stats.max_trades_per_day.max(k);
        }
        stats.single_trade_days = stats.trades_per_day_histogram.get(&1).copied().unwrap_or(0);
        stats
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSummary {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub trading_days: usize,
    pub final_index_level: f64,
    pub final_benchmark_level: f64,
    /// `None` with fewer than two dates.
    pub index_annualized_return: Option<f64>,
    pub benchmark_annualized_return: Option<f64>,
    pub total_costs: f64,
    pub initial_investment_trades: usize,
    pub trades: TradeStatistics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub companies: Vec<String>,
    pub days: Vec<DayRecord>,
    pub summary: BacktestSummary,
}

impl BacktestResult {
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.days.iter().map(|d| d.date).collect()
    }

    pub fn levels(&self) -> Vec<f64> {
        self.days.iter().map(|d| d.level).collect()
    }

    pub fn benchmark_levels(&self) -> Vec<f64> {
        self.days.iter().map(|d| d.benchmark_level).collect()
    }
}

/// `(L_end / L_start)^(365.25 / days) - 1` over calendar days elapsed.
pub fn annualized_return(levels: &[f64], dates: &[NaiveDate]) -> Result<f64> {
    if levels.len() < 2 || levels.len() != dates.len() {
        return Err(Error::Invalid(
            "annualized return needs >= 2 aligned points".into(),
        ));
    }
    if let Some(l) = levels.iter().find(|l| l.is_nan() || **l <= 0.0) {
        return Err(Error::Invalid(format!("nonpositive level {l}")));
    }
    let days = (dates[dates.len() - 1] - dates[0]).num_days();
    if days <= 0 {
        return Err(Error::Invalid(
            "annualized return needs elapsed calendar time".into(),
        ));
    }
    annualized_over_days(levels[0], levels[levels.len() - 1], days as f64)
}

pub(crate) fn annualized_over_days(start: f64, end: f64, days: f64) -> Result<f64> {
    if !(start > 0.0 && end > 0.0) {
        return Err(Error::Invalid("nonpositive level".into()));
    }
    Ok((end / start).powf(365.25 / days) - 1.0)
}

/// Trade counts excluding the initial funding day.
pub fn trade_statistics(result: &BacktestResult) -> TradeStatistics {
    TradeStatistics::from_daily_counts(
        result
            .days
            .iter()
            .filter(|d| !d.initial)
            .map(|d| d.trades.len()),
    )
}

pub fn run_backtest(inputs: &BacktestInputs<'_>, cfg: &BacktestConfig) -> Result<BacktestResult> {
    cfg.validate()?;
    inputs.check()?;
    let n = inputs.prices.companies().len();
    cfg.optimizer.check_feasible(n)?;

    let mut state = BacktestState::initial(n, cfg);
    if let Some(b) = inputs.benchmark {
        state.benchmark_level = b[0];
    }
    let mut days = Vec::with_capacity(inputs.prices.dates().len());
    for _ in inputs.prices.dates() {
        let (next, record) = step_day(&state, inputs, cfg)?;
        days.push(record);
        state = next;
    }

    let dates: Vec<NaiveDate> = days.iter().map(|d| d.date).collect();
    let levels: Vec<f64> = days.iter().map(|d| d.level).collect();
    let bench: Vec<f64> = days.iter().map(|d| d.benchmark_level).collect();
    let mut result = BacktestResult {
        companies: inputs.prices.companies().to_vec(),
        summary: BacktestSummary {
            start_date: dates[0],
            end_date: dates[dates.len() - 1],
            trading_days: dates.len(),
            final_index_level: levels[levels.len() - 1],
            final_benchmark_level: bench[bench.len() - 1],
            index_annualized_return: annualized_return(&levels, &dates).ok(),
            benchmark_annualized_return: annualized_return(&bench, &dates).ok(),
            total_costs: days.iter().map(|d| d.cost).sum(),
            initial_investment_trades: days
                .iter()
                .filter(|d| d.initial)
                .map(|d| d.trades.len())
                .sum(),
            trades: TradeStatistics::default(),
        },
        days,
    };
    result.summary.trades = trade_statistics(&result);
    Ok(result)
}

#[derive(Serialize)]
struct LevelRow {
    date: NaiveDate,
    index_level: f64,
    benchmark_level: f64,
}

pub const LEVELS_FILE: &str = "levels.csv";
pub const TRADES_FILE: &str = "trades.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes `levels.csv`, `trades.csv` and `summary.json` into `dir`.
pub fn write_outputs(dir: impl AsRef<Path>, result: &BacktestResult) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(LEVELS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::format(&path, e.to_string()))?;
    for d in &result.days {
        w.serialize(LevelRow {
            date: d.date,
            index_level: d.level,
            benchmark_level: d.benchmark_level,
        })
        .map_err(|e| Error::format(&path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(TRADES_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::format(&path, e.to_string()))?;
    // header even when there are no trades
    w.write_record(["date", "company", "delta_weight", "cost"])
        .map_err(|e| Error::format(&path, e.to_string()))?;
    for d in &result.days {
        for t in &d.trades {
            w.serialize((d.date, t.company.as_str(), t.delta_weight, t.cost))
                .map_err(|e| Error::format(&path, e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&result.summary)
        .map_err(|e| Error::format(&path, e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}
