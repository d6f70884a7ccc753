//! Seeded synthetic inputs: a price panel, a small lexicon and an article
//! stream whose tone is loosely tied to the next day's return. Used for demos
//! and for the larger randomized checks.

use chrono::{Datelike, Days, NaiveDate, TimeZone, Weekday};
use chrono_tz::Tz;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregation::SentimentGrid;
use crate::backtest::PriceSeries;
use crate::corpus::NewsArticle;
use crate::error::{Error, Result};
use crate::sentiment::Lexicon;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub companies: usize,
    pub trading_days: usize,
    pub start: NaiveDate,
    pub seed: u64,
    /// Mean articles per company and calendar day.
    pub articles_per_day: f64,
    pub daily_volatility: f64,
    pub timezone: Tz,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            companies: 12,
            trading_days: 250,
            start: NaiveDate::from_ymd_opt(2019, 1, 2).expect("valid date"),
            seed: 7,
            articles_per_day: 1.5,
            daily_volatility: 0.015,
            timezone: chrono_tz::Europe::Berlin,
        }
    }
}

pub struct SyntheticData {
    pub articles: Vec<NewsArticle>,
    pub prices: PriceSeries,
    pub lexicon: Lexicon,
}

const POSITIVE: &[(&str, f64)] = &[
    ("gewinn", 0.62),
    ("rekord", 0.81),
    ("steigert", 0.55),
    ("upgrade", 0.71),
    ("profit", 0.58),
    ("strong", 0.66),
];
const NEGATIVE: &[(&str, f64)] = &[
    ("verlust", -0.66),
    ("warnung", -0.57),
    ("klage", -0.59),
    ("downgrade", -0.74),
    ("loss", -0.69),
    ("schwach", -0.54),
];
const FILLER: &[&str] = &[
    "aktie",
    "quartal",
    "analysten",
    "markt",
    "shares",
    "outlook",
    "umsatz",
];
const SOURCES: &[&str] = &[
    "handelsblatt",
    "faz",
    "reuters",
    "boerse-online",
    "spiegel",
    "dpa",
];

/// Monday-to-Friday dates from `start`.
pub fn weekday_calendar(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut day = start;
    while out.len() < count {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day = day + Days::new(1);
    }
    out
}

pub fn company_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i:02}")).collect()
}

fn uniform_noise(rng: &mut ChaCha8Rng) -> f64 {
    // zero mean, unit variance
    (rng.random::<f64>() - 0.5) * 12f64.sqrt()
}

pub fn random_prices(
    rng: &mut ChaCha8Rng,
    dates: &[NaiveDate],
    companies: &[String],
    vol: f64,
) -> Result<PriceSeries> {
    let mut records = Vec::with_capacity(dates.len() * companies.len());
    for company in companies {
        let mut p: f64 = rng.random_range(20.0..200.0);
        for &d in dates {
            records.push((d, company.clone(), p));
            p *= 1.0 + 0.0003 + vol * uniform_noise(rng);
        }
    }
    PriceSeries::from_records(records)
}

/// Independent uniform sentiments in `[-1, 1]`, with roughly `sparsity` of
/// the cells set to zero.
pub fn random_sentiments(
    rng: &mut ChaCha8Rng,
    dates: &[NaiveDate],
    companies: &[String],
    sparsity: f64,
) -> SentimentGrid {
    let mut grid = SentimentGrid::zeros(dates.to_vec(), companies.to_vec());
    for t in 0..dates.len() {
        for v in grid.row_mut(t) {
            if rng.random::<f64>() >= sparsity {
                *v = rng.random_range(-1.0..=1.0);
            }
        }
    }
    grid
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if cfg.companies == 0 || cfg.trading_days == 0 {
        return Err(Error::Config(
            "synthetic data needs companies and days".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dates = weekday_calendar(cfg.start, cfg.trading_days);
    let companies = company_ids(cfg.companies);
    let prices = random_prices(&mut rng, &dates, &companies, cfg.daily_volatility)?;

    let lexicon = Lexicon::new(
        POSITIVE
            .iter()
            .chain(NEGATIVE)
            .map(|(k, v)| (k.to_string(), *v))
            .collect(),
    )?;

    let mut articles = Vec::new();
    let last = dates[dates.len() - 1];
    let mut day = cfg.start;
    let mut next_id = 0usize;
    while day <= last {
        // tone follows the next trading day's move
        let next_idx = dates.partition_point(|d| *d <= day).min(dates.len() - 1);
        for (c, company) in companies.iter().enumerate() {
            let count = poisson(&mut rng, cfg.articles_per_day);
            let move_ahead = if next_idx > 0 {
                prices.close(next_idx, c) / prices.close(next_idx - 1, c) - 1.0
            } else {
                0.0
            };
            for _ in 0..count {
                let bullish = rng.random::<f64>()
                    < 0.5 + (move_ahead / cfg.daily_volatility).clamp(-1.0, 1.0) * 0.3;
                let pool = if bullish { POSITIVE } else { NEGATIVE };
                let mut words = vec![company.to_uppercase()];
                for _ in 0..rng.random_range(1..=2) {
                    words.push(pool.choose(&mut rng).expect("non-empty").0.to_string());
                }
                words.push(FILLER.choose(&mut rng).expect("non-empty").to_string());
                let minute = rng.random_range(6 * 60..22 * 60);
                let local = cfg
                    .timezone
                    .from_local_datetime(
                        &day.and_hms_opt(minute / 60, minute % 60, 0)
                            .expect("valid time"),
                    )
                    .earliest()
                    .ok_or_else(|| Error::Invalid("nonexistent local time".into()))?;
                next_id += 1;
                articles.push(NewsArticle {
                    id: format!("s{next_id:06}"),
                    company_id: company.clone(),
                    source: SOURCES.choose(&mut rng).expect("non-empty").to_string(),
                    published_at: local.fixed_offset(),
                    headline: words.join(" "),
                    body: None,
                    language: if rng.random::<f64>() < 0.6 {
                        "de"
                    } else {
                        "en"
                    }
                    .into(),
                });
            }
        }
        day = day + Days::new(1);
    }

    Ok(SyntheticData {
        articles,
        prices,
        lexicon,
    })
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    // Knuth; means here are small
    let limit = (-mean).exp();
    let mut k = 0;
    let mut p = rng.random::<f64>();
    while p > limit {
        k += 1;
        p *= rng.random::<f64>();
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig {
            trading_days: 20,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.articles, b.articles);
        assert_eq!(a.prices, b.prices);
        assert_eq!(a.prices.dates().len(), 20);
        assert_eq!(a.prices.companies().len(), 12);
        assert!(!a.articles.is_empty());
    }

    #[test]
    fn calendar_skips_weekends() {
        let start = NaiveDate::from_ymd_opt(2019, 3, 8).unwrap(); // Friday
        let d = weekday_calendar(start, 2);
        assert_eq!(d[1], NaiveDate::from_ymd_opt(2019, 3, 11).unwrap());
    }
}
