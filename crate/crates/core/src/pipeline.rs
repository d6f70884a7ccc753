//! End-to-end run: filter, score, aggregate onto the price calendar, backtest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::{
    aggregate, AggregationConfig, AggregationOutput, SentimentGrid, TradingCalendar,
};
use crate::backtest::{run_backtest, BacktestConfig, BacktestInputs, BacktestResult, PriceSeries};
use crate::corpus::{run_filters, FilterConfig, FilterOutcome, NewsArticle};
use crate::error::{Error, Result};
use crate::sentiment::{score_articles, ScoreMode, ScoredArticle, ScoringProvider};

/// All stage settings in one flat JSON object. Missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub filter: FilterConfig,
    #[serde(flatten)]
    pub aggregation: AggregationConfig,
    #[serde(flatten)]
    pub backtest: BacktestConfig,
    #[serde(default)]
    pub score_mode: ScoreMode,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.filter = cfg.filter.normalized();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.aggregation.timezone()?;
        self.aggregation.cutoff()?;
        self.backtest.validate()
    }
}

pub struct PipelineOutput {
    pub filtered: FilterOutcome,
    pub scored: Vec<ScoredArticle>,
    pub aggregation: AggregationOutput,
    pub sentiments: SentimentGrid,
    pub backtest: BacktestResult,
}

pub fn run_pipeline(
    articles: Vec<NewsArticle>,
    provider: &dyn ScoringProvider,
    prices: &PriceSeries,
    benchmark: Option<&[f64]>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    let filtered = run_filters(articles, &cfg.filter);
    let scored = score_articles(&filtered.kept, provider, cfg.score_mode)?;
    let calendar = TradingCalendar::from_config(prices.dates().to_vec(), &cfg.aggregation)?;
    let aggregation = aggregate(
        &scored,
        prices.companies(),
        &calendar,
        cfg.aggregation.adjustment_history,
    );
    let sentiments =
        SentimentGrid::from_daily(&aggregation.daily, prices.dates(), prices.companies())?;
    let inputs = BacktestInputs {
        prices,
        sentiments: &sentiments,
        benchmark,
    };
    let backtest = run_backtest(&inputs, &cfg.backtest)?;
    Ok(PipelineOutput {
        filtered,
        scored,
        aggregation,
        sentiments,
        backtest,
    })
}
