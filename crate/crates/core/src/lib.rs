//! Daily news-sentiment index construction and backtesting.
//!
//! Articles are filtered ([`corpus`]), scored ([`sentiment`]), aggregated to
//! per-company trading-day sentiment ([`aggregation`]), turned into
//! turnover-aware portfolio weights ([`optimizer`]) and simulated with costs
//! ([`backtest`]). [`report`] renders the backtest output; [`pipeline`] wires
//! the stages together.

pub mod aggregation;
pub mod backtest;
pub mod corpus;
pub mod error;
pub mod optimizer;
pub mod pipeline;
pub mod report;
pub mod sentiment;
pub mod synthetic;

pub use error::{Error, Result};
