use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "invalid class probabilities (negative={p_negative}, neutral={p_neutral}, positive={p_positive}): {reason}"
    )]
    InvalidProbabilities {
        p_negative: f64,
        p_neutral: f64,
        p_positive: f64,
        reason: &'static str,
    },

    #[error("no pre-scored probabilities for article {0}")]
    MissingScore(String),

    #[error("infeasible weight problem: {universe} names x cap {cap} < budget_lo {budget_lo}; need at least {required} names")]
    Infeasible {
        universe: usize,
        cap: f64,
        budget_lo: f64,
        required: usize,
    },

    #[error("key sets differ: {0}")]
    KeyMismatch(String),

    #[error("nonpositive price {price} for {company} on {date}")]
    NonPositivePrice {
        company: String,
        date: NaiveDate,
        price: f64,
    },

    #[error("missing {what} for {company} on {date}")]
    MissingRow {
        what: &'static str,
        company: String,
        date: NaiveDate,
    },

    #[error("portfolio wiped out on {date}: drift denominator {denominator}")]
    WipedOut { date: NaiveDate, denominator: f64 },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
