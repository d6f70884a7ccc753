//! Article-level sentiment: three-class probabilities mapped to a polarity
//! score in [-1, 1].
//!
//! Probabilities come from a [`ScoringProvider`]. Two providers ship here: a
//! lookup into a pre-scored file (the usual route, with probabilities from an
//! external classifier) and a small deterministic lexicon scorer so the full
//! pipeline runs without any model.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::corpus::NewsArticle;
use crate::error::{Error, Result};

/// Allowed deviation of the three probabilities from summing to one.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProbabilities")]
pub struct ClassProbabilities {
    p_negative: f64,
    p_neutral: f64,
    p_positive: f64,
}

#[derive(Deserialize)]
struct RawProbabilities {
    p_negative: f64,
    p_neutral: f64,
    p_positive: f64,
}

impl TryFrom<RawProbabilities> for ClassProbabilities {
    type Error = Error;

    fn try_from(r: RawProbabilities) -> Result<Self> {
        ClassProbabilities::new(r.p_negative, r.p_neutral, r.p_positive)
    }
}

impl ClassProbabilities {
    pub fn new(p_negative: f64, p_neutral: f64, p_positive: f64) -> Result<Self> {
        let reject = |reason| Error::InvalidProbabilities {
            p_negative,
            p_neutral,
            p_positive,
            reason,
        };
        let parts = [p_negative, p_neutral, p_positive];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(reject("component outside [0, 1]"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(reject("components do not sum to 1"));
        }
        Ok(Self {
            p_negative,
            p_neutral,
            p_positive,
        })
    }

    pub fn negative(&self) -> f64 {
        self.p_negative
    }

    pub fn neutral(&self) -> f64 {
        self.p_neutral
    }

    pub fn positive(&self) -> f64 {
        self.p_positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SentimentScore(f64);

impl SentimentScore {
    pub fn new(value: f64) -> Result<Self> {
        if (-1.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Invalid(format!("sentiment {value} outside [-1, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// How a probability triple collapses to one signed number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Probability of the most likely class, signed by that class
    /// (negative -1, neutral 0, positive +1).
    #[default]
    WinningClass,
    /// `p_positive - p_negative`.
    Expectation,
}

/// Winning-class polarity. Exact ties resolve toward positive, then neutral.
pub fn polarity_score(probs: &ClassProbabilities) -> SentimentScore {
    let mut best = (probs.p_negative, -1.0);
    if probs.p_neutral >= best.0 {
        best = (probs.p_neutral, 0.0);
    }
    if probs.p_positive >= best.0 {
        best = (probs.p_positive, 1.0);
    }
    // neutral wins yield -0.0 or 0.0; normalize
    SentimentScore(best.0 * best.1 + 0.0)
}

pub fn polarity_score_with(probs: &ClassProbabilities, mode: ScoreMode) -> SentimentScore {
    match mode {
        ScoreMode::WinningClass => polarity_score(probs),
        ScoreMode::Expectation => {
            SentimentScore((probs.p_positive - probs.p_negative).clamp(-1.0, 1.0))
        }
    }
}

/// Source of class probabilities for an article. Implementations must be
/// deterministic and safe for concurrent reads.
pub trait ScoringProvider: Send + Sync {
    fn class_probabilities(&self, article: &NewsArticle) -> Result<ClassProbabilities>;
}

/// Probabilities computed elsewhere, keyed by article id.
#[derive(Debug, Clone, Default)]
pub struct PrescoredProvider {
    by_id: HashMap<String, ClassProbabilities>,
}

#[derive(Deserialize)]
struct PrescoredRow {
    id: String,
    #[serde(flatten)]
    probs: ClassProbabilities,
}

impl PrescoredProvider {
    pub fn from_map(by_id: HashMap<String, ClassProbabilities>) -> Self {
        Self { by_id }
    }

    /// JSON-lines with `id, p_negative, p_neutral, p_positive`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut by_id = HashMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: PrescoredRow = serde_json::from_str(&line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", idx + 1)))?;
            by_id.insert(row.id, row.probs);
        }
        Ok(Self { by_id })
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

impl ScoringProvider for PrescoredProvider {
    fn class_probabilities(&self, article: &NewsArticle) -> Result<ClassProbabilities> {
        self.by_id
            .get(&article.id)
            .copied()
            .ok_or_else(|| Error::MissingScore(article.id.clone()))
    }
}

/// Token -> polarity weight in [-1, 1]. Keys are stored lowercase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon(HashMap<String, f64>);

impl Lexicon {
    pub fn new(entries: HashMap<String, f64>) -> Result<Self> {
        let mut out = HashMap::with_capacity(entries.len());
        for (token, value) in entries {
            if !(-1.0..=1.0).contains(&value) {
                return Err(Error::Config(format!(
                    "lexicon value {value} for {token:?} outside [-1, 1]"
                )));
            }
            out.insert(token.to_lowercase(), value);
        }
        Ok(Self(out))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: HashMap<String, f64> =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        Self::new(entries)
    }

    pub fn get(&self, token: &str) -> Option<f64> {
        self.0.get(token).copied()
    }

    /// Pretty JSON object with sorted keys, loadable by [`Lexicon::load`].
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let sorted: std::collections::BTreeMap<&String, &f64> = self.0.iter().collect();
        let json = serde_json::to_string_pretty(&sorted)
            .map_err(|e| Error::format(path, e.to_string()))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Whitespace tokens with leading/trailing non-alphanumerics stripped,
/// lowercased. Empty results are skipped.
pub fn lexicon_tokens(headline: &str) -> impl Iterator<Item = String> + '_ {
    headline
        .split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
}

/// Mean lexicon weight `s` over matched tokens (0 with no match), spread as
/// `(max(-s, 0), 1 - |s|, max(s, 0))`.
pub fn lexicon_score(headline: &str, lexicon: &Lexicon) -> ClassProbabilities {
    let (sum, hits) = lexicon_tokens(headline)
        .filter_map(|t| lexicon.get(&t))
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    let s = if hits == 0 { 0.0 } else { sum / hits as f64 };
    ClassProbabilities {
        p_negative: (-s).max(0.0),
        p_neutral: 1.0 - s.abs(),
        p_positive: s.max(0.0),
    }
}

#[derive(Debug, Clone)]
pub struct LexiconProvider {
    lexicon: Lexicon,
}

impl LexiconProvider {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }
}

impl ScoringProvider for LexiconProvider {
    fn class_probabilities(&self, article: &NewsArticle) -> Result<ClassProbabilities> {
        Ok(lexicon_score(&article.headline, &self.lexicon))
    }
}

/// One article's polarity, carrying what aggregation needs downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredArticle {
    pub id: String,
    pub company_id: String,
    pub source: String,
    pub published_at: DateTime<FixedOffset>,
    pub score: SentimentScore,
}

pub fn score_articles(
    articles: &[NewsArticle],
    provider: &dyn ScoringProvider,
    mode: ScoreMode,
) -> Result<Vec<ScoredArticle>> {
    articles
        .iter()
        .map(|a| {
            let probs = provider.class_probabilities(a)?;
            Ok(ScoredArticle {
                id: a.id.clone(),
                company_id: a.company_id.clone(),
                source: a.source.clone(),
                published_at: a.published_at,
                score: polarity_score_with(&probs, mode),
            })
        })
        .collect()
}

pub fn write_scored(path: impl AsRef<Path>, scored: &[ScoredArticle]) -> Result<()> {
    crate::corpus::write_jsonl(path.as_ref(), scored)
}

pub fn load_scored(path: impl AsRef<Path>) -> Result<Vec<ScoredArticle>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ScoredArticle = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", idx + 1)))?;
        out.push(row);
    }
    Ok(out)
}
