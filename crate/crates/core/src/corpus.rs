//! Article ingestion and the relevance/hygiene filters applied before scoring.
//!
//! Filters are applied in a fixed order by [`run_filters`]: per-company
//! exclusion keywords, auto-generated report phrases, deduplication on
//! `(company_id, lowercased headline)`, and finally the headline length gate
//! with lowercasing. Every filter partitions its input; nothing is dropped
//! without landing in `removed`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One scraped article, already tagged with the company it refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub id: String,
    pub company_id: String,
    pub source: String,
    /// Publication instant with the offset it was reported in.
    pub published_at: DateTime<FixedOffset>,
    pub headline: String,
    #[serde(default)]
    pub body: Option<String>,
    /// ISO 639-1 code.
    pub language: String,
}

impl NewsArticle {
    fn matches_any(&self, needles: &[String]) -> bool {
        if needles.is_empty() {
            return false;
        }
        let headline = self.headline.to_lowercase();
        let body = self.body.as_deref().map(str::to_lowercase);
        needles.iter().any(|needle| {
            headline.contains(needle.as_str())
                || body.as_deref().is_some_and(|b| b.contains(needle.as_str()))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArticleFormat {
    #[default]
    JsonLines,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineDiagnostic {
    /// 1-based line number in the input file.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadedArticles {
    pub articles: Vec<NewsArticle>,
    pub diagnostics: Vec<LineDiagnostic>,
}

/// Reads articles in file order. Malformed lines become diagnostics; blank
/// lines are skipped.
pub fn load_articles(path: impl AsRef<Path>, format: ArticleFormat) -> Result<LoadedArticles> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        ArticleFormat::JsonLines => read_articles_jsonl(BufReader::new(file), path),
    }
}

fn read_articles_jsonl(reader: impl BufRead, path: &Path) -> Result<LoadedArticles> {
    let mut out = LoadedArticles::default();
    let mut seen_ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let article: NewsArticle = match serde_json::from_str(&line) {
            Ok(a) => a,
            Err(e) => {
                out.diagnostics.push(LineDiagnostic {
                    line: line_no,
                    message: format!("malformed article: {e}"),
                });
                continue;
            }
        };
        if let Some(message) = validate_article(&article) {
            out.diagnostics.push(LineDiagnostic {
                line: line_no,
                message,
            });
            continue;
        }
        if !seen_ids.insert(article.id.clone()) {
            out.diagnostics.push(LineDiagnostic {
                line: line_no,
                message: format!("duplicate article id {:?}", article.id),
            });
            continue;
        }
        out.articles.push(article);
    }
    Ok(out)
}

fn validate_article(a: &NewsArticle) -> Option<String> {
    if a.id.is_empty() {
        return Some("empty id".into());
    }
    if a.company_id.is_empty() {
        return Some(format!("article {}: empty company_id", a.id));
    }
    if a.headline.trim().is_empty() {
        return Some(format!("article {}: empty headline", a.id));
    }
    if a.language.len() != 2 || !a.language.chars().all(|c| c.is_ascii_alphabetic()) {
        return Some(format!(
            "article {}: language {:?} is not an ISO 639-1 code",
            a.id, a.language
        ));
    }
    None
}

pub fn write_articles(path: impl AsRef<Path>, articles: &[NewsArticle]) -> Result<()> {
    write_jsonl(path.as_ref(), articles)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| Error::format(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// company_id -> lowercase keywords matched against headline and body.
    pub exclusions: BTreeMap<String, Vec<String>>,
    pub auto_generated_phrases: Vec<String>,
    pub max_headline_tokens: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            exclusions: BTreeMap::new(),
            auto_generated_phrases: Vec::new(),
            max_headline_tokens: 1000,
        }
    }
}

impl FilterConfig {
    /// Loads from JSON. Keywords and phrases are lowercased on the way in.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: FilterConfig =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let cfg = cfg.normalized();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Lowercases every keyword and phrase.
    pub fn normalized(mut self) -> Self {
        for words in self.exclusions.values_mut() {
            for w in words.iter_mut() {
                *w = w.to_lowercase();
            }
        }
        for p in self.auto_generated_phrases.iter_mut() {
            *p = p.to_lowercase();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_headline_tokens < 1 {
            return Err(Error::Config(
                "max_headline_tokens must be at least 1".into(),
            ));
        }
        let all = self
            .exclusions
            .values()
            .flatten()
            .chain(&self.auto_generated_phrases);
        for needle in all {
            if needle.is_empty() {
                return Err(Error::Config("empty keyword or phrase".into()));
            }
            if *needle != needle.to_lowercase() {
                return Err(Error::Config(format!(
                    "keyword {needle:?} is not lowercase"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Partition<T> {
    pub kept: Vec<T>,
    pub removed: Vec<T>,
}

impl<T> Partition<T> {
    fn split(items: Vec<T>, mut remove: impl FnMut(&T) -> bool) -> Self {
        let (removed, kept) = items.into_iter().partition(|a| remove(a));
        Partition { kept, removed }
    }
}

/// Drops articles whose headline or body contains one of the exclusion
/// keywords configured for their company.
pub fn filter_exclusion_keywords(
    articles: Vec<NewsArticle>,
    config: &FilterConfig,
) -> Partition<NewsArticle> {
    Partition::split(articles, |a| {
        config
            .exclusions
            .get(&a.company_id)
            .is_some_and(|words| a.matches_any(words))
    })
}

/// Drops machine-written market recaps identified by a fixed phrase.
pub fn remove_auto_generated(
    articles: Vec<NewsArticle>,
    config: &FilterConfig,
) -> Partition<NewsArticle> {
    Partition::split(articles, |a| a.matches_any(&config.auto_generated_phrases))
}

/// Keeps the earliest article per `(company_id, lowercased headline)`; equal
/// instants fall back to the lexicographically smallest id. Survivors stay in
/// input order.
pub fn deduplicate(articles: Vec<NewsArticle>) -> Partition<NewsArticle> {
    let mut winner: HashMap<(String, String), usize> = HashMap::new();
    for (i, a) in articles.iter().enumerate() {
        let key = (a.company_id.clone(), a.headline.to_lowercase());
        match winner.get_mut(&key) {
            Some(best) => {
                let b = &articles[*best];
                if (a.published_at, &a.id) < (b.published_at, &b.id) {
                    *best = i;
                }
            }
            None => {
                winner.insert(key, i);
            }
        }
    }
    let keep: HashSet<usize> = winner.into_values().collect();
    let mut out = Partition {
        kept: Vec::new(),
        removed: Vec::new(),
    };
    for (i, a) in articles.into_iter().enumerate() {
        if keep.contains(&i) {
            out.kept.push(a);
        } else {
            out.removed.push(a);
        }
    }
    out
}

/// Number of whitespace-separated tokens.
pub fn headline_token_count(headline: &str) -> usize {
    headline.split_whitespace().count()
}

/// Lowercases the headline and drops the body; `None` when the headline has
/// more than `max_headline_tokens` tokens.
pub fn normalize_and_gate(article: NewsArticle, config: &FilterConfig) -> Option<NewsArticle> {
    if headline_token_count(&article.headline) > config.max_headline_tokens {
        return None;
    }
    Some(NewsArticle {
        headline: article.headline.to_lowercase(),
        body: None,
        ..article
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    ExclusionKeyword,
    AutoGenerated,
    Duplicate,
    HeadlineTooLong,
}

#[derive(Debug, Clone, Serialize)]
pub struct RemovedArticle {
    #[serde(flatten)]
    pub article: NewsArticle,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    /// Normalized survivors, input order.
    pub kept: Vec<NewsArticle>,
    pub removed: Vec<RemovedArticle>,
}

pub fn run_filters(articles: Vec<NewsArticle>, config: &FilterConfig) -> FilterOutcome {
    let mut removed = Vec::new();
    let mut tag = |items: Vec<NewsArticle>, reason| {
        removed.extend(
            items
                .into_iter()
                .map(|article| RemovedArticle { article, reason }),
        );
    };

    let step = filter_exclusion_keywords(articles, config);
    tag(step.removed, RemovalReason::ExclusionKeyword);
    let step = remove_auto_generated(step.kept, config);
    tag(step.removed, RemovalReason::AutoGenerated);
    let step = deduplicate(step.kept);
    tag(step.removed, RemovalReason::Duplicate);

    let mut kept = Vec::with_capacity(step.kept.len());
    for article in step.kept {
        let original = article.clone();
        match normalize_and_gate(article, config) {
            Some(a) => kept.push(a),
            None => tag(vec![original], RemovalReason::HeadlineTooLong),
        }
    }
    FilterOutcome { kept, removed }
}
