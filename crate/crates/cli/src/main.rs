use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sentindex_core::aggregation::{aggregate, write_sentiment_csv, SentimentGrid, TradingCalendar};
use sentindex_core::backtest::{
    load_benchmark_csv, run_backtest, write_outputs, BacktestInputs, PriceSeries,
};
use sentindex_core::corpus::{
    load_articles, run_filters, write_articles, write_jsonl, ArticleFormat, NewsArticle,
};
use sentindex_core::optimizer::{extract_trades, optimize_weights, WeightVector};
use sentindex_core::pipeline::{run_pipeline, PipelineConfig};
use sentindex_core::report::{format_table, render_report, ReportFormat, ReportSpec};
use sentindex_core::sentiment::{
    load_scored, score_articles, write_scored, Lexicon, LexiconProvider, PrescoredProvider,
    ScoreMode, ScoringProvider,
};
use sentindex_core::synthetic::{generate, SyntheticConfig};

#[derive(Parser)]
#[command(
    author,
    version,
    about = "Build and backtest a daily news-sentiment index"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Provider {
    /// JSON lines of `id` plus class probabilities
    Prescored,
    /// JSON object of token -> weight in [-1, 1]
    Lexicon,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    WinningClass,
    Expectation,
}

impl From<Mode> for ScoreMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::WinningClass => ScoreMode::WinningClass,
            Mode::Expectation => ScoreMode::Expectation,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Apply exclusion, auto-generated, duplicate and headline-length filters
    Filter {
        #[arg(long)]
        articles: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write removed articles with their removal reason
        #[arg(long)]
        removed: Option<PathBuf>,
    },
    /// Score filtered articles
    Score {
        #[arg(long)]
        articles: PathBuf,
        #[arg(long, value_enum)]
        provider: Provider,
        #[arg(long)]
        provider_file: PathBuf,
        #[arg(long, value_enum, default_value = "winning-class")]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate scored articles onto the trading calendar of a price file
    Aggregate {
        #[arg(long)]
        scored: PathBuf,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one rebalance from a `company,sentiment,prior` CSV
    Optimize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the daily simulation from prices and aggregated sentiment
    Backtest {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        sentiments: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// `date,level` CSV; defaults to an equal-weight basket
        #[arg(long)]
        benchmark: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter, score, aggregate and backtest in one go
    Run {
        #[arg(long)]
        articles: PathBuf,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long, value_enum)]
        provider: Provider,
        #[arg(long)]
        provider_file: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        benchmark: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a chart and summary table from a backtest output directory
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "svg,csv")]
        format: Vec<String>,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        from: Option<chrono::NaiveDate>,
        #[arg(long)]
        to: Option<chrono::NaiveDate>,
    },
    /// Write a seeded synthetic corpus, price file and lexicon
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        companies: usize,
        #[arg(long, default_value_t = 250)]
        days: usize,
    },
}

fn provider(kind: Provider, path: &Path) -> Result<Box<dyn ScoringProvider>> {
    Ok(match kind {
        Provider::Prescored => Box::new(PrescoredProvider::load(path)?),
        Provider::Lexicon => Box::new(LexiconProvider::new(Lexicon::load(path)?)),
    })
}

fn read_articles(path: &Path) -> Result<Vec<NewsArticle>> {
    let loaded = load_articles(path, ArticleFormat::JsonLines)?;
    for d in &loaded.diagnostics {
        eprintln!("{}: {d}", path.display());
    }
    Ok(loaded.articles)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn optimize(input: &Path, config: &Path, out: &Path) -> Result<()> {
    let cfg = PipelineConfig::load(config)?.backtest.optimizer;
    let mut r =
        csv::Reader::from_path(input).with_context(|| format!("reading {}", input.display()))?;
    let mut sentiments = Vec::new();
    let mut prior = Vec::new();
    for row in r.deserialize() {
        let (company, s, p): (String, f64, f64) =
            row.with_context(|| format!("parsing {}", input.display()))?;
        sentiments.push((company.clone(), s));
        prior.push((company, p));
    }
    if sentiments.is_empty() {
        bail!("{} has no rows", input.display());
    }
    let sentiments: WeightVector = sentiments.into_iter().collect();
    let prior: WeightVector = prior.into_iter().collect();
    let weights = optimize_weights(&sentiments, &prior, &cfg)?;
    let trades = extract_trades(&weights, &prior, cfg.trade_epsilon)?;

    let mut w =
        csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
    w.write_record(["company", "weight", "delta_weight"])?;
    for (company, weight) in weights.iter() {
        let delta = trades
            .iter()
            .find(|t| &t.company == company)
            .map_or(0.0, |t| t.delta_weight);
        w.serialize((company, weight, delta))?;
    }
    w.flush()?;
    println!(
        "{} names, total weight {:.6}, {} trades",
        weights.len(),
        weights.total(),
        trades.len()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Filter {
            articles,
            config,
            out,
            removed,
        } => {
            let cfg = PipelineConfig::load(&config)?;
            let outcome = run_filters(read_articles(&articles)?, &cfg.filter);
            write_articles(&out, &outcome.kept)?;
            if let Some(path) = removed {
                write_jsonl(&path, &outcome.removed)?;
            }
            println!(
                "kept {}, removed {}",
                outcome.kept.len(),
                outcome.removed.len()
            );
        }
        Command::Score {
            articles,
            provider: kind,
            provider_file,
            mode,
            out,
        } => {
            let p = provider(kind, &provider_file)?;
            let scored = score_articles(&read_articles(&articles)?, p.as_ref(), mode.into())?;
            write_scored(&out, &scored)?;
            println!("scored {}", scored.len());
        }
        Command::Aggregate {
            scored,
            prices,
            config,
            out,
        } => {
            let cfg = PipelineConfig::load(&config)?;
            let prices = PriceSeries::load_csv(&prices)?;
            let calendar = TradingCalendar::from_config(prices.dates().to_vec(), &cfg.aggregation)?;
            let result = aggregate(
                &load_scored(&scored)?,
                prices.companies(),
                &calendar,
                cfg.aggregation.adjustment_history,
            );
            for d in &result.diagnostics {
                eprintln!("article {}: {:?}", d.article_id, d.kind);
            }
            write_sentiment_csv(&out, &result.daily)?;
            println!(
                "{} rows, {} diagnostics",
                result.daily.len(),
                result.diagnostics.len()
            );
        }
        Command::Optimize { input, config, out } => optimize(&input, &config, &out)?,
        Command::Backtest {
            prices,
            sentiments,
            config,
            benchmark,
            out,
        } => {
            let cfg = PipelineConfig::load(&config)?;
            let prices = PriceSeries::load_csv(&prices)?;
            let grid = SentimentGrid::load_csv(&sentiments, prices.dates(), prices.companies())?;
            let bench = benchmark
                .map(|b| load_benchmark_csv(b, prices.dates(), cfg.backtest.initial_level))
                .transpose()?;
            let inputs = BacktestInputs {
                prices: &prices,
                sentiments: &grid,
                benchmark: bench.as_deref(),
            };
            let result = run_backtest(&inputs, &cfg.backtest)?;
            write_outputs(&out, &result)?;
            println!("final level {:.4}", result.summary.final_index_level);
        }
        Command::Run {
            articles,
            prices,
            provider: kind,
            provider_file,
            config,
            benchmark,
            out,
        } => {
            let cfg = PipelineConfig::load(&config)?;
            let prices = PriceSeries::load_csv(&prices)?;
            let bench = benchmark
                .map(|b| load_benchmark_csv(b, prices.dates(), cfg.backtest.initial_level))
                .transpose()?;
            let p = provider(kind, &provider_file)?;
            let result = run_pipeline(
                read_articles(&articles)?,
                p.as_ref(),
                &prices,
                bench.as_deref(),
                &cfg,
            )?;
            create_dir(&out)?;
            write_articles(out.join("filtered.jsonl"), &result.filtered.kept)?;
            write_jsonl(&out.join("removed.jsonl"), &result.filtered.removed)?;
            write_scored(out.join("scored.jsonl"), &result.scored)?;
            write_sentiment_csv(out.join("sentiment.csv"), &result.aggregation.daily)?;
            write_outputs(&out, &result.backtest)?;
            println!(
                "kept {} of {}, {} trades, final level {:.4}",
                result.filtered.kept.len(),
                result.filtered.kept.len() + result.filtered.removed.len(),
                result
                    .backtest
                    .days
                    .iter()
                    .map(|d| d.trades.len())
                    .sum::<usize>(),
                result.backtest.summary.final_index_level
            );
        }
        Command::Report {
            input,
            out,
            format,
            title,
            from,
            to,
        } => {
            let mut spec = ReportSpec::new(input, out);
            spec.formats = format.iter().map(|f| f.parse()).collect::<Result<_, _>>()?;
            if spec.formats.is_empty() {
                spec.formats.insert(ReportFormat::Svg);
            }
            if let Some(t) = title {
                spec.title = t;
            }
            spec.from = from;
            spec.to = to;
            let rendered = render_report(&spec)?;
            print!("{}", format_table(&rendered.table));
        }
        Command::Synth {
            out,
            seed,
            companies,
            days,
        } => {
            let data = generate(&SyntheticConfig {
                companies,
                trading_days: days,
                seed,
                ..SyntheticConfig::default()
            })?;
            create_dir(&out)?;
            write_articles(out.join("articles.jsonl"), &data.articles)?;
            data.prices.write_csv(out.join("prices.csv"))?;
            data.lexicon.save(out.join("lexicon.json"))?;
            println!("{} articles, {} days", data.articles.len(), days);
        }
    }
    Ok(())
}
