//! Monthly topic-sentiment frequency series: polarity classification,
//! normalized series construction, infrequent-series pruning, and the
//! monthly post-sentiment series.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gkg::{GkgRecord, StateCode};
use crate::month::{MonthRange, YearMonth};
use crate::textio::fmt_sig;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("post score {got} outside 1..=5")]
    ScoreOutOfRange { got: i64 },
    #[error("invalid post date {0:?}")]
    InvalidDate(String),
}

/// Polarity classification of one article.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sentiment {
    Pos,
    Neg,
    /// Equal positive and negative scores; counts toward monthly totals but
    /// toward no polarity bucket.
    Tie,
}

/// Polarity key of a topic-sentiment series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Pos,
    Neg,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Pos => write!(f, "POS"),
            Polarity::Neg => write!(f, "NEG"),
        }
    }
}

/// Source of per-article positive/negative scores. The pipeline default
/// reads the GKG tone block; a word-list lexicon can be injected instead.
pub trait SentimentLexicon {
    fn scores(&self, record: &GkgRecord) -> (f64, f64);
}

/// Default lexicon: the GKG tone block's positive and negative scores.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToneLexicon;

impl SentimentLexicon for ToneLexicon {
    fn scores(&self, record: &GkgRecord) -> (f64, f64) {
        (record.tone.positive_score, record.tone.negative_score)
    }
}

/// An article is positive when its positive score strictly exceeds the
/// negative one, and vice versa.
pub fn classify_polarity(record: &GkgRecord, lexicon: &dyn SentimentLexicon) -> Sentiment {
    let (pos, neg) = lexicon.scores(record);
    if pos > neg {
        Sentiment::Pos
    } else if neg > pos {
        Sentiment::Neg
    } else {
        Sentiment::Tie
    }
}

/// Raw per-month bookkeeping behind the normalized series.
#[derive(Debug, Clone)]
pub struct MonthlyCounts {
    pub month: YearMonth,
    pub total_articles: u32,
    /// (theme, polarity) -> articles mentioning the theme with that
    /// polarity; an article counts once per theme regardless of how many
    /// times the theme is tagged.
    pub counts: BTreeMap<(String, Polarity), u32>,
}

/// Monthly relative-frequency series for one (theme, polarity) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicSentimentSeries {
    pub theme: String,
    pub polarity: Polarity,
    pub state: StateCode,
    /// One entry per month of the configured range; months with no
    /// articles are missing.
    pub months: Vec<(YearMonth, Option<f64>)>,
}

impl TopicSentimentSeries {
    /// Composite label used in the screening tables, e.g. `POVERTY_POS`.
    pub fn topic_label(&self) -> String {
        format!("{}_{}", self.theme, self.polarity)
    }

    /// Mean over non-missing months; `None` when every month is missing.
    pub fn mean(&self) -> Option<f64> {
        let present: Vec<f64> = self.months.iter().filter_map(|(_, v)| *v).collect();
        if present.is_empty() {
            None
        } else {
            Some(present.iter().sum::<f64>() / present.len() as f64)
        }
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.months.iter().map(|(_, v)| *v).collect()
    }
}

/// Tallies per-month totals and per-(theme, polarity) article counts.
pub fn monthly_counts(
    records: &[GkgRecord],
    range: &MonthRange,
    lexicon: &dyn SentimentLexicon,
) -> Vec<MonthlyCounts> {
    let mut months: Vec<MonthlyCounts> = range
        .iter()
        .map(|month| MonthlyCounts {
            month,
            total_articles: 0,
            counts: BTreeMap::new(),
        })
        .collect();
    let mut max_themes_per_article: u64 = 0;
    for record in records {
        let Some(idx) = range.index_of(record.month()) else {
            continue;
        };
        let bucket = &mut months[idx];
        bucket.total_articles += 1;
        let polarity = match classify_polarity(record, lexicon) {
            Sentiment::Pos => Polarity::Pos,
            Sentiment::Neg => Polarity::Neg,
            Sentiment::Tie => continue,
        };
        // Once per article per theme.
        let distinct: BTreeSet<&str> = record
            .themes
            .iter()
            .map(|(code, _)| code.as_str())
            .collect();
        max_themes_per_article = max_themes_per_article.max(distinct.len() as u64);
        for code in distinct {
            *bucket
                .counts
                .entry((code.to_string(), polarity))
                .or_insert(0) += 1;
        }
    }
    // Count bookkeeping: a month cannot hold more (theme, polarity)
    // tallies than articles times the widest theme set on one article.
    for bucket in &months {
        let tally: u64 = bucket.counts.values().map(|&c| c as u64).sum();
        debug_assert!(tally <= bucket.total_articles as u64 * max_themes_per_article.max(1));
    }
    months
}

/// Builds the normalized topic-sentiment series for one state.
///
/// value(month) = count(theme, polarity, month) / total_articles(month);
/// zero-article months are missing for every series.
pub fn build_series(
    records: &[GkgRecord],
    range: &MonthRange,
    state: &StateCode,
    lexicon: &dyn SentimentLexicon,
) -> Vec<TopicSentimentSeries> {
    let months = monthly_counts(records, range, lexicon);

    let mut keys: BTreeSet<(String, Polarity)> = BTreeSet::new();
    for bucket in &months {
        for key in bucket.counts.keys() {
            keys.insert(key.clone());
        }
        debug_assert!(bucket.counts.values().all(|&c| c <= bucket.total_articles));
    }

    keys.into_iter()
        .map(|(theme, polarity)| {
            let series = months
                .iter()
                .map(|bucket| {
                    let value = if bucket.total_articles == 0 {
                        None
                    } else {
                        let count = bucket
                            .counts
                            .get(&(theme.clone(), polarity))
                            .copied()
                            .unwrap_or(0);
                        Some(count as f64 / bucket.total_articles as f64)
                    };
                    (bucket.month, value)
                })
                .collect();
            TopicSentimentSeries {
                theme: theme.clone(),
                polarity,
                state: state.clone(),
                months: series,
            }
        })
        .collect()
}

/// Drops series mentioned on average in fewer than `threshold` of articles.
/// A mean exactly at the threshold survives; all-missing series are
/// dropped.
pub fn prune_infrequent(
    series: Vec<TopicSentimentSeries>,
    threshold: f64,
) -> Vec<TopicSentimentSeries> {
    series
        .into_iter()
        .filter(|s| s.mean().is_some_and(|m| m >= threshold))
        .collect()
}

/// Monthly mean of 1-5 post sentiment scores for one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentimentSeries {
    pub state: StateCode,
    pub months: Vec<(YearMonth, Option<f64>)>,
}

impl SentimentSeries {
    pub fn values(&self) -> Vec<Option<f64>> {
        self.months.iter().map(|(_, v)| *v).collect()
    }
}

/// Averages scored posts by month. Months without posts are missing.
pub fn aggregate_posts(
    scored: &[(NaiveDate, i64)],
    range: &MonthRange,
    state: &StateCode,
) -> Result<SentimentSeries, SeriesError> {
    let mut sums = vec![0i64; range.len()];
    let mut counts = vec![0u32; range.len()];
    for (date, score) in scored {
        if !(1..=5).contains(score) {
            return Err(SeriesError::ScoreOutOfRange { got: *score });
        }
        let month = YearMonth::new(date.year(), date.month() as u8).expect("valid date");
        if let Some(idx) = range.index_of(month) {
            sums[idx] += score;
            counts[idx] += 1;
        }
    }
    let months = range
        .iter()
        .enumerate()
        .map(|(idx, month)| {
            let value = (counts[idx] > 0).then(|| sums[idx] as f64 / counts[idx] as f64);
            (month, value)
        })
        .collect();
    Ok(SentimentSeries {
        state: state.clone(),
        months,
    })
}

/// One post with its annotated 1-5 sentiment score; the scored-posts JSONL
/// row format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredPost {
    pub date: NaiveDate,
    pub state: StateCode,
    pub text: String,
    pub score: i64,
}

/// Parses scored posts from newline-delimited JSON.
pub fn read_scored_posts(content: &str) -> Result<Vec<ScoredPost>, SeriesError> {
    content
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            serde_json::from_str::<ScoredPost>(line)
                .map_err(|e| SeriesError::InvalidDate(format!("{line:?}: {e}")))
        })
        .collect()
}

/// Series export: `state,theme,polarity,month,value` with empty cells for
/// missing months.
pub fn series_to_csv(series: &[TopicSentimentSeries]) -> String {
    let mut out = String::from("state,theme,polarity,month,value\n");
    for s in series {
        for (month, value) in &s.months {
            let cell = value.map(fmt_sig).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.state, s.theme, s.polarity, month, cell
            ));
        }
    }
    out
}
