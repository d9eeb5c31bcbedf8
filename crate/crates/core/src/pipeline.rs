//! Orchestration: configuration, the per-state screening/VAR/legislation
//! chain, and report emission.
//!
//! States run independently (and in parallel); a failing state yields an
//! error entry in the report instead of aborting the others. All
//! randomness derives from the root seed, so outputs are byte-identical
//! across runs and thread counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{map_topics_to_themes, AnnotateError, AnnotationBackend, BatchOptions};
use crate::econ::{
    bh_adjust, make_stationary, scan_lags, EconError, GrangerResult, OlsResult, Transform,
};
use crate::gkg::{
    articles_per_source, filter_articles, parse_file, GkgError, GkgRecord, ParseReport, StateCode,
};
use crate::legis::{
    salience_regression, theme_ttest_table, LegisError, LegislativeIndex, ThemeTTestTable,
};
use crate::month::{MonthRange, YearMonth};
use crate::multivar::{select_features, var_fit, MultivarError, ScreenedSeries};
use crate::par;
use crate::series::{
    aggregate_posts, build_series, prune_infrequent, read_scored_posts, series_to_csv, Polarity,
    ScoredPost, SentimentSeries, SeriesError, ToneLexicon, TopicSentimentSeries,
};
use crate::textio::fmt_sig;
use crate::topics::{
    default_stopwords, lda_fit, preprocess, read_legis_docs, select_k, LdaParams, LegisDoc,
    TopicsError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error(transparent)]
    Gkg(#[from] GkgError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Econ(#[from] EconError),
    #[error(transparent)]
    Multivar(#[from] MultivarError),
    #[error(transparent)]
    Topics(#[from] TopicsError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Legis(#[from] LegisError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunPaths {
    /// GKG TSV files.
    pub gkg: Vec<PathBuf>,
    /// Scored posts JSONL; optional, sentiment stages skip without it.
    pub posts: Option<PathBuf>,
    /// Legislation JSONL; optional, linkage stages skip without it.
    pub legislation: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for RunPaths {
    fn default() -> Self {
        Self {
            gkg: Vec::new(),
            posts: None,
            legislation: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Every analysis constant is configurable; the defaults are the values
/// the report tables are calibrated around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub states: Vec<StateCode>,
    pub seed: u64,
    /// Months of article coverage.
    pub article_range: MonthRange,
    /// Months of post coverage; screening uses the intersection.
    pub posts_range: MonthRange,
    /// GKG theme codes that define the filtered corpus.
    pub theme_filter: BTreeSet<String>,
    pub prune_threshold: f64,
    pub lags: Vec<usize>,
    pub significance: f64,
    /// Rows kept per state in the screening table.
    pub top_screened: usize,
    pub variance_target: f64,
    pub var_features: usize,
    pub lda_topics: usize,
    /// When set, pick K by coherence over this range instead of
    /// `lda_topics`.
    pub lda_k_range: Option<Vec<usize>>,
    pub lda: LdaParams,
    /// Benjamini-Hochberg adjustment of screening p-values; off by
    /// default, so tables carry raw p-values.
    pub bh_correction: bool,
    pub paths: RunPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            states: ["CA", "NY", "FL", "WA", "OR"]
                .iter()
                .map(|s| s.parse().expect("static state codes"))
                .collect(),
            seed: 42,
            article_range: MonthRange::new(
                YearMonth::new(2015, 3).expect("static month"),
                YearMonth::new(2023, 12).expect("static month"),
            )
            .expect("static range"),
            posts_range: MonthRange::new(
                YearMonth::new(2015, 1).expect("static month"),
                YearMonth::new(2023, 12).expect("static month"),
            )
            .expect("static range"),
            theme_filter: BTreeSet::new(),
            prune_threshold: 0.015,
            lags: vec![1, 2, 3],
            significance: 0.05,
            top_screened: 20,
            variance_target: 0.95,
            var_features: 6,
            lda_topics: 9,
            lda_k_range: None,
            lda: LdaParams::default(),
            bh_correction: false,
            paths: RunPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(content: &str) -> Result<Self, PipelineError> {
        let config: RunConfig =
            toml::from_str(content).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let content = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&content)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.states.is_empty() {
            return Err(PipelineError::Config("no states configured".into()));
        }
        if self.theme_filter.is_empty() {
            return Err(PipelineError::Config(
                "theme_filter must not be empty".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.prune_threshold)
            || !(0.0..1.0).contains(&self.significance)
            || !(0.0..=1.0).contains(&self.variance_target)
        {
            return Err(PipelineError::Config("thresholds out of range".into()));
        }
        if self.lags.is_empty() || self.lags.contains(&0) {
            return Err(PipelineError::Config("lags must be positive".into()));
        }
        if self.var_features == 0 || self.lda_topics < 1 {
            return Err(PipelineError::Config(
                "var_features and lda_topics must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Stable hash of the full configuration, for provenance.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).unwrap_or_default();
        format!("{:016x}", crate::rng::fnv1a(canonical.as_bytes()))
    }
}

/// One row of the per-state screening table.
#[derive(Debug, Clone, Serialize)]
pub struct ScreenRow {
    pub state: StateCode,
    pub theme: String,
    pub polarity: Polarity,
    pub cc: f64,
    pub p: f64,
    pub lag: usize,
    pub transform: Transform,
}

/// A screened series kept for the multivariate stage.
#[derive(Debug, Clone)]
pub struct ScreenCandidate {
    pub theme: String,
    pub polarity: Polarity,
    pub transform: Transform,
    /// Months the transform trimmed from the front of the span.
    pub offset: usize,
    /// Stationary-processed values.
    pub values: Vec<f64>,
    /// Raw normalized values over the screening span.
    pub raw: Vec<f64>,
    pub result: GrangerResult,
}

impl ScreenCandidate {
    pub fn label(&self) -> String {
        format!("{}_{}", self.theme, self.polarity)
    }
}

#[derive(Debug, Clone)]
pub struct StateScreening {
    pub state: StateCode,
    /// Significant rows, |cc| descending, truncated to the configured
    /// table size.
    pub rows: Vec<ScreenRow>,
    /// Every significant candidate, for feature selection.
    pub candidates: Vec<ScreenCandidate>,
    /// Topic-sentiment series that could not be screened, with reasons.
    pub dropped: Vec<(String, String)>,
    /// Months of the screening span.
    pub span: Vec<YearMonth>,
    /// Stationary-processed sentiment and its front trim.
    pub sentiment_values: Vec<f64>,
    pub sentiment_offset: usize,
    pub sentiment_transform: Transform,
    /// Raw monthly sentiment over the span.
    pub sentiment_raw: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarRow {
    pub state: StateCode,
    pub p: f64,
    pub r: f64,
    pub r_squared: f64,
    pub n_features: usize,
    pub fewer_than_k: bool,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Row {
    pub month: YearMonth,
    /// Mean of the selected features' raw normalized frequencies.
    pub top_theme_mean: f64,
    pub sentiment: f64,
}

#[derive(Debug, Default, Clone, Serialize)]
pub struct RunReport {
    pub config_digest: String,
    pub seed: u64,
    pub table1: Vec<VarRow>,
    pub screening: BTreeMap<String, Vec<ScreenRow>>,
    pub ttests: BTreeMap<String, ThemeTTestTable>,
    pub salience: Option<OlsResult>,
    pub fig3: Vec<(YearMonth, Option<f64>)>,
    pub fig1: BTreeMap<String, Vec<Fig1Row>>,
    #[serde(skip)]
    pub parse_reports: Vec<ParseReport>,
    pub skipped_lines: usize,
    /// Stage failures by state; present means the run was partial.
    pub state_errors: BTreeMap<String, String>,
    /// Stages skipped for missing optional inputs.
    pub skipped_stages: Vec<String>,
}

impl RunReport {
    pub fn is_partial(&self) -> bool {
        !self.state_errors.is_empty() || !self.skipped_stages.is_empty()
    }
}

/// Everything read from disk before staging.
pub struct LoadedInputs {
    pub records: Vec<GkgRecord>,
    pub parse_reports: Vec<ParseReport>,
    pub posts: Option<Vec<ScoredPost>>,
    pub legislation: Option<Vec<LegisDoc>>,
}

pub fn load_inputs(config: &RunConfig) -> Result<LoadedInputs, PipelineError> {
    if config.paths.gkg.is_empty() {
        return Err(PipelineError::MissingInput(
            "no GKG files configured".into(),
        ));
    }
    let mut records = Vec::new();
    let mut parse_reports = Vec::new();
    for path in &config.paths.gkg {
        let (mut file_records, report) = parse_file(path)?;
        records.append(&mut file_records);
        parse_reports.push(report);
    }

    let posts = match &config.paths.posts {
        Some(path) if path.exists() => {
            let content = fs::read_to_string(path).map_err(io_err(path))?;
            Some(read_scored_posts(&content)?)
        }
        _ => None,
    };
    let legislation = match &config.paths.legislation {
        Some(path) if path.exists() => {
            let content = fs::read_to_string(path).map_err(io_err(path))?;
            Some(read_legis_docs(&content)?)
        }
        _ => None,
    };
    Ok(LoadedInputs {
        records,
        parse_reports,
        posts,
        legislation,
    })
}

/// Trims two offset series to their common suffix span.
fn align_pair(a_off: usize, a: &[f64], b_off: usize, b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let start = a_off.max(b_off);
    (a[start - a_off..].to_vec(), b[start - b_off..].to_vec())
}

/// Restricts a monthly series to a span, requiring coverage at both ends
/// (interior gaps are the stationarity stage's business).
fn slice_span(
    series: &TopicSentimentSeries,
    range: &MonthRange,
    span: &[YearMonth],
) -> Result<Vec<Option<f64>>, String> {
    let values = series.values();
    let slice: Vec<Option<f64>> = span
        .iter()
        .map(|m| range.index_of(*m).and_then(|idx| values[idx]))
        .collect();
    match (slice.first(), slice.last()) {
        (Some(Some(_)), Some(Some(_))) => Ok(slice),
        _ => Err("missing months at the span edges".into()),
    }
}

/// Runs ingest -> series -> prune -> stationarity -> lag scan for one
/// state.
pub fn screen_state(
    state: &StateCode,
    state_records: &[GkgRecord],
    posts: &[ScoredPost],
    config: &RunConfig,
) -> Result<StateScreening, PipelineError> {
    let series = build_series(state_records, &config.article_range, state, &ToneLexicon);
    let pruned = prune_infrequent(series, config.prune_threshold);

    let common = config
        .article_range
        .intersect(&config.posts_range)
        .ok_or_else(|| PipelineError::Config("article and post ranges do not overlap".into()))?;

    let state_posts: Vec<(chrono::NaiveDate, i64)> = posts
        .iter()
        .filter(|p| &p.state == state)
        .map(|p| (p.date, p.score))
        .collect();
    if state_posts.is_empty() {
        return Err(PipelineError::MissingInput(format!(
            "no posts for state {state}"
        )));
    }
    let sentiment: SentimentSeries = aggregate_posts(&state_posts, &common, state)?;

    // The span is the sentiment series' covered window inside the common
    // range; topic series must cover its edges to stay aligned.
    let sent_values = sentiment.values();
    let first = sent_values.iter().position(Option::is_some);
    let last = sent_values.iter().rposition(Option::is_some);
    let (first, last) = match (first, last) {
        (Some(f), Some(l)) if l >= f + 24 => (f, l),
        _ => {
            return Err(PipelineError::MissingInput(format!(
                "sentiment series for {state} too short to screen"
            )))
        }
    };
    let span: Vec<YearMonth> = common.iter().skip(first).take(last - first + 1).collect();
    let sent_span: Vec<Option<f64>> = sent_values[first..=last].to_vec();
    let sentiment_raw: Vec<f64> = sent_span.iter().map(|v| v.unwrap_or(f64::NAN)).collect();

    let (sentiment_values, sentiment_transform) = make_stationary(&sent_span)?;
    if sentiment_transform == Transform::Dropped {
        return Err(PipelineError::Config(format!(
            "sentiment series for {state} could not be made stationary"
        )));
    }
    if sentiment_values.len() + usize::from(sentiment_transform == Transform::Diff1) != span.len() {
        return Err(PipelineError::MissingInput(format!(
            "sentiment series for {state} has unalignable gaps"
        )));
    }
    let sentiment_offset = usize::from(sentiment_transform == Transform::Diff1);

    let mut candidates = Vec::new();
    let mut dropped = Vec::new();
    for topic_series in &pruned {
        let label = topic_series.topic_label();
        let slice = match slice_span(topic_series, &config.article_range, &span) {
            Ok(slice) => slice,
            Err(reason) => {
                dropped.push((label, reason));
                continue;
            }
        };
        let raw: Vec<f64> = slice.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let (values, transform) = match make_stationary(&slice) {
            Ok(out) => out,
            Err(EconError::SeriesTooShort { .. }) => {
                dropped.push((label, "too short after gaps".into()));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if transform == Transform::Dropped {
            dropped.push((label, "not stationary after differencing".into()));
            continue;
        }
        let offset = usize::from(transform == Transform::Diff1);
        if values.len() + offset != span.len() {
            dropped.push((label, "unalignable interior trim".into()));
            continue;
        }
        let (x, y) = align_pair(offset, &values, sentiment_offset, &sentiment_values);
        let result = match scan_lags(&x, &y, &config.lags) {
            Ok(result) => result,
            Err(EconError::ZeroVariance) | Err(EconError::ConstantSeries) => {
                dropped.push((label, "zero variance on the screening span".into()));
                continue;
            }
            Err(EconError::InsufficientObservations { .. }) => {
                dropped.push((label, "too few observations for the lag scan".into()));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        candidates.push(ScreenCandidate {
            theme: topic_series.theme.clone(),
            polarity: topic_series.polarity,
            transform,
            offset,
            values,
            raw,
            result,
        });
    }

    if config.bh_correction {
        let raw_p: Vec<f64> = candidates.iter().map(|c| c.result.p_value).collect();
        for (candidate, adjusted) in candidates.iter_mut().zip(bh_adjust(&raw_p)) {
            candidate.result.p_value = adjusted;
        }
    }

    let mut significant: Vec<ScreenCandidate> = candidates
        .into_iter()
        .filter(|c| c.result.p_value < config.significance)
        .collect();
    significant.sort_by(|a, b| {
        b.result
            .cc
            .abs()
            .partial_cmp(&a.result.cc.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.theme.cmp(&b.theme))
            .then(a.polarity.cmp(&b.polarity))
    });

    let rows = significant
        .iter()
        .take(config.top_screened)
        .map(|c| ScreenRow {
            state: state.clone(),
            theme: c.theme.clone(),
            polarity: c.polarity,
            cc: c.result.cc,
            p: c.result.p_value,
            lag: c.result.lag,
            transform: c.transform,
        })
        .collect();

    Ok(StateScreening {
        state: state.clone(),
        rows,
        candidates: significant,
        dropped,
        span,
        sentiment_values,
        sentiment_offset,
        sentiment_transform,
        sentiment_raw,
    })
}

/// Feature selection, PCA, and the VAR fit for one screened state.
pub fn var_state(
    screening: &StateScreening,
    config: &RunConfig,
) -> Result<(VarRow, Vec<Fig1Row>), PipelineError> {
    if screening.candidates.is_empty() {
        return Err(PipelineError::MissingInput(format!(
            "no significant series for state {}",
            screening.state
        )));
    }
    // Align every candidate and the sentiment to the widest common start.
    let global = screening
        .candidates
        .iter()
        .map(|c| c.offset)
        .chain([screening.sentiment_offset])
        .max()
        .unwrap_or(0);
    let screened: Vec<ScreenedSeries> = screening
        .candidates
        .iter()
        .map(|c| ScreenedSeries {
            name: c.label(),
            values: c.values[global - c.offset..].to_vec(),
            granger: c.result.clone(),
        })
        .collect();
    let sentiment = screening.sentiment_values[global - screening.sentiment_offset..].to_vec();

    let selected = select_features(&screened, config.var_features, config.variance_target)?;
    let features: Vec<(String, Vec<f64>)> = selected
        .features
        .iter()
        .map(|s| (s.name.clone(), s.values.clone()))
        .collect();
    let var = var_fit(&sentiment, &features, 1)?;

    let row = VarRow {
        state: screening.state.clone(),
        p: var.joint_p,
        r: var.fit.r,
        r_squared: var.fit.r_squared,
        n_features: features.len(),
        fewer_than_k: selected.fewer_than_k,
        features: var.selected_features.clone(),
    };

    // fig1_<state>.csv data: mean raw frequency of the selected themes vs raw
    // sentiment, month by month over the screening span.
    let selected_names: BTreeSet<&str> = features.iter().map(|(n, _)| n.as_str()).collect();
    let raw_series: Vec<&Vec<f64>> = screening
        .candidates
        .iter()
        .filter(|c| selected_names.contains(c.label().as_str()))
        .map(|c| &c.raw)
        .collect();
    let fig1 = screening
        .span
        .iter()
        .enumerate()
        .filter(|(idx, _)| {
            raw_series.iter().all(|s| s[*idx].is_finite())
                && screening.sentiment_raw[*idx].is_finite()
        })
        .map(|(idx, month)| Fig1Row {
            month: *month,
            top_theme_mean: raw_series.iter().map(|s| s[idx]).sum::<f64>()
                / raw_series.len().max(1) as f64,
            sentiment: screening.sentiment_raw[idx],
        })
        .collect();

    Ok((row, fig1))
}

/// Yearly relative frequency of each theme among a state's filtered
/// articles.
fn yearly_theme_frequencies(
    records: &[GkgRecord],
    range: &MonthRange,
) -> BTreeMap<String, BTreeMap<i32, f64>> {
    let mut totals: BTreeMap<i32, u32> = BTreeMap::new();
    let mut counts: BTreeMap<String, BTreeMap<i32, u32>> = BTreeMap::new();
    for record in records {
        let month = record.month();
        if !range.contains(month) {
            continue;
        }
        let year = month.year();
        *totals.entry(year).or_insert(0) += 1;
        let distinct: BTreeSet<&str> = record.themes.iter().map(|(t, _)| t.as_str()).collect();
        for theme in distinct {
            *counts
                .entry(theme.to_string())
                .or_default()
                .entry(year)
                .or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .map(|(theme, by_year)| {
            let freqs = totals
                .iter()
                .map(|(year, total)| {
                    let count = by_year.get(year).copied().unwrap_or(0);
                    (*year, count as f64 / *total as f64)
                })
                .collect();
            (theme, freqs)
        })
        .collect()
}

/// LDA + theme mapping + per-theme t-tests for one state.
pub fn legis_state(
    state: &StateCode,
    state_records: &[GkgRecord],
    docs: &[LegisDoc],
    config: &RunConfig,
    backend: &dyn AnnotationBackend,
) -> Result<(LegislativeIndex, ThemeTTestTable), PipelineError> {
    let state_docs: Vec<&LegisDoc> = docs.iter().filter(|d| &d.state == state).collect();
    if state_docs.is_empty() {
        return Err(PipelineError::MissingInput(format!(
            "no legislation for state {state}"
        )));
    }
    let texts: Vec<(String, String)> = state_docs
        .iter()
        .map(|d| (d.doc_id.clone(), d.text.clone()))
        .collect();
    let (corpus, _) = preprocess(&texts, &default_stopwords())?;

    let k = match &config.lda_k_range {
        Some(range) => select_k(&corpus, range, &config.lda, config.seed)?,
        None => config.lda_topics,
    };
    let model = lda_fit(&corpus, k, &config.lda, config.seed)?;

    // Theme catalog: the themes actually present in this state's articles,
    // most frequent first, capped so prompts stay bounded.
    let mut theme_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for record in state_records {
        for (theme, _) in &record.themes {
            *theme_counts.entry(theme.as_str()).or_insert(0) += 1;
        }
    }
    let mut catalog: Vec<(&str, usize)> = theme_counts.into_iter().collect();
    catalog.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let options: Vec<String> = catalog
        .into_iter()
        .take(500)
        .map(|(t, _)| t.to_string())
        .collect();
    if options.is_empty() {
        return Err(PipelineError::MissingInput(format!(
            "no article themes for state {state}"
        )));
    }

    let doc_years: BTreeMap<String, i32> = state_docs
        .iter()
        .map(|d| (d.doc_id.clone(), d.year))
        .collect();
    let themes_by_year = map_topics_to_themes(
        &model,
        &corpus,
        &doc_years,
        options,
        backend,
        &BatchOptions::default(),
    )?;

    let mut bill_counts: BTreeMap<i32, u32> = BTreeMap::new();
    for doc in &state_docs {
        *bill_counts.entry(doc.year).or_insert(0) += 1;
    }
    let index = LegislativeIndex {
        state: state.clone(),
        themes_by_year,
        bill_counts,
    };

    let freqs = yearly_theme_frequencies(state_records, &config.article_range);
    let table = theme_ttest_table(&freqs, &index)?;
    Ok((index, table))
}

/// Theme-filtered records deduplicated across states by record id.
fn theme_filtered_all(records: &[GkgRecord], config: &RunConfig) -> Vec<GkgRecord> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .filter(|r| {
            r.themes
                .iter()
                .any(|(code, _)| config.theme_filter.contains(code))
                && seen.insert(r.record_id.clone())
        })
        .cloned()
        .collect()
}

/// Which stage groups a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStages {
    /// Screening, VAR, and the theme-vs-sentiment series.
    pub sentiment: bool,
    /// LDA, theme mapping, t-tests, and the salience regression.
    pub legislation: bool,
}

impl RunStages {
    pub fn all() -> Self {
        Self {
            sentiment: true,
            legislation: true,
        }
    }

    pub fn sentiment_only() -> Self {
        Self {
            sentiment: true,
            legislation: false,
        }
    }

    pub fn legislation_only() -> Self {
        Self {
            sentiment: false,
            legislation: true,
        }
    }
}

/// Runs the full chain and collects everything the report files need.
pub fn run(
    config: &RunConfig,
    backend: &dyn AnnotationBackend,
) -> Result<RunReport, PipelineError> {
    run_stages(config, backend, RunStages::all())
}

/// Runs the selected stage groups; a disabled group is simply not
/// attempted (and not reported as skipped).
pub fn run_stages(
    config: &RunConfig,
    backend: &dyn AnnotationBackend,
    stages: RunStages,
) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let inputs = load_inputs(config)?;
    let mut report = RunReport {
        config_digest: config.digest(),
        seed: config.seed,
        skipped_lines: inputs.parse_reports.iter().map(|r| r.skips.len()).sum(),
        parse_reports: inputs.parse_reports.clone(),
        ..RunReport::default()
    };

    let filtered_any_state = theme_filtered_all(&inputs.records, config);
    report.fig3 = articles_per_source(&filtered_any_state, &config.article_range);

    // Per-state filtered record sets, computed once and shared by stages.
    let per_state: Vec<(StateCode, Vec<GkgRecord>)> = par::map_slice(&config.states, |state| {
        (
            state.clone(),
            filter_articles(&inputs.records, &config.theme_filter, state),
        )
    });

    // Sentiment-dependent stages.
    match &inputs.posts {
        Some(posts) if stages.sentiment => {
            let outcomes = par::map_slice(&per_state, |(state, records)| {
                screen_state(state, records, posts, config)
                    .and_then(|screening| {
                        let var = var_state(&screening, config)?;
                        Ok((screening, var))
                    })
                    .map_err(|e| e.to_string())
            });
            for ((state, _), outcome) in per_state.iter().zip(outcomes) {
                match outcome {
                    Ok((screening, (var_row, fig1))) => {
                        report
                            .screening
                            .insert(state.to_string(), screening.rows.clone());
                        report.table1.push(var_row);
                        report.fig1.insert(state.to_string(), fig1);
                    }
                    Err(message) => {
                        report.state_errors.insert(state.to_string(), message);
                    }
                }
            }
        }
        None if stages.sentiment => report
            .skipped_stages
            .push("screening/var/fig1: posts input missing".into()),
        _ => {}
    }

    // Legislation-dependent stages.
    match &inputs.legislation {
        Some(docs) if stages.legislation => {
            let outcomes = par::map_slice(&per_state, |(state, records)| {
                legis_state(state, records, docs, config, backend).map_err(|e| e.to_string())
            });
            let mut bill_totals: BTreeMap<i32, f64> = BTreeMap::new();
            for ((state, _), outcome) in per_state.iter().zip(outcomes) {
                match outcome {
                    Ok((index, table)) => {
                        for (year, count) in &index.bill_counts {
                            *bill_totals.entry(*year).or_insert(0.0) += *count as f64;
                        }
                        report.ttests.insert(state.to_string(), table);
                    }
                    Err(message) => {
                        report
                            .state_errors
                            .entry(state.to_string())
                            .and_modify(|m| *m = format!("{m}; {message}"))
                            .or_insert(message);
                    }
                }
            }
            // Salience: combined yearly article count vs combined bill count.
            if !bill_totals.is_empty() {
                let mut article_totals: BTreeMap<i32, f64> = BTreeMap::new();
                for record in &filtered_any_state {
                    let month = record.month();
                    if config.article_range.contains(month) {
                        *article_totals.entry(month.year()).or_insert(0.0) += 1.0;
                    }
                }
                match salience_regression(&article_totals, &bill_totals) {
                    Ok(result) => report.salience = Some(result),
                    Err(e) => report.skipped_stages.push(format!("salience: {e}")),
                }
            }
        }
        None if stages.legislation => report
            .skipped_stages
            .push("legislation linkage: legislation input missing".into()),
        _ => {}
    }

    Ok(report)
}

fn write_file(path: &Path, content: &str) -> Result<(), PipelineError> {
    fs::write(path, content).map_err(io_err(path))
}

/// Writes every report file. Returns the written paths.
pub fn emit_report(
    report: &RunReport,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    let emit = |name: &str, content: String| -> Result<PathBuf, PipelineError> {
        let path = out_dir.join(name);
        write_file(&path, &content)?;
        Ok(path)
    };

    let mut table1 = String::from("state,p,r,r2\n");
    for row in &report.table1 {
        table1.push_str(&format!(
            "{},{},{},{}\n",
            row.state,
            fmt_sig(row.p),
            fmt_sig(row.r),
            fmt_sig(row.r_squared)
        ));
    }
    written.push(emit("table1.csv", table1)?);

    let mut screening_full = String::from("state,theme,polarity,cc,p,lag,transform\n");
    for (state, rows) in &report.screening {
        let mut per_state = String::from("topic,cc,p,lag\n");
        for row in rows {
            per_state.push_str(&format!(
                "{}_{},{},{},{}\n",
                row.theme,
                row.polarity,
                fmt_sig(row.cc),
                fmt_sig(row.p),
                row.lag
            ));
            screening_full.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.state,
                row.theme,
                row.polarity,
                fmt_sig(row.cc),
                fmt_sig(row.p),
                row.lag,
                row.transform
            ));
        }
        written.push(emit(&format!("screen_{state}.csv"), per_state)?);
    }
    written.push(emit("screening.csv", screening_full)?);

    for (state, table) in &report.ttests {
        let mut csv = String::from(
            "theme,t,p,mentioned_mean,mentioned_sd,not_mentioned_mean,not_mentioned_sd\n",
        );
        for row in &table.rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.theme,
                fmt_sig(row.test.t_stat),
                fmt_sig(row.test.p_value),
                fmt_sig(row.test.group_means.0),
                fmt_sig(row.test.group_sds.0),
                fmt_sig(row.test.group_means.1),
                fmt_sig(row.test.group_sds.1)
            ));
        }
        written.push(emit(&format!("ttests_{state}.csv"), csv)?);
    }

    let mut salience = String::from("scope,p,r,r2\n");
    if let Some(result) = &report.salience {
        salience.push_str(&format!(
            "ALL,{},{},{}\n",
            fmt_sig(result.p_value),
            fmt_sig(result.r),
            fmt_sig(result.r_squared)
        ));
    }
    written.push(emit("salience.csv", salience)?);

    let mut fig3 = String::from("month,articles_per_source\n");
    for (month, value) in &report.fig3 {
        let cell = value.map(fmt_sig).unwrap_or_default();
        fig3.push_str(&format!("{month},{cell}\n"));
    }
    written.push(emit("fig3_per_source.csv", fig3)?);

    for (state, rows) in &report.fig1 {
        let mut csv = String::from("month,top_theme_mean,sentiment\n");
        for row in rows {
            csv.push_str(&format!(
                "{},{},{}\n",
                row.month,
                fmt_sig(row.top_theme_mean),
                fmt_sig(row.sentiment)
            ));
        }
        written.push(emit(&format!("fig1_{state}.csv"), csv)?);
    }

    let provenance = serde_json::json!({
        "config": config,
        "config_digest": report.config_digest,
        "seed": report.seed,
        "skipped_lines": report.skipped_lines,
        "state_errors": report.state_errors,
        "skipped_stages": report.skipped_stages,
    });
    written.push(emit(
        "provenance.json",
        serde_json::to_string_pretty(&provenance).expect("provenance serializes") + "\n",
    )?);

    let mut skips = String::new();
    for parse_report in &report.parse_reports {
        skips.push_str(&parse_report.summary());
    }
    written.push(emit("skip_report.txt", skips)?);

    Ok(written)
}

/// Writes the per-state series export used by the `series` subcommand.
pub fn export_series(
    records: &[GkgRecord],
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    for state in &config.states {
        let filtered = filter_articles(records, &config.theme_filter, state);
        let series = build_series(&filtered, &config.article_range, state, &ToneLexicon);
        let pruned = prune_infrequent(series, config.prune_threshold);
        let path = out_dir.join(format!("series_{state}.csv"));
        write_file(&path, &series_to_csv(&pruned))?;
        written.push(path);
    }
    Ok(written)
}
