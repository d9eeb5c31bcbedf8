//! Pluggable annotation: prompt-based labeling tasks (post sentiment,
//! bill session year, topic-keyword to GKG-theme mapping) over a
//! wire-level backend contract, plus the reliability metrics used to
//! check annotator agreement.
//!
//! Backends speak newline-delimited JSON: `{id, prompt}` in, `{id, reply}`
//! out. Tests and offline runs use the deterministic stub.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gkg::StateCode;
use crate::series::ScoredPost;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("need at least 2 coders and one item with 2+ codings")]
    InsufficientCodings,
    #[error("label and gold vectors differ in length: {labels} vs {gold}")]
    LengthMismatch { labels: usize, gold: usize },
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid post line: {0}")]
    BadPost(String),
}

#[derive(Debug, Error)]
#[error("backend unavailable: {0}")]
pub struct BackendError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    PostSentiment,
    BillYear,
    ThemeMap,
}

/// Label sets a task may emit.
#[derive(Debug, Clone, PartialEq)]
pub enum AllowedLabels {
    /// Exactly the scores 1..=5.
    Scores,
    /// Exactly the two legislative session years.
    SessionYears(i32, i32),
    /// Up to `max` themes drawn from the provided list.
    Themes { options: Vec<String>, max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Label {
    Score(u8),
    Year(i32),
    Themes(Vec<String>),
    Invalid,
}

/// A rendered-prompt annotation task.
#[derive(Debug, Clone)]
pub struct AnnotationTask {
    pub kind: TaskKind,
    /// Template with `{examples}` and `{item}` placeholders.
    pub prompt_template: String,
    pub few_shot_examples: Vec<(String, String)>,
    pub allowed: AllowedLabels,
}

impl AnnotationTask {
    /// Rates one post 1-5 on attitude toward homeless people; carries one
    /// worked example per score so the scale is anchored.
    pub fn post_sentiment() -> Self {
        let few_shot_examples = vec![
            ("These people camping by the freeway are a menace and should be forced out.".to_string(), "1".to_string()),
            ("Another encampment appeared near the park, not thrilled about walking past it.".to_string(), "2".to_string()),
            ("City council meets Tuesday to discuss the new shelter budget.".to_string(), "3".to_string()),
            ("Met a man outside the library who lost his job last year; people deserve better.".to_string(), "4".to_string()),
            ("Nobody should sleep outside in winter. Fund shelters now, these are our neighbors.".to_string(), "5".to_string()),
        ];
        AnnotationTask {
            kind: TaskKind::PostSentiment,
            prompt_template: concat!(
                "Rate the following social media post's attitude toward homeless ",
                "people, not its overall mood. Use this scale: 1 strongly negative ",
                "toward homeless people, 2 somewhat negative, 3 neutral or unrelated, ",
                "4 somewhat supportive, 5 strongly supportive. Reply with the number ",
                "only.\n{examples}\nPost: {item}\nScore:"
            )
            .to_string(),
            few_shot_examples,
            allowed: AllowedLabels::Scores,
        }
    }

    /// Reads a bill excerpt and answers which of the two session years it
    /// was introduced in, number only.
    pub fn bill_year(year_one: i32, year_two: i32) -> Self {
        AnnotationTask {
            kind: TaskKind::BillYear,
            prompt_template: format!(
                "Given this excerpt of a state bill, reply with the year it was \
                 introduced. The answer must be {year_one} or {year_two} and \
                 nothing else; if the excerpt does not say, pick the closer \
                 year.\n{{examples}}\nExcerpt: {{item}}\nYear:"
            ),
            few_shot_examples: Vec::new(),
            allowed: AllowedLabels::SessionYears(year_one, year_two),
        }
    }

    /// Maps a list of topic keywords to at most three themes from the
    /// provided catalog, comma separated.
    pub fn theme_map(options: Vec<String>) -> Self {
        let catalog = options.join(", ");
        AnnotationTask {
            kind: TaskKind::ThemeMap,
            prompt_template: format!(
                "The following keywords describe one topic extracted from state \
                 legislation. Choose up to 3 matching themes from this list and \
                 reply with them comma separated, nothing else: {catalog}\n\
                 {{examples}}\nKeywords: {{item}}\nThemes:"
            ),
            few_shot_examples: Vec::new(),
            allowed: AllowedLabels::Themes { options, max: 3 },
        }
    }

    pub fn validate(&self) -> Result<(), AnnotateError> {
        match (&self.kind, &self.allowed) {
            (TaskKind::PostSentiment, AllowedLabels::Scores) => {
                if self.few_shot_examples.len() != 5 {
                    return Err(AnnotateError::InvalidTask(
                        "post sentiment needs one example per score".into(),
                    ));
                }
                let labels: Vec<&str> = self
                    .few_shot_examples
                    .iter()
                    .map(|(_, l)| l.as_str())
                    .collect();
                for expect in ["1", "2", "3", "4", "5"] {
                    if !labels.contains(&expect) {
                        return Err(AnnotateError::InvalidTask(format!(
                            "missing example for score {expect}"
                        )));
                    }
                }
                Ok(())
            }
            (TaskKind::BillYear, AllowedLabels::SessionYears(a, b)) if a != b => Ok(()),
            (TaskKind::ThemeMap, AllowedLabels::Themes { options, max }) => {
                if options.is_empty() || *max == 0 || *max > 3 {
                    return Err(AnnotateError::InvalidTask(
                        "theme map needs options, max 1-3".into(),
                    ));
                }
                Ok(())
            }
            _ => Err(AnnotateError::InvalidTask(
                "task kind and label set disagree".into(),
            )),
        }
    }

    pub fn render(&self, item: &str) -> String {
        let examples = self
            .few_shot_examples
            .iter()
            .map(|(input, label)| format!("Post: {input}\nScore: {label}"))
            .collect::<Vec<_>>()
            .join("\n");
        self.prompt_template
            .replace("{examples}", &examples)
            .replace("{item}", item)
    }

    /// Parses a raw backend reply against the task's label set.
    pub fn parse_reply(&self, reply: &str) -> Label {
        let cleaned = reply
            .trim()
            .trim_end_matches(['.', ',', ';', ':', '!'])
            .trim();
        match &self.allowed {
            AllowedLabels::Scores => match cleaned.parse::<u8>() {
                Ok(score) if (1..=5).contains(&score) => Label::Score(score),
                _ => Label::Invalid,
            },
            AllowedLabels::SessionYears(a, b) => match cleaned.parse::<i32>() {
                Ok(year) if year == *a || year == *b => Label::Year(year),
                _ => Label::Invalid,
            },
            AllowedLabels::Themes { options, max } => {
                let mut picked = Vec::new();
                for part in cleaned.split(',') {
                    let candidate = part.trim().to_ascii_uppercase();
                    if candidate.is_empty() {
                        continue;
                    }
                    if options.iter().any(|o| o.eq_ignore_ascii_case(&candidate))
                        && !picked.contains(&candidate)
                    {
                        picked.push(candidate);
                    }
                    if picked.len() == *max {
                        break;
                    }
                }
                if picked.is_empty() {
                    Label::Invalid
                } else {
                    Label::Themes(picked)
                }
            }
        }
    }
}

/// Wire contract: a rendered prompt goes out, a raw reply comes back.
pub trait AnnotationBackend: Send + Sync {
    fn send(&self, prompt: &str) -> Result<String, BackendError>;
}

/// Always replies with the same string. Handy for contract tests.
pub struct FixedBackend(pub String);

impl AnnotationBackend for FixedBackend {
    fn send(&self, _prompt: &str) -> Result<String, BackendError> {
        Ok(self.0.clone())
    }
}

/// Closure-backed test backend.
pub struct FnBackend<F: Fn(&str) -> Result<String, BackendError> + Send + Sync>(pub F);

impl<F: Fn(&str) -> Result<String, BackendError> + Send + Sync> AnnotationBackend for FnBackend<F> {
    fn send(&self, prompt: &str) -> Result<String, BackendError> {
        (self.0)(prompt)
    }
}

/// Deterministic offline annotator. Scores the text after the final
/// `Post:` marker with small pro/anti word lists; answers year prompts by
/// echoing a year found in the item; answers theme prompts with catalog
/// entries whose words appear in the keywords.
#[derive(Debug, Default, Clone, Copy)]
pub struct LexiconStub;

const PRO_WORDS: [&str; 10] = [
    "help",
    "support",
    "compassion",
    "deserve",
    "neighbors",
    "fund",
    "care",
    "dignity",
    "home",
    "together",
];
const ANTI_WORDS: [&str; 10] = [
    "menace",
    "nuisance",
    "dangerous",
    "criminal",
    "lazy",
    "eyesore",
    "sweep",
    "remove",
    "ban",
    "blight",
];

impl LexiconStub {
    fn score_text(text: &str) -> u8 {
        let lower = text.to_lowercase();
        let pro = PRO_WORDS.iter().filter(|w| lower.contains(**w)).count() as i64;
        let anti = ANTI_WORDS.iter().filter(|w| lower.contains(**w)).count() as i64;
        match pro - anti {
            d if d <= -2 => 1,
            -1 => 2,
            0 => 3,
            1 => 4,
            _ => 5,
        }
    }
}

impl AnnotationBackend for LexiconStub {
    fn send(&self, prompt: &str) -> Result<String, BackendError> {
        if let Some(idx) = prompt.rfind("Post:") {
            let item = prompt[idx + 5..].split("\nScore:").next().unwrap_or("");
            return Ok(Self::score_text(item).to_string());
        }
        if let Some(idx) = prompt.rfind("Excerpt:") {
            let item = &prompt[idx + 8..];
            let year = item
                .split(|c: char| !c.is_ascii_digit())
                .filter(|t| t.len() == 4)
                .find_map(|t| t.parse::<i32>().ok());
            return Ok(year.map(|y| y.to_string()).unwrap_or_default());
        }
        if let Some(idx) = prompt.rfind("Keywords:") {
            let item = prompt[idx + 9..].to_ascii_uppercase();
            let catalog = prompt
                .split("reply with them comma separated, nothing else:")
                .nth(1)
                .and_then(|rest| rest.split('\n').next())
                .unwrap_or("");
            let keywords: Vec<&str> = item
                .split(|c: char| !c.is_ascii_alphanumeric())
                .filter(|w| w.len() >= 3)
                .collect();
            let mut picked = Vec::new();
            for theme in catalog.split(',').map(str::trim) {
                if theme.is_empty() {
                    continue;
                }
                let theme_up = theme.to_ascii_uppercase();
                if keywords.iter().any(|k| theme_up.contains(*k)) {
                    picked.push(theme_up);
                    if picked.len() == 3 {
                        break;
                    }
                }
            }
            return Ok(picked.join(", "));
        }
        Err(BackendError("stub cannot interpret prompt".into()))
    }
}

/// Spawned-process backend speaking `{id, prompt}` -> `{id, reply}` NDJSON
/// over stdin/stdout.
pub struct ProcessBackend {
    child: Mutex<(Child, BufReader<std::process::ChildStdout>)>,
    counter: AtomicUsize,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    id: usize,
    prompt: &'a str,
}

#[derive(Deserialize)]
struct WireReply {
    id: usize,
    reply: String,
}

impl ProcessBackend {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, BackendError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| BackendError(format!("spawn {program}: {e}")))?;
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| BackendError("no stdout".into()))?;
        Ok(Self {
            child: Mutex::new((child, BufReader::new(stdout))),
            counter: AtomicUsize::new(0),
        })
    }
}

impl AnnotationBackend for ProcessBackend {
    fn send(&self, prompt: &str) -> Result<String, BackendError> {
        let id = self.counter.fetch_add(1, Ordering::Relaxed);
        let request = serde_json::to_string(&WireRequest { id, prompt })
            .map_err(|e| BackendError(e.to_string()))?;
        let mut guard = self
            .child
            .lock()
            .map_err(|_| BackendError("poisoned".into()))?;
        let (child, reader) = &mut *guard;
        let stdin = child
            .stdin
            .as_mut()
            .ok_or_else(|| BackendError("no stdin".into()))?;
        stdin
            .write_all(request.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .map_err(|e| BackendError(format!("write: {e}")))?;
        let mut line = String::new();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| BackendError(format!("read: {e}")))?;
        if read == 0 {
            return Err(BackendError("backend closed its output".into()));
        }
        let reply: WireReply =
            serde_json::from_str(line.trim()).map_err(|e| BackendError(format!("reply: {e}")))?;
        if reply.id != id {
            return Err(BackendError(format!(
                "reply id {} for request {id}",
                reply.id
            )));
        }
        Ok(reply.reply)
    }
}

impl Drop for ProcessBackend {
    fn drop(&mut self) {
        if let Ok(mut guard) = self.child.lock() {
            let _ = guard.0.kill();
            let _ = guard.0.wait();
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    /// Concurrent in-flight requests.
    pub in_flight: usize,
    /// Transport retries per item before giving up on it.
    pub transport_retries: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            in_flight: 4,
            transport_retries: 2,
        }
    }
}

type ItemOutcome = (Label, Option<String>);

#[derive(Debug)]
pub struct BatchResult {
    /// One label per input item, in input order.
    pub labels: Vec<Label>,
    pub invalid_count: usize,
    /// Per-item transport failures, by input index.
    pub errors: Vec<(usize, String)>,
}

/// Annotates a batch of items. Unparseable replies are retried once and
/// then labeled `Invalid`; transport failures are retried up to the budget
/// and reported per item without aborting the batch.
pub fn annotate_batch(
    items: &[String],
    task: &AnnotationTask,
    backend: &dyn AnnotationBackend,
    options: &BatchOptions,
) -> Result<BatchResult, AnnotateError> {
    task.validate()?;
    let results: Vec<ItemOutcome> = {
        let annotate_one = |item: &String| -> ItemOutcome {
            let prompt = task.render(item);
            let mut parse_attempts = 0;
            let mut transport_attempts = 0;
            loop {
                match backend.send(&prompt) {
                    Ok(reply) => match task.parse_reply(&reply) {
                        Label::Invalid if parse_attempts == 0 => parse_attempts += 1,
                        label => return (label, None),
                    },
                    Err(err) => {
                        transport_attempts += 1;
                        if transport_attempts > options.transport_retries {
                            return (Label::Invalid, Some(err.to_string()));
                        }
                    }
                }
            }
        };

        let workers = options.in_flight.max(1).min(items.len().max(1));
        if workers <= 1 {
            items.iter().map(annotate_one).collect()
        } else {
            let next = AtomicUsize::new(0);
            let slots: Vec<Mutex<Option<ItemOutcome>>> =
                items.iter().map(|_| Mutex::new(None)).collect();
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let idx = next.fetch_add(1, Ordering::Relaxed);
                        if idx >= items.len() {
                            break;
                        }
                        let out = annotate_one(&items[idx]);
                        *slots[idx].lock().expect("slot") = Some(out);
                    });
                }
            });
            slots
                .into_iter()
                .map(|slot| slot.into_inner().expect("slot").expect("filled"))
                .collect()
        }
    };

    let mut labels = Vec::with_capacity(items.len());
    let mut invalid_count = 0;
    let mut errors = Vec::new();
    for (idx, (label, error)) in results.into_iter().enumerate() {
        if label == Label::Invalid {
            invalid_count += 1;
        }
        if let Some(message) = error {
            errors.push((idx, message));
        }
        labels.push(label);
    }
    Ok(BatchResult {
        labels,
        invalid_count,
        errors,
    })
}

/// Distance metric for Krippendorff's alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AlphaMetric {
    Nominal,
    Ordinal,
    Interval,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReliabilityReport {
    pub alpha: f64,
    pub metric: AlphaMetric,
    /// Items contributing at least two codings.
    pub n_items: usize,
    pub n_coders: usize,
    pub accuracy: Option<f64>,
}

/// Krippendorff's alpha over an items x coders matrix with missing codings
/// allowed: alpha = 1 - D_o / D_e on the coincidence matrix.
pub fn krippendorff_alpha(
    codings: &[Vec<Option<f64>>],
    metric: AlphaMetric,
) -> Result<ReliabilityReport, AnnotateError> {
    let n_coders = codings.iter().map(Vec::len).max().unwrap_or(0);
    if n_coders < 2 {
        return Err(AnnotateError::InsufficientCodings);
    }

    // Distinct values in sorted order index the coincidence matrix.
    let mut values: Vec<f64> = codings.iter().flatten().flatten().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    values.dedup();
    let value_index = |v: f64| values.iter().position(|&x| x == v).expect("known value");
    let v_count = values.len();

    let mut coincidence = vec![vec![0.0f64; v_count]; v_count];
    let mut n_items = 0;
    for item in codings {
        let present: Vec<f64> = item.iter().flatten().copied().collect();
        let m = present.len();
        if m < 2 {
            continue;
        }
        n_items += 1;
        for (i, &a) in present.iter().enumerate() {
            for (j, &b) in present.iter().enumerate() {
                if i != j {
                    coincidence[value_index(a)][value_index(b)] += 1.0 / (m as f64 - 1.0);
                }
            }
        }
    }
    if n_items == 0 {
        return Err(AnnotateError::InsufficientCodings);
    }

    let marginals: Vec<f64> = (0..v_count).map(|v| coincidence[v].iter().sum()).collect();
    let total: f64 = marginals.iter().sum();

    let distance_sq = |i: usize, j: usize| -> f64 {
        match metric {
            AlphaMetric::Nominal => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
            AlphaMetric::Interval => {
                let d = values[i] - values[j];
                d * d
            }
            AlphaMetric::Ordinal => {
                if i == j {
                    return 0.0;
                }
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                let between: f64 = (lo..=hi).map(|g| marginals[g]).sum();
                let d = between - (marginals[lo] + marginals[hi]) / 2.0;
                d * d
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for i in 0..v_count {
        for j in 0..v_count {
            if i == j {
                continue;
            }
            observed += coincidence[i][j] * distance_sq(i, j);
            expected += marginals[i] * marginals[j] * distance_sq(i, j);
        }
    }
    let d_o = observed / total;
    let d_e = expected / (total * (total - 1.0));

    // All codings identical: no disagreement is observable or expected.
    let alpha = if d_e == 0.0 { 1.0 } else { 1.0 - d_o / d_e };

    Ok(ReliabilityReport {
        alpha,
        metric,
        n_items,
        n_coders,
        accuracy: None,
    })
}

/// Fraction of labels exactly matching gold; `Invalid` never matches.
pub fn label_accuracy(labels: &[Label], gold: &[Label]) -> Result<f64, AnnotateError> {
    if labels.len() != gold.len() {
        return Err(AnnotateError::LengthMismatch {
            labels: labels.len(),
            gold: gold.len(),
        });
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let hits = labels
        .iter()
        .zip(gold)
        .filter(|(l, g)| **l != Label::Invalid && l == g)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// One post awaiting sentiment annotation; the raw-posts JSONL row format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawPost {
    pub date: NaiveDate,
    pub state: StateCode,
    pub text: String,
}

pub fn read_raw_posts(content: &str) -> Result<Vec<RawPost>, AnnotateError> {
    content
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            serde_json::from_str::<RawPost>(line)
                .map_err(|e| AnnotateError::BadPost(format!("{line:?}: {e}")))
        })
        .collect()
}

/// Annotates raw posts with 1-5 sentiment scores, dropping items the
/// backend could not label.
pub fn score_posts(
    posts: &[RawPost],
    backend: &dyn AnnotationBackend,
    options: &BatchOptions,
) -> Result<(Vec<ScoredPost>, BatchResult), AnnotateError> {
    let task = AnnotationTask::post_sentiment();
    let items: Vec<String> = posts.iter().map(|p| p.text.clone()).collect();
    let batch = annotate_batch(&items, &task, backend, options)?;
    let scored = posts
        .iter()
        .zip(&batch.labels)
        .filter_map(|(post, label)| match label {
            Label::Score(score) => Some(ScoredPost {
                date: post.date,
                state: post.state.clone(),
                text: post.text.clone(),
                score: *score as i64,
            }),
            _ => None,
        })
        .collect();
    Ok((scored, batch))
}

/// Per-year theme sets derived by mapping each LDA topic's keywords to GKG
/// themes, attributing a topic to the years of the documents it dominates.
pub fn map_topics_to_themes(
    model: &crate::topics::TopicModel,
    corpus: &crate::topics::Corpus,
    doc_years: &BTreeMap<String, i32>,
    theme_options: Vec<String>,
    backend: &dyn AnnotationBackend,
    options: &BatchOptions,
) -> Result<BTreeMap<i32, std::collections::BTreeSet<String>>, AnnotateError> {
    let task = AnnotationTask::theme_map(theme_options);
    let items: Vec<String> = (0..model.k)
        .map(|topic| model.top_words(corpus, topic, 10).join(" "))
        .collect();
    let batch = annotate_batch(&items, &task, backend, options)?;

    // A topic belongs to the years of documents where it is the argmax.
    let mut years_by_topic: Vec<std::collections::BTreeSet<i32>> =
        vec![Default::default(); model.k];
    for (doc_idx, dist) in model.doc_topic.iter().enumerate() {
        let top_topic = (0..model.k)
            .max_by(|&a, &b| {
                dist[a]
                    .partial_cmp(&dist[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(0);
        if let Some(year) = doc_years.get(&corpus.doc_ids[doc_idx]) {
            years_by_topic[top_topic].insert(*year);
        }
    }

    let mut themes_by_year: BTreeMap<i32, std::collections::BTreeSet<String>> = BTreeMap::new();
    for (topic, label) in batch.labels.iter().enumerate() {
        if let Label::Themes(themes) = label {
            for year in &years_by_topic[topic] {
                themes_by_year
                    .entry(*year)
                    .or_default()
                    .extend(themes.iter().cloned());
            }
        }
    }
    Ok(themes_by_year)
}
