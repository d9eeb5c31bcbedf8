//! Synthetic-state generator: a GKG fixture, scored posts, and a
//! legislation corpus with one planted causal theme, for end-to-end
//! verification without real feeds.

use rand::Rng as _;
use serde::Serialize;

use crate::gkg::StateCode;
use crate::month::MonthRange;
use crate::rng::{derive_seed, stream, Rng};
use crate::series::ScoredPost;

/// What the generator planted, for assertions downstream.
#[derive(Debug, Clone, Serialize)]
pub struct SynthGroundTruth {
    pub planted_theme: String,
    /// Polarity bucket the planted articles land in.
    pub planted_polarity: String,
    pub planted_lag: usize,
    pub noise_themes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// GKG 2.1 TSV lines.
    pub gkg_lines: Vec<String>,
    /// Scored posts, already annotated 1-5.
    pub posts: Vec<ScoredPost>,
    /// Legislation documents as (state, year, doc_id, text).
    pub legislation: Vec<(StateCode, i32, String, String)>,
    pub truth: SynthGroundTruth,
}

pub const PLANTED_THEME: &str = "SYN_SHELTER_FUNDING";
const NOISE_THEMES: [&str; 6] = [
    "SYN_TRANSIT",
    "SYN_WEATHER",
    "SYN_SPORTS",
    "SYN_ELECTIONS",
    "SYN_TOURISM",
    "SYN_HARVEST",
];
/// Rarely-tagged theme that the 1.5% prune must remove.
const RARE_THEME: &str = "SYN_RARE_EVENT";

const BASE_ARTICLES_PER_MONTH: usize = 170;
const POSTS_PER_MONTH: usize = 200;
const SOURCES: usize = 8;

fn gauss(rng: &mut Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Stationary AR(1) mapped into a frequency band.
fn frequency_series(rng: &mut Rng, months: usize, center: f64, spread: f64) -> Vec<f64> {
    let mut z = 0.0;
    (0..months)
        .map(|_| {
            z = 0.5 * z + gauss(rng);
            (center + spread * z).clamp(0.02, 0.95)
        })
        .collect()
}

fn gkg_line(
    record_id: &str,
    date: &str,
    source: &str,
    themes: &[(String, u32)],
    state: &StateCode,
    positive: f64,
    negative: f64,
) -> String {
    let mut fields = vec![String::new(); 27];
    fields[0] = record_id.to_string();
    fields[1] = date.to_string();
    fields[3] = source.to_string();
    fields[8] = themes
        .iter()
        .map(|(code, off)| format!("{code},{off}"))
        .collect::<Vec<_>>()
        .join(";");
    fields[10] = format!(
        "2#Synthia, {state} (synthetic)#US#{}##40.7#-95.4#SY01#120",
        state.adm1()
    );
    fields[15] = format!(
        "{:.2},{:.2},{:.2},{:.2},10.0,0.5,400",
        positive - negative,
        positive,
        negative,
        positive + negative
    );
    fields.join("\t")
}

/// Generates one synthetic state.
///
/// The planted theme's positive monthly frequency Granger-causes the post
/// sentiment series at `planted_lag`; noise themes are independent AR(1)
/// series, plus one rare theme below the prune threshold.
pub fn generate_state(
    state: &StateCode,
    range: &MonthRange,
    planted_lag: usize,
    seed: u64,
) -> SynthOutput {
    let months: Vec<_> = range.iter().collect();
    let n_months = months.len();
    let root = derive_seed(seed, "synth") ^ crate::rng::fnv1a(state.as_str().as_bytes());

    let mut freq_rng = stream(derive_seed(root, "frequencies"));
    let planted_freq = frequency_series(&mut freq_rng, n_months, 0.30, 0.06);
    let noise_freqs: Vec<Vec<f64>> = NOISE_THEMES
        .iter()
        .map(|_| frequency_series(&mut freq_rng, n_months, 0.20, 0.05))
        .collect();

    // Post sentiment follows its own AR(1) plus the lagged planted signal.
    let mut sentiment = vec![3.0; n_months];
    let mut sent_rng = stream(derive_seed(root, "sentiment"));
    for t in 1..n_months {
        let planted = if t >= planted_lag {
            (planted_freq[t - planted_lag] - 0.30) * 6.0
        } else {
            0.0
        };
        let own = 0.4 * (sentiment[t - 1] - 3.0);
        sentiment[t] = (3.0 + own + planted + 0.15 * gauss(&mut sent_rng)).clamp(1.2, 4.8);
    }

    // Articles: per month, assign themes so the observed relative
    // frequencies reproduce the planted series.
    let mut gkg_lines = Vec::new();
    let mut article_rng = stream(derive_seed(root, "articles"));
    for (m_idx, month) in months.iter().enumerate() {
        // Monthly volume varies so salience regressions see real spread.
        let month_articles = BASE_ARTICLES_PER_MONTH + article_rng.gen_range(0..60);
        let planted_count = (planted_freq[m_idx] * month_articles as f64).round() as usize;
        let noise_counts: Vec<usize> = noise_freqs
            .iter()
            .map(|f| (f[m_idx] * month_articles as f64).round() as usize)
            .collect();
        for a in 0..month_articles {
            let mut themes: Vec<(String, u32)> = Vec::new();
            if a < planted_count {
                themes.push((PLANTED_THEME.to_string(), 80));
            }
            for (n_idx, &count) in noise_counts.iter().enumerate() {
                // Rotate which articles carry each noise theme so themes
                // overlap rather than nesting.
                let slot = (a + n_idx * 37) % month_articles;
                if slot < count {
                    themes.push((NOISE_THEMES[n_idx].to_string(), 200 + 10 * n_idx as u32));
                }
            }
            if a == 0 && m_idx % 11 == 0 {
                themes.push((RARE_THEME.to_string(), 900));
            }
            if themes.is_empty() {
                themes.push((NOISE_THEMES[0].to_string(), 200));
            }
            // Positive article for the planted theme months; random tone
            // otherwise, kept away from ties.
            let (positive, negative) = if a < planted_count {
                (3.0 + article_rng.gen_range(0.0..1.0), 1.0)
            } else if article_rng.gen_bool(0.5) {
                (2.5 + article_rng.gen_range(0.0..1.0), 1.0)
            } else {
                (1.0, 2.5 + article_rng.gen_range(0.0..1.0))
            };
            let day = 1 + (a % 28);
            let date = format!("{:04}{:02}{:02}120000", month.year(), month.month(), day);
            let record_id = format!("{}-{:03}-{}", date, a, state.as_str());
            let source = format!("synth-source-{}.example", a % SOURCES);
            gkg_lines.push(gkg_line(
                &record_id, &date, &source, &themes, state, positive, negative,
            ));
        }
    }

    // Posts: quantize the target monthly mean into integer 1-5 scores.
    let mut posts = Vec::new();
    for (m_idx, month) in months.iter().enumerate() {
        let target = sentiment[m_idx];
        let base = target.floor().clamp(1.0, 4.0) as i64;
        let frac = target - base as f64;
        let high_count = (frac * POSTS_PER_MONTH as f64).round() as usize;
        for p in 0..POSTS_PER_MONTH {
            let score = if p < high_count { base + 1 } else { base };
            let day = 1 + (p % 28) as u32;
            let date = chrono::NaiveDate::from_ymd_opt(month.year(), month.month() as u32, day)
                .expect("valid synthetic date");
            posts.push(ScoredPost {
                date,
                state: state.clone(),
                text: format!("synthetic post {p} for {month}"),
                score,
            });
        }
    }

    // Legislation: a handful of docs per year with theme-flavored bags of
    // words so LDA and the theme mapping have something to chew on.
    let vocab_by_topic: [(&str, [&str; 6]); 3] = [
        (
            "shelter",
            ["shelter", "funding", "beds", "housing", "grant", "winter"],
        ),
        (
            "policing",
            [
                "enforcement",
                "citation",
                "camping",
                "ordinance",
                "penalty",
                "court",
            ],
        ),
        (
            "health",
            [
                "clinic",
                "treatment",
                "outreach",
                "medicaid",
                "nursing",
                "recovery",
            ],
        ),
    ];
    let mut legislation = Vec::new();
    let mut legis_rng = stream(derive_seed(root, "legislation"));
    let mut doc_counter = 0;
    for year in months.first().unwrap().year()..=months.last().unwrap().year() {
        let docs_this_year = 4 + (legis_rng.gen_range(0..3)) as usize;
        for d in 0..docs_this_year {
            let (flavor, words) = vocab_by_topic[(d + year as usize) % vocab_by_topic.len()];
            let mut text = String::new();
            for _ in 0..40 {
                text.push_str(words[legis_rng.gen_range(0..words.len())]);
                text.push(' ');
            }
            let doc_id = format!("{}-{}-{:04}", state.as_str(), year, doc_counter);
            doc_counter += 1;
            legislation.push((state.clone(), year, doc_id, format!("{flavor} act: {text}")));
        }
    }

    SynthOutput {
        gkg_lines,
        posts,
        legislation,
        truth: SynthGroundTruth {
            planted_theme: PLANTED_THEME.to_string(),
            planted_polarity: "POS".to_string(),
            planted_lag,
            noise_themes: NOISE_THEMES.iter().map(|s| s.to_string()).collect(),
        },
    }
}

/// All theme codes the generator can emit, for run configs.
pub fn synth_theme_filter() -> Vec<String> {
    let mut themes = vec![PLANTED_THEME.to_string(), RARE_THEME.to_string()];
    themes.extend(NOISE_THEMES.iter().map(|s| s.to_string()));
    themes
}

/// Serializes posts as scored-posts JSONL.
pub fn posts_to_jsonl(posts: &[ScoredPost]) -> String {
    let mut out = String::new();
    for post in posts {
        out.push_str(&serde_json::to_string(post).expect("post serializes"));
        out.push('\n');
    }
    out
}

/// Serializes legislation docs as JSONL.
pub fn legislation_to_jsonl(docs: &[(StateCode, i32, String, String)]) -> String {
    let mut out = String::new();
    for (state, year, doc_id, text) in docs {
        let doc = crate::topics::LegisDoc {
            state: state.clone(),
            year: *year,
            doc_id: doc_id.clone(),
            text: text.clone(),
        };
        out.push_str(&serde_json::to_string(&doc).expect("doc serializes"));
        out.push('\n');
    }
    out
}
