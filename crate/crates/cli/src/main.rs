//! Command-line front end for the media-framing analytics pipeline.
//!
//! Exit codes: 0 full success, 2 partial success (some states or stages
//! failed), 1 fatal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use framecast_core::annotate::{
    annotate_batch, AnnotationBackend, AnnotationTask, BatchOptions, Label, LexiconStub,
    ProcessBackend,
};
use framecast_core::gkg::{filter_articles, parse_file, StateCode};
use framecast_core::pipeline::{
    emit_report, export_series, load_inputs, run_stages, RunConfig, RunPaths, RunStages,
};
use framecast_core::series::ScoredPost;
use framecast_core::synth;
use framecast_core::textio::fmt_sig;
use framecast_core::topics::{default_stopwords, lda_fit, preprocess, read_legis_docs, select_k};

#[derive(Parser)]
#[command(
    name = "framecast",
    version,
    about = "Media framing analytics pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict the run to one state.
    #[arg(long)]
    state: Option<String>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse GKG files and print the skip report.
    Ingest {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Export pruned topic-sentiment series per state.
    Series {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the Granger screening stage and write screening tables.
    Screen {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run screening plus the VAR stage and write the per-state summary.
    Var {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit LDA on the legislation corpus and print topic words.
    Lda {
        #[command(flatten)]
        common: CommonArgs,
        /// Pick K by coherence over this comma-separated range instead of
        /// the configured topic count.
        #[arg(long, value_delimiter = ',')]
        k_range: Option<Vec<usize>>,
    },
    /// Annotate raw posts with 1-5 sentiment scores.
    Annotate {
        #[command(flatten)]
        common: CommonArgs,
        /// Raw posts JSONL ({date, state, text}).
        #[arg(long)]
        posts: PathBuf,
        /// Backend command speaking {id,prompt} -> {id,reply} NDJSON;
        /// defaults to the deterministic offline stub.
        #[arg(long)]
        backend: Option<String>,
    },
    /// Run the legislation-linkage stage and write t-test tables.
    Legis {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run every stage and emit the full report.
    Report {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Generate a synthetic state (GKG + posts + legislation) with a
    /// planted causal theme.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Lag at which the planted theme forecasts sentiment.
        #[arg(long, default_value_t = 1)]
        lag: usize,
        /// Directory for the generated inputs.
        #[arg(long, default_value = "synth_data")]
        dir: PathBuf,
    },
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => {
            RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?
        }
        None => bail!("--config is required for this subcommand"),
    };
    apply_overrides(&mut config, common)?;
    Ok(config)
}

fn apply_overrides(config: &mut RunConfig, common: &CommonArgs) -> Result<()> {
    if let Some(state) = &common.state {
        let code: StateCode = state.parse().map_err(|e: String| anyhow::anyhow!(e))?;
        config.states = vec![code];
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.paths.out_dir = out.clone();
    }
    Ok(())
}

fn make_backend(spec: &Option<String>) -> Result<Box<dyn AnnotationBackend>> {
    match spec {
        None => Ok(Box::new(LexiconStub)),
        Some(command) => {
            let mut parts = command.split_whitespace();
            let program = parts.next().context("empty backend command")?;
            let args: Vec<String> = parts.map(str::to_string).collect();
            Ok(Box::new(
                ProcessBackend::spawn(program, &args)
                    .map_err(|e| anyhow::anyhow!(e.to_string()))?,
            ))
        }
    }
}

fn cmd_ingest(common: &CommonArgs) -> Result<ExitCode> {
    let config = load_config(common)?;
    let mut total = 0usize;
    let mut skipped = 0usize;
    for path in &config.paths.gkg {
        let (records, report) = parse_file(path)?;
        total += records.len();
        skipped += report.skips.len();
        print!("{}", report.summary());
    }
    println!("total: {total} records parsed, {skipped} skipped");
    Ok(ExitCode::SUCCESS)
}

fn cmd_series(common: &CommonArgs) -> Result<ExitCode> {
    let config = load_config(common)?;
    let inputs = load_inputs(&config)?;
    let written = export_series(&inputs.records, &config, &config.paths.out_dir)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run_and_emit(config: &RunConfig, stages: RunStages) -> Result<ExitCode> {
    let report = run_stages(config, &LexiconStub, stages)?;
    let written = emit_report(&report, config, &config.paths.out_dir)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    for (state, error) in &report.state_errors {
        eprintln!("state {state}: {error}");
    }
    for stage in &report.skipped_stages {
        eprintln!("skipped: {stage}");
    }
    Ok(if report.is_partial() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_lda(common: &CommonArgs, k_range: &Option<Vec<usize>>) -> Result<ExitCode> {
    let config = load_config(common)?;
    let path = config
        .paths
        .legislation
        .as_ref()
        .context("config has no legislation path")?;
    let docs = read_legis_docs(&fs::read_to_string(path)?)?;
    let mut exit = ExitCode::SUCCESS;
    for state in &config.states {
        let texts: Vec<(String, String)> = docs
            .iter()
            .filter(|d| &d.state == state)
            .map(|d| (d.doc_id.clone(), d.text.clone()))
            .collect();
        if texts.is_empty() {
            eprintln!("state {state}: no legislation documents");
            exit = ExitCode::from(2);
            continue;
        }
        let (corpus, dropped) = preprocess(&texts, &default_stopwords())?;
        let k = match k_range {
            Some(range) => select_k(&corpus, range, &config.lda, config.seed)?,
            None => config.lda_topics,
        };
        let model = lda_fit(&corpus, k, &config.lda, config.seed)?;
        println!(
            "state {state}: {} docs ({} dropped), K = {k}",
            corpus.documents.len(),
            dropped.dropped_documents
        );
        for topic in 0..model.k {
            println!(
                "  topic {:>2} (coherence {:+.3}): {}",
                topic,
                model.coherence[topic],
                model.top_words(&corpus, topic, 10).join(" ")
            );
        }
    }
    Ok(exit)
}

fn cmd_annotate(
    common: &CommonArgs,
    posts_path: &Path,
    backend_spec: &Option<String>,
) -> Result<ExitCode> {
    let config = load_config(common)?;
    let backend = make_backend(backend_spec)?;
    let content = fs::read_to_string(posts_path)
        .with_context(|| format!("reading {}", posts_path.display()))?;
    let posts = framecast_core::annotate::read_raw_posts(&content)?;
    let posts: Vec<_> = match &common.state {
        Some(state) => {
            let code: StateCode = state.parse().map_err(|e: String| anyhow::anyhow!(e))?;
            posts.into_iter().filter(|p| p.state == code).collect()
        }
        None => posts,
    };

    let task = AnnotationTask::post_sentiment();
    let items: Vec<String> = posts.iter().map(|p| p.text.clone()).collect();
    let batch = annotate_batch(&items, &task, backend.as_ref(), &BatchOptions::default())?;

    fs::create_dir_all(&config.paths.out_dir)?;
    let out_path = config.paths.out_dir.join("scored_posts.jsonl");
    let mut out = String::new();
    for (post, label) in posts.iter().zip(&batch.labels) {
        if let Label::Score(score) = label {
            let scored = ScoredPost {
                date: post.date,
                state: post.state.clone(),
                text: post.text.clone(),
                score: *score as i64,
            };
            out.push_str(&serde_json::to_string(&scored)?);
            out.push('\n');
        }
    }
    fs::write(&out_path, out)?;
    println!(
        "wrote {} ({} scored, {} invalid, {} transport failures)",
        out_path.display(),
        items.len() - batch.invalid_count,
        batch.invalid_count,
        batch.errors.len()
    );
    Ok(if batch.errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_legis(common: &CommonArgs) -> Result<ExitCode> {
    let config = load_config(common)?;
    let inputs = load_inputs(&config)?;
    let docs = inputs.legislation.context("legislation input missing")?;
    let mut exit = ExitCode::SUCCESS;
    fs::create_dir_all(&config.paths.out_dir)?;
    for state in &config.states {
        let records = filter_articles(&inputs.records, &config.theme_filter, state);
        match framecast_core::pipeline::legis_state(state, &records, &docs, &config, &LexiconStub) {
            Ok((_, table)) => {
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
                        fmt_sig(row.test.group_sds.1),
                    ));
                }
                let path = config.paths.out_dir.join(format!("ttests_{state}.csv"));
                fs::write(&path, csv)?;
                println!(
                    "wrote {} ({} skipped themes)",
                    path.display(),
                    table.skipped.len()
                );
            }
            Err(e) => {
                eprintln!("state {state}: {e}");
                exit = ExitCode::from(2);
            }
        }
    }
    Ok(exit)
}

fn cmd_synth(common: &CommonArgs, lag: usize, dir: &Path) -> Result<ExitCode> {
    // Synth works without a config file; overrides still apply.
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig {
            theme_filter: synth::synth_theme_filter().into_iter().collect(),
            ..RunConfig::default()
        },
    };
    apply_overrides(&mut config, common)?;

    fs::create_dir_all(dir)?;
    let range = config
        .article_range
        .intersect(&config.posts_range)
        .context("article and post ranges do not overlap")?;
    let mut gkg_all = Vec::new();
    let mut posts_all = String::new();
    let mut legis_all = String::new();
    for state in &config.states {
        let out = synth::generate_state(state, &range, lag, config.seed);
        gkg_all.extend(out.gkg_lines);
        posts_all.push_str(&synth::posts_to_jsonl(&out.posts));
        legis_all.push_str(&synth::legislation_to_jsonl(&out.legislation));
    }
    fs::write(dir.join("gkg.tsv"), gkg_all.join("\n"))?;
    fs::write(dir.join("posts.jsonl"), posts_all)?;
    fs::write(dir.join("legislation.jsonl"), legis_all)?;

    // Emit a ready-to-run config pointing at the generated inputs.
    let generated = RunConfig {
        theme_filter: synth::synth_theme_filter().into_iter().collect(),
        article_range: range,
        posts_range: range,
        paths: RunPaths {
            gkg: vec![dir.join("gkg.tsv")],
            posts: Some(dir.join("posts.jsonl")),
            legislation: Some(dir.join("legislation.jsonl")),
            out_dir: config.paths.out_dir.clone(),
        },
        ..config
    };
    let config_path = dir.join("synth_config.toml");
    fs::write(&config_path, toml::to_string_pretty(&generated)?)?;
    println!("wrote {}", dir.join("gkg.tsv").display());
    println!("wrote {}", dir.join("posts.jsonl").display());
    println!("wrote {}", dir.join("legislation.jsonl").display());
    println!(
        "wrote {} (planted theme {}, lag {lag})",
        config_path.display(),
        synth::PLANTED_THEME
    );
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Ingest { common } => cmd_ingest(common),
        Command::Series { common } => cmd_series(common),
        // Screening and the VAR stage share the sentiment-side runner
        // (the VAR consumes the screening output anyway); `report` runs
        // everything.
        Command::Screen { common } | Command::Var { common } => {
            let config = load_config(common)?;
            run_and_emit(&config, RunStages::sentiment_only())
        }
        Command::Report { common } => {
            let config = load_config(common)?;
            run_and_emit(&config, RunStages::all())
        }
        Command::Lda { common, k_range } => cmd_lda(common, k_range),
        Command::Annotate {
            common,
            posts,
            backend,
        } => cmd_annotate(common, posts, backend),
        Command::Legis { common } => cmd_legis(common),
        Command::Synth { common, lag, dir } => cmd_synth(common, *lag, dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
