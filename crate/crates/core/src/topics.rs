//! LDA topic extraction over legislation text: preprocessing, collapsed
//! Gibbs sampling, UMass coherence, and coherence-based topic-count
//! selection.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gkg::StateCode;
use crate::par;
use crate::rng::{derive_seed, derive_seed_indexed, fnv1a, stream};

#[derive(Debug, Error, PartialEq)]
pub enum TopicsError {
    #[error("corpus is empty after preprocessing")]
    EmptyCorpus,
    #[error("invalid topic count {0}; need at least 2")]
    BadTopicCount(usize),
    #[error("invalid document line: {0}")]
    BadDocument(String),
}

/// One legislation document from the input JSONL.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LegisDoc {
    pub state: StateCode,
    pub year: i32,
    pub doc_id: String,
    pub text: String,
}

pub fn read_legis_docs(content: &str) -> Result<Vec<LegisDoc>, TopicsError> {
    content
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            serde_json::from_str::<LegisDoc>(line)
                .map_err(|e| TopicsError::BadDocument(format!("{line:?}: {e}")))
        })
        .collect()
}

/// Tokenized documents over a shared vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// Token-id lists, one per document, dropped tokens removed.
    pub documents: Vec<Vec<usize>>,
    /// Sorted vocabulary; token ids index into it.
    pub vocabulary: Vec<String>,
    pub doc_ids: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessReport {
    /// Documents left empty by preprocessing and dropped.
    pub dropped_documents: usize,
}

/// Compact default stopword list; callers can extend or replace it.
pub fn default_stopwords() -> BTreeSet<String> {
    [
        "the", "and", "for", "that", "this", "with", "are", "was", "were", "from", "have", "has",
        "had", "not", "but", "any", "all", "its", "his", "her", "their", "they", "them", "our",
        "you", "your", "she", "him", "who", "which", "what", "when", "where", "will", "would",
        "shall", "may", "can", "could", "been", "being", "into", "upon", "such", "than", "then",
        "there", "these", "those", "each", "other", "more", "most", "some", "also", "within",
    ]
    .into_iter()
    .map(str::to_string)
    .collect()
}

/// Tokenizes and cleans raw documents.
///
/// Lowercases, splits on non-alphanumerics, drops stopwords and tokens
/// shorter than 3 characters, drops tokens appearing in fewer than 2
/// documents, then drops (and counts) documents left empty.
pub fn preprocess(
    docs: &[(String, String)],
    stopwords: &BTreeSet<String>,
) -> Result<(Corpus, PreprocessReport), TopicsError> {
    let tokenized: Vec<Vec<String>> = docs
        .iter()
        .map(|(_, text)| {
            text.to_lowercase()
                .split(|c: char| !c.is_alphanumeric())
                .filter(|t| t.len() >= 3 && !stopwords.contains(*t))
                .map(str::to_string)
                .collect()
        })
        .collect();

    // Document frequency over distinct tokens per document.
    let mut doc_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for tokens in &tokenized {
        let distinct: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
        for t in distinct {
            *doc_freq.entry(t).or_insert(0) += 1;
        }
    }

    let vocabulary: Vec<String> = doc_freq
        .iter()
        .filter(|(_, &df)| df >= 2)
        .map(|(t, _)| t.to_string())
        .collect();
    let index: BTreeMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let mut documents = Vec::new();
    let mut doc_ids = Vec::new();
    let mut report = PreprocessReport::default();
    for ((id, _), tokens) in docs.iter().zip(&tokenized) {
        let ids: Vec<usize> = tokens
            .iter()
            .filter_map(|t| index.get(t.as_str()).copied())
            .collect();
        if ids.is_empty() {
            report.dropped_documents += 1;
        } else {
            documents.push(ids);
            doc_ids.push(id.clone());
        }
    }

    if documents.is_empty() {
        return Err(TopicsError::EmptyCorpus);
    }
    Ok((
        Corpus {
            documents,
            vocabulary,
            doc_ids,
        },
        report,
    ))
}

/// LDA hyperparameters; the defaults follow the usual collapsed-Gibbs
/// choices (alpha = 50/K, beta = 0.01, 1000 sweeps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self {
            alpha: None,
            beta: 0.01,
            iterations: 1000,
        }
    }
}

impl LdaParams {
    fn alpha_for(&self, k: usize) -> f64 {
        self.alpha.unwrap_or(50.0 / k as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TopicModel {
    /// K x V; rows sum to 1.
    pub topic_word: Vec<Vec<f64>>,
    /// D x K; rows sum to 1, aligned with corpus document order.
    pub doc_topic: Vec<Vec<f64>>,
    pub k: usize,
    pub seed: u64,
    /// UMass coherence per topic.
    pub coherence: Vec<f64>,
}

impl TopicModel {
    /// Top-n vocabulary indices of a topic, by probability descending with
    /// ties to the smaller id.
    pub fn top_word_ids(&self, topic: usize, n: usize) -> Vec<usize> {
        let row = &self.topic_word[topic];
        let mut ids: Vec<usize> = (0..row.len()).collect();
        ids.sort_by(|&a, &b| {
            row[b]
                .partial_cmp(&row[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        ids.truncate(n);
        ids
    }

    pub fn top_words<'a>(&self, corpus: &'a Corpus, topic: usize, n: usize) -> Vec<&'a str> {
        self.top_word_ids(topic, n)
            .into_iter()
            .map(|id| corpus.vocabulary[id].as_str())
            .collect()
    }
}

/// Collapsed Gibbs sampler.
///
/// Deterministic for fixed (corpus, K, params, seed): documents are visited
/// in sorted doc-id order and every document draws from its own id-keyed
/// stream, so permuting document order changes nothing but doc_topic row
/// order.
pub fn lda_fit(
    corpus: &Corpus,
    k: usize,
    params: &LdaParams,
    seed: u64,
) -> Result<TopicModel, TopicsError> {
    if corpus.documents.is_empty() {
        return Err(TopicsError::EmptyCorpus);
    }
    if k < 1 {
        return Err(TopicsError::BadTopicCount(k));
    }
    let v = corpus.vocabulary.len();
    let d = corpus.documents.len();
    let alpha = params.alpha_for(k);
    let beta = params.beta;
    let v_beta = v as f64 * beta;

    // Visit order keyed to document ids, not positions.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| corpus.doc_ids[a].cmp(&corpus.doc_ids[b]).then(a.cmp(&b)));
    let doc_seed: Vec<u64> = corpus
        .doc_ids
        .iter()
        .map(|id| derive_seed(seed, "lda") ^ fnv1a(id.as_bytes()))
        .collect();

    let mut n_dk = vec![vec![0u32; k]; d];
    let mut n_kw = vec![vec![0u32; v]; k];
    let mut n_k = vec![0u32; k];
    let mut assignments: Vec<Vec<usize>> = corpus
        .documents
        .iter()
        .map(|doc| vec![0; doc.len()])
        .collect();

    for &doc in &order {
        let mut rng = stream(derive_seed_indexed(doc_seed[doc], "init", 0));
        for (pos, &word) in corpus.documents[doc].iter().enumerate() {
            let topic = rng.gen_range(0..k);
            assignments[doc][pos] = topic;
            n_dk[doc][topic] += 1;
            n_kw[topic][word] += 1;
            n_k[topic] += 1;
        }
    }

    let total_tokens: usize = corpus.documents.iter().map(Vec::len).sum();
    let check_counts = cfg!(debug_assertions) && total_tokens * k <= 50_000;

    let mut weights = vec![0.0f64; k];
    for sweep in 0..params.iterations {
        for &doc in &order {
            let mut rng = stream(derive_seed_indexed(
                doc_seed[doc],
                "sweep",
                sweep as u64 + 1,
            ));
            for (pos, &word) in corpus.documents[doc].iter().enumerate() {
                let old = assignments[doc][pos];
                n_dk[doc][old] -= 1;
                n_kw[old][word] -= 1;
                n_k[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let w = (n_dk[doc][t] as f64 + alpha) * (n_kw[t][word] as f64 + beta)
                        / (n_k[t] as f64 + v_beta);
                    total += w;
                    weights[t] = total;
                }
                let draw: f64 = rng.gen_range(0.0..total);
                let new = weights.iter().position(|&w| draw < w).unwrap_or(k - 1);

                assignments[doc][pos] = new;
                n_dk[doc][new] += 1;
                n_kw[new][word] += 1;
                n_k[new] += 1;
            }
        }
        if check_counts {
            // Count tables must stay consistent (hence the extracted
            // distributions normalized) after every sweep.
            let dk: u32 = n_dk.iter().flatten().sum();
            let kw: u32 = n_kw.iter().flatten().sum();
            debug_assert_eq!(dk as usize, total_tokens, "sweep {sweep}");
            debug_assert_eq!(kw as usize, total_tokens, "sweep {sweep}");
            debug_assert_eq!(
                n_k.iter().sum::<u32>() as usize,
                total_tokens,
                "sweep {sweep}"
            );
        }
    }

    let topic_word: Vec<Vec<f64>> = (0..k)
        .map(|t| {
            let denom = n_k[t] as f64 + v_beta;
            (0..v).map(|w| (n_kw[t][w] as f64 + beta) / denom).collect()
        })
        .collect();
    let doc_topic: Vec<Vec<f64>> = (0..d)
        .map(|doc| {
            let len = corpus.documents[doc].len() as f64;
            let denom = len + k as f64 * alpha;
            (0..k)
                .map(|t| (n_dk[doc][t] as f64 + alpha) / denom)
                .collect()
        })
        .collect();

    let mut model = TopicModel {
        topic_word,
        doc_topic,
        k,
        seed,
        coherence: Vec::new(),
    };
    model.coherence = umass_coherence(&model, corpus, 10);
    Ok(model)
}

/// Per-word sorted posting lists, for co-occurrence counting.
fn postings(corpus: &Corpus) -> Vec<Vec<u32>> {
    let mut lists = vec![Vec::new(); corpus.vocabulary.len()];
    for (doc_idx, doc) in corpus.documents.iter().enumerate() {
        let distinct: BTreeSet<usize> = doc.iter().copied().collect();
        for word in distinct {
            lists[word].push(doc_idx as u32);
        }
    }
    lists
}

fn co_doc_count(a: &[u32], b: &[u32]) -> usize {
    let mut i = 0;
    let mut j = 0;
    let mut count = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// UMass coherence of each topic over its `top_n` words:
/// sum over ranked pairs i < j of log((D(w_i, w_j) + 1) / D(w_j)), with
/// D counting document occurrences. An absent word's denominator is
/// clamped to 1 so the smoothing in the numerator keeps the sum finite.
pub fn umass_coherence(model: &TopicModel, corpus: &Corpus, top_n: usize) -> Vec<f64> {
    let lists = postings(corpus);
    (0..model.k)
        .map(|topic| {
            let top = model.top_word_ids(topic, top_n);
            let mut score = 0.0;
            for i in 0..top.len() {
                for j in (i + 1)..top.len() {
                    let co = co_doc_count(&lists[top[i]], &lists[top[j]]) as f64;
                    let denom = lists[top[j]].len().max(1) as f64;
                    score += ((co + 1.0) / denom).ln();
                }
            }
            score
        })
        .collect()
}

/// Fits every K in `k_range` and returns the one with the highest mean
/// topic coherence; exact ties go to the smaller K.
pub fn select_k(
    corpus: &Corpus,
    k_range: &[usize],
    params: &LdaParams,
    seed: u64,
) -> Result<usize, TopicsError> {
    if k_range.is_empty() {
        return Err(TopicsError::BadTopicCount(0));
    }
    let mut ks: Vec<usize> = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();

    let scored: Vec<(usize, Result<f64, TopicsError>)> = par::map_vec(ks, |k| {
        let mean = lda_fit(corpus, k, params, seed)
            .map(|m| m.coherence.iter().sum::<f64>() / m.coherence.len().max(1) as f64);
        (k, mean)
    });

    let mut best: Option<(usize, f64)> = None;
    for (k, mean) in scored {
        let mean = mean?;
        best = match best {
            None => Some((k, mean)),
            Some((_, cur)) if mean > cur => Some((k, mean)),
            keep => keep,
        };
    }
    Ok(best.expect("k_range checked non-empty").0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(texts: &[&str]) -> Vec<(String, String)> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("doc{i:03}"), t.to_string()))
            .collect()
    }

    #[test]
    fn preprocess_applies_min_doc_frequency() {
        let input = docs(&["The cat sat", "the CAT ran"]);
        let (corpus, report) = preprocess(&input, &default_stopwords()).unwrap();
        assert_eq!(corpus.vocabulary, vec!["cat".to_string()]);
        assert_eq!(corpus.documents, vec![vec![0], vec![0]]);
        assert_eq!(report.dropped_documents, 0);
    }

    #[test]
    fn preprocess_drops_empty_documents() {
        let input = docs(&["the and for", "housing housing budget", "housing budget"]);
        let (corpus, report) = preprocess(&input, &default_stopwords()).unwrap();
        assert_eq!(report.dropped_documents, 1);
        assert_eq!(
            corpus.doc_ids,
            vec!["doc001".to_string(), "doc002".to_string()]
        );
    }

    #[test]
    fn preprocess_rejects_empty_corpus() {
        let input = docs(&["a an it", "to of in"]);
        assert_eq!(
            preprocess(&input, &default_stopwords()).unwrap_err(),
            TopicsError::EmptyCorpus
        );
    }

    #[test]
    fn single_token_corpus_yields_valid_distributions() {
        let corpus = Corpus {
            documents: vec![vec![0]],
            vocabulary: vec!["housing".into()],
            doc_ids: vec!["only".into()],
        };
        let model = lda_fit(&corpus, 2, &LdaParams::default(), 7).unwrap();
        for row in model.topic_word.iter().chain(model.doc_topic.iter()) {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-8);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let input = docs(&[
            "housing budget shelter funding",
            "shelter funding grant housing",
            "court arrest police budget",
            "police court arrest grant",
        ]);
        let (corpus, _) = preprocess(&input, &default_stopwords()).unwrap();
        let params = LdaParams {
            iterations: 50,
            ..LdaParams::default()
        };
        let a = lda_fit(&corpus, 2, &params, 99).unwrap();
        let b = lda_fit(&corpus, 2, &params, 99).unwrap();
        assert_eq!(a.topic_word, b.topic_word);
        assert_eq!(a.doc_topic, b.doc_topic);
        assert_eq!(a.coherence, b.coherence);
    }

    #[test]
    fn document_order_does_not_change_topics() {
        let input = docs(&[
            "housing budget shelter funding",
            "shelter funding grant housing",
            "court arrest police budget",
            "police court arrest grant",
        ]);
        let (corpus, _) = preprocess(&input, &default_stopwords()).unwrap();
        let mut shuffled = corpus.clone();
        shuffled.documents.swap(0, 3);
        shuffled.documents.swap(1, 2);
        shuffled.doc_ids.swap(0, 3);
        shuffled.doc_ids.swap(1, 2);
        let params = LdaParams {
            iterations: 30,
            ..LdaParams::default()
        };
        let a = lda_fit(&corpus, 2, &params, 41).unwrap();
        let b = lda_fit(&shuffled, 2, &params, 41).unwrap();
        assert_eq!(a.topic_word, b.topic_word);
        assert_eq!(a.doc_topic[0], b.doc_topic[3]);
        assert_eq!(a.doc_topic[1], b.doc_topic[2]);
    }

    #[test]
    fn coherence_boundaries() {
        // Top words that always co-occur score near 0; words that never
        // co-occur score strongly negative.
        let corpus = Corpus {
            documents: vec![vec![0, 1], vec![0, 1], vec![2], vec![3]],
            vocabulary: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            doc_ids: (0..4).map(|i| format!("d{i}")).collect(),
        };
        let co_model = TopicModel {
            topic_word: vec![vec![0.5, 0.5, 0.0, 0.0]],
            doc_topic: vec![vec![1.0]; 4],
            k: 1,
            seed: 0,
            coherence: vec![],
        };
        let co = umass_coherence(&co_model, &corpus, 2)[0];
        // D(a,b) = 2, D(b) = 2 -> log(3/2)
        assert!((co - (3.0f64 / 2.0).ln()).abs() < 1e-12);

        let disjoint_model = TopicModel {
            topic_word: vec![vec![0.0, 0.0, 0.5, 0.5]],
            doc_topic: vec![vec![1.0]; 4],
            k: 1,
            seed: 0,
            coherence: vec![],
        };
        let apart = umass_coherence(&disjoint_model, &corpus, 2)[0];
        // D(c,d) = 0, D(d) = 1 -> log(1/1) = 0 with smoothing; use 3 words
        // to see the negative case instead.
        assert!(apart <= 0.0);
        let mixed_model = TopicModel {
            topic_word: vec![vec![0.4, 0.0, 0.35, 0.25]],
            doc_topic: vec![vec![1.0]; 4],
            k: 1,
            seed: 0,
            coherence: vec![],
        };
        let mixed = umass_coherence(&mixed_model, &corpus, 3)[0];
        // pairs: (a,c): log(1/1), (a,d): log(1/1), (c,d): log(1/1) = 0 ...
        // all never co-occur but smoothing floors each at log(1/D).
        assert!(mixed <= 0.0);
    }

    #[test]
    fn coherence_invariant_to_topic_reorder() {
        let corpus = Corpus {
            documents: vec![vec![0, 1, 2], vec![1, 2], vec![0, 2]],
            vocabulary: vec!["a".into(), "b".into(), "c".into()],
            doc_ids: (0..3).map(|i| format!("d{i}")).collect(),
        };
        let model = TopicModel {
            topic_word: vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.3, 0.6]],
            doc_topic: vec![vec![0.5, 0.5]; 3],
            k: 2,
            seed: 0,
            coherence: vec![],
        };
        let swapped = TopicModel {
            topic_word: vec![model.topic_word[1].clone(), model.topic_word[0].clone()],
            ..model.clone()
        };
        let a = umass_coherence(&model, &corpus, 3);
        let b = umass_coherence(&swapped, &corpus, 3);
        assert_eq!(a[0], b[1]);
        assert_eq!(a[1], b[0]);
    }

    #[test]
    fn select_k_singleton_and_tie() {
        let input = docs(&[
            "housing budget shelter",
            "shelter housing budget",
            "court arrest police",
            "police court arrest",
        ]);
        let (corpus, _) = preprocess(&input, &default_stopwords()).unwrap();
        let params = LdaParams {
            iterations: 20,
            ..LdaParams::default()
        };
        assert_eq!(select_k(&corpus, &[4], &params, 1).unwrap(), 4);
        // Duplicated K values cannot win a tie against themselves.
        assert_eq!(select_k(&corpus, &[3, 3], &params, 1).unwrap(), 3);
    }
}
