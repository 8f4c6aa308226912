//! Corpus records, filtering, stratified sampling and descriptive statistics.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{graph_stats, parse_dot, render_canonical, ProcessGraph};
use crate::harness::prompt::{template_overhead, PromptMode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub domain: String,
    pub description: String,
    pub reference_dot: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_dot: Option<String>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Json { path: String, line: usize, source: serde_json::Error },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("record {0:?} has an empty domain")]
    EmptyDomain(String),
    #[error("record {id:?} has an unparseable reference: {message}")]
    UnparseableReference { id: String, message: String },
    #[error("corpus is empty")]
    EmptyInput,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| DatasetError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a corpus and checks id uniqueness and non-empty domains.
pub fn read_corpus(path: &Path) -> Result<Vec<EvalRecord>, DatasetError> {
    let records: Vec<EvalRecord> = read_jsonl(path)?;
    validate_records(&records)?;
    Ok(records)
}

pub fn validate_records(records: &[EvalRecord]) -> Result<(), DatasetError> {
    let mut seen = HashSet::new();
    for r in records {
        if r.domain.trim().is_empty() {
            return Err(DatasetError::EmptyDomain(r.id.clone()));
        }
        if !seen.insert(r.id.as_str()) {
            return Err(DatasetError::DuplicateId(r.id.clone()));
        }
    }
    Ok(())
}

pub trait TokenCounter: Sync {
    fn count(&self, text: &str) -> usize;
}

/// Approximates subword tokens as 1.33 per whitespace-separated word.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordHeuristic;

impl TokenCounter for WordHeuristic {
    fn count(&self, text: &str) -> usize {
        (text.split_whitespace().count() * 133).div_ceil(100)
    }
}

pub fn estimate_tokens(text: &str, counter: &dyn TokenCounter) -> usize {
    counter.count(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub token_limit: usize,
    pub drop_duplicates: bool,
    pub drop_disconnected: bool,
    /// Prompt whose instruction text counts against the token limit.
    pub prompt_mode: PromptMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            token_limit: 2048,
            drop_duplicates: true,
            drop_disconnected: true,
            prompt_mode: PromptMode::TunedZeroShot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectionReason {
    MalformedDot,
    OverTokenLimit,
    Disconnected,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub record: EvalRecord,
    pub reason: RejectionReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<EvalRecord>,
    pub rejected: Vec<Rejection>,
}

/// Applies the corpus filters. Each rejected record carries the first failing
/// check in the order: malformed DOT, token budget, connectivity, duplicate.
/// Duplicates are detected on the canonical rendering of the reference graph,
/// and the first occurrence is kept.
pub fn filter_corpus(records: &[EvalRecord], cfg: &FilterConfig, counter: &dyn TokenCounter) -> FilterOutcome {
    let overhead = counter.count(&template_overhead(cfg.prompt_mode));
    let checked: Vec<Result<String, RejectionReason>> = records
        .par_iter()
        .map(|r| {
            let g = parse_dot(&r.reference_dot).map_err(|_| RejectionReason::MalformedDot)?;
            if overhead + counter.count(&r.description) > cfg.token_limit {
                return Err(RejectionReason::OverTokenLimit);
            }
            if cfg.drop_disconnected && !g.is_weakly_connected() {
                return Err(RejectionReason::Disconnected);
            }
            Ok(render_canonical(&g))
        })
        .collect();

    let mut out = FilterOutcome::default();
    let mut seen = HashSet::new();
    for (record, check) in records.iter().zip(checked) {
        let reason = match check {
            Err(reason) => Some(reason),
            Ok(canonical) => (cfg.drop_duplicates && !seen.insert(canonical)).then_some(RejectionReason::Duplicate),
        };
        match reason {
            Some(reason) => out.rejected.push(Rejection { record: record.clone(), reason }),
            None => out.kept.push(record.clone()),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

/// Nearest-rank percentile of ascending `sorted` values.
pub fn nearest_rank(sorted: &[usize], percentile: f64) -> usize {
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Node-count cut points at the 33rd and 67th percentiles.
pub fn tercile_bounds(node_counts: &[usize]) -> (usize, usize) {
    let mut sorted = node_counts.to_vec();
    sorted.sort_unstable();
    (nearest_rank(&sorted, 33.0), nearest_rank(&sorted, 67.0))
}

pub fn difficulty(nodes: usize, bounds: (usize, usize)) -> Difficulty {
    if nodes <= bounds.0 {
        Difficulty::Easy
    } else if nodes <= bounds.1 {
        Difficulty::Medium
    } else {
        Difficulty::Hard
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub domain: String,
    pub bucket: Difficulty,
    pub available: usize,
    pub requested: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    /// Selected records in corpus order.
    pub records: Vec<EvalRecord>,
    pub difficulty: BTreeMap<String, Difficulty>,
    /// Buckets smaller than requested; all their members were taken.
    pub shortfalls: Vec<Shortfall>,
}

/// Draws `per_bucket` records from each domain's easy, medium and hard node
/// count terciles, uniformly without replacement.
pub fn stratified_sample(records: &[EvalRecord], per_bucket: usize, seed: u64) -> Result<SampleOutcome, DatasetError> {
    let node_counts: Vec<usize> = records
        .par_iter()
        .map(|r| {
            parse_dot(&r.reference_dot)
                .map(|g| g.nodes.len())
                .map_err(|e| DatasetError::UnparseableReference { id: r.id.clone(), message: e.to_string() })
        })
        .collect::<Result<_, _>>()?;

    let mut by_domain: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_domain.entry(r.domain.as_str()).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    let mut labels = BTreeMap::new();
    let mut shortfalls = Vec::new();
    for (domain, members) in &by_domain {
        let counts: Vec<usize> = members.iter().map(|&i| node_counts[i]).collect();
        let bounds = tercile_bounds(&counts);
        for bucket in [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard] {
            let pool: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| difficulty(node_counts[i], bounds) == bucket)
                .collect();
            if pool.len() < per_bucket {
                log::warn!(
                    "domain {domain:?} {bucket:?} bucket has {} records, {per_bucket} requested",
                    pool.len()
                );
                shortfalls.push(Shortfall {
                    domain: domain.to_string(),
                    bucket,
                    available: pool.len(),
                    requested: per_bucket,
                });
            }
            let take = per_bucket.min(pool.len());
            for k in index::sample(&mut rng, pool.len(), take) {
                chosen.push(pool[k]);
                labels.insert(records[pool[k]].id.clone(), bucket);
            }
        }
    }
    chosen.sort_unstable();
    Ok(SampleOutcome {
        records: chosen.into_iter().map(|i| records[i].clone()).collect(),
        difficulty: labels,
        shortfalls,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<EvalRecord>,
    pub validation: Vec<EvalRecord>,
    pub test: Vec<EvalRecord>,
}

/// Seeded 80/10/10 shuffle split.
pub fn split_corpus(records: &[EvalRecord], seed: u64) -> Split {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = records.len() * 8 / 10;
    let n_val = records.len() / 10;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect();
    Split {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    }
}

/// Counts segments terminated by `.`, `?` or `!` followed by whitespace or
/// the end of text. An unterminated tail is not counted.
pub fn count_sentences(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0;
    let mut has_content = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if matches!(c, '.' | '?' | '!') {
            let mut j = i;
            while j < chars.len() && matches!(chars[j], '.' | '?' | '!') {
                j += 1;
            }
            if (j == chars.len() || chars[j].is_whitespace()) && has_content {
                count += 1;
                has_content = false;
            }
            i = j;
            continue;
        }
        if !c.is_whitespace() {
            has_content = true;
        }
        i += 1;
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: usize,
    pub mean_nodes: f64,
    pub mean_edges: f64,
    pub mean_gateways: f64,
    pub mean_words: f64,
    pub mean_sentences: f64,
}

pub fn corpus_stats(records: &[EvalRecord]) -> Result<CorpusStats, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    let graphs: Vec<ProcessGraph> = records
        .par_iter()
        .map(|r| {
            parse_dot(&r.reference_dot)
                .map_err(|e| DatasetError::UnparseableReference { id: r.id.clone(), message: e.to_string() })
        })
        .collect::<Result<_, _>>()?;
    let n = records.len() as f64;
    let mean = |f: &dyn Fn(usize) -> usize| (0..records.len()).map(f).sum::<usize>() as f64 / n;
    Ok(CorpusStats {
        records: records.len(),
        mean_nodes: mean(&|i| graph_stats(&graphs[i]).node_count),
        mean_edges: mean(&|i| graph_stats(&graphs[i]).edge_count),
        mean_gateways: mean(&|i| graph_stats(&graphs[i]).gateway_count),
        mean_words: mean(&|i| records[i].description.split_whitespace().count()),
        mean_sentences: mean(&|i| count_sentences(&records[i].description)),
    })
}
