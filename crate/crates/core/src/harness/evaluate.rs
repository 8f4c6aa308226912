//! Scoring candidates against references and aggregating model runs.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::EvalRecord;
use crate::ged::{r_ged, SearchBudget};
use crate::graph::{parse_dot, sanitize_dot, ProcessGraph};
use crate::guidelines::{aggregate_reports, verify_model, GuidelineConfig, GuidelineReport, RuleAggregate};
use crate::harness::extract::{extract_dot, extract_dot_last};
use crate::stats::{bootstrap_ci, friedman_test, mid_ranks, FriedmanResult, Interval};
use crate::text_metrics::{text_scores, tokenize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub record_id: String,
    pub domain: String,
    pub bleu: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub r_ged_percent: f64,
    pub parse_ok: bool,
    pub ged_exact: bool,
}

/// Metric names in report order.
pub const METRICS: [&str; 4] = ["BLEU", "ROUGE-L", "METEOR", "R-GED"];

impl MetricBundle {
    pub fn values(&self) -> [f64; 4] {
        [self.bleu, self.rouge_l, self.meteor, self.r_ged_percent]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluateError {
    #[error("record {0:?} has no candidate")]
    MissingCandidate(String),
    #[error("record {id:?} has an unusable reference: {message}")]
    BadReference { id: String, message: String },
    #[error("model run {model:?} has no candidate for record {id:?}")]
    IdMismatch { model: String, id: String },
    #[error("no records to evaluate")]
    EmptyInput,
    #[error("invalid evaluation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub budget: SearchBudget,
    /// Take the last diagram in a completion instead of the first.
    pub last_block: bool,
    pub resamples: usize,
    pub confidence: f64,
    pub seed: u64,
    pub guidelines: GuidelineConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            budget: SearchBudget::default(),
            last_block: false,
            resamples: 10_000,
            confidence: 0.95,
            seed: 0,
            guidelines: GuidelineConfig::default(),
        }
    }
}

/// Scored record plus its parsed candidate, if any.
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub bundle: MetricBundle,
    pub candidate: Option<ProcessGraph>,
}

fn score(record: &EvalRecord, candidate_raw: &str, cfg: &EvalConfig) -> Result<PairOutcome, EvaluateError> {
    let bad_ref = |message: String| EvaluateError::BadReference { id: record.id.clone(), message };
    let reference_text = sanitize_dot(&record.reference_dot);
    let reference = parse_dot(&reference_text).map_err(|e| bad_ref(e.to_string()))?;
    let reference_tokens = tokenize(&reference_text);

    let extracted = if cfg.last_block { extract_dot_last(candidate_raw) } else { extract_dot(candidate_raw) };
    let parsed = extracted.as_ref().ok().and_then(|dot| parse_dot(dot).ok().map(|g| (dot, g)));

    let (candidate_tokens, r_ged_percent, ged_exact, graph) = match parsed {
        Some((dot, g)) => {
            let r = r_ged(&reference, &g, &cfg.budget);
            (tokenize(dot), r.percent, r.exact, Some(g))
        }
        None => (tokenize(candidate_raw), 0.0, true, None),
    };
    let text = text_scores(&candidate_tokens, &reference_tokens).map_err(|e| bad_ref(e.to_string()))?;
    Ok(PairOutcome {
        bundle: MetricBundle {
            record_id: record.id.clone(),
            domain: record.domain.clone(),
            bleu: text.bleu,
            rouge_l: text.rouge_l,
            meteor: text.meteor,
            r_ged_percent,
            parse_ok: graph.is_some(),
            ged_exact,
        },
        candidate: graph,
    })
}

/// Scores one record's candidate. A candidate that yields no parseable
/// diagram gets `parse_ok = false` and an R-GED of zero; its text metrics
/// are computed on the raw completion.
pub fn evaluate_pair(record: &EvalRecord, cfg: &EvalConfig) -> Result<MetricBundle, EvaluateError> {
    let candidate = record
        .candidate_dot
        .as_deref()
        .ok_or_else(|| EvaluateError::MissingCandidate(record.id.clone()))?;
    score(record, candidate, cfg).map(|o| o.bundle)
}

/// Candidates of one model, keyed by record id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelRun {
    pub name: String,
    pub candidates: HashMap<String, String>,
}

impl ModelRun {
    pub fn from_records(name: impl Into<String>, records: &[EvalRecord]) -> Self {
        ModelRun {
            name: name.into(),
            candidates: records
                .iter()
                .filter_map(|r| r.candidate_dot.clone().map(|c| (r.id.clone(), c)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub bleu: Interval,
    pub rouge_l: Interval,
    pub meteor: Interval,
    pub r_ged: Interval,
}

impl MetricSummary {
    pub fn intervals(&self) -> [Interval; 4] {
        [self.bleu, self.rouge_l, self.meteor, self.r_ged]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSummary {
    pub domain: String,
    pub records: usize,
    pub metrics: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub records: usize,
    pub parse_ok: usize,
    pub bundles: Vec<MetricBundle>,
    #[serde(rename = "macro")]
    pub macro_summary: MetricSummary,
    pub per_domain: Vec<DomainSummary>,
    pub guideline_reports: Vec<GuidelineReport>,
    pub guidelines: Vec<RuleAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRanking {
    pub metric: String,
    pub friedman: FriedmanResult,
    /// Mean rank per model, 1 = best; ties share mid-ranks.
    pub mean_ranks: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Ranking {
    /// Records where every model produced a parseable diagram.
    pub blocks: usize,
    pub excluded: Vec<String>,
    pub metrics: Vec<MetricRanking>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSet {
    pub models: Vec<ModelReport>,
    pub ranking: Option<Ranking>,
}

/// SplitMix64 finaliser, used to derive independent seeds.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(base), |acc, p| splitmix(acc ^ splitmix(*p)))
}

fn summarize(bundles: &[&MetricBundle], cfg: &EvalConfig, seed: u64) -> MetricSummary {
    let column = |k: usize| -> Interval {
        let values: Vec<f64> = bundles.iter().map(|b| b.values()[k]).collect();
        bootstrap_ci(&values, cfg.resamples, cfg.confidence, derive_seed(seed, &[k as u64]))
            .expect("non-empty values and validated config")
    };
    MetricSummary { bleu: column(0), rouge_l: column(1), meteor: column(2), r_ged: column(3) }
}

fn model_report(
    corpus: &[EvalRecord],
    run: &ModelRun,
    model_index: usize,
    cfg: &EvalConfig,
) -> Result<ModelReport, EvaluateError> {
    let outcomes: Vec<PairOutcome> = corpus
        .par_iter()
        .map(|record| {
            let candidate = run.candidates.get(&record.id).ok_or_else(|| EvaluateError::IdMismatch {
                model: run.name.clone(),
                id: record.id.clone(),
            })?;
            score(record, candidate, cfg)
        })
        .collect::<Result<_, _>>()?;

    let guideline_reports: Vec<GuidelineReport> = outcomes
        .iter()
        .map(|o| verify_model(&o.bundle.record_id, o.candidate.as_ref(), &cfg.guidelines))
        .collect();
    let bundles: Vec<MetricBundle> = outcomes.into_iter().map(|o| o.bundle).collect();
    let model_seed = derive_seed(cfg.seed, &[model_index as u64]);

    let all: Vec<&MetricBundle> = bundles.iter().collect();
    let macro_summary = summarize(&all, cfg, derive_seed(model_seed, &[0]));
    let mut domains: BTreeMap<&str, Vec<&MetricBundle>> = BTreeMap::new();
    for b in &bundles {
        domains.entry(b.domain.as_str()).or_default().push(b);
    }
    let per_domain = domains
        .iter()
        .enumerate()
        .map(|(i, (domain, members))| DomainSummary {
            domain: domain.to_string(),
            records: members.len(),
            metrics: summarize(members, cfg, derive_seed(model_seed, &[1, i as u64])),
        })
        .collect();

    Ok(ModelReport {
        model: run.name.clone(),
        records: bundles.len(),
        parse_ok: bundles.iter().filter(|b| b.parse_ok).count(),
        guidelines: aggregate_reports(&guideline_reports).expect("corpus is non-empty"),
        guideline_reports,
        bundles,
        macro_summary,
        per_domain,
    })
}

/// Friedman test per metric over the records every model parsed.
pub fn rank_models(models: &[ModelReport]) -> Ranking {
    let Some(first) = models.first() else {
        return Ranking::default();
    };
    let mut blocks = Vec::new();
    let mut excluded = Vec::new();
    for (i, b) in first.bundles.iter().enumerate() {
        if models.iter().all(|m| m.bundles[i].parse_ok) {
            blocks.push(i);
        } else {
            excluded.push(b.record_id.clone());
        }
    }
    let k = models.len();
    let mut metrics = Vec::new();
    for (mi, name) in METRICS.iter().enumerate() {
        let matrix: Vec<Vec<f64>> = blocks
            .iter()
            .map(|&i| models.iter().map(|m| m.bundles[i].values()[mi]).collect())
            .collect();
        let friedman = match friedman_test(&matrix) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("skipping {name} ranking: {e}");
                continue;
            }
        };
        let mut rank_sums = vec![0.0; k];
        for row in &matrix {
            let (ranks, _) = mid_ranks(row);
            for (s, r) in rank_sums.iter_mut().zip(ranks) {
                // Ascending ranks put the best score last; flip so 1 is best.
                *s += k as f64 + 1.0 - r;
            }
        }
        let mean_ranks = models
            .iter()
            .zip(rank_sums)
            .map(|(m, s)| (m.model.clone(), s / matrix.len() as f64))
            .collect();
        metrics.push(MetricRanking { metric: name.to_string(), friedman, mean_ranks });
    }
    Ranking { blocks: blocks.len(), excluded, metrics }
}

/// Scores every run against the corpus. Bootstrap seeds derive from
/// `cfg.seed`, so repeated calls return identical reports.
pub fn run_evaluation(corpus: &[EvalRecord], runs: &[ModelRun], cfg: &EvalConfig) -> Result<ReportSet, EvaluateError> {
    if corpus.is_empty() || runs.is_empty() {
        return Err(EvaluateError::EmptyInput);
    }
    if cfg.resamples == 0 || !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(EvaluateError::Config(format!(
            "resamples = {}, confidence = {}",
            cfg.resamples, cfg.confidence
        )));
    }
    let models = runs
        .iter()
        .enumerate()
        .map(|(i, run)| model_report(corpus, run, i, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let ranking = (models.len() >= 2).then(|| rank_models(&models));
    Ok(ReportSet { models, ranking })
}
