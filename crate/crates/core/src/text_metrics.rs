//! Sentence-level BLEU-4, ROUGE-L and METEOR over DOT token sequences.
//!
//! All scores are on a 0–100 scale.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Replaces zero n-gram precisions before taking logarithms.
pub const BLEU_EPSILON: f64 = 1e-9;
const BLEU_MAX_ORDER: usize = 4;

const METEOR_ALPHA: f64 = 0.9;
const METEOR_GAMMA: f64 = 0.5;
const METEOR_BETA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("reference token sequence is empty")]
pub struct EmptyReference;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextScores {
    pub bleu: f64,
    pub rouge_l: f64,
    pub meteor: f64,
}

const SYMBOLS: &[char] = &['{', '}', '[', ']', ';', '=', '"', ',', ':', '(', ')'];

/// Lowercases and splits on whitespace; DOT punctuation and the `->`
/// operator become standalone tokens.
pub fn tokenize(text: &str) -> TokenSequence {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut tokens = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, tokens: &mut Vec<String>| {
        if !word.is_empty() {
            tokens.push(std::mem::take(word));
        }
    };
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            flush(&mut word, &mut tokens);
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            flush(&mut word, &mut tokens);
            tokens.push("->".to_string());
            i += 1;
        } else if SYMBOLS.contains(&c) {
            flush(&mut word, &mut tokens);
            tokens.push(c.to_string());
        } else {
            word.push(c);
        }
        i += 1;
    }
    flush(&mut word, &mut tokens);
    TokenSequence { tokens }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sentence-level BLEU-4 with uniform weights and a brevity penalty.
pub fn bleu(candidate: &TokenSequence, reference: &TokenSequence) -> Result<f64, EmptyReference> {
    if reference.is_empty() {
        return Err(EmptyReference);
    }
    let c = candidate.len();
    if c == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=BLEU_MAX_ORDER {
        let cand = ngram_counts(&candidate.tokens, n);
        let refr = ngram_counts(&reference.tokens, n);
        let total = c.saturating_sub(n - 1);
        let clipped: usize = cand
            .iter()
            .map(|(g, &k)| k.min(refr.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if total == 0 || clipped == 0 {
            BLEU_EPSILON
        } else {
            clipped as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let r = reference.len();
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    Ok((100.0 * bp * (log_sum / BLEU_MAX_ORDER as f64).exp()).clamp(0.0, 100.0))
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 over the longest common subsequence.
pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> Result<f64, EmptyReference> {
    if reference.is_empty() {
        return Err(EmptyReference);
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let lcs = lcs_len(&candidate.tokens, &reference.tokens) as f64;
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    if p + r == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * 2.0 * p * r / (p + r))
}

/// Exact-match unigram alignment used by [`meteor`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// `(candidate position, reference position)`, sorted by candidate position.
    pub pairs: Vec<(usize, usize)>,
    pub chunks: usize,
}

/// Aligns identical tokens, matching as many as possible and keeping them in
/// few contiguous chunks.
///
/// Every matchable token is aligned, so the match count equals the size of
/// the multiset intersection. Chunk minimisation is greedy: the longest
/// common run of still-unaligned tokens is fixed first (leftmost on ties).
pub fn align(candidate: &[String], reference: &[String]) -> Alignment {
    let (n, m) = (candidate.len(), reference.len());
    let mut cand_used = vec![false; n];
    let mut ref_used = vec![false; m];
    let mut pairs = Vec::new();
    let mut run = vec![0usize; (n + 1) * (m + 1)];
    loop {
        let mut best = (0usize, 0usize, 0usize);
        for i in 1..=n {
            for j in 1..=m {
                let eligible = !cand_used[i - 1] && !ref_used[j - 1] && candidate[i - 1] == reference[j - 1];
                let v = if eligible { run[(i - 1) * (m + 1) + j - 1] + 1 } else { 0 };
                run[i * (m + 1) + j] = v;
                if v > best.0 {
                    best = (v, i, j);
                }
            }
        }
        let (len, end_i, end_j) = best;
        if len == 0 {
            break;
        }
        for k in 0..len {
            let (ci, rj) = (end_i - len + k, end_j - len + k);
            cand_used[ci] = true;
            ref_used[rj] = true;
            pairs.push((ci, rj));
        }
    }
    pairs.sort_unstable();
    let chunks = count_chunks(&pairs);
    Alignment { pairs, chunks }
}

fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

/// METEOR with exact matching only: harmonic mean weighted 9:1 towards
/// recall and a fragmentation penalty `0.5 * (chunks / matches)^3`.
pub fn meteor(candidate: &TokenSequence, reference: &TokenSequence) -> Result<f64, EmptyReference> {
    if reference.is_empty() {
        return Err(EmptyReference);
    }
    let alignment = align(&candidate.tokens, &reference.tokens);
    let matches = alignment.pairs.len();
    if matches == 0 {
        return Ok(0.0);
    }
    let m = matches as f64;
    let p = m / candidate.len() as f64;
    let r = m / reference.len() as f64;
    let f_mean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let penalty = METEOR_GAMMA * (alignment.chunks as f64 / m).powf(METEOR_BETA);
    Ok(100.0 * f_mean * (1.0 - penalty))
}

pub fn text_scores(candidate: &TokenSequence, reference: &TokenSequence) -> Result<TextScores, EmptyReference> {
    Ok(TextScores {
        bleu: bleu(candidate, reference)?,
        rouge_l: rouge_l(candidate, reference)?,
        meteor: meteor(candidate, reference)?,
    })
}
