//! Locating the diagram inside a model completion.

use thiserror::Error;

use crate::graph::sanitize_dot;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no DOT diagram found in completion")]
pub struct NoDiagramFound;

/// Interiors of Markdown code fences. An unclosed final fence runs to the end
/// of the text.
fn fenced_blocks(raw: &str) -> Vec<&str> {
    raw.split("```")
        .skip(1)
        .step_by(2)
        .map(|inner| {
            // Drop a bare language tag on the opening line.
            match inner.split_once('\n') {
                Some((first, rest))
                    if !first.trim().is_empty()
                        && first.trim().chars().all(|c| c.is_ascii_alphanumeric() || "_-+".contains(c))
                        && !first.trim().eq_ignore_ascii_case("digraph") =>
                {
                    rest
                }
                _ => inner,
            }
        })
        .filter(|b| !b.trim().is_empty())
        .collect()
}

fn contains_keyword(text: &str) -> bool {
    keyword_positions(text).next().is_some()
}

/// Byte offsets of `digraph` (any case) standing as a whole word.
fn keyword_positions(text: &str) -> impl Iterator<Item = usize> + '_ {
    let lower = text.to_ascii_lowercase();
    let bytes = text.as_bytes();
    let is_word = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
    let hits: Vec<usize> = lower
        .match_indices("digraph")
        .map(|(i, _)| i)
        .filter(|&i| {
            let before = i == 0 || !is_word(bytes[i - 1]);
            let end = i + "digraph".len();
            let after = end >= bytes.len() || !is_word(bytes[end]);
            before && after
        })
        .collect();
    hits.into_iter()
}

/// End offset (exclusive) of the brace-balanced body starting at the first
/// `{` after `start`, or the text end when the braces never balance.
fn balanced_end(text: &str, start: usize) -> usize {
    let mut depth = 0usize;
    let mut opened = false;
    let mut in_quote = false;
    let mut escaped = false;
    for (off, c) in text[start..].char_indices() {
        if in_quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_quote = false;
            }
            continue;
        }
        match c {
            '"' if opened => in_quote = true,
            '{' => {
                depth += 1;
                opened = true;
            }
            '}' if opened => {
                depth -= 1;
                if depth == 0 {
                    return start + off + 1;
                }
            }
            _ => {}
        }
    }
    text.len()
}

/// Brace-balanced `digraph` blocks in order of appearance.
fn bare_blocks(raw: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut next_allowed = 0;
    for pos in keyword_positions(raw) {
        if pos < next_allowed {
            continue;
        }
        let mut start = pos;
        let head = &raw[..pos];
        if head.trim_end().to_ascii_lowercase().ends_with("strict") {
            start = head.trim_end().len() - "strict".len();
        }
        let end = balanced_end(raw, pos);
        out.push(&raw[start..end]);
        next_allowed = end;
    }
    out
}

fn candidates(raw: &str) -> Vec<&str> {
    let fences = fenced_blocks(raw);
    let with_keyword: Vec<&str> = fences.iter().copied().filter(|b| contains_keyword(b)).collect();
    if !with_keyword.is_empty() {
        return with_keyword;
    }
    let bare = bare_blocks(raw);
    if !bare.is_empty() {
        return bare;
    }
    fences
}

/// Returns the first diagram in `raw`, sanitized. Fenced blocks that contain
/// a `digraph` win; otherwise the first `digraph` through its balanced close
/// is taken; otherwise the first non-empty fenced block.
pub fn extract_dot(raw: &str) -> Result<String, NoDiagramFound> {
    candidates(raw).first().map(|b| sanitize_dot(b.trim())).ok_or(NoDiagramFound)
}

/// Like [`extract_dot`] but takes the last candidate, for completions that
/// reason before answering.
pub fn extract_dot_last(raw: &str) -> Result<String, NoDiagramFound> {
    candidates(raw).last().map(|b| sanitize_dot(b.trim())).ok_or(NoDiagramFound)
}
