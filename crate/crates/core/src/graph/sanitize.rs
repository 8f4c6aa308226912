/// Applies a fixed set of textual repairs to model-emitted DOT.
///
/// The repairs are: Markdown code fences are removed, runs of duplicated
/// braces (`{{`, `}}`) collapse to one, trailing and leading commas inside
/// attribute lists are dropped, and a `label=` with no value becomes
/// `label=""`. Quoted strings are never touched. Anything else passes through
/// unchanged so that genuinely malformed input still fails to parse.
///
/// The function is total and idempotent.
pub fn sanitize_dot(raw: &str) -> String {
    let (text, fenced) = strip_fences(raw);
    let text = if fenced { text.trim() } else { text.as_str() };
    repair_unquoted(text)
}

fn strip_fences(raw: &str) -> (String, bool) {
    let mut text = raw.to_string();
    let mut fenced = false;
    while text.contains("```") {
        let (next, touched) = strip_fence_lines(&text);
        if !touched {
            break;
        }
        text = next;
        fenced = true;
    }
    (text, fenced)
}

fn strip_fence_lines(raw: &str) -> (String, bool) {
    let mut out = Vec::new();
    let mut fenced = false;
    for line in raw.split('\n') {
        let mut rest = line;
        let mut touched = false;
        let lead = rest.trim_start();
        if let Some(after) = lead.strip_prefix("```") {
            let after = after.trim_start_matches('`');
            // Language tag such as ```dot or ```graphviz.
            let tag_len = after
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '+'))
                .unwrap_or(after.len());
            let tag = &after[..tag_len];
            let is_keyword = ["digraph", "graph", "strict"].iter().any(|k| tag.eq_ignore_ascii_case(k));
            rest = if is_keyword { after } else { &after[tag_len..] };
            touched = true;
        }
        let trimmed_end = rest.trim_end();
        if let Some(before) = trimmed_end.strip_suffix("```") {
            rest = before.trim_end_matches('`');
            touched = true;
        }
        if touched {
            fenced = true;
            if rest.trim().is_empty() {
                continue;
            }
        }
        out.push(rest);
    }
    (out.join("\n"), fenced)
}

fn repair_unquoted(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '"' => {
                // Copy the quoted string verbatim, honouring backslash escapes.
                out.push(c);
                i += 1;
                while i < chars.len() {
                    let q = chars[i];
                    out.push(q);
                    i += 1;
                    if q == '\\' && i < chars.len() {
                        out.push(chars[i]);
                        i += 1;
                    } else if q == '"' {
                        break;
                    }
                }
                continue;
            }
            '{' | '}' if out.ends_with(c) => {}
            ',' if next_significant(&chars, i + 1, &[',']) == Some(']')
                || last_significant(&out) == Some('[') => {}
            '=' if ends_with_word(&out, "label") => {
                out.push('=');
                let mut j = i + 1;
                while j < chars.len() && (chars[j] == ' ' || chars[j] == '\t') {
                    j += 1;
                }
                if j + 1 < chars.len() && chars[j] == '\'' && chars[j + 1] == '\'' {
                    out.push_str("\"\"");
                    i = j + 2;
                    continue;
                }
                match chars.get(j) {
                    None | Some(',' | ']' | ';' | '\n' | '\r') => out.push_str("\"\""),
                    _ => {}
                }
            }
            _ => out.push(c),
        }
        i += 1;
    }
    out
}

fn next_significant(chars: &[char], from: usize, skip: &[char]) -> Option<char> {
    chars[from..]
        .iter()
        .copied()
        .find(|c| !c.is_whitespace() && !skip.contains(c))
}

fn last_significant(out: &str) -> Option<char> {
    out.chars().rev().find(|c| !c.is_whitespace())
}

fn ends_with_word(out: &str, word: &str) -> bool {
    let trimmed = out.trim_end_matches([' ', '\t']);
    let Some(prefix) = trimmed.strip_suffix(word) else {
        return false;
    };
    !prefix
        .chars()
        .next_back()
        .is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '"')
}
