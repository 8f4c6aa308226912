use std::collections::HashMap;

use thiserror::Error;

use super::{Edge, GatewayRole, GatewayType, GraphNode, NodeKind, ProcessGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

/// A diamond whose gateway type could not be read from its label or id.
/// The node is classified as an exclusive gateway.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationWarning {
    pub node_id: String,
    pub label: String,
}

impl std::fmt::Display for ClassificationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "diamond node {:?} has unrecognised gateway label {:?}; treating it as XOR",
            self.node_id, self.label
        )
    }
}

/// Parses DOT text into a classified [`ProcessGraph`].
///
/// Unrecognised gateway labels are logged and fall back to XOR; use
/// [`parse_dot_with_warnings`] to inspect them.
pub fn parse_dot(text: &str) -> Result<ProcessGraph, ParseError> {
    let (graph, warnings) = parse_dot_with_warnings(text)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(graph)
}

pub fn parse_dot_with_warnings(
    text: &str,
) -> Result<(ProcessGraph, Vec<ClassificationWarning>), ParseError> {
    let tokens = lex(text)?;
    let raw = Parser { tokens, pos: 0 }.graph()?;
    Ok(classify(raw))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id { text: String, quoted: bool },
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Equals,
    Semi,
    Comma,
    Colon,
    Arrow,
    Undirected,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

fn is_id_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.' || !c.is_ascii()
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut i = 0;
    let mut at_line_start = true;
    let err = |line, message: String| Err(ParseError { line, message });
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
            at_line_start = true;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        // Preprocessor-style lines are comments in DOT.
        if c == '#' && at_line_start {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        at_line_start = false;
        let tok_line = line;
        let push = move |tokens: &mut Vec<Token>, tok| tokens.push(Token { tok, line: tok_line });
        match c {
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                let start = line;
                i += 2;
                loop {
                    match chars.get(i) {
                        None => return err(start, "unterminated comment".into()),
                        Some('*') if chars.get(i + 1) == Some(&'/') => {
                            i += 2;
                            break;
                        }
                        Some('\n') => line += 1,
                        _ => {}
                    }
                    i += 1;
                }
            }
            '{' => {
                push(&mut tokens, Tok::LBrace);
                i += 1;
            }
            '}' => {
                push(&mut tokens, Tok::RBrace);
                i += 1;
            }
            '[' => {
                push(&mut tokens, Tok::LBracket);
                i += 1;
            }
            ']' => {
                push(&mut tokens, Tok::RBracket);
                i += 1;
            }
            '=' => {
                push(&mut tokens, Tok::Equals);
                i += 1;
            }
            ';' => {
                push(&mut tokens, Tok::Semi);
                i += 1;
            }
            ',' => {
                push(&mut tokens, Tok::Comma);
                i += 1;
            }
            ':' => {
                push(&mut tokens, Tok::Colon);
                i += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                push(&mut tokens, Tok::Arrow);
                i += 2;
            }
            '-' if chars.get(i + 1) == Some(&'-') => {
                push(&mut tokens, Tok::Undirected);
                i += 2;
            }
            '"' => {
                let start = line;
                let mut value = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return err(start, "unterminated string".into()),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => match chars.get(i + 1) {
                            Some('"') => {
                                value.push('"');
                                i += 2;
                            }
                            Some('\n') => {
                                line += 1;
                                i += 2;
                            }
                            Some(&next) => {
                                value.push('\\');
                                value.push(next);
                                i += 2;
                            }
                            None => {
                                value.push('\\');
                                i += 1;
                            }
                        },
                        Some(&ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            value.push(ch);
                            i += 1;
                        }
                    }
                }
                push(&mut tokens, Tok::Id { text: value, quoted: true });
            }
            '<' => return err(line, "HTML-like labels are not supported".into()),
            '-' if chars.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == '.') => {
                let start = i;
                i += 1;
                while i < chars.len() && is_id_char(chars[i]) {
                    i += 1;
                }
                push(&mut tokens, Tok::Id { text: chars[start..i].iter().collect(), quoted: false });
            }
            c if is_id_char(c) => {
                let start = i;
                while i < chars.len() && is_id_char(chars[i]) {
                    i += 1;
                }
                push(&mut tokens, Tok::Id { text: chars[start..i].iter().collect(), quoted: false });
            }
            other => return err(line, format!("unexpected character {other:?}")),
        }
    }
    Ok(tokens)
}

#[derive(Default)]
struct RawNode {
    id: String,
    attrs: HashMap<String, String>,
    explicit: bool,
}

#[derive(Default)]
struct RawGraph {
    nodes: Vec<RawNode>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    rankdirs: Vec<String>,
}

impl RawGraph {
    fn touch(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        self.nodes.push(RawNode { id: id.to_string(), ..Default::default() });
        self.index.insert(id.to_string(), self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn note_rankdir(&mut self, value: &str) {
        if !self.rankdirs.iter().any(|r| r == value) {
            self.rankdirs.push(value.to_string());
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map_or(1, |t| t.line)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { line: self.line(), message: message.into() })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Id { text, quoted: false }) if text.eq_ignore_ascii_case(word))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => self.fail(format!("expected {what}, found {}", describe(t))),
            None => self.fail(format!("expected {what}, found end of input")),
        }
    }

    fn id(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Id { .. }) => match self.bump() {
                Some(Tok::Id { text, .. }) => Ok(text),
                _ => unreachable!(),
            },
            Some(t) => self.fail(format!("expected {what}, found {}", describe(t))),
            None => self.fail(format!("expected {what}, found end of input")),
        }
    }

    fn graph(mut self) -> Result<RawGraph, ParseError> {
        if self.keyword("strict") {
            self.pos += 1;
        }
        if self.keyword("graph") {
            return self.fail("undirected graphs are not supported; expected digraph");
        }
        if !self.keyword("digraph") {
            return match self.peek() {
                Some(t) => self.fail(format!("expected digraph, found {}", describe(t))),
                None => self.fail("empty input"),
            };
        }
        self.pos += 1;
        if matches!(self.peek(), Some(Tok::Id { .. })) {
            self.pos += 1;
        }
        self.expect(Tok::LBrace, "'{'")?;
        let mut g = RawGraph::default();
        let mut node_defaults: HashMap<String, String> = HashMap::new();
        let mut edge_defaults: HashMap<String, String> = HashMap::new();
        loop {
            match self.peek() {
                None => return self.fail("unexpected end of input; missing '}'"),
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::Semi) => {
                    self.pos += 1;
                }
                Some(Tok::LBrace) => return self.fail("subgraphs are not supported"),
                Some(Tok::Id { .. }) => self.statement(&mut g, &mut node_defaults, &mut edge_defaults)?,
                Some(t) => return self.fail(format!("unexpected {}", describe(t))),
            }
        }
        if let Some(t) = self.peek() {
            return self.fail(format!("unexpected {} after closing brace", describe(t)));
        }
        Ok(g)
    }

    fn statement(
        &mut self,
        g: &mut RawGraph,
        node_defaults: &mut HashMap<String, String>,
        edge_defaults: &mut HashMap<String, String>,
    ) -> Result<(), ParseError> {
        if self.keyword("subgraph") {
            return self.fail("subgraphs are not supported");
        }
        for (word, target) in [("graph", 0), ("node", 1), ("edge", 2)] {
            if self.keyword(word) && matches!(self.tokens.get(self.pos + 1).map(|t| &t.tok), Some(Tok::LBracket)) {
                self.pos += 1;
                let attrs = self.attr_lists()?;
                match target {
                    0 => {
                        if let Some(dir) = attrs.get("rankdir") {
                            g.note_rankdir(dir);
                        }
                    }
                    1 => node_defaults.extend(attrs),
                    _ => edge_defaults.extend(attrs),
                }
                return Ok(());
            }
        }
        let first = self.id("node id")?;
        match self.peek() {
            Some(Tok::Equals) => {
                self.pos += 1;
                let value = self.id("attribute value")?;
                if first == "rankdir" {
                    g.note_rankdir(&value);
                }
                Ok(())
            }
            Some(Tok::Colon) => self.fail("node ports are not supported"),
            Some(Tok::Undirected) => self.fail("undirected edge '--' in a digraph"),
            Some(Tok::Arrow) => {
                let mut chain = vec![first];
                while matches!(self.peek(), Some(Tok::Arrow)) {
                    self.pos += 1;
                    if matches!(self.peek(), Some(Tok::LBrace)) || self.keyword("subgraph") {
                        return self.fail("subgraphs are not supported");
                    }
                    chain.push(self.id("edge target")?);
                    if matches!(self.peek(), Some(Tok::Colon)) {
                        return self.fail("node ports are not supported");
                    }
                }
                let mut attrs = edge_defaults.clone();
                if matches!(self.peek(), Some(Tok::LBracket)) {
                    attrs.extend(self.attr_lists()?);
                }
                for id in &chain {
                    g.touch(id);
                }
                let label = attrs.get("label").cloned();
                for pair in chain.windows(2) {
                    g.edges.push(Edge {
                        source: pair[0].clone(),
                        target: pair[1].clone(),
                        label: label.clone(),
                    });
                }
                Ok(())
            }
            _ => {
                let attrs = if matches!(self.peek(), Some(Tok::LBracket)) {
                    self.attr_lists()?
                } else {
                    HashMap::new()
                };
                let i = g.touch(&first);
                let node = &mut g.nodes[i];
                if !node.explicit {
                    node.explicit = true;
                    for (k, v) in node_defaults.iter() {
                        node.attrs.entry(k.clone()).or_insert_with(|| v.clone());
                    }
                }
                node.attrs.extend(attrs);
                Ok(())
            }
        }
    }

    fn attr_lists(&mut self) -> Result<HashMap<String, String>, ParseError> {
        let mut attrs = HashMap::new();
        while matches!(self.peek(), Some(Tok::LBracket)) {
            self.pos += 1;
            loop {
                match self.peek() {
                    Some(Tok::RBracket) => {
                        self.pos += 1;
                        break;
                    }
                    Some(Tok::Comma | Tok::Semi) => {
                        self.pos += 1;
                    }
                    Some(Tok::Id { .. }) => {
                        let key = self.id("attribute name")?;
                        let value = if matches!(self.peek(), Some(Tok::Equals)) {
                            self.pos += 1;
                            self.id("attribute value")?
                        } else {
                            "true".to_string()
                        };
                        attrs.insert(key, value);
                    }
                    Some(t) => return self.fail(format!("unexpected {} in attribute list", describe(t))),
                    None => return self.fail("unterminated attribute list"),
                }
            }
        }
        Ok(attrs)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Id { text, .. } => format!("{text:?}"),
        Tok::LBrace => "'{'".into(),
        Tok::RBrace => "'}'".into(),
        Tok::LBracket => "'['".into(),
        Tok::RBracket => "']'".into(),
        Tok::Equals => "'='".into(),
        Tok::Semi => "';'".into(),
        Tok::Comma => "','".into(),
        Tok::Colon => "':'".into(),
        Tok::Arrow => "'->'".into(),
        Tok::Undirected => "'--'".into(),
    }
}

const START_NAMES: [&str; 3] = ["START_NODE", "START", "START_EVENT"];
const END_NAMES: [&str; 3] = ["END_NODE", "END", "END_EVENT"];

fn classify(raw: RawGraph) -> (ProcessGraph, Vec<ClassificationWarning>) {
    let mut degrees = vec![(0usize, 0usize); raw.nodes.len()];
    for e in &raw.edges {
        degrees[raw.index[&e.source]].1 += 1;
        degrees[raw.index[&e.target]].0 += 1;
    }
    let mut warnings = Vec::new();
    let nodes = raw
        .nodes
        .into_iter()
        .zip(degrees)
        .map(|(node, (in_deg, out_deg))| {
            let upper = node.id.to_ascii_uppercase();
            let shape = node
                .attrs
                .get("shape")
                .map(|s| s.to_ascii_lowercase())
                .filter(|_| node.explicit);
            let named_start = START_NAMES.contains(&upper.as_str());
            let named_end = END_NAMES.contains(&upper.as_str());
            let label_attr = node.attrs.get("label").cloned();
            let kind;
            let label;
            if named_start || named_end || matches!(shape.as_deref(), Some("circle" | "doublecircle")) {
                kind = if named_start || (!named_end && upper.starts_with("START")) {
                    NodeKind::StartEvent
                } else if named_end || upper.starts_with("END") || shape.as_deref() == Some("doublecircle") {
                    NodeKind::EndEvent
                } else if in_deg == 0 {
                    NodeKind::StartEvent
                } else {
                    NodeKind::EndEvent
                };
                label = String::new();
            } else if shape.as_deref() == Some("diamond") {
                let text = label_attr.clone().unwrap_or_default();
                let gateway = match text.trim() {
                    "+" => GatewayType::And,
                    "X" | "x" | "×" => GatewayType::Xor,
                    _ if upper.starts_with("AND_") => GatewayType::And,
                    _ if upper.starts_with("XOR_") => GatewayType::Xor,
                    _ => {
                        warnings.push(ClassificationWarning { node_id: node.id.clone(), label: text.clone() });
                        GatewayType::Xor
                    }
                };
                kind = NodeKind::Gateway { gateway, role: GatewayRole::from_degrees(in_deg, out_deg) };
                label = text;
            } else {
                kind = NodeKind::Activity;
                label = match (node.explicit, label_attr) {
                    (true, Some(l)) => l,
                    _ => node.id.clone(),
                };
            }
            GraphNode { id: node.id, kind, label }
        })
        .collect();
    let orientation = if raw.rankdirs.is_empty() { None } else { Some(raw.rankdirs.join(";")) };
    (ProcessGraph { nodes, edges: raw.edges, orientation }, warnings)
}
