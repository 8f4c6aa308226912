use std::fmt::Write;

use super::{NodeKind, ProcessGraph};

/// Serializes a graph deterministically in the sample-diagram style: all
/// node declarations first, then edges, both in graph order.
pub fn render_canonical(g: &ProcessGraph) -> String {
    let mut out = String::from("digraph process {\n");
    if let Some(dir) = &g.orientation {
        let _ = writeln!(out, "graph [rankdir={}]", quote_if_needed(dir));
    }
    let degrees = g.degrees();
    for (node, (in_deg, _)) in g.nodes.iter().zip(degrees) {
        let id = quote(&node.id);
        let _ = match node.kind {
            NodeKind::StartEvent => writeln!(out, "{id} [label=\"\" shape=circle width=0.3]"),
            NodeKind::EndEvent => {
                // An unnamed end event with no incoming flow would re-classify
                // as a start event; doublecircle pins it.
                let upper = node.id.to_ascii_uppercase();
                let shape = if upper.starts_with("END") || (in_deg > 0 && !upper.starts_with("START")) {
                    "circle"
                } else {
                    "doublecircle"
                };
                writeln!(out, "{id} [label=\"\" shape={shape} width=0.3]")
            }
            NodeKind::Activity => {
                writeln!(out, "{id} [label={} shape=box width=0.6]", quote(&node.label))
            }
            NodeKind::Gateway { .. } => writeln!(
                out,
                "{id} [label={} fixedsize=true shape=diamond width=0.5]",
                quote(&node.label)
            ),
        };
    }
    for e in &g.edges {
        let _ = match &e.label {
            Some(l) => writeln!(out, "{} -> {} [label={}]", quote(&e.source), quote(&e.target), quote(l)),
            None => writeln!(out, "{} -> {}", quote(&e.source), quote(&e.target)),
        };
    }
    out.push('}');
    out
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        if c == '"' {
            q.push('\\');
        }
        q.push(c);
    }
    q.push('"');
    q
}

fn quote_if_needed(s: &str) -> String {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        s.to_string()
    } else {
        quote(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_dot;
    use crate::harness::prompt::SAMPLE_DIAGRAM;

    #[test]
    fn empty_graph() {
        assert_eq!(render_canonical(&ProcessGraph::default()), "digraph process {\n}");
    }

    #[test]
    fn sample_round_trip_and_determinism() {
        let g = parse_dot(SAMPLE_DIAGRAM).unwrap();
        let text = render_canonical(&g);
        assert_eq!(text, render_canonical(&g));
        assert_eq!(parse_dot(&text).unwrap(), g);
    }

    #[test]
    fn awkward_labels_round_trip() {
        let src = r#"digraph g {
            rankdir="LR"
            "a \"quoted\" id" [label="multi
line"]
            b [label="back\\slash"]
            s [shape=circle]
            x [shape=circle]
            q [shape=diamond label="?"]
            s -> "a \"quoted\" id" -> q
            q -> b [label="yes"]
            q -> x
            y [shape=doublecircle]
        }"#;
        let g = parse_dot(src).unwrap();
        assert_eq!(g.node("y").unwrap().kind, NodeKind::EndEvent);
        assert_eq!(parse_dot(&render_canonical(&g)).unwrap(), g);
    }
}
