//! Conversion between process graphs and BPMN 2.0 XML.
//!
//! Each graph becomes a single `process` with one flow element per node and a
//! `sequenceFlow` per edge. XML ids are derived from DOT node names; the
//! original names travel in a `dot:node` extension attribute so the
//! conversion can be inverted exactly.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, GatewayRole, GatewayType, GraphNode, NodeKind, ProcessGraph};

pub const BPMN_MODEL_NS: &str = "http://www.omg.org/spec/BPMN/20100524/MODEL";
/// Namespace of the extension attributes that preserve DOT details.
pub const DOT_EXT_NS: &str = "urn:bpmn-eval:dot";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ElementKind {
    StartEvent,
    EndEvent,
    Task,
    ParallelGateway,
    ExclusiveGateway,
    SequenceFlow,
}

impl ElementKind {
    pub fn tag(self) -> &'static str {
        match self {
            ElementKind::StartEvent => "startEvent",
            ElementKind::EndEvent => "endEvent",
            ElementKind::Task => "task",
            ElementKind::ParallelGateway => "parallelGateway",
            ElementKind::ExclusiveGateway => "exclusiveGateway",
            ElementKind::SequenceFlow => "sequenceFlow",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "startEvent" => ElementKind::StartEvent,
            "endEvent" => ElementKind::EndEvent,
            "task" => ElementKind::Task,
            "parallelGateway" => ElementKind::ParallelGateway,
            "exclusiveGateway" => ElementKind::ExclusiveGateway,
            "sequenceFlow" => ElementKind::SequenceFlow,
            _ => return None,
        })
    }

    fn of(kind: NodeKind) -> Self {
        match kind {
            NodeKind::StartEvent => ElementKind::StartEvent,
            NodeKind::EndEvent => ElementKind::EndEvent,
            NodeKind::Activity => ElementKind::Task,
            NodeKind::Gateway { gateway: GatewayType::And, .. } => ElementKind::ParallelGateway,
            NodeKind::Gateway { gateway: GatewayType::Xor, .. } => ElementKind::ExclusiveGateway,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpmnDocument {
    pub xml: String,
    /// XML id of every flow element and sequence flow.
    pub elements: BTreeMap<String, ElementKind>,
}

impl BpmnDocument {
    pub fn count(&self, kind: ElementKind) -> usize {
        self.elements.values().filter(|k| **k == kind).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConversionError {
    #[error("node {node:?}: {what} contains a character that XML 1.0 cannot represent")]
    UnrepresentableText { node: String, what: &'static str },
    #[error("edge endpoint {0:?} is not a node of the graph")]
    DanglingEdge(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BpmnParseError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("no process element found")]
    NoProcess,
    #[error("unsupported element <{0}>")]
    UnsupportedElement(String),
    #[error("element <{tag}> is missing attribute {attr}")]
    MissingAttribute { tag: String, attr: &'static str },
    #[error("sequence flow {flow} references unknown element {target}")]
    UnknownReference { flow: String, target: String },
    #[error("duplicate element id {0}")]
    DuplicateId(String),
}

fn xml_char_ok(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..='\u{10FFFF}')
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

/// NCName-safe id: non-alphanumerics become `_`, a leading digit gets a `_`
/// prefix.
pub fn xml_id(name: &str) -> String {
    let mut id: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if id.is_empty() || id.starts_with(|c: char| c.is_ascii_digit()) {
        id.insert(0, '_');
    }
    id
}

fn check_text(node: &str, what: &'static str, s: &str) -> Result<(), ConversionError> {
    if s.chars().all(xml_char_ok) {
        Ok(())
    } else {
        Err(ConversionError::UnrepresentableText { node: node.to_string(), what })
    }
}

pub fn to_bpmn_xml(g: &ProcessGraph) -> Result<BpmnDocument, ConversionError> {
    let mut taken: HashSet<String> = ["Definitions_1", "Process_1"].iter().map(|s| s.to_string()).collect();
    let mut unique = |base: String| {
        let mut id = base.clone();
        let mut k = 2;
        while taken.contains(&id) {
            id = format!("{base}_{k}");
            k += 1;
        }
        taken.insert(id.clone());
        id
    };
    let mut node_ids: HashMap<&str, String> = HashMap::new();
    for n in &g.nodes {
        check_text(&n.id, "id", &n.id)?;
        check_text(&n.id, "label", &n.label)?;
        node_ids.insert(n.id.as_str(), unique(xml_id(&n.id)));
    }
    let mut flow_ids = Vec::with_capacity(g.edges.len());
    for (i, e) in g.edges.iter().enumerate() {
        for end in [&e.source, &e.target] {
            if !node_ids.contains_key(end.as_str()) {
                return Err(ConversionError::DanglingEdge(end.clone()));
            }
        }
        if let Some(l) = &e.label {
            check_text(&e.source, "edge label", l)?;
        }
        flow_ids.push(unique(format!("Flow_{}", i + 1)));
    }

    let mut incoming: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut outgoing: HashMap<&str, Vec<&str>> = HashMap::new();
    for (e, fid) in g.edges.iter().zip(&flow_ids) {
        outgoing.entry(e.source.as_str()).or_default().push(fid);
        incoming.entry(e.target.as_str()).or_default().push(fid);
    }

    let mut elements = BTreeMap::new();
    let mut xml = String::new();
    xml.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        xml,
        "<bpmn:definitions xmlns:bpmn=\"{BPMN_MODEL_NS}\" xmlns:dot=\"{DOT_EXT_NS}\" id=\"Definitions_1\" targetNamespace=\"http://bpmn.io/schema/bpmn\">"
    );
    match &g.orientation {
        Some(o) => {
            check_text("graph", "orientation", o)?;
            let _ = writeln!(
                xml,
                "  <bpmn:process id=\"Process_1\" isExecutable=\"false\" dot:rankdir=\"{}\">",
                escape_attr(o)
            );
        }
        None => xml.push_str("  <bpmn:process id=\"Process_1\" isExecutable=\"false\">\n"),
    }
    for n in &g.nodes {
        let kind = ElementKind::of(n.kind);
        let id = &node_ids[n.id.as_str()];
        elements.insert(id.clone(), kind);
        let mut attrs = format!("id=\"{id}\"");
        if !n.label.is_empty() || kind == ElementKind::Task {
            let _ = write!(attrs, " name=\"{}\"", escape_attr(&n.label));
        }
        if let NodeKind::Gateway { role, .. } = n.kind {
            let direction = match role {
                GatewayRole::Split => "Diverging",
                GatewayRole::Join => "Converging",
                GatewayRole::Degenerate => "Unspecified",
            };
            let _ = write!(attrs, " gatewayDirection=\"{direction}\"");
        }
        let _ = write!(attrs, " dot:node=\"{}\"", escape_attr(&n.id));
        let ins = incoming.get(n.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let outs = outgoing.get(n.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        if ins.is_empty() && outs.is_empty() {
            let _ = writeln!(xml, "    <bpmn:{} {attrs} />", kind.tag());
            continue;
        }
        let _ = writeln!(xml, "    <bpmn:{} {attrs}>", kind.tag());
        for f in ins {
            let _ = writeln!(xml, "      <bpmn:incoming>{f}</bpmn:incoming>");
        }
        for f in outs {
            let _ = writeln!(xml, "      <bpmn:outgoing>{f}</bpmn:outgoing>");
        }
        let _ = writeln!(xml, "    </bpmn:{}>", kind.tag());
    }
    for (e, fid) in g.edges.iter().zip(&flow_ids) {
        elements.insert(fid.clone(), ElementKind::SequenceFlow);
        let name = e
            .label
            .as_ref()
            .map(|l| format!(" name=\"{}\"", escape_attr(l)))
            .unwrap_or_default();
        let _ = writeln!(
            xml,
            "    <bpmn:sequenceFlow id=\"{fid}\" sourceRef=\"{}\" targetRef=\"{}\"{name} />",
            node_ids[e.source.as_str()],
            node_ids[e.target.as_str()]
        );
    }
    xml.push_str("  </bpmn:process>\n</bpmn:definitions>\n");
    Ok(BpmnDocument { xml, elements })
}

/// Reads a document in the shape produced by [`to_bpmn_xml`]. Documents from
/// other tools are accepted as long as they only use the supported element
/// kinds; without `dot:node` attributes the XML ids become node ids.
pub fn from_bpmn_xml(xml: &str) -> Result<ProcessGraph, BpmnParseError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| BpmnParseError::Xml(e.to_string()))?;
    let process = doc
        .descendants()
        .find(|n| n.is_element() && n.tag_name().name() == "process" && n.tag_name().namespace() == Some(BPMN_MODEL_NS))
        .ok_or(BpmnParseError::NoProcess)?;

    let mut graph = ProcessGraph {
        orientation: process.attribute((DOT_EXT_NS, "rankdir")).map(str::to_string),
        ..Default::default()
    };
    let mut by_xml_id: HashMap<String, String> = HashMap::new();
    let mut flows = Vec::new();
    for el in process.children().filter(|n| n.is_element()) {
        let tag = el.tag_name().name();
        if el.tag_name().namespace() != Some(BPMN_MODEL_NS) {
            return Err(BpmnParseError::UnsupportedElement(tag.to_string()));
        }
        let kind = ElementKind::from_tag(tag).ok_or_else(|| BpmnParseError::UnsupportedElement(tag.to_string()))?;
        let id = el
            .attribute("id")
            .ok_or(BpmnParseError::MissingAttribute { tag: tag.to_string(), attr: "id" })?
            .to_string();
        if kind == ElementKind::SequenceFlow {
            let source = el
                .attribute("sourceRef")
                .ok_or(BpmnParseError::MissingAttribute { tag: tag.to_string(), attr: "sourceRef" })?;
            let target = el
                .attribute("targetRef")
                .ok_or(BpmnParseError::MissingAttribute { tag: tag.to_string(), attr: "targetRef" })?;
            flows.push((id, source.to_string(), target.to_string(), el.attribute("name").map(str::to_string)));
            continue;
        }
        for child in el.children().filter(|c| c.is_element()) {
            let name = child.tag_name().name();
            if name != "incoming" && name != "outgoing" {
                return Err(BpmnParseError::UnsupportedElement(name.to_string()));
            }
        }
        let node_id = el.attribute((DOT_EXT_NS, "node")).unwrap_or(&id).to_string();
        if by_xml_id.insert(id.clone(), node_id.clone()).is_some() {
            return Err(BpmnParseError::DuplicateId(id));
        }
        let label = el.attribute("name").unwrap_or_default().to_string();
        let node_kind = match kind {
            ElementKind::StartEvent => NodeKind::StartEvent,
            ElementKind::EndEvent => NodeKind::EndEvent,
            ElementKind::Task => NodeKind::Activity,
            ElementKind::ParallelGateway => NodeKind::Gateway { gateway: GatewayType::And, role: GatewayRole::Degenerate },
            ElementKind::ExclusiveGateway => NodeKind::Gateway { gateway: GatewayType::Xor, role: GatewayRole::Degenerate },
            ElementKind::SequenceFlow => unreachable!(),
        };
        graph.nodes.push(GraphNode { id: node_id, kind: node_kind, label });
    }
    for (flow, source, target, label) in flows {
        let resolve = |r: &str| {
            by_xml_id.get(r).cloned().ok_or_else(|| BpmnParseError::UnknownReference {
                flow: flow.clone(),
                target: r.to_string(),
            })
        };
        graph.edges.push(Edge { source: resolve(&source)?, target: resolve(&target)?, label });
    }
    graph.refresh_gateway_roles();
    Ok(graph)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub ok: bool,
    pub reason: Option<String>,
}

fn multiset<T: Ord + Clone>(items: &[T]) -> Vec<T> {
    let mut v = items.to_vec();
    v.sort();
    v
}

/// Converts to XML and back, comparing node and edge multisets (kinds and
/// labels included) and the orientation.
pub fn round_trip_check(g: &ProcessGraph) -> RoundTrip {
    let fail = |reason: String| RoundTrip { ok: false, reason: Some(reason) };
    let doc = match to_bpmn_xml(g) {
        Ok(d) => d,
        Err(e) => return fail(format!("conversion failed: {e}")),
    };
    let back = match from_bpmn_xml(&doc.xml) {
        Ok(b) => b,
        Err(e) => return fail(format!("re-import failed: {e}")),
    };
    let key_nodes = |g: &ProcessGraph| {
        multiset(&g.nodes.iter().map(|n| (n.id.clone(), n.kind, n.label.clone())).collect::<Vec<_>>())
    };
    let key_edges = |g: &ProcessGraph| {
        multiset(&g.edges.iter().map(|e| (e.source.clone(), e.target.clone(), e.label.clone())).collect::<Vec<_>>())
    };
    if key_nodes(g) != key_nodes(&back) {
        return fail("node multiset differs after round trip".into());
    }
    if key_edges(g) != key_edges(&back) {
        return fail("edge multiset differs after round trip".into());
    }
    if g.orientation != back.orientation {
        return fail("orientation differs after round trip".into());
    }
    RoundTrip { ok: true, reason: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_dot;
    use crate::harness::prompt::SAMPLE_DIAGRAM;

    #[test]
    fn chain_maps_directly() {
        let g = parse_dot("digraph { START_NODE -> \"Check order\" -> END_NODE }").unwrap();
        let doc = to_bpmn_xml(&g).unwrap();
        assert_eq!(doc.count(ElementKind::StartEvent), 1);
        assert_eq!(doc.count(ElementKind::Task), 1);
        assert_eq!(doc.count(ElementKind::EndEvent), 1);
        assert_eq!(doc.count(ElementKind::SequenceFlow), 2);
        assert!(doc.xml.contains("name=\"Check order\""));
        assert!(doc.xml.contains(BPMN_MODEL_NS));
    }

    #[test]
    fn sample_diagram_elements() {
        let g = parse_dot(SAMPLE_DIAGRAM).unwrap();
        let doc = to_bpmn_xml(&g).unwrap();
        assert_eq!(doc.count(ElementKind::ParallelGateway), 2);
        assert_eq!(doc.count(ElementKind::Task), 3);
        assert_eq!(doc.count(ElementKind::SequenceFlow), 7);
        assert_eq!(from_bpmn_xml(&doc.xml).unwrap(), g);
        assert!(round_trip_check(&g).ok);
    }

    #[test]
    fn empty_graph() {
        let doc = to_bpmn_xml(&ProcessGraph::default()).unwrap();
        assert!(doc.elements.is_empty());
        assert!(doc.xml.contains("<bpmn:process id=\"Process_1\""));
        assert_eq!(from_bpmn_xml(&doc.xml).unwrap(), ProcessGraph::default());
        assert!(round_trip_check(&ProcessGraph::default()).ok);
    }

    #[test]
    fn reserved_characters_are_escaped() {
        let g = parse_dot(
            "digraph { rankdir=LR; \"a<b & 'c'\" [label=\"Say \\\"hi\\\" <now> & 'then'\ttab\"]; \"a<b & 'c'\" -> x [label=\"<yes>\"] }",
        )
        .unwrap();
        let doc = to_bpmn_xml(&g).unwrap();
        assert!(roxmltree::Document::parse(&doc.xml).is_ok());
        assert_eq!(from_bpmn_xml(&doc.xml).unwrap(), g);
        assert!(round_trip_check(&g).ok);
    }

    #[test]
    fn colliding_ids_get_suffixes() {
        let g = parse_dot("digraph { \"a b\" -> \"a-b\" -> a_b -> Flow_1 }").unwrap();
        let doc = to_bpmn_xml(&g).unwrap();
        for id in ["a_b", "a_b_2", "a_b_3", "Flow_1", "Flow_1_2"] {
            assert!(doc.elements.contains_key(id), "{id} missing from {:?}", doc.elements);
        }
        assert!(round_trip_check(&g).ok);
    }

    #[test]
    fn unrepresentable_text_fails() {
        let mut g = parse_dot("digraph { a }").unwrap();
        g.nodes[0].label = "bell\u{7}".into();
        assert!(matches!(to_bpmn_xml(&g), Err(ConversionError::UnrepresentableText { .. })));
        let rt = round_trip_check(&g);
        assert!(!rt.ok);
        assert!(rt.reason.unwrap().contains("conversion failed"));
    }

    #[test]
    fn minimal_hand_written_document() {
        let xml = r#"<?xml version="1.0"?>
<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL">
  <process id="p">
    <startEvent id="s"/>
    <endEvent id="e"/>
    <sequenceFlow id="f" sourceRef="s" targetRef="e"/>
  </process>
</definitions>"#;
        let g = from_bpmn_xml(xml).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.nodes[0].kind, NodeKind::StartEvent);
        assert_eq!(g.nodes[1].kind, NodeKind::EndEvent);
        assert_eq!(g.edges, vec![Edge { source: "s".into(), target: "e".into(), label: None }]);
    }

    #[test]
    fn unknown_elements_are_rejected() {
        let xml = r#"<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL">
  <process id="p"><userTask id="t"/></process></definitions>"#;
        assert_eq!(from_bpmn_xml(xml), Err(BpmnParseError::UnsupportedElement("userTask".into())));
        let xml = r#"<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL">
  <process id="p"><task id="t"/><sequenceFlow id="f" sourceRef="t" targetRef="zz"/></process></definitions>"#;
        assert!(matches!(from_bpmn_xml(xml), Err(BpmnParseError::UnknownReference { .. })));
        assert!(matches!(from_bpmn_xml("<x>"), Err(BpmnParseError::Xml(_))));
        assert_eq!(
            from_bpmn_xml(r#"<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL"/>"#),
            Err(BpmnParseError::NoProcess)
        );
    }
}
