//! Understandability guidelines checked on generated process graphs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bpmn::to_bpmn_xml;
use crate::graph::{GatewayRole, GatewayType, NodeKind, ProcessGraph};
use crate::stats::wilson_interval;

/// The checked rule ids, in report order.
pub const RULES: [u8; 11] = [2, 3, 8, 16, 18, 20, 22, 24, 30, 34, 47];

pub fn rule_title(rule: u8) -> &'static str {
    match rule {
        2 => "Limit the number of flow nodes",
        3 => "Decompose large models with sub-processes",
        8 => "Describe each activity",
        16 => "Split and join flows with gateways",
        18 => "Balance splits and joins",
        20 => "Avoid pass-through gateways",
        22 => "Mark the default flow of exclusive splits",
        24 => "Use a single pool",
        30 => "Label every activity",
        34 => "Label exclusive gateways and their outcomes",
        47 => "Declare a consistent layout direction",
        _ => "Unknown rule",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleStatus {
    WellDone,
    Violated,
    Missing,
}

impl fmt::Display for RuleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleStatus::WellDone => "Well Done",
            RuleStatus::Violated => "Violated",
            RuleStatus::Missing => "Missing",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidelineConfig {
    /// Largest flow-node count accepted by rules 2 and 3.
    pub size_threshold: usize,
}

impl Default for GuidelineConfig {
    fn default() -> Self {
        GuidelineConfig { size_threshold: 31 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidelineReport {
    pub diagram_id: String,
    pub verdicts: BTreeMap<u8, RuleStatus>,
    pub notes: BTreeMap<u8, String>,
}

impl GuidelineReport {
    /// Report for a diagram that could not be converted.
    pub fn missing(diagram_id: &str, reason: &str) -> Self {
        GuidelineReport {
            diagram_id: diagram_id.to_string(),
            verdicts: RULES.iter().map(|&r| (r, RuleStatus::Missing)).collect(),
            notes: RULES.iter().map(|&r| (r, reason.to_string())).collect(),
        }
    }

    pub fn status(&self, rule: u8) -> Option<RuleStatus> {
        self.verdicts.get(&rule).copied()
    }

    pub fn is_missing(&self) -> bool {
        self.verdicts.values().any(|v| *v == RuleStatus::Missing)
    }
}

fn verdict(ok: bool, ok_note: impl Into<String>, ko_note: impl Into<String>) -> (RuleStatus, String) {
    if ok {
        (RuleStatus::WellDone, ok_note.into())
    } else {
        (RuleStatus::Violated, ko_note.into())
    }
}

/// Checks one diagram. `None` stands for a diagram that failed to parse.
/// The graph is converted to BPMN XML first; a failed conversion makes
/// every rule Missing.
pub fn verify_model(diagram_id: &str, graph: Option<&ProcessGraph>, config: &GuidelineConfig) -> GuidelineReport {
    let Some(g) = graph else {
        return GuidelineReport::missing(diagram_id, "diagram could not be parsed");
    };
    if let Err(e) = to_bpmn_xml(g) {
        return GuidelineReport::missing(diagram_id, &format!("XML conversion failed: {e}"));
    }

    let degrees = g.degrees();
    let size = g.nodes.len();
    let activities: Vec<_> = g.nodes.iter().filter(|n| n.kind == NodeKind::Activity).collect();
    let gateway_roles: Vec<(GatewayType, GatewayRole)> = g
        .nodes
        .iter()
        .filter_map(|n| match n.kind {
            NodeKind::Gateway { gateway, role } => Some((gateway, role)),
            _ => None,
        })
        .collect();
    let xor_splits = gateway_roles
        .iter()
        .filter(|r| **r == (GatewayType::Xor, GatewayRole::Split))
        .count();

    let mut results: Vec<(u8, (RuleStatus, String))> = Vec::with_capacity(RULES.len());

    let within = size <= config.size_threshold;
    results.push((
        2,
        verdict(
            within,
            format!("{size} flow nodes"),
            format!("{size} flow nodes exceed {}", config.size_threshold),
        ),
    ));
    results.push((
        3,
        verdict(
            within,
            format!("{size} flow nodes, no decomposition needed"),
            format!("{size} flow nodes and no sub-processes"),
        ),
    ));

    // The DOT dialect carries no documentation text.
    results.push((
        8,
        verdict(
            activities.is_empty(),
            "no activities",
            format!("{} activities without documentation", activities.len()),
        ),
    ));

    let implicit: Vec<&str> = g
        .nodes
        .iter()
        .zip(&degrees)
        .filter(|(n, (i, o))| !n.kind.is_gateway() && (*i > 1 || *o > 1))
        .map(|(n, _)| n.id.as_str())
        .collect();
    results.push((
        16,
        verdict(
            implicit.is_empty(),
            "all splits and joins use gateways",
            format!("implicit split or join at {}", implicit.join(", ")),
        ),
    ));

    let mut unbalanced = Vec::new();
    for ty in [GatewayType::And, GatewayType::Xor] {
        let splits = gateway_roles.iter().filter(|r| **r == (ty, GatewayRole::Split)).count();
        let joins = gateway_roles.iter().filter(|r| **r == (ty, GatewayRole::Join)).count();
        if splits != joins {
            unbalanced.push(format!("{} {splits} splits vs {joins} joins", ty.symbol()));
        }
    }
    results.push((
        18,
        verdict(unbalanced.is_empty(), "splits and joins balanced", unbalanced.join("; ")),
    ));

    let degenerate = gateway_roles.iter().filter(|(_, r)| *r == GatewayRole::Degenerate).count();
    results.push((
        20,
        verdict(
            degenerate == 0,
            "no pass-through gateways",
            format!("{degenerate} gateways with at most one incoming and one outgoing flow"),
        ),
    ));

    let xor_note = format!("{xor_splits} exclusive splits without default flow or outcome labels");
    results.push((22, verdict(xor_splits == 0, "no exclusive splits", xor_note.clone())));
    results.push((24, (RuleStatus::WellDone, "single pool".to_string())));

    let unlabeled: Vec<&str> = activities
        .iter()
        .filter(|n| n.label.trim().is_empty())
        .map(|n| n.id.as_str())
        .collect();
    results.push((
        30,
        verdict(
            unlabeled.is_empty(),
            "all activities labelled",
            format!("unlabelled activities: {}", unlabeled.join(", ")),
        ),
    ));
    results.push((34, verdict(xor_splits == 0, "no exclusive splits", xor_note)));

    let orientation_ok = matches!(g.orientation.as_deref(), Some("LR" | "RL" | "TB" | "BT"));
    results.push((
        47,
        verdict(
            orientation_ok,
            "layout direction declared",
            match &g.orientation {
                None => "no layout direction declared".to_string(),
                Some(o) => format!("layout direction {o:?} is not a single valid value"),
            },
        ),
    ));

    let mut report = GuidelineReport {
        diagram_id: diagram_id.to_string(),
        verdicts: BTreeMap::new(),
        notes: BTreeMap::new(),
    };
    for (rule, (status, note)) in results {
        report.verdicts.insert(rule, status);
        report.notes.insert(rule, note);
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleAggregate {
    pub rule: u8,
    pub ok: usize,
    pub ko: usize,
    pub missing: usize,
    /// `None` when no diagram was verifiable.
    pub pass_percent: Option<f64>,
    pub wilson_low: Option<f64>,
    pub wilson_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no guideline reports to aggregate")]
pub struct EmptyInput;

pub fn aggregate_reports(reports: &[GuidelineReport]) -> Result<Vec<RuleAggregate>, EmptyInput> {
    if reports.is_empty() {
        return Err(EmptyInput);
    }
    Ok(RULES
        .iter()
        .map(|&rule| {
            let (mut ok, mut ko, mut missing) = (0, 0, 0);
            for r in reports {
                match r.status(rule).unwrap_or(RuleStatus::Missing) {
                    RuleStatus::WellDone => ok += 1,
                    RuleStatus::Violated => ko += 1,
                    RuleStatus::Missing => missing += 1,
                }
            }
            let verifiable = ok + ko;
            let (pass_percent, wilson_low, wilson_high) = if verifiable == 0 {
                (None, None, None)
            } else {
                let w = wilson_interval(ok as u64, verifiable as u64, 0.95).expect("ok <= verifiable");
                (Some(100.0 * ok as f64 / verifiable as f64), Some(w.low), Some(w.high))
            };
            RuleAggregate { rule, ok, ko, missing, pass_percent, wilson_low, wilson_high }
        })
        .collect())
}
