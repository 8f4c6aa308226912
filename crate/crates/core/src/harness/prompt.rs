use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Placeholder replaced by the process description.
pub const DESCRIPTION_SLOT: &str = "<BUSINESS PROCESS DESCRIPTION>";

/// Instruction used for the tuned model, identical to its training format.
pub const TUNED_TEMPLATE: &str = "You are an expert in BPMN modeling and DOT language. Your task is to convert detailed textual descriptions of business processes into accurate BPMN model codes written in DOT language. Label all nodes with their activity names. Represent all connections between nodes without labeling the connections. Represent each node and its connections accurately, ensuring all decision points and flows are included and connected. Now, generate BPMN business process model code in DOT language for the following textual description of a business process: <BUSINESS PROCESS DESCRIPTION>";

/// Syntax reference embedded in the assisted zero-shot prompt.
pub const SAMPLE_DIAGRAM: &str = r#"digraph process {
graph [rankdir=LR]
START_NODE [label="" shape=circle width=0.3]
"Gather Requirements" [shape=box width=0.6]
"Design System" [shape=box width=0.6]
"Review Requirements" [shape=box width=0.6]
END_NODE [label="" shape=circle width=0.3]
START_NODE -> "Gather Requirements"
"Gather Requirements" -> "AND_SPLIT"
"AND_SPLIT" [label="+" fixedsize=true shape=diamond width=0.5]
"AND_SPLIT" -> "Design System"
"AND_SPLIT" -> "Review Requirements"
"Design System" -> "AND_JOIN"
"Review Requirements" -> "AND_JOIN"
"AND_JOIN" [label="+" fixedsize=true shape=diamond width=0.5]
"AND_JOIN" -> END_NODE
}"#;

const ASSISTED_PREFIX: &str = "Label all nodes with their activity names. Represent all connections between nodes without labeling the connections. Represent each step and its connections accurately, ensuring all decision points and flows are included and connected. Use the following sample BPMN business process model for syntax reference:";

const ASSISTED_SUFFIX: &str = "Now, generate BPMN business process model code in DOT language for the following textual description of a business process: <BUSINESS PROCESS DESCRIPTION>";

pub const CHAIN_OF_THOUGHT_PREAMBLE: &str = "Reason step by step about the activities, gateways, and flows of the process before emitting the final DOT. Write your reasoning first, then give the final model as a single DOT code block at the end of your answer.";

pub const TREE_OF_THOUGHT_PREAMBLE: &str = "Draft three alternative candidate models of the process, briefly evaluate each against the description (activities, gateways, and flows), and select the best one. Finish your answer with the selected model as a single DOT code block.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    TunedZeroShot,
    AssistedZeroShot,
    ChainOfThought,
    TreeOfThought,
}

impl PromptMode {
    /// Reasoning modes put the final diagram after their reasoning text.
    pub fn answer_is_last_block(self) -> bool {
        matches!(self, PromptMode::ChainOfThought | PromptMode::TreeOfThought)
    }
}

impl FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tuned" | "zero-shot" | "zeroshot" | "tuned-zero-shot" => Ok(PromptMode::TunedZeroShot),
            "assisted" | "assisted-zero-shot" => Ok(PromptMode::AssistedZeroShot),
            "cot" | "chain-of-thought" => Ok(PromptMode::ChainOfThought),
            "tot" | "tree-of-thought" => Ok(PromptMode::TreeOfThought),
            other => Err(format!("unknown prompt mode {other:?} (expected tuned, assisted, cot or tot)")),
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptMode::TunedZeroShot => "tuned",
            PromptMode::AssistedZeroShot => "assisted",
            PromptMode::ChainOfThought => "cot",
            PromptMode::TreeOfThought => "tot",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("process description is empty")]
pub struct EmptyDescription;

pub fn build_prompt(mode: PromptMode, description: &str) -> Result<String, EmptyDescription> {
    if description.trim().is_empty() {
        return Err(EmptyDescription);
    }
    let template = match mode {
        PromptMode::TunedZeroShot => TUNED_TEMPLATE.to_string(),
        PromptMode::AssistedZeroShot => format!("{ASSISTED_PREFIX}\n{SAMPLE_DIAGRAM}\n{ASSISTED_SUFFIX}"),
        PromptMode::ChainOfThought => format!("{CHAIN_OF_THOUGHT_PREAMBLE}\n{TUNED_TEMPLATE}"),
        PromptMode::TreeOfThought => format!("{TREE_OF_THOUGHT_PREAMBLE}\n{TUNED_TEMPLATE}"),
    };
    Ok(template.replace(DESCRIPTION_SLOT, description))
}

/// The prompt text surrounding the description, used for token budgeting.
pub fn template_overhead(mode: PromptMode) -> String {
    build_prompt(mode, DESCRIPTION_SLOT)
        .expect("slot is non-empty")
        .replace(DESCRIPTION_SLOT, "")
}
