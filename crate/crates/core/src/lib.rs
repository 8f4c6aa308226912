//! Evaluation toolkit for text-to-process-model generation: DOT parsing,
//! structural and textual similarity, BPMN export, modelling guidelines,
//! statistics, dataset curation and the inference harness.

pub mod bpmn;
pub mod dataset;
pub mod ged;
pub mod graph;
pub mod guidelines;
pub mod harness;
pub mod stats;
pub mod text_metrics;
