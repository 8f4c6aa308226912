mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use bpmn_eval::dataset::{read_jsonl, write_jsonl, EvalRecord};
use bpmn_eval::harness::prompt::{SAMPLE_DIAGRAM, TUNED_TEMPLATE};

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpmn-eval")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&ok(out)).unwrap()
}

#[test]
fn parse_stats_of_sample() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sample.dot"), SAMPLE_DIAGRAM).unwrap();
    let v = json(&bin(&["parse", "--stats", "sample.dot"], dir.path()));
    assert_eq!(v["node_count"], 7);
    assert_eq!(v["gateway_count"], 2);
}

#[test]
fn sanitize_strips_fences_and_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("raw.txt"), "```dot\ndigraph g {{ a -> b }}\n```").unwrap();
    let once = ok(&bin(&["sanitize", "raw.txt"], dir.path()));
    assert!(!once.contains("```"));
    assert!(!once.contains("{{"));
    fs::write(dir.path().join("once.txt"), &once).unwrap();
    assert_eq!(ok(&bin(&["sanitize", "once.txt"], dir.path())), once);
}

#[test]
fn canonical_rendering_reparses() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.dot"), SAMPLE_DIAGRAM).unwrap();
    let canon = ok(&bin(&["parse", "--canonical", "s.dot"], dir.path()));
    fs::write(dir.path().join("c.dot"), &canon).unwrap();
    assert_eq!(ok(&bin(&["parse", "--canonical", "c.dot"], dir.path())), canon);
}

#[test]
fn ged_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ref.dot"), "digraph { a -> b }").unwrap();
    fs::write(dir.path().join("gen.dot"), "digraph { a b }").unwrap();
    let v = json(&bin(&["ged", "ref.dot", "gen.dot"], dir.path()));
    assert_eq!(v["ged"], 1.0);
    assert_eq!(v["exact"], true);
    assert!((v["r_ged_percent"].as_f64().unwrap() - 80.0).abs() < 1e-9);
}

#[test]
fn export_writes_bpmn_xml() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.dot"), SAMPLE_DIAGRAM).unwrap();
    ok(&bin(&["export", "s.dot", "-o", "s.bpmn"], dir.path()));
    let xml = fs::read_to_string(dir.path().join("s.bpmn")).unwrap();
    assert!(xml.contains("parallelGateway"));
    assert!(xml.contains("startEvent"));
}

#[test]
fn parse_failure_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.dot"), "this is not a diagram").unwrap();
    let out = bin(&["parse", "bad.dot"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn guidelines_over_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("diagrams");
    fs::create_dir(&d).unwrap();
    fs::write(d.join("a.dot"), SAMPLE_DIAGRAM).unwrap();
    fs::write(d.join("b.dot"), "no diagram here").unwrap();
    let table = ok(&bin(&["guidelines", "diagrams", "--report", "g.json"], dir.path()));
    assert!(table.starts_with("| Rule |"));
    assert_eq!(table.lines().count(), 2 + 11);
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("g.json")).unwrap()).unwrap();
    let aggregates = report["aggregates"].as_array().unwrap();
    assert!(aggregates.iter().all(|a| a["missing"] == 1 && a["ok"].as_u64().unwrap() + a["ko"].as_u64().unwrap() == 1));
}

#[test]
fn stats_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let w = json(&bin(&["stats", "wilson", "179", "179"], dir.path()));
    assert_eq!(w["high"], 1.0);

    fs::write(dir.path().join("m.csv"), "a,b,c\n1,2,3\n10,20,30\n").unwrap();
    let f = json(&bin(&["stats", "friedman", "m.csv"], dir.path()));
    assert_eq!(f["chi2"], 4.0);
    assert_eq!(f["w"], 1.0);

    fs::write(dir.path().join("v.csv"), "3\n3\n3\n3\n").unwrap();
    let b = json(&bin(&["stats", "bootstrap", "v.csv", "--resamples", "500"], dir.path()));
    assert_eq!(b["low"], b["high"]);
}

fn small_corpus() -> Vec<EvalRecord> {
    let mut records = common::graded_corpus(2, 10);
    // A duplicate description and an unparseable reference.
    let mut dup = records[0].clone();
    dup.id = "dup".into();
    records.push(dup);
    records.push(EvalRecord {
        id: "broken".into(),
        domain: "Domain 00".into(),
        description: "Broken.".into(),
        reference_dot: "digraph {".into(),
        candidate_dot: None,
    });
    records
}

#[test]
fn filter_split_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    write_jsonl(&dir.path().join("c.jsonl"), &small_corpus()).unwrap();
    ok(&bin(&["filter", "c.jsonl", "-o", "kept.jsonl", "--rejects", "rej.jsonl"], dir.path()));
    let kept: Vec<EvalRecord> = read_jsonl(&dir.path().join("kept.jsonl")).unwrap();
    assert_eq!(kept.len(), 20);
    let rejected: Vec<Value> = read_jsonl(&dir.path().join("rej.jsonl")).unwrap();
    assert_eq!(rejected.len(), 2);

    ok(&bin(&["split", "kept.jsonl", "--seed", "1", "--out-dir", "parts"], dir.path()));
    let sizes: Vec<usize> = ["train", "validation", "test"]
        .iter()
        .map(|p| read_jsonl::<EvalRecord>(&dir.path().join(format!("parts/{p}.jsonl"))).unwrap().len())
        .collect();
    assert_eq!(sizes.iter().sum::<usize>(), 20);
    assert_eq!(sizes, vec![16, 2, 2]);

    let stats = json(&bin(&["corpus-stats", "kept.jsonl"], dir.path()));
    assert_eq!(stats["records"], 20);
}

#[test]
fn prompt_substitutes_description() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.txt"), "Customers order pizza.\n").unwrap();
    let p = ok(&bin(&["prompt", "d.txt"], dir.path()));
    let head = TUNED_TEMPLATE.split("<BUSINESS PROCESS DESCRIPTION>").next().unwrap();
    assert!(p.starts_with(head));
    assert!(p.trim_end().ends_with("Customers order pizza."));
}

#[test]
fn eval_writes_all_report_formats() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::graded_corpus(2, 4);
    write_jsonl(&dir.path().join("corpus.jsonl"), &corpus).unwrap();
    let perfect: Vec<EvalRecord> =
        corpus.iter().map(|r| EvalRecord { candidate_dot: Some(r.reference_dot.clone()), ..r.clone() }).collect();
    let prose: Vec<EvalRecord> =
        corpus.iter().map(|r| EvalRecord { candidate_dot: Some("I cannot draw that.".into()), ..r.clone() }).collect();
    write_jsonl(&dir.path().join("perfect.jsonl"), &perfect).unwrap();
    write_jsonl(&dir.path().join("prose.jsonl"), &prose).unwrap();
    let out = ok(&bin(
        &["eval", "corpus.jsonl", "--candidates", "perfect.jsonl", "prose.jsonl", "--report-dir", "r", "--resamples", "200"],
        dir.path(),
    ));
    assert!(out.contains("perfect: BLEU"));
    assert!(out.contains("prose:"));
    assert!(out.contains("parsed 0/8"));
    let files: Vec<String> = fs::read_dir(dir.path().join("r"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    for ext in ["md", "csv", "json"] {
        assert!(files.iter().any(|f| f.ends_with(ext)), "{files:?}");
    }
    assert!(files.iter().any(|f| f.starts_with("ranking")), "{files:?}");
}
