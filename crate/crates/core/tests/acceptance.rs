//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any of them fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bpmn_eval::bpmn::{round_trip_check, to_bpmn_xml, ElementKind};
use bpmn_eval::dataset::{read_jsonl, stratified_sample, write_jsonl, Difficulty, EvalRecord};
use bpmn_eval::ged::{ged, r_ged, SearchBudget};
use bpmn_eval::graph::{parse_dot, Edge, GatewayRole, GatewayType, GraphNode, NodeKind, ProcessGraph};
use bpmn_eval::guidelines::{aggregate_reports, verify_model, GuidelineConfig, GuidelineReport, RuleStatus};
use bpmn_eval::harness::prompt::SAMPLE_DIAGRAM;
use bpmn_eval::stats::{bootstrap_ci, chi_square_sf, friedman_test, kendall_w, wilson_interval};
use bpmn_eval::text_metrics::{bleu, meteor, rouge_l, tokenize, TokenSequence};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Outcome {
    let cases = [(1862.52, 0.81), (1506.76, 0.65), (1727.50, 0.75), (1702.32, 0.74)];
    let mut got = Vec::new();
    for (chi2, expected) in cases {
        let w = kendall_w(chi2, 177, 14);
        ensure((w - expected).abs() <= 0.005, || format!("chi2 {chi2}: W {w:.4} vs {expected}"))?;
        got.push(format!("{w:.4}"));
    }
    Ok(format!("W = {}", got.join(", ")))
}

fn report_with(rule: u8, status: RuleStatus) -> GuidelineReport {
    let mut r = GuidelineReport::missing("synthetic", "");
    r.verdicts.insert(rule, status);
    r
}

fn criterion_2() -> Outcome {
    let cases = [
        ((179, 0), "100.00"),
        ((0, 179), "0.00"),
        ((173, 6), "96.65"),
        ((175, 4), "97.77"),
        ((178, 1), "99.44"),
        ((79, 100), "44.13"),
    ];
    for ((ok, ko), expected) in cases {
        let mut reports = Vec::new();
        reports.extend((0..ok).map(|_| report_with(22, RuleStatus::WellDone)));
        reports.extend((0..ko).map(|_| report_with(22, RuleStatus::Violated)));
        let agg = aggregate_reports(&reports).map_err(|e| e.to_string())?;
        let row = agg.iter().find(|a| a.rule == 22).ok_or("rule 22 missing")?;
        let pct = row.pass_percent.ok_or("no pass percentage")?;
        let shown = format!("{pct:.2}");
        ensure(shown == expected, || format!("({ok},{ko}) gave {shown}, expected {expected}"))?;
        // Independent arithmetic on the same counts.
        let oracle = format!("{:.2}", ok as f64 * 100.0 / (ok + ko) as f64);
        ensure(shown == oracle, || format!("({ok},{ko}) gave {shown}, oracle {oracle}"))?;
    }
    Ok("6 count pairs reproduced".into())
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = GuidelineConfig::default();
    let mut reports = Vec::new();
    let mut with_xor = 0;
    for i in 0..150 {
        let rate = if i % 2 == 0 { 0.0 } else { 0.6 };
        let (dot, xor) = common::synthetic_diagram(&mut rng, rate);
        if xor > 0 {
            with_xor += 1;
        }
        let g = parse_dot(&dot).map_err(|e| format!("diagram {i}: {e}"))?;
        reports.push(verify_model(&format!("s{i}"), Some(&g), &cfg));
    }
    ensure(with_xor > 0 && with_xor < reports.len(), || format!("{with_xor} of {} diagrams with XOR", reports.len()))?;
    let agg = aggregate_reports(&reports).map_err(|e| e.to_string())?;
    let rate = |rule: u8| agg.iter().find(|a| a.rule == rule).and_then(|a| a.pass_percent);
    ensure(rate(22) == rate(34), || format!("R22 {:?} vs R34 {:?}", rate(22), rate(34)))?;
    for rule in [24, 30, 47] {
        ensure(rate(rule) == Some(100.0), || format!("rule {rule} at {:?}", rate(rule)))?;
    }
    let expected_22 = 100.0 * (reports.len() - with_xor) as f64 / reports.len() as f64;
    ensure(rate(22).is_some_and(|r| (r - expected_22).abs() < 1e-9), || format!("R22 {:?} vs {expected_22}", rate(22)))?;
    Ok(format!("{} diagrams, R22 = R34 = {expected_22:.2}%", reports.len()))
}

// Brute-force GED over every partial injective node mapping.
fn oracle_class(kind: &NodeKind) -> String {
    match kind {
        NodeKind::StartEvent => "start".into(),
        NodeKind::EndEvent => "end".into(),
        NodeKind::Activity => "activity".into(),
        NodeKind::Gateway { gateway, .. } => format!("gateway {gateway:?}"),
    }
}

fn oracle_key(n: &GraphNode) -> (String, String) {
    let words: Vec<String> = n.label.split_whitespace().map(|w| w.to_lowercase()).collect();
    (oracle_class(&n.kind), words.join(" "))
}

fn multiplicities(g: &ProcessGraph) -> HashMap<(usize, usize), i64> {
    let pos: HashMap<&str, usize> = g.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let mut m = HashMap::new();
    for e in &g.edges {
        *m.entry((pos[e.source.as_str()], pos[e.target.as_str()])).or_insert(0) += 1;
    }
    m
}

fn brute_force_ged(a: &ProcessGraph, b: &ProcessGraph) -> i64 {
    let ma = multiplicities(a);
    let mb = multiplicities(b);
    let mut best = i64::MAX;
    let mut mapping = vec![None; a.nodes.len()];
    let mut used = vec![false; b.nodes.len()];
    #[allow(clippy::too_many_arguments)]
    fn walk(
        u: usize,
        a: &ProcessGraph,
        b: &ProcessGraph,
        ma: &HashMap<(usize, usize), i64>,
        mb: &HashMap<(usize, usize), i64>,
        mapping: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut i64,
    ) {
        if u == a.nodes.len() {
            let mut cost = 0;
            for (i, m) in mapping.iter().enumerate() {
                cost += match m {
                    Some(j) => i64::from(oracle_key(&a.nodes[i]) != oracle_key(&b.nodes[*j])),
                    None => 1,
                };
            }
            cost += used.iter().filter(|x| !**x).count() as i64;
            let mut covered = std::collections::HashSet::new();
            for i in 0..a.nodes.len() {
                for k in 0..a.nodes.len() {
                    let ea = ma.get(&(i, k)).copied().unwrap_or(0);
                    match (mapping[i], mapping[k]) {
                        (Some(x), Some(y)) => {
                            covered.insert((x, y));
                            cost += (ea - mb.get(&(x, y)).copied().unwrap_or(0)).abs();
                        }
                        _ => cost += ea,
                    }
                }
            }
            for (pair, eb) in mb {
                if !covered.contains(pair) {
                    cost += eb;
                }
            }
            *best = (*best).min(cost);
            return;
        }
        mapping[u] = None;
        walk(u + 1, a, b, ma, mb, mapping, used, best);
        for v in 0..b.nodes.len() {
            if !used[v] {
                used[v] = true;
                mapping[u] = Some(v);
                walk(u + 1, a, b, ma, mb, mapping, used, best);
                used[v] = false;
            }
        }
        mapping[u] = None;
    }
    walk(0, a, b, &ma, &mb, &mut mapping, &mut used, &mut best);
    best
}

fn random_small_graph(rng: &mut ChaCha8Rng) -> ProcessGraph {
    let kinds = [
        NodeKind::StartEvent,
        NodeKind::EndEvent,
        NodeKind::Activity,
        NodeKind::Activity,
        NodeKind::Gateway { gateway: GatewayType::And, role: GatewayRole::Split },
        NodeKind::Gateway { gateway: GatewayType::Xor, role: GatewayRole::Join },
    ];
    let labels = ["Check", " check  ", "Ship", "", "+"];
    let n = rng.random_range(0..=4);
    let nodes: Vec<GraphNode> = (0..n)
        .map(|i| GraphNode {
            id: format!("n{i}"),
            kind: kinds[rng.random_range(0..kinds.len())],
            label: labels[rng.random_range(0..labels.len())].to_string(),
        })
        .collect();
    let mut edges = Vec::new();
    if n > 0 {
        for _ in 0..rng.random_range(0..=6) {
            edges.push(Edge {
                source: format!("n{}", rng.random_range(0..n)),
                target: format!("n{}", rng.random_range(0..n)),
                label: None,
            });
        }
    }
    ProcessGraph { nodes, edges, orientation: None }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let budget = SearchBudget { max_expanded: 1_000_000, max_time: Duration::from_secs(10) };
    let mut nonzero = 0;
    for i in 0..50 {
        let a = random_small_graph(&mut rng);
        let b = random_small_graph(&mut rng);
        let got = ged(&a, &b, &budget);
        let want = brute_force_ged(&a, &b);
        ensure(got.exact, || format!("pair {i}: search not exact"))?;
        ensure(got.cost == want as f64, || format!("pair {i}: A* {} vs oracle {want}", got.cost))?;
        if want > 0 {
            nonzero += 1;
        }
    }
    let reference = parse_dot("digraph { a -> b }").map_err(|e| e.to_string())?;
    let generated = parse_dot("digraph { a b }").map_err(|e| e.to_string())?;
    let worked = r_ged(&reference, &generated, &SearchBudget::default());
    let shown = format!("{:.4}", worked.value);
    ensure(shown == "0.8000", || format!("worked example gave {shown}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("50 pairs match ({nonzero} non-zero), worked example {shown}, {elapsed:.2?}"))
}

fn brute_force_lcs(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
        if sub.len() <= best {
            continue;
        }
        let mut it = b.iter();
        if sub.iter().all(|t| it.any(|x| x == *t)) {
            best = sub.len();
        }
    }
    best
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let err = |e: bpmn_eval::text_metrics::EmptyReference| e.to_string();
    for m in 1..=25usize {
        let text: Vec<String> = (0..m).map(|i| format!("w{i}")).collect();
        let seq = tokenize(&text.join(" "));
        ensure(seq.len() == m, || format!("tokenizer gave {} tokens for {m}", seq.len()))?;
        let b = bleu(&seq, &seq).map_err(err)?;
        let r = rouge_l(&seq, &seq).map_err(err)?;
        let me = meteor(&seq, &seq).map_err(err)?;
        let want = 100.0 * (1.0 - 0.5 / (m as f64).powi(3));
        // BLEU-4 has no 4-grams to match below four tokens.
        if m >= 4 {
            ensure((b - 100.0).abs() < 1e-9, || format!("m={m}: BLEU {b}"))?;
        }
        ensure((r - 100.0).abs() < 1e-9, || format!("m={m}: ROUGE-L {r}"))?;
        ensure((me - want).abs() < 1e-6, || format!("m={m}: METEOR {me} vs {want}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let alphabet = ["a", "b", "c", "d"];
    let draw = |rng: &mut ChaCha8Rng, min: usize| -> Vec<String> {
        let n = rng.random_range(min..=8);
        (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())].to_string()).collect()
    };
    for i in 0..200 {
        let cand = draw(&mut rng, 0);
        let refr = draw(&mut rng, 1);
        let lcs = brute_force_lcs(&cand, &refr) as f64;
        let want = if lcs == 0.0 {
            0.0
        } else {
            let p = lcs / cand.len() as f64;
            let r = lcs / refr.len() as f64;
            100.0 * 2.0 * p * r / (p + r)
        };
        let got = rouge_l(&TokenSequence { tokens: cand.clone() }, &TokenSequence { tokens: refr.clone() }).map_err(err)?;
        ensure((got - want).abs() < 1e-9, || format!("sequence {i}: {cand:?} / {refr:?}: {got} vs {want}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("BLEU identity for m=4..25, ROUGE-L/METEOR for m=1..25, 200 LCS oracles, {elapsed:.2?}"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    for i in 0..200 {
        let (dot, _) = common::synthetic_diagram(&mut rng, 0.5);
        let Ok(g) = parse_dot(&dot) else { continue };
        let rt = round_trip_check(&g);
        ensure(rt.ok, || format!("diagram {i}: {:?}", rt.reason))?;
        checked += 1;
    }
    ensure(checked > 0, || "no parseable diagrams".into())?;
    let sample = parse_dot(SAMPLE_DIAGRAM).map_err(|e| e.to_string())?;
    let doc = to_bpmn_xml(&sample).map_err(|e| e.to_string())?;
    let parallel = doc.count(ElementKind::ParallelGateway);
    let tasks = doc.count(ElementKind::Task);
    ensure(parallel == 2 && tasks == 3, || format!("{parallel} parallel gateways, {tasks} tasks"))?;
    // Count the serialized elements as well as the index.
    let xml_parallel = doc.xml.matches("<parallelGateway").count() + doc.xml.matches(":parallelGateway ").count();
    let xml_tasks = doc.xml.matches("<task ").count() + doc.xml.matches(":task ").count();
    ensure(xml_parallel == 2 && xml_tasks == 3, || format!("XML has {xml_parallel} parallel gateways, {xml_tasks} tasks"))?;
    Ok(format!("{checked}/{checked} round trips, sample: 2 parallelGateway, 3 task"))
}

fn expected_bucket(nodes: usize) -> Difficulty {
    // Nearest-rank 33rd/67th percentiles of 1..=30 are 10 and 21.
    match nodes {
        0..=10 => Difficulty::Easy,
        11..=21 => Difficulty::Medium,
        _ => Difficulty::Hard,
    }
}

fn check_sample(records: &[EvalRecord]) -> Result<(), String> {
    ensure(records.len() == 180, || format!("{} records", records.len()))?;
    let mut cells: BTreeMap<(String, Difficulty), usize> = BTreeMap::new();
    for r in records {
        let nodes = parse_dot(&r.reference_dot).map_err(|e| e.to_string())?.nodes.len();
        *cells.entry((r.domain.clone(), expected_bucket(nodes))).or_insert(0) += 1;
    }
    let mut per_domain: BTreeMap<&str, usize> = BTreeMap::new();
    for ((domain, _), n) in &cells {
        ensure(*n == 4, || format!("{domain}: bucket holds {n}"))?;
        *per_domain.entry(domain).or_insert(0) += n;
    }
    ensure(per_domain.len() == 15, || format!("{} domains", per_domain.len()))?;
    ensure(per_domain.values().all(|n| *n == 12), || format!("per-domain counts {per_domain:?}"))
}

fn criterion_7() -> Outcome {
    let corpus = common::graded_corpus(15, 30);
    let first = stratified_sample(&corpus, 4, 7).map_err(|e| e.to_string())?;
    let again = stratified_sample(&corpus, 4, 7).map_err(|e| e.to_string())?;
    check_sample(&first.records)?;
    ensure(first.shortfalls.is_empty(), || format!("shortfalls {:?}", first.shortfalls))?;
    ensure(first.records == again.records, || "library sample not reproducible".into())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("corpus.jsonl");
    write_jsonl(&input, &corpus).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("sample{run}.jsonl"));
        let status = Command::new(env!("CARGO_BIN_EXE_bpmn-eval"))
            .args(["sample", "--per-bucket", "4", "--seed", "7", "-o"])
            .arg(&out)
            .arg(&input)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
        let records: Vec<EvalRecord> = read_jsonl(&out).map_err(|e| e.to_string())?;
        check_sample(&records)?;
        outputs.push(records);
    }
    ensure(outputs[0] == outputs[1], || "CLI sample not reproducible".into())?;
    ensure(outputs[0] == first.records, || "CLI and library samples differ".into())?;
    Ok("180 records, 12 per domain, 4 per tercile, library and CLI agree".into())
}

fn criterion_8() -> Outcome {
    let w = wilson_interval(179, 179, 0.95).map_err(|e| e.to_string())?;
    ensure(w.high == 1.0, || format!("Wilson high {}", w.high))?;
    let sf = chi_square_sf(2.0 * std::f64::consts::LN_2, 2);
    ensure((sf - 0.5).abs() < 1e-9, || format!("chi_square_sf {sf}"))?;
    let ci = bootstrap_ci(&[0.42; 60], 2000, 0.95, 8).map_err(|e| e.to_string())?;
    ensure(ci.low == ci.high && ci.low == ci.point, || format!("constant bootstrap {ci:?}"))?;
    let f = friedman_test(&[vec![1.0, 2.0, 3.0], vec![10.0, 20.0, 30.0]]).map_err(|e| e.to_string())?;
    ensure((f.chi2 - 4.0).abs() < 1e-12 && (f.w - 1.0).abs() < 1e-12, || format!("Friedman {f:?}"))?;
    Ok(format!("Wilson high 1.0, sf {sf:.12}, bootstrap [{0}, {0}], chi2 {1}, W {2}", ci.low, f.chi2, f.w))
}

fn main() {
    let criteria: [(u8, fn() -> Outcome); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let mut failed = 0;
    for (n, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {n}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {n}: FAIL ({why})");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
