#![allow(dead_code)]

use rand::Rng;

use bpmn_eval::dataset::EvalRecord;

const VERBS: [&str; 8] = ["Check", "Approve", "Record", "Notify", "Review", "Ship", "Archive", "Collect"];
const OBJECTS: [&str; 8] = ["order", "invoice", "claim", "customer", "payment", "request", "report", "stock"];
pub const DIRECTIONS: [&str; 4] = ["LR", "RL", "TB", "BT"];

/// Builds a well-formed block-structured process diagram in DOT.
pub struct DiagramBuilder {
    lines: Vec<String>,
    next: usize,
    pub xor_splits: usize,
}

impl DiagramBuilder {
    fn activity<R: Rng>(&mut self, rng: &mut R) -> String {
        let id = format!("T{}", self.next);
        self.next += 1;
        let label = format!(
            "{} {} {}",
            VERBS[rng.random_range(0..VERBS.len())],
            OBJECTS[rng.random_range(0..OBJECTS.len())],
            self.next
        );
        self.lines.push(format!("{id} [label=\"{label}\" shape=box]"));
        id
    }

    fn gateway(&mut self, kind: &str, role: &str) -> String {
        let id = format!("{kind}_{role}_{}", self.next);
        self.next += 1;
        let symbol = if kind == "AND" { "+" } else { "X" };
        self.lines.push(format!("{id} [label=\"{symbol}\" shape=diamond]"));
        id
    }

    fn edge(&mut self, a: &str, b: &str) {
        self.lines.push(format!("{a} -> {b}"));
    }

    /// Appends a block after `from` and returns its exit node.
    fn block<R: Rng>(&mut self, rng: &mut R, from: &str, depth: usize, xor_rate: f64) -> String {
        let roll: f64 = rng.random();
        if depth >= 2 || roll < 0.5 {
            let a = self.activity(rng);
            self.edge(from, &a);
            return a;
        }
        let kind = if rng.random_bool(xor_rate) { "XOR" } else { "AND" };
        if kind == "XOR" {
            self.xor_splits += 1;
        }
        let split = self.gateway(kind, "SPLIT");
        self.edge(from, &split);
        let join = self.gateway(kind, "JOIN");
        for _ in 0..rng.random_range(2..=3) {
            let mut tail = split.clone();
            for _ in 0..rng.random_range(1..=2) {
                tail = self.block(rng, &tail, depth + 1, xor_rate);
            }
            self.edge(&tail, &join);
        }
        join
    }
}

/// A random block-structured diagram and the number of XOR splits in it.
pub fn synthetic_diagram<R: Rng>(rng: &mut R, xor_rate: f64) -> (String, usize) {
    let mut b = DiagramBuilder { lines: Vec::new(), next: 0, xor_splits: 0 };
    let dir = DIRECTIONS[rng.random_range(0..DIRECTIONS.len())];
    b.lines.push(format!("graph [rankdir={dir}]"));
    b.lines.push("START_NODE [label=\"\" shape=circle width=0.3]".into());
    b.lines.push("END_NODE [label=\"\" shape=circle width=0.3]".into());
    let mut tail = "START_NODE".to_string();
    for _ in 0..rng.random_range(1..=4) {
        tail = b.block(rng, &tail, 0, xor_rate);
    }
    b.edge(&tail, "END_NODE");
    (format!("digraph process {{\n{}\n}}", b.lines.join("\n")), b.xor_splits)
}

/// A chain of `n` activities, used where only the node count matters.
pub fn chain(n: usize, tag: &str) -> String {
    let mut s = String::from("digraph g {\n");
    if n == 1 {
        s.push_str(&format!("\"{tag}0\"\n"));
    }
    for i in 1..n {
        s.push_str(&format!("\"{tag}{}\" -> \"{tag}{i}\"\n", i - 1));
    }
    s.push('}');
    s
}

/// `domains` x `per_domain` records whose node counts run 1..=per_domain.
pub fn graded_corpus(domains: usize, per_domain: usize) -> Vec<EvalRecord> {
    let mut out = Vec::new();
    for d in 0..domains {
        for k in 1..=per_domain {
            out.push(EvalRecord {
                id: format!("d{d:02}-{k:02}"),
                domain: format!("Domain {d:02}"),
                description: format!("A process with {k} steps. Each step follows the previous one."),
                reference_dot: chain(k, &format!("s{d}_")),
                candidate_dot: None,
            });
        }
    }
    out
}
