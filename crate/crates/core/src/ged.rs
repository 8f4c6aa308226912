//! Graph edit distance between process graphs and the relative score
//! derived from it.
//!
//! Costs are uniform: inserting, deleting or relabelling a node costs 1, and
//! inserting or deleting an edge costs 1. A node substitutes for free only
//! when both kind and normalised label agree. Edge operations are induced by
//! the node mapping, so a complete mapping determines the whole edit path.
//!
//! The exact search is A* over partial node mappings. When the search budget
//! runs out the best mapping found by a bipartite assignment (refined by
//! local search) is returned instead, flagged as an upper bound.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::graph::{NodeKind, ProcessGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_expanded: usize,
    pub max_time: Duration,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_expanded: 10_000, max_time: Duration::from_secs(2) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GedResult {
    pub cost: f64,
    /// False when `cost` is an upper bound from the fallback.
    pub exact: bool,
    pub expanded_states: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RGedScore {
    pub value: f64,
    pub percent: f64,
    pub exact: bool,
}

impl RGedScore {
    pub fn from_value(value: f64, exact: bool) -> Self {
        let value = value.clamp(0.0, 1.0);
        RGedScore { value, percent: 100.0 * value, exact }
    }
}

/// Lowercase, trim and collapse internal whitespace.
pub fn normalize_label(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Node class used for substitution: gateway role is left out because it is
/// a function of the edges, which are costed separately.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum NodeClass {
    Start,
    End,
    Activity,
    Gateway(crate::graph::GatewayType),
}

/// Compact integer form of a graph used by the search.
#[derive(Debug, Clone)]
pub(crate) struct IndexedGraph {
    labels: Vec<usize>,
    /// Edge multiplicities, row-major `n * n`.
    adj: Vec<u32>,
    n: usize,
    edge_count: usize,
}

impl IndexedGraph {
    fn edges(&self, u: usize, v: usize) -> u32 {
        self.adj[u * self.n + v]
    }
}

fn index_pair(a: &ProcessGraph, b: &ProcessGraph) -> (IndexedGraph, IndexedGraph) {
    let mut interner: HashMap<(NodeClass, String), usize> = HashMap::new();
    let mut build = |g: &ProcessGraph| {
        let labels = g
            .nodes
            .iter()
            .map(|n| {
                let class = match n.kind {
                    NodeKind::StartEvent => NodeClass::Start,
                    NodeKind::EndEvent => NodeClass::End,
                    NodeKind::Activity => NodeClass::Activity,
                    NodeKind::Gateway { gateway, .. } => NodeClass::Gateway(gateway),
                };
                let key = (class, normalize_label(&n.label));
                let next = interner.len();
                *interner.entry(key).or_insert(next)
            })
            .collect();
        let ids: HashMap<&str, usize> = g.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        let n = g.nodes.len();
        let mut adj = vec![0u32; n * n];
        let mut edge_count = 0;
        for e in &g.edges {
            if let (Some(&s), Some(&t)) = (ids.get(e.source.as_str()), ids.get(e.target.as_str())) {
                adj[s * n + t] += 1;
                edge_count += 1;
            }
        }
        IndexedGraph { labels, adj, n, edge_count }
    };
    let ia = build(a);
    let ib = build(b);
    (ia, ib)
}

/// Cost of the edit path induced by a complete node mapping.
/// `mapping[u]` is the image of `u` in `b`, or `None` for a deletion.
pub(crate) fn mapping_cost(a: &IndexedGraph, b: &IndexedGraph, mapping: &[Option<usize>]) -> u64 {
    let mut cost = 0u64;
    let mut used = vec![false; b.n];
    for (u, m) in mapping.iter().enumerate() {
        match m {
            Some(v) => {
                used[*v] = true;
                if a.labels[u] != b.labels[*v] {
                    cost += 1;
                }
            }
            None => cost += 1,
        }
    }
    cost += used.iter().filter(|u| !**u).count() as u64;
    let mut covered = 0u64;
    for u in 0..a.n {
        for w in 0..a.n {
            let ea = a.edges(u, w) as u64;
            match (mapping[u], mapping[w]) {
                (Some(x), Some(y)) => {
                    let eb = b.edges(x, y) as u64;
                    cost += ea.abs_diff(eb);
                    covered += eb;
                }
                _ => cost += ea,
            }
        }
    }
    cost + (b.edge_count as u64 - covered)
}

#[derive(Clone)]
struct State {
    /// Images of the first `depth` nodes in processing order; `usize::MAX`
    /// marks deletion.
    assigned: Vec<usize>,
    g: u64,
    f: u64,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for State {}
impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for State {
    // Min-heap on f, deeper states first on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .cmp(&self.f)
            .then_with(|| self.assigned.len().cmp(&other.assigned.len()))
    }
}

const DELETED: usize = usize::MAX;

struct Search<'a> {
    a: &'a IndexedGraph,
    b: &'a IndexedGraph,
    order: Vec<usize>,
    /// Edges of `a` with at least one endpoint at or after position `k` of `order`.
    a_remaining_edges: Vec<u64>,
}

impl<'a> Search<'a> {
    fn new(a: &'a IndexedGraph, b: &'a IndexedGraph) -> Self {
        // High-degree nodes first so edge costs surface early.
        let mut order: Vec<usize> = (0..a.n).collect();
        let degree = |u: usize| (0..a.n).map(|w| a.edges(u, w) + a.edges(w, u)).sum::<u32>();
        order.sort_by_key(|&u| (std::cmp::Reverse(degree(u)), u));
        let mut position = vec![0; a.n];
        for (k, &u) in order.iter().enumerate() {
            position[u] = k;
        }
        let mut a_remaining_edges = vec![0u64; a.n + 1];
        for u in 0..a.n {
            for w in 0..a.n {
                let e = a.edges(u, w) as u64;
                if e > 0 {
                    // Fully processed once both endpoints are assigned.
                    let done_at = position[u].max(position[w]);
                    for slot in a_remaining_edges.iter_mut().take(done_at + 1) {
                        *slot += e;
                    }
                }
            }
        }
        Search { a, b, order, a_remaining_edges }
    }

    /// Cost added by assigning the node at processing position `depth`.
    fn step_cost(&self, assigned: &[usize], image: usize) -> u64 {
        let (a, b) = (self.a, self.b);
        let depth = assigned.len();
        let u = self.order[depth];
        let mut cost = 0u64;
        if image == DELETED {
            cost += 1;
            cost += a.edges(u, u) as u64;
            for k in 0..depth {
                let w = self.order[k];
                cost += (a.edges(u, w) + a.edges(w, u)) as u64;
            }
            return cost;
        }
        if a.labels[u] != b.labels[image] {
            cost += 1;
        }
        cost += (a.edges(u, u) as u64).abs_diff(b.edges(image, image) as u64);
        for k in 0..depth {
            let w = self.order[k];
            let x = assigned[k];
            if x == DELETED {
                cost += (a.edges(u, w) + a.edges(w, u)) as u64;
            } else {
                cost += (a.edges(u, w) as u64).abs_diff(b.edges(image, x) as u64);
                cost += (a.edges(w, u) as u64).abs_diff(b.edges(x, image) as u64);
            }
        }
        cost
    }

    /// Cost of inserting every unused `b` node and the edges touching them.
    fn completion_cost(&self, assigned: &[usize]) -> u64 {
        let b = self.b;
        let mut used = vec![false; b.n];
        for &x in assigned {
            if x != DELETED {
                used[x] = true;
            }
        }
        let mut cost = used.iter().filter(|u| !**u).count() as u64;
        for x in 0..b.n {
            for y in 0..b.n {
                if !used[x] || !used[y] {
                    cost += b.edges(x, y) as u64;
                }
            }
        }
        cost
    }

    /// Admissible lower bound on the cost still to pay.
    fn heuristic(&self, assigned: &[usize]) -> u64 {
        let (a, b) = (self.a, self.b);
        let depth = assigned.len();
        let mut used = vec![false; b.n];
        for &x in assigned {
            if x != DELETED {
                used[x] = true;
            }
        }
        let mut label_counts: HashMap<usize, (u64, u64)> = HashMap::new();
        for &u in &self.order[depth..] {
            label_counts.entry(a.labels[u]).or_default().0 += 1;
        }
        let mut free_b = 0u64;
        for x in 0..b.n {
            if !used[x] {
                free_b += 1;
                label_counts.entry(b.labels[x]).or_default().1 += 1;
            }
        }
        let left_a = (a.n - depth) as u64;
        let common: u64 = label_counts.values().map(|(p, q)| *p.min(q)).sum();
        let node_bound = left_a.max(free_b) - common;
        let mut b_remaining = 0u64;
        for x in 0..b.n {
            for y in 0..b.n {
                if !used[x] || !used[y] {
                    b_remaining += b.edges(x, y) as u64;
                }
            }
        }
        node_bound + self.a_remaining_edges[depth].abs_diff(b_remaining)
    }

    /// Returns `(cost, expanded, exact)`.
    fn run(&self, budget: &SearchBudget, upper_bound: u64) -> (u64, usize, bool) {
        let start = Instant::now();
        let mut heap = BinaryHeap::new();
        let h0 = self.heuristic(&[]);
        heap.push(State { assigned: Vec::new(), g: 0, f: h0 });
        let mut expanded = 0usize;
        while let Some(state) = heap.pop() {
            if state.f > upper_bound {
                // Nothing cheaper than the known mapping remains.
                return (upper_bound, expanded, true);
            }
            let depth = state.assigned.len();
            if depth == self.a.n {
                // Goal states carry their completion cost in g.
                return (state.g, expanded, true);
            }
            expanded += 1;
            if expanded > budget.max_expanded
                || (expanded.is_multiple_of(128) && start.elapsed() > budget.max_time)
            {
                return (upper_bound, expanded, false);
            }
            let mut used = vec![false; self.b.n];
            for &x in &state.assigned {
                if x != DELETED {
                    used[x] = true;
                }
            }
            let candidates = (0..self.b.n).filter(|x| !used[*x]).chain(std::iter::once(DELETED));
            for image in candidates {
                let mut assigned = state.assigned.clone();
                let g = state.g + self.step_cost(&assigned, image);
                assigned.push(image);
                let (g, f) = if assigned.len() == self.a.n {
                    let g = g + self.completion_cost(&assigned);
                    (g, g)
                } else {
                    (g, g + self.heuristic(&assigned))
                };
                if f <= upper_bound {
                    heap.push(State { assigned, g, f });
                }
            }
        }
        (upper_bound, expanded, true)
    }
}

/// Hungarian algorithm on a square cost matrix; returns the column assigned
/// to each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Bipartite upper bound: node substitution costs plus half the degree
/// mismatch, solved as an assignment problem, then improved by pairwise
/// swaps of the resulting mapping.
pub(crate) fn bipartite_mapping(a: &IndexedGraph, b: &IndexedGraph) -> Vec<Option<usize>> {
    let (n, m) = (a.n, b.n);
    let size = n + m;
    if n == 0 {
        return Vec::new();
    }
    let degree = |g: &IndexedGraph, u: usize| -> (f64, f64) {
        let out: u32 = (0..g.n).map(|w| g.edges(u, w)).sum();
        let inn: u32 = (0..g.n).map(|w| g.edges(w, u)).sum();
        (inn as f64, out as f64)
    };
    let big = 1e9;
    let mut cost = vec![vec![0.0; size]; size];
    for i in 0..size {
        for j in 0..size {
            cost[i][j] = match (i < n, j < m) {
                (true, true) => {
                    let (ai, ao) = degree(a, i);
                    let (bi, bo) = degree(b, j);
                    let sub = if a.labels[i] == b.labels[j] { 0.0 } else { 1.0 };
                    sub + 0.5 * ((ai - bi).abs() + (ao - bo).abs())
                }
                (true, false) => {
                    if j - m == i {
                        let (ai, ao) = degree(a, i);
                        1.0 + 0.5 * (ai + ao)
                    } else {
                        big
                    }
                }
                (false, true) => {
                    if i - n == j {
                        let (bi, bo) = degree(b, j);
                        1.0 + 0.5 * (bi + bo)
                    } else {
                        big
                    }
                }
                (false, false) => 0.0,
            };
        }
    }
    let assignment = hungarian(&cost);
    let mut mapping: Vec<Option<usize>> = (0..n).map(|i| (assignment[i] < m).then_some(assignment[i])).collect();
    improve_by_swaps(a, b, &mut mapping);
    mapping
}

fn improve_by_swaps(a: &IndexedGraph, b: &IndexedGraph, mapping: &mut [Option<usize>]) {
    let mut best = mapping_cost(a, b, mapping);
    for _ in 0..20 {
        let mut improved = false;
        for i in 0..a.n {
            // Swap images with another node.
            for j in (i + 1)..a.n {
                mapping.swap(i, j);
                let c = mapping_cost(a, b, mapping);
                if c < best {
                    best = c;
                    improved = true;
                } else {
                    mapping.swap(i, j);
                }
            }
            // Move to an unused b node, or delete.
            let mut used = vec![false; b.n];
            for x in mapping.iter().flatten() {
                used[*x] = true;
            }
            let options: Vec<Option<usize>> =
                (0..b.n).filter(|x| !used[*x]).map(Some).chain(std::iter::once(None)).collect();
            for opt in options {
                let old = mapping[i];
                if old == opt {
                    continue;
                }
                mapping[i] = opt;
                let c = mapping_cost(a, b, mapping);
                if c < best {
                    best = c;
                    improved = true;
                    break;
                }
                mapping[i] = old;
            }
        }
        if !improved {
            break;
        }
    }
}

/// Graph edit distance under the uniform cost model.
pub fn ged(a: &ProcessGraph, b: &ProcessGraph, budget: &SearchBudget) -> GedResult {
    let (ia, ib) = index_pair(a, b);
    let trivial = (ia.n + ia.edge_count + ib.n + ib.edge_count) as u64;
    if ia.n == 0 || ib.n == 0 {
        return GedResult { cost: trivial as f64, exact: true, expanded_states: 0 };
    }
    let mapping = bipartite_mapping(&ia, &ib);
    let upper = mapping_cost(&ia, &ib, &mapping).min(trivial);
    let search = Search::new(&ia, &ib);
    let (cost, expanded, exact) = search.run(budget, upper);
    GedResult { cost: cost as f64, exact, expanded_states: expanded }
}

/// Distance to the empty graph: every node and edge deleted.
pub fn ged_to_empty(g: &ProcessGraph) -> f64 {
    (g.nodes.len() + g.edges.len()) as f64
}

/// `1 - GED(ref, gen) / (GED(ref, ∅) + GED(gen, ∅))`, with two empty graphs
/// scoring 1.
pub fn r_ged(reference: &ProcessGraph, generated: &ProcessGraph, budget: &SearchBudget) -> RGedScore {
    let denom = ged_to_empty(reference) + ged_to_empty(generated);
    if denom == 0.0 {
        return RGedScore::from_value(1.0, true);
    }
    let d = ged(reference, generated, budget);
    RGedScore::from_value(1.0 - d.cost / denom, d.exact)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graph::parse_dot;

    fn g(dot: &str) -> ProcessGraph {
        parse_dot(dot).unwrap()
    }

    #[test]
    fn identical_graphs() {
        let s = g(crate::harness::prompt::SAMPLE_DIAGRAM);
        let r = ged(&s, &s, &SearchBudget::default());
        assert_eq!(r.cost, 0.0);
        assert!(r.exact);
        assert_eq!(r_ged(&s, &s, &SearchBudget::default()).percent, 100.0);
    }

    #[test]
    fn against_empty() {
        let s = g(crate::harness::prompt::SAMPLE_DIAGRAM);
        let e = ProcessGraph::default();
        assert_eq!(ged(&s, &e, &SearchBudget::default()).cost, 14.0);
        assert_eq!(ged(&e, &s, &SearchBudget::default()).cost, 14.0);
        assert_eq!(r_ged(&s, &e, &SearchBudget::default()).value, 0.0);
        assert_eq!(r_ged(&e, &e, &SearchBudget::default()).value, 1.0);
    }

    #[test]
    fn relabelled_target() {
        let r = ged(&g("digraph { a -> b }"), &g("digraph { a -> c }"), &SearchBudget::default());
        assert_eq!(r.cost, 1.0);
    }

    #[test]
    fn missing_edge_worked_example() {
        let s = r_ged(&g("digraph { a -> b }"), &g("digraph { a b }"), &SearchBudget::default());
        assert!((s.value - 0.8).abs() < 1e-12);
        assert!((s.percent - 80.0).abs() < 1e-9);
    }

    #[test]
    fn kinds_block_free_substitution() {
        let a = g("digraph { x [label=\"Review\"] }");
        let b = g("digraph { x [label=\"Review\" shape=diamond] }");
        assert_eq!(ged(&a, &b, &SearchBudget::default()).cost, 1.0);
    }

    #[test]
    fn label_normalisation() {
        assert_eq!(normalize_label("  Review   the\tClaim "), "review the claim");
        let a = g("digraph { x [label=\"Review  Claim\"] }");
        let b = g("digraph { y [label=\"review claim\"] }");
        assert_eq!(ged(&a, &b, &SearchBudget::default()).cost, 0.0);
    }

    #[test]
    fn tiny_budget_degrades_to_bound() {
        let a = g("digraph { a -> b -> c -> d -> e; b -> d; a -> e }");
        let b = g("digraph { a -> c -> b -> e -> d; c -> e; x -> a }");
        let exact = ged(&a, &b, &SearchBudget::default());
        assert!(exact.exact);
        let bound = ged(&a, &b, &SearchBudget { max_expanded: 1, max_time: Duration::from_secs(1) });
        assert!(bound.cost >= exact.cost);
        if !bound.exact {
            assert_eq!(bound.expanded_states, 2);
        }
    }

    #[test]
    fn hungarian_small() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&c);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        assert_eq!(total, 5.0);
    }
}
