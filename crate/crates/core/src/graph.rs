//! Per-snapshot graph construction and structural measurements.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{Dataset, DailySnapshot, DynamicNetwork, ListKind, VideoId};
use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Directed graph over a fixed node set. Nodes are kept sorted by id and
/// addressed by index; adjacency lists are sorted and duplicate free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    nodes: Vec<VideoId>,
    index: HashMap<VideoId, usize>,
    out: Vec<Vec<usize>>,
    edge_count: usize,
}

impl DirectedGraph {
    /// Builds a graph; self-loops and duplicate edges are dropped, edges
    /// touching unknown nodes are an error.
    pub fn new(nodes: impl IntoIterator<Item = VideoId>, edges: impl IntoIterator<Item = (VideoId, VideoId)>) -> Result<Self> {
        let nodes: Vec<VideoId> = nodes.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let index: HashMap<VideoId, usize> = nodes.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let mut out = vec![Vec::new(); nodes.len()];
        for (u, v) in edges {
            let (Some(&a), Some(&b)) = (index.get(&u), index.get(&v)) else {
                return Err(Error::data(format!("edge {u}->{v} references a node outside the graph")));
            };
            if a != b {
                out[a].push(b);
            }
        }
        Ok(Self::from_adjacency(nodes, index, out))
    }

    /// Index-based constructor; `adj[u]` lists the heads of `u`'s out-edges.
    pub fn from_indices(n: usize, adj: Vec<Vec<usize>>) -> Self {
        let nodes: Vec<VideoId> = (0..n).map(|i| VideoId::new(format!("n{i:06}")).unwrap()).collect();
        let index = nodes.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let adj = adj.into_iter().enumerate().map(|(u, vs)| vs.into_iter().filter(|&v| v != u).collect()).collect();
        Self::from_adjacency(nodes, index, adj)
    }

    fn from_adjacency(nodes: Vec<VideoId>, index: HashMap<VideoId, usize>, mut out: Vec<Vec<usize>>) -> Self {
        for list in &mut out {
            list.sort_unstable();
            list.dedup();
        }
        let edge_count = out.iter().map(Vec::len).sum();
        DirectedGraph { nodes, index, out, edge_count }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn nodes(&self) -> &[VideoId] {
        &self.nodes
    }

    pub fn node_index(&self, id: &VideoId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn successors(&self, u: usize) -> &[usize] {
        &self.out[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out[u].binary_search(&v).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out.iter().enumerate().flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = (&VideoId, &VideoId)> + '_ {
        self.edges().map(|(u, v)| (&self.nodes[u], &self.nodes[v]))
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for (_, v) in self.edges() {
            deg[v] += 1;
        }
        deg
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.out.iter().map(Vec::len).collect()
    }

    fn reversed(&self) -> Vec<Vec<usize>> {
        let mut rev = vec![Vec::new(); self.nodes.len()];
        for (u, v) in self.edges() {
            rev[v].push(u);
        }
        rev
    }
}

/// Graph of one day's relevant lists: `u -> v` iff `v` sits at position
/// `<= cutoff` of `u`'s list and both ends are in the corpus.
pub fn build_graph(snapshot: &DailySnapshot, corpus: &BTreeSet<VideoId>, cutoff: u32) -> Result<DirectedGraph> {
    if cutoff == 0 {
        return Err(Error::data("cutoff must be >= 1"));
    }
    let relevant = snapshot.lists(ListKind::Relevant);
    if relevant.is_empty() && !snapshot.lists(ListKind::Recommended).is_empty() {
        return Err(Error::data(format!("snapshot {} has no relevant lists", snapshot.date())));
    }
    let edges = relevant
        .values()
        .filter(|list| corpus.contains(list.source()))
        .flat_map(|list| {
            list.entries()
                .iter()
                .filter(|e| e.position <= cutoff && corpus.contains(&e.target))
                .map(move |e| (list.source().clone(), e.target.clone()))
        });
    DirectedGraph::new(corpus.iter().cloned(), edges)
}

/// One graph per day of the window, in date order.
pub fn daily_graphs(net: &DynamicNetwork, corpus: &BTreeSet<VideoId>, cutoff: u32) -> Result<Vec<DirectedGraph>> {
    net.snapshots().par_iter().map(|s| build_graph(s, corpus, cutoff)).collect()
}

/// Strongly connected components (Tarjan, iterative). Components are
/// returned in reverse topological order of the condensation; members of
/// each component are sorted.
pub fn strongly_connected_components(g: &DirectedGraph) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = g.node_count();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0usize;
    // (node, next successor offset)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            let succ = g.successors(v);
            if *next < succ.len() {
                let w = succ[*next];
                *next += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }
    components
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    #[serde(rename = "LSCC")]
    Lscc,
    #[serde(rename = "IN")]
    In,
    #[serde(rename = "OUT")]
    Out,
    Tendrils,
    Disconnected,
}

impl Component {
    pub const ALL: [Component; 5] =
        [Component::Lscc, Component::In, Component::Out, Component::Tendrils, Component::Disconnected];

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Lscc => "LSCC",
            Component::In => "IN",
            Component::Out => "OUT",
            Component::Tendrils => "Tendrils",
            Component::Disconnected => "Disconnected",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Five-way bow-tie partition of a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct BowTie {
    /// Component of each node, indexed like the graph's nodes.
    pub assignment: Vec<Component>,
    pub sizes_by_node: [f64; 5],
    pub sizes_by_views: Option<[f64; 5]>,
}

impl BowTie {
    pub fn node_fraction(&self, c: Component) -> f64 {
        self.sizes_by_node[c.slot()]
    }

    pub fn view_fraction(&self, c: Component) -> Option<f64> {
        self.sizes_by_views.map(|s| s[c.slot()])
    }

    pub fn members(&self, c: Component) -> impl Iterator<Item = usize> + '_ {
        self.assignment.iter().enumerate().filter(move |(_, &x)| x == c).map(|(i, _)| i)
    }
}

fn reach(adj: &[Vec<usize>], seeds: impl IntoIterator<Item = usize>, mark: &mut [bool]) {
    let mut queue: Vec<usize> = seeds.into_iter().collect();
    for &s in &queue {
        mark[s] = true;
    }
    while let Some(u) = queue.pop() {
        for &v in &adj[u] {
            if !mark[v] {
                mark[v] = true;
                queue.push(v);
            }
        }
    }
}

/// Bow-tie decomposition around the largest SCC. Ties between equally
/// large SCCs go to the one holding the smallest node id. Nodes linked
/// from IN or into OUT (including IN-to-OUT tubes) count as Tendrils.
pub fn bowtie_decompose(g: &DirectedGraph) -> Result<BowTie> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::data("bow-tie of an empty graph"));
    }
    let sccs = strongly_connected_components(g);
    // Nodes are sorted by id, so the smallest member index is the smallest id.
    let core = sccs
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| b[0].cmp(&a[0])))
        .expect("non-empty graph has an SCC");

    let forward: Vec<Vec<usize>> = (0..n).map(|u| g.successors(u).to_vec()).collect();
    let backward = g.reversed();
    let mut from_core = vec![false; n];
    let mut to_core = vec![false; n];
    reach(&forward, core.iter().copied(), &mut from_core);
    reach(&backward, core.iter().copied(), &mut to_core);

    let mut assignment = vec![Component::Disconnected; n];
    for &c in core {
        assignment[c] = Component::Lscc;
    }
    for v in 0..n {
        if assignment[v] == Component::Lscc {
            continue;
        }
        if to_core[v] && !from_core[v] {
            assignment[v] = Component::In;
        } else if from_core[v] && !to_core[v] {
            assignment[v] = Component::Out;
        }
    }

    let rest = |a: &[Component], v: usize| a[v] == Component::Disconnected;
    let mut from_in = vec![false; n];
    let mut to_out = vec![false; n];
    reach(&forward, (0..n).filter(|&v| assignment[v] == Component::In), &mut from_in);
    reach(&backward, (0..n).filter(|&v| assignment[v] == Component::Out), &mut to_out);
    for v in 0..n {
        if rest(&assignment, v) && (from_in[v] || to_out[v]) {
            assignment[v] = Component::Tendrils;
        }
    }

    let mut counts = [0usize; 5];
    for c in &assignment {
        counts[c.slot()] += 1;
    }
    let sizes_by_node = counts.map(|c| c as f64 / n as f64);
    Ok(BowTie { assignment, sizes_by_node, sizes_by_views: None })
}

/// Fills view fractions from a per-node view lookup.
pub fn bowtie_attention_with(bt: &BowTie, g: &DirectedGraph, views: impl Fn(&VideoId) -> Option<f64>) -> Result<BowTie> {
    let mut sums = [0.0f64; 5];
    for (i, id) in g.nodes().iter().enumerate() {
        let v = views(id).ok_or_else(|| Error::data(format!("no views for {id}")))?;
        sums[bt.assignment[i].slot()] += v;
    }
    let total: f64 = sums.iter().sum();
    if total <= 0.0 {
        return Err(Error::data("total views are zero"));
    }
    Ok(BowTie { sizes_by_views: Some(sums.map(|s| s / total)), ..bt.clone() })
}

/// View fractions using each node's views on `date`.
pub fn bowtie_attention(bt: &BowTie, g: &DirectedGraph, dataset: &Dataset, date: chrono::NaiveDate) -> Result<BowTie> {
    let day = dataset
        .window()
        .index_of(date)
        .ok_or_else(|| Error::data(format!("{date} outside the observation window")))?;
    bowtie_attention_with(bt, g, |id| dataset.views(id).map(|v| v[day] as f64))
}

/// `(k, P(indegree >= k))` for every k from 0 to the maximum indegree.
pub fn indegree_ccdf(g: &DirectedGraph) -> Vec<(usize, f64)> {
    let deg = g.in_degrees();
    let n = deg.len();
    if n == 0 {
        return vec![(0, 1.0)];
    }
    let max = deg.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0usize; max + 1];
    for d in deg {
        hist[d] += 1;
    }
    let mut at_least = n;
    let mut points = Vec::with_capacity(max + 1);
    for (k, count) in hist.iter().enumerate() {
        points.push((k, at_least as f64 / n as f64));
        at_least -= count;
    }
    points
}

/// Quartile group (0 = least viewed) of every node; ties broken by id so
/// group sizes differ by at most one.
pub fn view_quartiles(g: &DirectedGraph, views: impl Fn(&VideoId) -> f64) -> Vec<usize> {
    let n = g.node_count();
    let mut order: Vec<(f64, usize)> = g.nodes().iter().enumerate().map(|(i, id)| (views(id), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut group = vec![0; n];
    for (rank, (_, i)) in order.into_iter().enumerate() {
        group[i] = rank * 4 / n;
    }
    group
}

/// Edge counts between view-quartile groups; `flow[i][j]` counts edges
/// from group i to group j.
pub fn view_group_flow(g: &DirectedGraph, views: impl Fn(&VideoId) -> f64) -> Result<[[u64; 4]; 4]> {
    if g.node_count() < 4 {
        return Err(Error::data("group flow needs at least 4 nodes"));
    }
    let group = view_quartiles(g, views);
    let mut flow = [[0u64; 4]; 4];
    for (u, v) in g.edges() {
        flow[group[u]][group[v]] += 1;
    }
    Ok(flow)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChurnRow {
    pub indegree: usize,
    pub count: usize,
    pub p10: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
}

impl ChurnRow {
    fn from_ratios(indegree: usize, mut ratios: Vec<f64>) -> Self {
        ratios.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&ratios, p);
        ChurnRow { indegree, count: ratios.len(), p10: q(0.10), p25: q(0.25), p50: q(0.50), p75: q(0.75), p90: q(0.90) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChurnTable {
    /// One row per starting indegree.
    pub rows: Vec<ChurnRow>,
    /// All ratios pooled; `indegree` holds the minimum indegree used.
    pub pooled: Option<ChurnRow>,
}

/// Day-over-day indegree change ratios `(d[t+1] - d[t]) / d[t]` for every
/// node with `d[t] >= min_indegree`, grouped by `d[t]`.
pub fn indegree_change_ratios(
    net: &DynamicNetwork,
    corpus: &BTreeSet<VideoId>,
    cutoff: u32,
    min_indegree: usize,
) -> Result<ChurnTable> {
    if net.len() < 2 {
        return Err(Error::data("indegree change needs at least two days"));
    }
    let min_indegree = min_indegree.max(1);
    let degrees: Vec<Vec<usize>> = daily_graphs(net, corpus, cutoff)?.iter().map(DirectedGraph::in_degrees).collect();
    let mut by_degree: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for pair in degrees.windows(2) {
        for (&d0, &d1) in pair[0].iter().zip(&pair[1]) {
            if d0 >= min_indegree {
                by_degree.entry(d0).or_default().push((d1 as f64 - d0 as f64) / d0 as f64);
            }
        }
    }
    let pooled_ratios: Vec<f64> = by_degree.values().flatten().copied().collect();
    let pooled = (!pooled_ratios.is_empty()).then(|| ChurnRow::from_ratios(min_indegree, pooled_ratios));
    let rows = by_degree.into_iter().map(|(d, r)| ChurnRow::from_ratios(d, r)).collect();
    Ok(ChurnTable { rows, pooled })
}

/// Number of days on which each ordered pair is linked.
pub fn link_day_counts(net: &DynamicNetwork, corpus: &BTreeSet<VideoId>, cutoff: u32) -> Result<BTreeMap<(VideoId, VideoId), usize>> {
    let mut counts = BTreeMap::new();
    for g in daily_graphs(net, corpus, cutoff)? {
        for (u, v) in g.edge_ids() {
            *counts.entry((u.clone(), v.clone())).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// Histogram: link frequency (days present) -> number of pairs.
pub fn link_frequency_histogram(net: &DynamicNetwork, corpus: &BTreeSet<VideoId>, cutoff: u32) -> Result<BTreeMap<usize, u64>> {
    let mut hist = BTreeMap::new();
    for freq in link_day_counts(net, corpus, cutoff)?.into_values() {
        *hist.entry(freq).or_insert(0) += 1;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{parse_snapshots, ListEntry, RankedList};

    fn id(s: &str) -> VideoId {
        VideoId::new(s).unwrap()
    }

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> DirectedGraph {
        DirectedGraph::new(nodes.iter().map(|n| id(n)), edges.iter().map(|(a, b)| (id(a), id(b)))).unwrap()
    }

    fn named_sccs(g: &DirectedGraph) -> BTreeSet<Vec<String>> {
        strongly_connected_components(g)
            .into_iter()
            .map(|c| c.into_iter().map(|i| g.nodes()[i].to_string()).collect())
            .collect()
    }

    #[test]
    fn build_graph_filters_external_and_cutoff() {
        let date = chrono::NaiveDate::from_ymd_opt(2018, 9, 1).unwrap();
        let mut snap = DailySnapshot::new(date);
        let entries = vec![
            ListEntry { target: id("b"), position: 1 },
            ListEntry { target: id("x"), position: 2 },
            ListEntry { target: id("c"), position: 3 },
        ];
        snap.insert(RankedList::new(id("a"), ListKind::Relevant, entries).unwrap()).unwrap();
        let corpus: BTreeSet<VideoId> = ["a", "b", "c"].iter().map(|s| id(s)).collect();
        let g = build_graph(&snap, &corpus, 2).unwrap();
        let edges: Vec<_> = g.edge_ids().map(|(u, v)| (u.to_string(), v.to_string())).collect();
        assert_eq!(edges, vec![("a".to_string(), "b".to_string())]);
        assert_eq!(build_graph(&snap, &corpus, 3).unwrap().edge_count(), 2);

        let empty = build_graph(&DailySnapshot::new(date), &corpus, 15).unwrap();
        assert_eq!((empty.node_count(), empty.edge_count()), (3, 0));
        assert!(build_graph(&snap, &corpus, 0).is_err());
    }

    #[test]
    fn missing_relevant_lists() {
        let net = parse_snapshots("date,source_id,target_id,position,list_kind\n2018-09-01,a,b,1,recommended\n".as_bytes()).unwrap();
        let corpus: BTreeSet<VideoId> = [id("a"), id("b")].into();
        assert!(build_graph(&net.snapshots()[0], &corpus, 15).is_err());
    }

    #[test]
    fn scc_cycle_and_chain() {
        let cyc = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c"), ("c", "a")]);
        assert_eq!(named_sccs(&cyc), [vec!["a".to_string(), "b".into(), "c".into()]].into());
        let chain = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        assert_eq!(strongly_connected_components(&chain).len(), 3);
    }

    #[test]
    fn scc_deep_chain_does_not_overflow() {
        let n = 200_000;
        let adj = (0..n).map(|i| if i + 1 < n { vec![i + 1] } else { vec![0] }).collect();
        let g = DirectedGraph::from_indices(n, adj);
        assert_eq!(strongly_connected_components(&g).len(), 1);
    }

    #[test]
    fn bowtie_small() {
        let g = graph(&["a", "b", "c", "d"], &[("a", "b"), ("b", "a"), ("c", "a"), ("b", "d")]);
        let bt = bowtie_decompose(&g).unwrap();
        assert_eq!(bt.assignment, vec![Component::Lscc, Component::Lscc, Component::In, Component::Out]);
        assert_eq!(bt.sizes_by_node, [0.5, 0.25, 0.25, 0.0, 0.0]);

        let two = graph(&["a", "b"], &[("a", "b"), ("b", "a")]);
        assert_eq!(bowtie_decompose(&two).unwrap().node_fraction(Component::Lscc), 1.0);
        assert!(bowtie_decompose(&graph(&[], &[])).is_err());
    }

    #[test]
    fn bowtie_tendrils_tubes_and_ties() {
        // core {a,b}; in c; out d; e hangs off IN; f feeds OUT; t is an IN->OUT tube; z isolated
        let g = graph(
            &["a", "b", "c", "d", "e", "f", "t", "z"],
            &[("a", "b"), ("b", "a"), ("c", "a"), ("b", "d"), ("c", "e"), ("f", "d"), ("c", "t"), ("t", "d")],
        );
        let bt = bowtie_decompose(&g).unwrap();
        use Component::*;
        assert_eq!(bt.assignment, vec![Lscc, Lscc, In, Out, Tendrils, Tendrils, Tendrils, Disconnected]);

        // two 2-cycles: the one holding the smallest id wins
        let tie = graph(&["a", "b", "c", "d"], &[("c", "d"), ("d", "c"), ("a", "b"), ("b", "a")]);
        let bt = bowtie_decompose(&tie).unwrap();
        assert_eq!(bt.assignment[0], Lscc);
        assert_eq!(bt.assignment[2], Disconnected);
    }

    #[test]
    fn attention_fractions() {
        let g = graph(&["a", "b", "c", "d"], &[("a", "b"), ("b", "a"), ("c", "a"), ("b", "d")]);
        let bt = bowtie_decompose(&g).unwrap();
        let equal = bowtie_attention_with(&bt, &g, |_| Some(7.0)).unwrap();
        assert_eq!(equal.sizes_by_views.unwrap(), bt.sizes_by_node);
        let lscc_only = bowtie_attention_with(&bt, &g, |v| Some(if v.as_str() == "a" { 10.0 } else { 0.0 })).unwrap();
        assert_eq!(lscc_only.view_fraction(Component::Lscc), Some(1.0));
        assert!(bowtie_attention_with(&bt, &g, |_| Some(0.0)).is_err());
    }

    #[test]
    fn ccdf_star_and_edgeless() {
        let star = graph(&["h", "a", "b", "c"], &[("a", "h"), ("b", "h"), ("c", "h")]);
        assert_eq!(indegree_ccdf(&star), vec![(0, 1.0), (1, 0.25), (2, 0.25), (3, 0.25)]);
        assert_eq!(indegree_ccdf(&graph(&["a", "b"], &[])), vec![(0, 1.0)]);
    }

    #[test]
    fn group_flow_into_top() {
        let g = graph(&["a", "b", "c", "d"], &[("a", "d"), ("b", "d"), ("c", "d")]);
        let views = |v: &VideoId| match v.as_str() {
            "a" => 1.0,
            "b" => 2.0,
            "c" => 3.0,
            _ => 4.0,
        };
        let flow = view_group_flow(&g, views).unwrap();
        assert_eq!(flow.iter().map(|r| r[3]).sum::<u64>(), 3);
        assert_eq!(flow.iter().flatten().sum::<u64>(), 3);
        let none = view_group_flow(&graph(&["a", "b", "c", "d"], &[]), views).unwrap();
        assert_eq!(none, [[0; 4]; 4]);
    }

    #[test]
    fn quartile_ties_by_id() {
        let g = graph(&["a", "b", "c", "d", "e", "f", "g", "h"], &[]);
        assert_eq!(view_quartiles(&g, |_| 1.0), vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }

    fn net_from(rows: &[(&str, &str, &str, u32)]) -> DynamicNetwork {
        let mut csv = String::from("date,source_id,target_id,position,list_kind\n");
        for (d, s, t, p) in rows {
            csv.push_str(&format!("{d},{s},{t},{p},relevant\n"));
        }
        parse_snapshots(csv.as_bytes()).unwrap()
    }

    #[test]
    fn change_ratios() {
        let mut rows = Vec::new();
        let sources: Vec<String> = (0..100).map(|i| format!("s{i:03}")).collect();
        for s in &sources {
            rows.push(("2018-09-01", s.as_str(), "hub", 1));
            rows.push(("2018-09-02", s.as_str(), "hub", 1));
        }
        rows.push(("2018-09-03", "s000", "s001", 1));
        let net = net_from(&rows);
        let mut corpus: BTreeSet<VideoId> = sources.iter().map(|s| id(s)).collect();
        corpus.insert(id("hub"));
        let table = indegree_change_ratios(&net, &corpus, 15, 20).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!((row.indegree, row.count), (100, 2));
        // day1->day2: 0, day2->day3: -1
        assert!((row.p10 + 0.9).abs() < 1e-12);
        assert!((row.p90 + 0.1).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[-1.0, 0.0], 1.0), 0.0);
    }

    #[test]
    fn link_frequency() {
        let net = net_from(&[
            ("2018-09-01", "a", "b", 1),
            ("2018-09-02", "a", "b", 1),
            ("2018-09-02", "b", "a", 1),
            ("2018-09-03", "a", "b", 1),
        ]);
        let corpus: BTreeSet<VideoId> = [id("a"), id("b")].into();
        let hist = link_frequency_histogram(&net, &corpus, 15).unwrap();
        assert_eq!(hist, BTreeMap::from([(1, 1), (3, 1)]));
        let total: u64 = hist.iter().map(|(f, c)| *f as u64 * c).sum();
        assert_eq!(total, 4);
    }
}
