//! Measurements on generated datasets checked against independent
//! recomputation from the exported CSV files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use aflow::data_model::{Dataset, VideoId};
use aflow::datagen::{generate, GenConfig, Generated, Topology};
use aflow::graph::{build_graph, indegree_ccdf, indegree_change_ratios, link_day_counts, view_group_flow, view_quartiles};
use aflow::persistence::{apply_view_filters, extract_persistent_network, homophily_stats};
use statrs::distribution::{Binomial, Discrete, DiscreteCDF};

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn written(cfg: &GenConfig) -> (tempfile::TempDir, Generated, Dataset) {
    let g = generate(cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    g.write_dir(dir.path()).unwrap();
    let ds = Dataset::load_dir(dir.path()).unwrap();
    (dir, g, ds)
}

#[test]
fn snapshot_rows_round_trip() {
    let cfg = GenConfig { n_videos: 2, n_artists: 1, recommended_lists: false, topology: Topology::Random { edge_density: 0.0 }, ..GenConfig::default() };
    let (dir, _, ds) = written(&cfg);
    let relevant = rows(&dir.path().join("snapshots.csv"));
    assert_eq!(relevant.len(), 63 * 2 * 15);
    assert_eq!(ds.network().len(), 63);
    for snap in ds.network().snapshots() {
        let lists = snap.lists(aflow::data_model::ListKind::Relevant);
        assert_eq!(lists.len(), 2);
        assert!(lists.values().all(|l| l.entries().len() == 15));
    }
}

#[test]
fn views_round_trip_and_clean_validation() {
    let (dir, g, ds) = written(&GenConfig { n_videos: 60, ..GenConfig::default() });
    assert!(ds.summary().warnings.is_empty(), "{:?}", ds.summary().warnings);
    let mut by_id: BTreeMap<String, Vec<(String, u64)>> = BTreeMap::new();
    for r in rows(&dir.path().join("views.csv")) {
        by_id.entry(r[0].to_string()).or_default().push((r[1].to_string(), r[2].parse().unwrap()));
    }
    for s in &g.views {
        let mut raw = by_id.remove(s.id.as_str()).unwrap();
        raw.sort();
        let values: Vec<u64> = raw.into_iter().map(|(_, v)| v).collect();
        assert_eq!(values.len(), 63);
        assert_eq!(ds.views(&s.id).unwrap(), values.as_slice());
        assert_eq!(values, s.values);
    }
}

#[test]
fn graph_matches_row_scan() {
    let (dir, _, ds) = written(&GenConfig { n_videos: 80, ..GenConfig::default() });
    let corpus: BTreeSet<String> = rows(&dir.path().join("metadata.csv")).iter().map(|r| r[0].to_string()).collect();
    let day = ds.window().date(10);
    let mut edges = BTreeSet::new();
    for r in rows(&dir.path().join("snapshots.csv")) {
        let pos: u32 = r[3].parse().unwrap();
        if r[0] == *day.to_string() && &r[4] == "relevant" && pos <= 15 && corpus.contains(&r[1]) && corpus.contains(&r[2]) {
            edges.insert((r[1].to_string(), r[2].to_string()));
        }
    }
    let snap = &ds.network().snapshots()[10];
    let g = build_graph(snap, ds.corpus(), 15).unwrap();
    assert_eq!(g.edge_count(), edges.len());

    let mut indegree: BTreeMap<&str, usize> = corpus.iter().map(|c| (c.as_str(), 0)).collect();
    for (_, t) in &edges {
        *indegree.get_mut(t.as_str()).unwrap() += 1;
    }
    let n = corpus.len() as f64;
    for (k, p) in indegree_ccdf(&g) {
        let tally = indegree.values().filter(|&&d| d >= k).count() as f64 / n;
        assert!((p - tally).abs() < 1e-12, "k={k}");
    }

    let views = |id: &VideoId| ds.views(id).unwrap()[10] as f64;
    let flow = view_group_flow(&g, views).unwrap();
    let group = view_quartiles(&g, views);
    let (out_deg, in_deg) = (g.out_degrees(), g.in_degrees());
    for (q, row) in flow.iter().enumerate() {
        let members: Vec<usize> = (0..g.node_count()).filter(|&i| group[i] == q).collect();
        let out_total: usize = members.iter().map(|&i| out_deg[i]).sum();
        let in_total: usize = members.iter().map(|&i| in_deg[i]).sum();
        assert_eq!(row.iter().sum::<u64>() as usize, out_total);
        assert_eq!((0..4).map(|r| flow[r][q]).sum::<u64>() as usize, in_total);
    }
}

#[test]
fn link_frequencies_follow_the_binomial() {
    let cfg = GenConfig { n_videos: 300, presence_prob: (0.5, 0.5), topology: Topology::Random { edge_density: 0.03 }, ..GenConfig::default() };
    let g = generate(&cfg).unwrap();
    let ds = g.dataset().unwrap();
    let counts = link_day_counts(ds.network(), ds.corpus(), 15).unwrap();
    let truth = g.truth.true_graph();
    let n = truth.len() as f64;
    let mut hist = vec![0u64; 64];
    for e in &truth {
        hist[counts.get(e).copied().unwrap_or(0)] += 1;
    }
    let binom = Binomial::new(0.5, 63).unwrap();
    // sparse tail bins are pooled so each compared bin expects at least 5 links
    let mut pooled: Vec<(f64, u64)> = Vec::new();
    let (mut p_acc, mut o_acc) = (0.0, 0);
    for (k, &observed) in hist.iter().enumerate() {
        p_acc += binom.pmf(k as u64);
        o_acc += observed;
        if n * p_acc >= 5.0 && n * (1.0 - binom.cdf(k as u64)) >= 5.0 {
            pooled.push((p_acc, o_acc));
            (p_acc, o_acc) = (0.0, 0);
        }
    }
    pooled.push((p_acc, o_acc));
    assert!(pooled.len() > 5);
    for (p, observed) in pooled {
        let (mean, sd) = (n * p, (n * p * (1.0 - p)).sqrt());
        assert!((observed as f64 - mean).abs() <= 3.0 * sd, "{observed} vs {mean:.1} +- {:.1}", 3.0 * sd);
    }
}

#[test]
fn churn_is_centred_under_bernoulli_presence() {
    let cfg = GenConfig { n_videos: 300, presence_prob: (0.8, 0.8), ..GenConfig::default() };
    let ds = generate(&cfg).unwrap().dataset().unwrap();
    let table = indegree_change_ratios(ds.network(), ds.corpus(), 15, 1).unwrap();
    let median = table.pooled.unwrap().p50;
    assert!(median.abs() <= 0.05, "{median}");
}

#[test]
fn filters_and_homophily_match_recount() {
    let (dir, g, ds) = written(&GenConfig { n_videos: 150, ..GenConfig::default() });
    let mut sums: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for r in rows(&dir.path().join("views.csv")) {
        let e = sums.entry(r[0].to_string()).or_default();
        e.0 += r[2].parse::<f64>().unwrap();
        e.1 += 1.0;
    }
    let means: BTreeMap<String, f64> = sums.into_iter().map(|(k, (s, n))| (k, s / n)).collect();
    let filters = apply_view_filters(&ds);
    let eligible: BTreeSet<String> = filters.eligible_targets().iter().map(|v| v.as_str().to_string()).collect();
    let expected: BTreeSet<String> = means.iter().filter(|(_, &m)| m > 100.0).map(|(k, _)| k.clone()).collect();
    assert_eq!(eligible, expected);

    let pn = extract_persistent_network(&ds, &filters, 15).unwrap();
    assert!(!pn.is_empty());
    for e in pn.edges() {
        let (s, t) = (means[e.source.as_str()], means[e.target.as_str()]);
        assert!(t > 100.0 && s >= 0.01 * t);
    }
    let artist: BTreeMap<String, String> = rows(&dir.path().join("metadata.csv")).iter().map(|r| (r[0].to_string(), r[1].to_string())).collect();
    let same = pn.edges().iter().filter(|e| artist[e.source.as_str()] == artist[e.target.as_str()]).count();
    let h = homophily_stats(&pn, ds.metadata()).unwrap();
    assert_eq!(h.same_artist, same);
    assert_eq!(h.links, pn.len());
    let true_edges = g.truth.true_graph();
    assert!(pn.edges().iter().all(|e| true_edges.contains(&(e.source.clone(), e.target.clone()))));
}
