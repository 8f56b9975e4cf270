//! Persistent network extraction: view filters, 7-day majority smoothing
//! of link presence, reciprocity and homophily, plus the Bernoulli
//! persistence simulation used to sanity-check the smoothing rule.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{Dataset, VideoId, VideoMeta};
use crate::error::{Error, Result};
use crate::graph::daily_graphs;

pub const PERSISTENT_EDGES_HEADER: [&str; 4] = ["source", "target", "reciprocal", "raw_presence_count"];

/// Half-width of the smoothing window (7 days centred on t).
pub const SMOOTHING_HALF_WIDTH: usize = 3;

/// Mean-view thresholds deciding which links are worth modelling.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewFilters {
    means: BTreeMap<VideoId, f64>,
    pub min_target_mean: f64,
    pub min_source_ratio: f64,
}

impl ViewFilters {
    pub const DEFAULT_MIN_TARGET_MEAN: f64 = 100.0;
    pub const DEFAULT_MIN_SOURCE_RATIO: f64 = 0.01;

    pub fn new(means: BTreeMap<VideoId, f64>) -> Self {
        ViewFilters {
            means,
            min_target_mean: Self::DEFAULT_MIN_TARGET_MEAN,
            min_source_ratio: Self::DEFAULT_MIN_SOURCE_RATIO,
        }
    }

    pub fn means(&self) -> &BTreeMap<VideoId, f64> {
        &self.means
    }

    pub fn mean(&self, id: &VideoId) -> Option<f64> {
        self.means.get(id).copied()
    }

    pub fn target_eligible(&self, id: &VideoId) -> bool {
        self.mean(id).is_some_and(|m| m >= self.min_target_mean)
    }

    /// Source-side test on raw means (inclusive).
    pub fn source_passes(&self, source_mean: f64, target_mean: f64) -> bool {
        target_mean > 0.0 && source_mean / target_mean >= self.min_source_ratio
    }

    pub fn pair_eligible(&self, source: &VideoId, target: &VideoId) -> bool {
        match (self.mean(source), self.mean(target)) {
            (Some(s), Some(t)) => t >= self.min_target_mean && self.source_passes(s, t),
            _ => false,
        }
    }

    pub fn eligible_targets(&self) -> BTreeSet<VideoId> {
        self.means.keys().filter(|id| self.target_eligible(id)).cloned().collect()
    }
}

/// Mean daily views over the full window for every in-corpus video.
pub fn apply_view_filters(dataset: &Dataset) -> ViewFilters {
    let means = dataset
        .corpus()
        .iter()
        .map(|id| (id.clone(), dataset.mean_views(id).expect("corpus video has views")))
        .collect();
    ViewFilters::new(means)
}

/// Daily presence of one link over the window.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PresenceVector(pub Vec<bool>);

impl PresenceVector {
    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn all(&self) -> bool {
        self.0.iter().all(|&b| b)
    }

    /// Bitwise `self >= other`.
    pub fn dominates(&self, other: &PresenceVector) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| a || !b)
    }
}

/// Majority smoothing over the clipped window `[t-3, t+3]`: day t is kept
/// when the link appears on at least half of the available days (4 of 7
/// for full windows). One pass over the raw vector, not iterated.
pub fn smooth_link_presence(p: &PresenceVector) -> PresenceVector {
    let n = p.0.len();
    let mut prefix = vec![0usize; n + 1];
    for (i, &b) in p.0.iter().enumerate() {
        prefix[i + 1] = prefix[i] + b as usize;
    }
    let out = (0..n)
        .map(|t| {
            let lo = t.saturating_sub(SMOOTHING_HALF_WIDTH);
            let hi = (t + SMOOTHING_HALF_WIDTH).min(n - 1);
            let available = hi - lo + 1;
            let present = prefix[hi + 1] - prefix[lo];
            2 * present >= available
        })
        .collect();
    PresenceVector(out)
}

pub fn is_persistent(p: &PresenceVector) -> bool {
    smooth_link_presence(p).all()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PersistentEdge {
    pub source: VideoId,
    pub target: VideoId,
    pub reciprocal: bool,
    pub raw_presence_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PersistentNetwork {
    edges: Vec<PersistentEdge>,
}

impl PersistentNetwork {
    /// Sorts edges and recomputes reciprocal flags.
    pub fn from_edges(mut edges: Vec<PersistentEdge>) -> Self {
        edges.sort();
        edges.dedup_by(|a, b| a.source == b.source && a.target == b.target);
        let pairs: BTreeSet<(VideoId, VideoId)> = edges.iter().map(|e| (e.source.clone(), e.target.clone())).collect();
        for e in &mut edges {
            e.reciprocal = pairs.contains(&(e.target.clone(), e.source.clone()));
        }
        PersistentNetwork { edges }
    }

    pub fn edges(&self) -> &[PersistentEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn sources(&self) -> BTreeSet<&VideoId> {
        self.edges.iter().map(|e| &e.source).collect()
    }

    pub fn targets(&self) -> BTreeSet<&VideoId> {
        self.edges.iter().map(|e| &e.target).collect()
    }

    pub fn reciprocal_count(&self) -> usize {
        self.edges.iter().filter(|e| e.reciprocal).count()
    }

    /// Incoming persistent neighbours of every target, sorted.
    pub fn in_neighbors(&self) -> BTreeMap<VideoId, Vec<VideoId>> {
        let mut map: BTreeMap<VideoId, Vec<VideoId>> = BTreeMap::new();
        for e in &self.edges {
            map.entry(e.target.clone()).or_default().push(e.source.clone());
        }
        map
    }

    pub fn contains(&self, source: &VideoId, target: &VideoId) -> bool {
        self.edges
            .binary_search_by(|e| (&e.source, &e.target).cmp(&(source, target)))
            .is_ok()
    }
}

/// Raw daily presence of every in-corpus pair seen at least once.
pub fn presence_vectors(dataset: &Dataset, cutoff: u32) -> Result<BTreeMap<(VideoId, VideoId), PresenceVector>> {
    let graphs = daily_graphs(dataset.network(), dataset.corpus(), cutoff)?;
    let days = graphs.len();
    let mut map: BTreeMap<(VideoId, VideoId), PresenceVector> = BTreeMap::new();
    for (day, g) in graphs.iter().enumerate() {
        for (u, v) in g.edge_ids() {
            map.entry((u.clone(), v.clone())).or_insert_with(|| PresenceVector(vec![false; days])).0[day] = true;
        }
    }
    Ok(map)
}

/// Links that pass both view filters and stay present on every day after
/// smoothing.
pub fn extract_persistent_network(dataset: &Dataset, filters: &ViewFilters, cutoff: u32) -> Result<PersistentNetwork> {
    let presence = presence_vectors(dataset, cutoff)?;
    let edges = presence
        .into_par_iter()
        .filter(|((u, v), p)| filters.pair_eligible(u, v) && is_persistent(p))
        .map(|((u, v), p)| PersistentEdge { source: u, target: v, reciprocal: false, raw_presence_count: p.count() })
        .collect();
    Ok(PersistentNetwork::from_edges(edges))
}

/// Filter-passing links seen at least once that did not survive smoothing.
pub fn ephemeral_links(dataset: &Dataset, filters: &ViewFilters, cutoff: u32, pn: &PersistentNetwork) -> Result<Vec<(VideoId, VideoId)>> {
    Ok(presence_vectors(dataset, cutoff)?
        .into_keys()
        .filter(|(u, v)| filters.pair_eligible(u, v) && !pn.contains(u, v))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Homophily {
    pub links: usize,
    pub reciprocal: usize,
    pub same_artist: usize,
    pub same_genre: usize,
    pub same_artist_fraction: f64,
    pub same_genre_fraction: f64,
}

/// Share of persistent links joining videos of one artist, or videos
/// whose genre sets intersect.
pub fn homophily_stats(pn: &PersistentNetwork, metadata: &BTreeMap<VideoId, VideoMeta>) -> Result<Homophily> {
    let lookup = |id: &VideoId| metadata.get(id).ok_or_else(|| Error::data(format!("no metadata for {id}")));
    let mut same_artist = 0;
    let mut same_genre = 0;
    for e in pn.edges() {
        let (s, t) = (lookup(&e.source)?, lookup(&e.target)?);
        same_artist += (s.artist_id == t.artist_id) as usize;
        same_genre += (!s.genres.is_disjoint(&t.genres)) as usize;
    }
    let links = pn.len();
    let frac = |k: usize| if links == 0 { 0.0 } else { k as f64 / links as f64 };
    Ok(Homophily {
        links,
        reciprocal: pn.reciprocal_count(),
        same_artist,
        same_genre,
        same_artist_fraction: frac(same_artist),
        same_genre_fraction: frac(same_genre),
    })
}

/// Fraction of simulated links, present each day independently with
/// probability `p_link`, that come out persistent after smoothing.
/// Trial `i` draws from stream `i` of a ChaCha generator keyed by `seed`.
pub fn simulate_persistence_probability(p_link: f64, days: usize, trials: usize, seed: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_link) {
        return Err(Error::data(format!("link probability {p_link} outside [0, 1]")));
    }
    if trials == 0 || days == 0 {
        return Err(Error::data("simulation needs at least one trial and one day"));
    }
    let persistent = (0..trials)
        .into_par_iter()
        .filter(|&trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let p = PresenceVector((0..days).map(|_| rng.random::<f64>() < p_link).collect());
            is_persistent(&p)
        })
        .count();
    Ok(persistent as f64 / trials as f64)
}

pub fn write_persistent_edges<W: Write>(pn: &PersistentNetwork, output: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output);
    wtr.write_record(PERSISTENT_EDGES_HEADER)?;
    for e in pn.edges() {
        wtr.write_record([
            e.source.as_str(),
            e.target.as_str(),
            if e.reciprocal { "true" } else { "false" },
            &e.raw_presence_count.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<persistent_edges>", e))?;
    Ok(())
}

pub fn read_persistent_edges<R: Read>(input: R) -> Result<PersistentNetwork> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != PERSISTENT_EDGES_HEADER {
        return Err(Error::parse(1, format!("unexpected persistent edge header {header:?}")));
    }
    let mut edges = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str| Error::parse(line, format!("bad {what}"));
        edges.push(PersistentEdge {
            source: VideoId::new(&record[0]).map_err(|_| bad("source"))?,
            target: VideoId::new(&record[1]).map_err(|_| bad("target"))?,
            reciprocal: record[2].parse().map_err(|_| bad("reciprocal flag"))?,
            raw_presence_count: record[3].parse().map_err(|_| bad("presence count"))?,
        });
    }
    Ok(PersistentNetwork::from_edges(edges))
}
