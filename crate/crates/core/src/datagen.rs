//! Synthetic datasets with known link strengths.
//!
//! Every video follows
//!
//! ```text
//! y_v[t] = round(max(0, m_v[t] + e_t)),
//! m_v[t] = base_v * s_v[t mod 7] * exp(l_v[t]) + sum_tau alpha_{v,tau} y_v[t - tau] + sum_{u -> v} beta_{u,v} y_u[t]
//! ```
//!
//! where `l_v` is a slowly varying log-level and `e_t ~ N(0, (noise_scale * m_v[t])^2)`.
//! The true graph is acyclic, so each day is evaluated in topological
//! order. Daily relevant lists show each true out-edge with its presence
//! probability and pad with randomly drawn filler targets.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::alignment::{default_recommended_bins, PositionBin};
use crate::data_model::{
    validate_dataset, write_metadata, write_snapshots, write_views, DailySnapshot, Dataset, DynamicNetwork, ListEntry,
    ListKind, RankedList, VideoId, VideoMeta, ViewSeries, METADATA_FILE, SNAPSHOTS_FILE, VIEWS_FILE,
};
use crate::error::{Error, Result};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const LAGS: usize = 7;
const GENRES: [&str; 8] = ["pop", "rock", "hiphop", "latin", "country", "rnb", "electronic", "indie"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    /// Each ordered pair `(i, j)`, `i < j`, is an edge with this probability.
    Random { edge_density: f64 },
    /// The last `targets` videos each receive `in_degree` edges from
    /// earlier videos.
    Fixed { targets: usize, in_degree: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_videos: usize,
    pub n_artists: usize,
    pub days: usize,
    pub burn_in: usize,
    pub start_date: NaiveDate,
    pub base_level: (f64, f64),
    pub seasonal_amplitude: f64,
    /// Standard deviation of the stationary log-level process.
    pub level_volatility: f64,
    pub level_persistence: f64,
    /// Range of the sum of the seven lag coefficients.
    pub alpha_total: (f64, f64),
    pub beta_range: (f64, f64),
    /// Noise standard deviation relative to the noiseless value.
    pub noise_scale: f64,
    pub topology: Topology,
    /// Probability that a source picks a same-artist video when one is available.
    pub same_artist_bias: f64,
    pub presence_prob: (f64, f64),
    /// Multiplier on the base term of videos with incoming edges.
    pub target_base_scale: f64,
    pub list_len: usize,
    /// Number of corpus videos each source draws its filler entries from.
    pub filler_pool: usize,
    pub external_fraction: f64,
    pub recommended_lists: bool,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_videos: 200,
            n_artists: 40,
            days: 63,
            burn_in: 28,
            start_date: NaiveDate::from_ymd_opt(2018, 9, 1).expect("valid date"),
            base_level: (300.0, 5000.0),
            seasonal_amplitude: 0.5,
            level_volatility: 0.3,
            level_persistence: 0.5,
            alpha_total: (0.1, 0.6),
            beta_range: (0.1, 0.9),
            noise_scale: 0.05,
            topology: Topology::Random { edge_density: 0.02 },
            same_artist_bias: 0.5,
            presence_prob: (0.9, 1.0),
            target_base_scale: 0.0,
            list_len: 15,
            filler_pool: 45,
            external_fraction: 0.1,
            recommended_lists: true,
            seed: 42,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64, max: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && min <= lo && lo <= hi && hi <= max) {
        return Err(Error::Usage(format!("{name} range ({lo}, {hi}) must satisfy {min} <= lo <= hi <= {max}")));
    }
    Ok(())
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_videos == 0 || self.n_artists == 0 || self.days == 0 {
            return Err(Error::Usage("n_videos, n_artists and days must be positive".into()));
        }
        if self.list_len < 2 {
            return Err(Error::Usage("list_len must be >= 2".into()));
        }
        check_range("base_level", self.base_level, 0.0, f64::MAX)?;
        check_range("alpha_total", self.alpha_total, 0.0, 0.999)?;
        check_range("beta_range", self.beta_range, 0.0, 1.0)?;
        check_range("presence_prob", self.presence_prob, 0.0, 1.0)?;
        for (name, v, max) in [
            ("seasonal_amplitude", self.seasonal_amplitude, 1.0),
            ("level_persistence", self.level_persistence, 0.999),
            ("same_artist_bias", self.same_artist_bias, 1.0),
            ("external_fraction", self.external_fraction, 1.0),
            ("noise_scale", self.noise_scale, f64::MAX),
            ("level_volatility", self.level_volatility, f64::MAX),
            ("target_base_scale", self.target_base_scale, f64::MAX),
        ] {
            if !(v.is_finite() && (0.0..=max).contains(&v)) {
                return Err(Error::Usage(format!("{name} = {v} outside [0, {max}]")));
            }
        }
        match self.topology {
            Topology::Random { edge_density } if !(0.0..=1.0).contains(&edge_density) => {
                Err(Error::Usage(format!("edge_density {edge_density} outside [0, 1]")))
            }
            Topology::Fixed { targets, in_degree } if targets > self.n_videos || in_degree > self.n_videos - targets => Err(
                Error::Usage(format!("{targets} targets with in-degree {in_degree} do not fit in {} videos", self.n_videos)),
            ),
            _ => Ok(()),
        }
    }

    fn max_out_degree(&self) -> usize {
        self.list_len - 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueEdge {
    pub source: VideoId,
    pub target: VideoId,
    pub beta: f64,
    pub presence_prob: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub base: BTreeMap<VideoId, f64>,
    /// Seasonal phase in days.
    pub phase: BTreeMap<VideoId, f64>,
    pub alpha: BTreeMap<VideoId, Vec<f64>>,
    pub edges: Vec<TrueEdge>,
}

impl GroundTruth {
    pub fn videos(&self) -> impl Iterator<Item = &VideoId> {
        self.alpha.keys()
    }

    pub fn beta(&self) -> BTreeMap<(VideoId, VideoId), f64> {
        self.edges.iter().map(|e| ((e.source.clone(), e.target.clone()), e.beta)).collect()
    }

    pub fn presence_prob(&self) -> BTreeMap<(VideoId, VideoId), f64> {
        self.edges.iter().map(|e| ((e.source.clone(), e.target.clone()), e.presence_prob)).collect()
    }

    pub fn true_graph(&self) -> BTreeSet<(VideoId, VideoId)> {
        self.edges.iter().map(|e| (e.source.clone(), e.target.clone())).collect()
    }

    /// Videos with at least one incoming edge.
    pub fn targets(&self) -> BTreeSet<&VideoId> {
        self.edges.iter().map(|e| &e.target).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (id, a) in &self.alpha {
            if a.len() != LAGS || a.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::data(format!("alpha of {id} must be {LAGS} non-negative values")));
            }
            if !self.base.contains_key(id) || !self.phase.contains_key(id) {
                return Err(Error::data(format!("{id} lacks a base level or phase")));
            }
        }
        for e in &self.edges {
            if !(0.0..=1.0).contains(&e.beta) || !(0.0..=1.0).contains(&e.presence_prob) {
                return Err(Error::data(format!("edge {} -> {} has beta or presence outside [0, 1]", e.source, e.target)));
            }
            if !self.alpha.contains_key(&e.source) || !self.alpha.contains_key(&e.target) {
                return Err(Error::data(format!("edge {} -> {} references an unknown video", e.source, e.target)));
            }
        }
        self.topological_order().map(|_| ())
    }

    /// Kahn order with ties broken by id; errors on a cycle.
    pub fn topological_order(&self) -> Result<Vec<VideoId>> {
        let mut indeg: BTreeMap<&VideoId, usize> = self.alpha.keys().map(|v| (v, 0)).collect();
        let mut out: BTreeMap<&VideoId, Vec<&VideoId>> = BTreeMap::new();
        for e in &self.edges {
            *indeg.get_mut(&e.target).ok_or_else(|| Error::data(format!("unknown target {}", e.target)))? += 1;
            out.entry(&e.source).or_default().push(&e.target);
        }
        let mut ready: BTreeSet<&VideoId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(v, _)| *v).collect();
        let mut order = Vec::with_capacity(indeg.len());
        while let Some(v) = ready.pop_first() {
            order.push(v.clone());
            for w in out.get(v).into_iter().flatten() {
                let d = indeg.get_mut(w).expect("known target");
                *d -= 1;
                if *d == 0 {
                    ready.insert(w);
                }
            }
        }
        if order.len() != indeg.len() {
            return Err(Error::data("true graph is cyclic"));
        }
        Ok(order)
    }
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub metadata: Vec<VideoMeta>,
    pub views: Vec<ViewSeries>,
    pub network: DynamicNetwork,
    pub truth: GroundTruth,
}

impl Generated {
    pub fn dataset(&self) -> Result<Dataset> {
        validate_dataset(self.metadata.clone(), self.views.clone(), self.network.clone())
    }

    /// Writes the three CSV files and the ground truth into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let path = dir.join(name);
            fs::File::create(&path).map(std::io::BufWriter::new).map_err(|e| Error::io(path, e))
        };
        write_snapshots(&self.network, create(SNAPSHOTS_FILE)?)?;
        write_views(&self.views, create(VIEWS_FILE)?)?;
        write_metadata(&self.metadata, create(METADATA_FILE)?)?;
        let json = serde_json::to_string_pretty(&self.truth)? + "\n";
        let path = dir.join(GROUND_TRUTH_FILE);
        fs::write(&path, json).map_err(|e| Error::io(path, e))
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo { rng.random_range(lo..hi) } else { lo }
}

fn video_id(i: usize) -> VideoId {
    VideoId::new(format!("v{i:05}")).expect("valid id")
}

/// Samples metadata and the ground-truth process parameters.
pub fn sample_truth(config: &GenConfig) -> Result<(Vec<VideoMeta>, GroundTruth)> {
    config.validate()?;
    let mut rng = rng_for(config.seed, 0);
    let n = config.n_videos;
    let ids: Vec<VideoId> = (0..n).map(video_id).collect();
    let artists: Vec<usize> = (0..n).map(|_| rng.random_range(0..config.n_artists)).collect();

    let mut out_degree = vec![0usize; n];
    let mut sources_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    let cap = config.max_out_degree();
    match config.topology {
        Topology::Random { edge_density } => {
            for (j, sources) in sources_of.iter_mut().enumerate() {
                for (i, degree) in out_degree.iter_mut().enumerate().take(j) {
                    if *degree < cap && rng.random::<f64>() < edge_density {
                        sources.push(i);
                        *degree += 1;
                    }
                }
            }
        }
        Topology::Fixed { targets, in_degree } => {
            for j in n - targets..n {
                for _ in 0..in_degree {
                    let open: Vec<usize> = (0..j).filter(|i| out_degree[*i] < cap && !sources_of[j].contains(i)).collect();
                    let same: Vec<usize> = open.iter().copied().filter(|i| artists[*i] == artists[j]).collect();
                    let pool = if !same.is_empty() && rng.random::<f64>() < config.same_artist_bias { &same } else { &open };
                    let &i = pool
                        .choose(&mut rng)
                        .ok_or_else(|| Error::Usage(format!("no source with spare list capacity for video {j}")))?;
                    sources_of[j].push(i);
                    out_degree[i] += 1;
                }
                sources_of[j].sort_unstable();
            }
        }
    }

    let mut truth = GroundTruth::default();
    for (j, id) in ids.iter().enumerate() {
        let mut base = uniform(&mut rng, config.base_level);
        if !sources_of[j].is_empty() {
            base *= config.target_base_scale;
        }
        truth.base.insert(id.clone(), base);
        truth.phase.insert(id.clone(), rng.random_range(0.0..7.0));
        let total = uniform(&mut rng, config.alpha_total);
        let weights: Vec<f64> = (0..LAGS).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let wsum: f64 = weights.iter().sum();
        truth.alpha.insert(id.clone(), weights.iter().map(|w| total * w / wsum).collect());
        for &i in &sources_of[j] {
            truth.edges.push(TrueEdge {
                source: ids[i].clone(),
                target: id.clone(),
                beta: uniform(&mut rng, config.beta_range),
                presence_prob: uniform(&mut rng, config.presence_prob),
            });
        }
    }
    truth.edges.sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));

    let metadata = ids
        .iter()
        .zip(&artists)
        .map(|(id, &a)| {
            let k = rng.random_range(1..=2);
            let genres = GENRES.choose_multiple(&mut rng, k).map(|g| g.to_string()).collect();
            let back = config.burn_in as u64 + rng.random_range(0..365);
            Ok(VideoMeta {
                id: id.clone(),
                artist_id: format!("a{a:04}"),
                genres,
                upload_date: config
                    .start_date
                    .checked_sub_days(Days::new(back))
                    .ok_or_else(|| Error::Usage("start date too early".into()))?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((metadata, truth))
}

/// Simulates `burn_in + days` days and returns the last `days` of each
/// series.
pub fn simulate_views(config: &GenConfig, truth: &GroundTruth) -> Result<BTreeMap<VideoId, Vec<u64>>> {
    truth.validate()?;
    let order = truth.topological_order()?;
    let mut incoming: BTreeMap<&VideoId, Vec<(&VideoId, f64)>> = BTreeMap::new();
    for e in &truth.edges {
        incoming.entry(&e.target).or_default().push((&e.source, e.beta));
    }
    let mut level_rng = rng_for(config.seed, 1);
    let mut noise_rng = rng_for(config.seed, 2);
    let total = config.burn_in + config.days;
    let phi = config.level_persistence;
    let innovation = config.level_volatility * (1.0 - phi * phi).sqrt();

    let mut series: BTreeMap<&VideoId, Vec<f64>> = order.iter().map(|v| (v, Vec::with_capacity(total))).collect();
    let mut level: BTreeMap<&VideoId, f64> = order
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut level_rng);
            (v, config.level_volatility * z)
        })
        .collect();
    for t in 0..total {
        for v in &order {
            let l = level.get_mut(v).expect("known video");
            let z: f64 = StandardNormal.sample(&mut level_rng);
            *l = phi * *l + innovation * z;
            let l = *l;
            let season = 1.0 + config.seasonal_amplitude * (2.0 * PI * (t as f64 + truth.phase[v]) / 7.0).sin();
            let mut mean = truth.base[v] * season * l.exp();
            let own = &series[v];
            for (k, a) in truth.alpha[v].iter().enumerate() {
                if t > k {
                    mean += a * own[t - k - 1];
                }
            }
            for (u, b) in incoming.get(v).into_iter().flatten() {
                mean += b * series[u][t];
            }
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            let y = (mean + config.noise_scale * mean * z).max(0.0).round();
            series.get_mut(v).expect("known video").push(y);
        }
    }
    Ok(series
        .into_iter()
        .map(|(v, s)| (v.clone(), s[config.burn_in..].iter().map(|&y| y as u64).collect()))
        .collect())
}

/// Position-transfer kernel: `rows[r - 1][b]` is the probability that the
/// item at relevant position `r` is shown in recommended bin `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionKernel {
    pub bins: Vec<PositionBin>,
    pub rows: Vec<Vec<f64>>,
}

impl PositionKernel {
    /// A kernel in which no bin can receive more items than it has positions.
    pub fn new(bins: Vec<PositionBin>, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if row.len() != bins.len() || row.iter().any(|p| !(0.0..=1.0).contains(p)) || row.iter().sum::<f64>() > 1.0 + 1e-12 {
                return Err(Error::data(format!("kernel row {} is not a sub-probability over {} bins", r + 1, bins.len())));
            }
        }
        for (b, bin) in bins.iter().enumerate() {
            let feeders = rows.iter().filter(|row| row[b] > 0.0).count();
            if feeders > bin.width() as usize {
                return Err(Error::data(format!("bin {bin} can receive {feeders} items but has {} positions", bin.width())));
            }
        }
        Ok(PositionKernel { bins, rows })
    }

    pub fn list_len(&self) -> u32 {
        self.bins.last().map(|b| b.hi).unwrap_or(0)
    }

    /// Places items of a relevant list (in position order) on a
    /// recommended list, padding free positions with `filler`.
    pub fn sample(&self, relevant: &[VideoId], rng: &mut ChaCha8Rng, mut filler: impl FnMut(&mut ChaCha8Rng) -> VideoId) -> Vec<ListEntry> {
        let mut slots: Vec<Option<VideoId>> = vec![None; self.list_len() as usize];
        let mut landed: Vec<Vec<&VideoId>> = vec![Vec::new(); self.bins.len()];
        for (r, item) in relevant.iter().enumerate() {
            let Some(row) = self.rows.get(r) else { break };
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (b, p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    landed[b].push(item);
                    break;
                }
            }
        }
        for (bin, items) in self.bins.iter().zip(landed) {
            let mut positions: Vec<u32> = (bin.lo..=bin.hi).collect();
            positions.shuffle(rng);
            for (item, pos) in items.into_iter().zip(positions) {
                slots[pos as usize - 1] = Some(item.clone());
            }
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| ListEntry { target: s.unwrap_or_else(|| filler(rng)), position: i as u32 + 1 })
            .collect()
    }
}

/// Kernel over the default recommended bins, feasible by construction.
pub fn default_kernel() -> PositionKernel {
    let rows = vec![
        vec![0.35, 0.45, 0.0, 0.0],
        vec![0.0, 0.6, 0.2, 0.0],
        vec![0.0, 0.6, 0.2, 0.0],
        vec![0.0, 0.6, 0.2, 0.0],
        vec![0.0, 0.0, 0.5, 0.3],
        vec![0.0, 0.0, 0.5, 0.3],
        vec![0.0, 0.0, 0.0, 0.4],
        vec![0.0, 0.0, 0.0, 0.4],
        vec![0.0, 0.0, 0.0, 0.4],
    ];
    PositionKernel::new(default_recommended_bins(), rows).expect("feasible kernel")
}

fn external_id(rng: &mut ChaCha8Rng, prefix: &str, pool: usize) -> VideoId {
    VideoId::new(format!("{prefix}{:05}", rng.random_range(0..pool.max(1)))).expect("valid id")
}

/// Daily relevant (and optionally recommended) lists of every video.
pub fn sample_snapshots(config: &GenConfig, truth: &GroundTruth) -> Result<DynamicNetwork> {
    let mut rng = rng_for(config.seed, 3);
    let ids: Vec<&VideoId> = truth.videos().collect();
    let mut out_edges: BTreeMap<&VideoId, Vec<&TrueEdge>> = BTreeMap::new();
    for e in &truth.edges {
        out_edges.entry(&e.source).or_default().push(e);
    }
    let pools: BTreeMap<&VideoId, Vec<&VideoId>> = ids
        .iter()
        .map(|&u| {
            let others: Vec<&VideoId> = ids.iter().copied().filter(|&v| v != u).collect();
            let k = config.filler_pool.min(others.len());
            (u, others.choose_multiple(&mut rng, k).copied().collect())
        })
        .collect();
    let external_pool = 10 * config.n_videos.max(config.list_len);
    let kernel = default_kernel();
    let mut snapshots = Vec::with_capacity(config.days);
    for d in 0..config.days {
        let date = config.start_date + Days::new(d as u64);
        let mut snap = DailySnapshot::new(date);
        for &u in &ids {
            let true_out = out_edges.get(u).map(Vec::as_slice).unwrap_or(&[]);
            let mut targets: Vec<VideoId> = true_out
                .iter()
                .filter(|e| rng.random::<f64>() < e.presence_prob)
                .map(|e| e.target.clone())
                .collect();
            let pool = &pools[u];
            let mut attempts = 0;
            while targets.len() < config.list_len && attempts < 50 * config.list_len {
                attempts += 1;
                let candidate = if rng.random::<f64>() < config.external_fraction || pool.is_empty() {
                    external_id(&mut rng, "x", external_pool)
                } else {
                    pool[rng.random_range(0..pool.len())].clone()
                };
                if &candidate == u || targets.contains(&candidate) || true_out.iter().any(|e| e.target == candidate) {
                    continue;
                }
                targets.push(candidate);
            }
            targets.shuffle(&mut rng);
            let entries = targets
                .iter()
                .enumerate()
                .map(|(i, t)| ListEntry { target: t.clone(), position: i as u32 + 1 })
                .collect();
            snap.insert(RankedList::new(u.clone(), ListKind::Relevant, entries)?)?;
            if config.recommended_lists {
                let rec = kernel.sample(&targets, &mut rng, |r| external_id(r, "y", external_pool));
                snap.insert(RankedList::new(u.clone(), ListKind::Recommended, dedup_filler(rec))?)?;
            }
        }
        snapshots.push(snap);
    }
    DynamicNetwork::new(snapshots)
}

/// Drops repeated filler entries, keeping the first position.
fn dedup_filler(entries: Vec<ListEntry>) -> Vec<ListEntry> {
    let mut seen = BTreeSet::new();
    entries.into_iter().filter(|e| seen.insert(e.target.clone())).collect()
}

/// Full synthetic dataset.
pub fn generate(config: &GenConfig) -> Result<Generated> {
    let (metadata, truth) = sample_truth(config)?;
    let series = simulate_views(config, &truth)?;
    let network = sample_snapshots(config, &truth)?;
    let views = series
        .into_iter()
        .map(|(id, values)| ViewSeries { id, start_date: config.start_date, values })
        .collect();
    Ok(Generated { metadata, views, network, truth })
}

/// Paired relevant/recommended lists for `sources` sources over `days`
/// days, with recommended positions drawn from `kernel`.
pub fn generate_paired_lists(kernel: &PositionKernel, sources: usize, days: usize, relevant_len: usize, seed: u64) -> Result<DynamicNetwork> {
    if sources == 0 || days == 0 || relevant_len == 0 {
        return Err(Error::Usage("paired lists need sources, days and a relevant length".into()));
    }
    let mut rng = rng_for(seed, 4);
    let start = NaiveDate::from_ymd_opt(2018, 9, 1).expect("valid date");
    let mut snapshots = Vec::with_capacity(days);
    let mut filler_count = 0usize;
    for d in 0..days {
        let mut snap = DailySnapshot::new(start + Days::new(d as u64));
        for s in 0..sources {
            let source = VideoId::new(format!("s{s:05}"))?;
            let relevant: Vec<VideoId> = (0..relevant_len).map(|r| VideoId::new(format!("s{s:05}r{r:02}"))).collect::<Result<_>>()?;
            let rel_entries = relevant
                .iter()
                .enumerate()
                .map(|(i, t)| ListEntry { target: t.clone(), position: i as u32 + 1 })
                .collect();
            snap.insert(RankedList::new(source.clone(), ListKind::Relevant, rel_entries)?)?;
            let rec = kernel.sample(&relevant, &mut rng, |_| {
                filler_count += 1;
                VideoId::new(format!("f{filler_count:09}")).expect("valid id")
            });
            snap.insert(RankedList::new(source, ListKind::Recommended, rec)?)?;
        }
        snapshots.push(snap);
    }
    DynamicNetwork::new(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GenConfig {
        GenConfig { n_videos: 30, n_artists: 5, days: 21, burn_in: 14, ..Default::default() }
    }

    #[test]
    fn zero_density_has_no_edges() {
        let cfg = GenConfig { topology: Topology::Random { edge_density: 0.0 }, ..small() };
        let g = generate(&cfg).unwrap();
        assert!(g.truth.edges.is_empty());
        assert!(g.views.iter().all(|s| s.values.len() == 21));
    }

    #[test]
    fn constant_source_halved() {
        let cfg = GenConfig { seasonal_amplitude: 0.0, level_volatility: 0.0, noise_scale: 0.0, days: 10, burn_in: 7, ..small() };
        let (s, t) = (video_id(0), video_id(1));
        let mut truth = GroundTruth::default();
        truth.base.insert(s.clone(), 100.0);
        truth.base.insert(t.clone(), 0.0);
        for v in [&s, &t] {
            truth.phase.insert(v.clone(), 0.0);
            truth.alpha.insert(v.clone(), vec![0.0; LAGS]);
        }
        truth.edges.push(TrueEdge { source: s.clone(), target: t.clone(), beta: 0.5, presence_prob: 1.0 });
        let views = simulate_views(&cfg, &truth).unwrap();
        assert_eq!(views[&s], vec![100; 10]);
        assert_eq!(views[&t], vec![50; 10]);
    }

    #[test]
    fn cycle_rejected() {
        let mut truth = GroundTruth::default();
        let (a, b) = (video_id(0), video_id(1));
        for v in [&a, &b] {
            truth.base.insert(v.clone(), 1.0);
            truth.phase.insert(v.clone(), 0.0);
            truth.alpha.insert(v.clone(), vec![0.0; LAGS]);
        }
        truth.edges.push(TrueEdge { source: a.clone(), target: b.clone(), beta: 0.5, presence_prob: 1.0 });
        truth.edges.push(TrueEdge { source: b, target: a, beta: 0.5, presence_prob: 1.0 });
        assert!(simulate_views(&small(), &truth).is_err());
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.views, b.views);
        assert_eq!(a.network, b.network);
        assert_eq!(a.truth, b.truth);
        let c = generate(&GenConfig { seed: 7, ..small() }).unwrap();
        assert_ne!(a.views, c.views);
    }

    #[test]
    fn fixed_topology_in_degree() {
        let cfg = GenConfig { topology: Topology::Fixed { targets: 10, in_degree: 2 }, ..small() };
        let g = generate(&cfg).unwrap();
        let truth = &g.truth;
        assert_eq!(truth.edges.len(), 20);
        assert_eq!(truth.targets().len(), 10);
        assert!(truth.topological_order().is_ok());
        assert!(g.dataset().is_ok());
    }

    #[test]
    fn infeasible_kernel_rejected() {
        let bins = vec![PositionBin::new(1, 1)];
        assert!(PositionKernel::new(bins.clone(), vec![vec![0.5], vec![0.5]]).is_err());
        assert!(PositionKernel::new(bins, vec![vec![1.5]]).is_err());
    }

    #[test]
    fn paired_lists_valid() {
        let net = generate_paired_lists(&default_kernel(), 5, 3, 20, 1).unwrap();
        assert_eq!(net.len(), 3);
        for snap in net.snapshots() {
            assert_eq!(snap.lists(ListKind::Recommended).len(), 5);
            assert!(snap.lists(ListKind::Recommended).values().all(|l| l.entries().len() == 15));
        }
    }
}
