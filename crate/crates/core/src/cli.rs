//! The `aflow` command line.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{default_recommended_bins, default_relevant_bins, display_probability_matrix, origin_probability_matrix};
use crate::alignment::{TransferMatrix, DEFAULT_MAX_RECOMMENDED, DEFAULT_MAX_RELEVANT};
use crate::config::{RunConfig, Settings};
use crate::data_model::{validate_dataset, Dataset, DynamicNetwork, VideoId, ViewSeries, METADATA_FILE, SNAPSHOTS_FILE, VIEWS_FILE};
use crate::datagen::generate;
use crate::error::{Error, Result};
use crate::evaluation::{contribution_report, evaluate_forecasts, EvalReport};
use crate::forecast::{fit_all, forecast_all, FittedModel, ForecastConfig, ModelKind, NeighborMode, VideoForecast};
use crate::graph::{
    bowtie_attention, bowtie_decompose, daily_graphs, indegree_ccdf, indegree_change_ratios, link_day_counts,
    link_frequency_histogram, view_group_flow, ChurnRow, Component,
};
use crate::persistence::{
    apply_view_filters, ephemeral_links, extract_persistent_network, homophily_stats, read_persistent_edges,
    simulate_persistence_probability, write_persistent_edges, PersistentNetwork, ViewFilters,
};
use crate::stats::{correlated_link_fractions, dataset_views, gini, sample_random_pairs, spearman};

pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const PERSISTENT_EDGES_FILE: &str = "persistent_edges.csv";
pub const MODELS_FILE: &str = "models.json";
pub const FORECASTS_FILE: &str = "forecasts.csv";

#[derive(Debug, Parser)]
#[command(name = "aflow", version, about = "Measure and forecast attention flow in recommendation networks")]
pub struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub data: Option<String>,
    /// Artifact directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores); never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Override any configuration key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset with ground truth into --out.
    Generate {
        #[arg(long)]
        n_videos: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        edge_density: Option<f64>,
        #[arg(long)]
        targets: Option<usize>,
        #[arg(long)]
        in_degree: Option<usize>,
        #[arg(long)]
        noise_scale: Option<f64>,
    },
    /// Check the dataset and write validation.json.
    Validate,
    /// Bow-tie, degree, group-flow, churn and link-frequency measurements.
    Analyze {
        #[arg(long)]
        cutoff: Option<u32>,
        /// Reference day for single-day measurements (YYYY-MM-DD).
        #[arg(long)]
        date: Option<String>,
    },
    /// Display and origin probabilities between list kinds.
    DisplayProb,
    /// Extract the persistent network.
    Persistent {
        #[arg(long)]
        cutoff: Option<u32>,
    },
    /// Persistence probability of links with constant daily presence.
    SimulatePersistence {
        /// Comma-separated presence probabilities.
        #[arg(long = "p", value_name = "GRID")]
        p_grid: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Residual correlation tests per link group.
    Correlate {
        #[arg(long)]
        random_pairs: Option<usize>,
    },
    /// Fit one model on the persistent network and forecast the test days.
    Fit {
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        neighbor_mode: Option<NeighborMode>,
    },
    /// SMAPE of every fitted model.
    Evaluate,
    /// Network contribution ratios and artist percentile shifts.
    Contribute,
    /// persistent, fit (every model), evaluate and contribute in sequence.
    Pipeline,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

fn report(err: &Error) -> i32 {
    let code = err.exit_code();
    let record = ErrorRecord { error: err.kind(), message: err.to_string(), exit_code: code };
    eprintln!("{}", serde_json::to_string(&record).unwrap_or_else(|_| err.to_string()));
    code
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, env: impl IntoIterator<Item = (String, String)>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            return report(&Error::Usage(e.to_string().trim().to_string()));
        }
    };
    match execute(cli, env) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn settings(cli: &Cli, env: impl IntoIterator<Item = (String, String)>) -> Result<Settings> {
    let mut s = Settings::defaults();
    if let Some(path) = &cli.config {
        s.apply_file(path)?;
    }
    s.apply_env(env)?;
    let mut flag = |key: &str, value: Option<String>| value.map_or(Ok(()), |v| s.set(key, v));
    flag("data", cli.data.clone())?;
    flag("out", cli.out.clone())?;
    flag("seed", cli.seed.map(|v| v.to_string()))?;
    flag("threads", cli.threads.map(|v| v.to_string()))?;
    match &cli.command {
        Command::Generate { n_videos, days, edge_density, targets, in_degree, noise_scale } => {
            flag("n_videos", n_videos.map(|v| v.to_string()))?;
            flag("window", days.map(|v| v.to_string()))?;
            flag("edge_density", edge_density.map(|v| v.to_string()))?;
            flag("targets", targets.map(|v| v.to_string()))?;
            flag("in_degree", in_degree.map(|v| v.to_string()))?;
            flag("noise_scale", noise_scale.map(|v| v.to_string()))?;
        }
        Command::Analyze { cutoff, date } => {
            flag("cutoff", cutoff.map(|v| v.to_string()))?;
            flag("date", date.clone())?;
        }
        Command::Persistent { cutoff } => flag("cutoff", cutoff.map(|v| v.to_string()))?,
        Command::SimulatePersistence { p_grid, trials } => {
            flag("p_grid", p_grid.clone())?;
            flag("trials", trials.map(|v| v.to_string()))?;
        }
        Command::Correlate { random_pairs } => flag("random_pairs", random_pairs.map(|v| v.to_string()))?,
        Command::Fit { model, neighbor_mode } => {
            flag("models", Some(model.to_string()))?;
            flag("neighbor_mode", neighbor_mode.map(|v| v.to_string()))?;
        }
        _ => {}
    }
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        s.set(k.trim(), v.trim())?;
    }
    Ok(s)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Generate { .. } => "generate",
        Command::Validate => "validate",
        Command::Analyze { .. } => "analyze",
        Command::DisplayProb => "display-prob",
        Command::Persistent { .. } => "persistent",
        Command::SimulatePersistence { .. } => "simulate-persistence",
        Command::Correlate { .. } => "correlate",
        Command::Fit { .. } => "fit",
        Command::Evaluate => "evaluate",
        Command::Contribute => "contribute",
        Command::Pipeline => "pipeline",
    }
}

fn execute(cli: Cli, env: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let settings = settings(&cli, env)?;
    let cfg = RunConfig::from_settings(&settings)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot build thread pool: {e}")))?;
    let mut run = Run { cfg, inputs: BTreeMap::new(), outputs: Vec::new(), dataset: None };
    pool.install(|| dispatch(&cli.command, &mut run))?;
    run.write_manifest(command_name(&cli.command), &settings)
}

fn dispatch(command: &Command, run: &mut Run) -> Result<()> {
    match command {
        Command::Generate { .. } => cmd_generate(run),
        Command::Validate => cmd_validate(run),
        Command::Analyze { .. } => cmd_analyze(run),
        Command::DisplayProb => cmd_display_prob(run),
        Command::Persistent { .. } => cmd_persistent(run),
        Command::SimulatePersistence { .. } => cmd_simulate(run),
        Command::Correlate { .. } => cmd_correlate(run),
        Command::Fit { .. } => cmd_fit(run),
        Command::Evaluate => cmd_evaluate(run),
        Command::Contribute => cmd_contribute(run),
        Command::Pipeline => {
            let models = run.cfg.models.clone();
            cmd_persistent(run)?;
            for m in models {
                fit_model(run, m)?;
            }
            cmd_evaluate(run)?;
            cmd_contribute(run)
        }
    }
}

struct Run {
    cfg: RunConfig,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
    dataset: Option<Dataset>,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_digest(path: &Path) -> Result<String> {
    Ok(hex_digest(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: BTreeMap<String, String>,
    inputs: &'a BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Run {
    fn out(&self) -> &Path {
        &self.cfg.out
    }

    fn out_path(&self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let path = self.out().join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(path)
    }

    fn record_input(&mut self, label: &str, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.inputs.insert(label.to_string(), digest);
        Ok(())
    }

    fn dataset(&mut self) -> Result<&Dataset> {
        if self.dataset.is_none() {
            let dir = self.cfg.data.clone();
            for name in [SNAPSHOTS_FILE, VIEWS_FILE, METADATA_FILE] {
                let path = dir.join(name);
                if !path.exists() {
                    return Err(Error::MissingArtifact { path, hint: "point --data at a dataset directory".into() });
                }
                self.record_input(&format!("data/{name}"), &path)?;
            }
            let ds = with_window(Dataset::load_dir(&dir)?, self.cfg.window)?;
            self.dataset = Some(ds);
        }
        Ok(self.dataset.as_ref().expect("loaded"))
    }

    fn write_csv<R, I>(&mut self, rel: &str, header: &[&str], rows: R) -> Result<()>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator,
        I::Item: AsRef<[u8]>,
    {
        let path = self.out_path(rel)?;
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.outputs.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let path = self.out_path(rel)?;
        let text = serde_json::to_string_pretty(value)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(path);
        Ok(())
    }

    fn write_manifest(&self, command: &str, settings: &Settings) -> Result<()> {
        let mut outputs = BTreeMap::new();
        for p in &self.outputs {
            let rel = p.strip_prefix(self.out()).unwrap_or(p).to_string_lossy().replace('\\', "/");
            outputs.insert(rel, file_digest(p)?);
        }
        let manifest = Manifest {
            tool: "aflow",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: settings.echo(),
            inputs: &self.inputs,
            outputs,
        };
        fs::create_dir_all(self.out()).map_err(|e| Error::io(self.out(), e))?;
        let path = self.out().join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Restricts a dataset to its first `days` days.
pub fn with_window(ds: Dataset, days: usize) -> Result<Dataset> {
    let len = ds.window().len;
    if days > len {
        return Err(Error::Usage(format!("window of {days} days requested, dataset covers {len}")));
    }
    if days == len {
        return Ok(ds);
    }
    let start = ds.window().start;
    let network = DynamicNetwork::new(ds.network().snapshots()[..days].to_vec())?;
    let views = ds
        .all_views()
        .iter()
        .map(|(id, v)| ViewSeries { id: id.clone(), start_date: start, values: v[..days].to_vec() })
        .collect();
    validate_dataset(ds.metadata().values().cloned().collect(), views, network)
}

fn f(v: f64) -> String {
    v.to_string()
}

fn cmd_generate(run: &mut Run) -> Result<()> {
    let generated = generate(&run.cfg.generator)?;
    let dir = run.out().to_path_buf();
    generated.write_dir(&dir)?;
    for name in [SNAPSHOTS_FILE, VIEWS_FILE, METADATA_FILE, crate::datagen::GROUND_TRUTH_FILE] {
        run.outputs.push(dir.join(name));
    }
    Ok(())
}

fn cmd_validate(run: &mut Run) -> Result<()> {
    let summary = run.dataset()?.summary().clone();
    run.write_json("validation.json", &summary)
}

fn cmd_analyze(run: &mut Run) -> Result<()> {
    let cutoff = run.cfg.cutoff;
    let ds = run.dataset()?.clone();
    let window = ds.window();
    let graphs = daily_graphs(ds.network(), ds.corpus(), cutoff)?;
    let date = run.cfg.date.unwrap_or(window.start);
    let day = window.index_of(date).ok_or_else(|| Error::Usage(format!("date {date} outside the observation window")))?;

    let mut bowtie_rows = Vec::new();
    let mut reference = None;
    for (d, g) in graphs.iter().enumerate() {
        let bt = bowtie_decompose(g)?;
        let date = window.date(d);
        let att = bowtie_attention(&bt, g, &ds, date).ok();
        for c in Component::ALL {
            let vf = att.as_ref().and_then(|a| a.view_fraction(c)).map(f).unwrap_or_default();
            bowtie_rows.push(vec![date.to_string(), c.as_str().to_string(), f(bt.node_fraction(c)), vf]);
        }
        if d == day {
            reference = Some(att.unwrap_or(bt));
        }
    }
    run.write_csv("bowtie.csv", &["date", "component", "node_fraction", "view_fraction"], bowtie_rows)?;

    let g = &graphs[day];
    let ccdf = indegree_ccdf(g).into_iter().map(|(k, p)| vec![k.to_string(), f(p)]);
    run.write_csv("ccdf.csv", &["indegree", "ccdf"], ccdf)?;

    let views_on = |id: &VideoId| ds.views(id).map(|v| v[day] as f64).unwrap_or(0.0);
    let flow = view_group_flow(g, views_on)?;
    let flow_rows = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| vec![(i + 1).to_string(), (j + 1).to_string(), flow[i][j].to_string()]);
    run.write_csv("group_flow.csv", &["from_quartile", "to_quartile", "links"], flow_rows)?;

    let churn = indegree_change_ratios(ds.network(), ds.corpus(), cutoff, run.cfg.min_indegree)?;
    let churn_row = |scope: &str, r: &ChurnRow| {
        vec![scope.to_string(), r.indegree.to_string(), r.count.to_string(), f(r.p10), f(r.p25), f(r.p50), f(r.p75), f(r.p90)]
    };
    let mut rows: Vec<Vec<String>> = churn.rows.iter().map(|r| churn_row("indegree", r)).collect();
    rows.extend(churn.pooled.iter().map(|r| churn_row("pooled", r)));
    run.write_csv("churn.csv", &["scope", "indegree", "count", "p10", "p25", "p50", "p75", "p90"], rows)?;

    let hist = link_frequency_histogram(ds.network(), ds.corpus(), cutoff)?;
    run.write_csv("link_freq.csv", &["days_present", "links"], hist.into_iter().map(|(k, n)| [k.to_string(), n.to_string()]))?;

    let indegree: Vec<f64> = g.in_degrees().into_iter().map(|d| d as f64).collect();
    let day_views: Vec<f64> = g.nodes().iter().map(views_on).collect();
    let mean_views: Vec<f64> = ds.corpus().iter().filter_map(|id| ds.mean_views(id)).collect();
    let bt = reference.expect("reference day present");
    let summary = serde_json::json!({
        "date": date.to_string(),
        "cutoff": cutoff,
        "nodes": g.node_count(),
        "links": g.edge_count(),
        "gini_mean_views": gini(&mean_views).ok(),
        "spearman_indegree_views": spearman(&indegree, &day_views).ok(),
        "bowtie_node_fractions": Component::ALL.iter().map(|c| (c.as_str(), bt.node_fraction(*c))).collect::<BTreeMap<_, _>>(),
        "bowtie_view_fractions": Component::ALL.iter().map(|c| (c.as_str(), bt.view_fraction(*c))).collect::<BTreeMap<_, _>>(),
    });
    run.write_json("analyze_summary.json", &summary)
}

fn matrix_rows(m: &TransferMatrix) -> Vec<Vec<String>> {
    (1..=m.max_position())
        .flat_map(|r| {
            m.bins.iter().enumerate().map(move |(b, bin)| vec![r.to_string(), bin.to_string(), f(m.prob(r, b)), m.counts[r as usize - 1][b].to_string(), m.totals[r as usize - 1].to_string()])
        })
        .collect()
}

fn cmd_display_prob(run: &mut Run) -> Result<()> {
    let net = run.dataset()?.network().clone();
    let display = display_probability_matrix(&net, &default_recommended_bins(), DEFAULT_MAX_RELEVANT)?;
    let origin = origin_probability_matrix(&net, &default_relevant_bins(), DEFAULT_MAX_RECOMMENDED)?;
    run.write_csv("display_prob.csv", &["rel_position", "bin_label", "probability", "shown", "total"], matrix_rows(&display))?;
    run.write_csv("origin_prob.csv", &["rec_position", "bin_label", "probability", "shown", "total"], matrix_rows(&origin))
}

fn filters(run: &mut Run) -> Result<ViewFilters> {
    let (min_mean, ratio) = (run.cfg.min_target_mean, run.cfg.min_source_ratio);
    let mut filters = apply_view_filters(run.dataset()?);
    filters.min_target_mean = min_mean;
    filters.min_source_ratio = ratio;
    Ok(filters)
}

fn cmd_persistent(run: &mut Run) -> Result<()> {
    let filters = filters(run)?;
    let cutoff = run.cfg.cutoff;
    let ds = run.dataset()?;
    let pn = extract_persistent_network(ds, &filters, cutoff)?;
    let homophily = homophily_stats(&pn, ds.metadata())?;
    let path = run.out_path(PERSISTENT_EDGES_FILE)?;
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_persistent_edges(&pn, BufWriter::new(file))?;
    run.outputs.push(path);
    let summary = serde_json::json!({
        "links": homophily.links,
        "targets": pn.targets().len(),
        "sources": pn.sources().len(),
        "reciprocal": homophily.reciprocal,
        "same_artist": homophily.same_artist,
        "same_genre": homophily.same_genre,
        "same_artist_fraction": homophily.same_artist_fraction,
        "same_genre_fraction": homophily.same_genre_fraction,
    });
    run.write_json("homophily.json", &summary)
}

fn cmd_simulate(run: &mut Run) -> Result<()> {
    let (days, trials, seed) = (run.cfg.window, run.cfg.trials, run.cfg.seed);
    let rows = run
        .cfg
        .p_grid
        .clone()
        .into_iter()
        .map(|p| Ok(vec![f(p), f(simulate_persistence_probability(p, days, trials, seed)?)]))
        .collect::<Result<Vec<_>>>()?;
    run.write_csv("xi_curve.csv", &["p", "xi"], rows)
}

fn load_persistent(run: &mut Run) -> Result<PersistentNetwork> {
    let path = run.out().join(PERSISTENT_EDGES_FILE);
    if !path.exists() {
        return Err(Error::MissingArtifact { path, hint: "run `aflow persistent` first".into() });
    }
    run.record_input(PERSISTENT_EDGES_FILE, &path)?;
    let pn = read_persistent_edges(fs::File::open(&path).map_err(|e| Error::io(&path, e))?)?;
    let ds = run.dataset()?;
    if let Some(e) = pn.edges().iter().find(|e| !ds.corpus().contains(&e.source) || !ds.corpus().contains(&e.target)) {
        return Err(Error::data(format!("persistent edge {} -> {} not in the dataset", e.source, e.target)));
    }
    Ok(pn)
}

fn cmd_correlate(run: &mut Run) -> Result<()> {
    let pn = load_persistent(run)?;
    let filters = filters(run)?;
    let (cutoff, n_random, seed, period) = (run.cfg.cutoff, run.cfg.random_pairs, run.cfg.seed, run.cfg.period);
    let ds = run.dataset()?;
    let pair = |e: &crate::persistence::PersistentEdge| (e.source.clone(), e.target.clone());
    let reciprocal: Vec<_> = pn.edges().iter().filter(|e| e.reciprocal).map(pair).collect();
    let one_way: Vec<_> = pn.edges().iter().filter(|e| !e.reciprocal).map(pair).collect();
    let ephemeral = ephemeral_links(ds, &filters, cutoff, &pn)?;
    let connected: BTreeSet<(VideoId, VideoId)> = link_day_counts(ds.network(), ds.corpus(), cutoff)?.into_keys().collect();
    let random = sample_random_pairs(&filters, &connected, n_random, seed)?;
    let groups = vec![
        ("reciprocal".to_string(), reciprocal),
        ("persistent-".to_string(), one_way),
        ("ephemeral".to_string(), ephemeral),
        ("random".to_string(), random),
    ];
    let report = correlated_link_fractions(&groups, dataset_views(ds), period)?;
    let links = report.links.iter().map(|l| vec![l.group.clone(), l.source.to_string(), l.target.to_string(), f(l.r), f(l.p)]);
    run.write_csv("link_correlations.csv", &["group", "source", "target", "r", "p"], links.collect::<Vec<_>>())?;
    let groups = report
        .groups
        .iter()
        .map(|g| vec![g.group.clone(), g.tested.to_string(), g.significant.to_string(), g.skipped.to_string(), f(g.fraction)]);
    run.write_csv("group_fractions.csv", &["group", "tested", "significant", "skipped", "fraction"], groups.collect::<Vec<_>>())
}

#[derive(Serialize, Deserialize)]
pub struct ModelsFile {
    pub model: ModelKind,
    pub config: ForecastConfig,
    pub videos: BTreeMap<VideoId, FittedModel>,
}

fn cmd_fit(run: &mut Run) -> Result<()> {
    let kind = run.cfg.models[0];
    fit_model(run, kind)
}

fn fit_model(run: &mut Run, kind: ModelKind) -> Result<()> {
    let pn = load_persistent(run)?;
    let config = run.cfg.forecast.clone();
    let ds = run.dataset()?;
    let models = fit_all(kind, ds, &pn, &config)?;
    let forecasts = forecast_all(&models, ds, &config)?;
    let window = ds.window();
    let mut rows = Vec::new();
    for (id, fc) in &forecasts {
        for (h, (y, p)) in fc.y_true.iter().zip(&fc.y_pred).enumerate() {
            rows.push(vec![id.to_string(), window.date(config.train_days + h).to_string(), f(*y), f(*p)]);
        }
    }
    let file = ModelsFile { model: kind, config, videos: models };
    run.write_json(&format!("{kind}/{MODELS_FILE}"), &file)?;
    run.write_csv(&format!("{kind}/{FORECASTS_FILE}"), &["video_id", "date", "y_true", "y_pred"], rows)
}

/// Reads a forecasts CSV back into per-video forecasts.
pub fn read_forecasts(path: &Path) -> Result<BTreeMap<VideoId, VideoForecast>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let mut out: BTreeMap<VideoId, VideoForecast> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || Error::parse(i as u64 + 2, format!("malformed forecast row in {}", path.display()));
        let id = VideoId::new(rec.get(0).ok_or_else(bad)?)?;
        let y: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let p: f64 = rec.get(3).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let entry = out.entry(id).or_insert_with(|| VideoForecast { y_true: Vec::new(), y_pred: Vec::new(), neighbor_values: Vec::new() });
        entry.y_true.push(y);
        entry.y_pred.push(p);
    }
    Ok(out)
}

fn cmd_evaluate(run: &mut Run) -> Result<()> {
    let mut reports: BTreeMap<ModelKind, EvalReport> = BTreeMap::new();
    for kind in run.cfg.models.clone() {
        let path = run.out().join(kind.as_str()).join(FORECASTS_FILE);
        if !path.exists() {
            return Err(Error::MissingArtifact { path, hint: format!("run `aflow fit --model {kind}` first") });
        }
        run.record_input(&format!("{kind}/{FORECASTS_FILE}"), &path)?;
        reports.insert(kind, evaluate_forecasts(&read_forecasts(&path)?)?);
    }
    let mut rows = Vec::new();
    for (kind, r) in &reports {
        for (id, v) in &r.per_video {
            rows.push(vec![kind.to_string(), "video".into(), id.to_string(), f(*v)]);
        }
        for (h, v) in r.per_horizon.iter().enumerate() {
            rows.push(vec![kind.to_string(), "horizon".into(), (h + 1).to_string(), f(*v)]);
        }
        rows.push(vec![kind.to_string(), "overall".into(), String::new(), f(r.overall)]);
    }
    run.write_csv("eval.csv", &["model", "scope", "key", "smape"], rows)?;
    let summary: BTreeMap<&str, serde_json::Value> = reports
        .iter()
        .map(|(k, r)| (k.as_str(), serde_json::json!({ "videos": r.per_video.len(), "overall": r.overall, "per_horizon": r.per_horizon })))
        .collect();
    run.write_json("eval_summary.json", &summary)
}

fn cmd_contribute(run: &mut Run) -> Result<()> {
    let path = run.out().join(ModelKind::Arnet.as_str()).join(MODELS_FILE);
    if !path.exists() {
        return Err(Error::MissingArtifact { path, hint: "run `aflow fit --model arnet` first".into() });
    }
    run.record_input("arnet/models.json", &path)?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let file: ModelsFile = serde_json::from_str(&text)?;
    if file.model != ModelKind::Arnet {
        return Err(Error::data(format!("{} holds {} models, not arnet", path.display(), file.model)));
    }
    let ds = run.dataset()?;
    let forecasts = forecast_all(&file.videos, ds, &file.config)?;
    let report = contribution_report(ds, &file.videos, &forecasts, &file.config)?;
    run.write_csv("eta.csv", &["video_id", "eta"], report.eta.iter().map(|(id, e)| [id.to_string(), f(*e)]))?;
    let outliers: BTreeSet<&String> = report.outliers.iter().collect();
    let rows: Vec<Vec<String>> = report
        .artists
        .iter()
        .map(|a| {
            vec![
                a.artist_id.clone(),
                f(a.views),
                f(a.views_without_network),
                f(a.pct_with),
                f(a.pct_without),
                f(a.pct_change),
                outliers.contains(&a.artist_id).to_string(),
            ]
        })
        .collect();
    run.write_csv("artist_shift.csv", &["artist_id", "views", "views_without_network", "pct_with", "pct_without", "pct_change", "outlier"], rows)?;
    let summary = serde_json::json!({
        "targets": report.eta.len(),
        "mean_eta": report.mean_eta,
        "same_artist_share": report.same_artist_share,
        "zero_forecast": report.zero_forecast,
        "outliers": report.outliers,
    });
    run.write_json("contribute_summary.json", &summary)
}
