//! End-to-end acceptance checks. Each check prints one PASS, FAIL or SKIP
//! line; the test fails if any check fails.
//!
//! Run with `cargo test -p aflow --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use aflow::alignment::{default_recommended_bins, default_relevant_bins, display_probability_matrix, origin_probability_matrix, TransferMatrix};
use aflow::data_model::{Dataset, VideoId};
use aflow::datagen::{default_kernel, generate, generate_paired_lists, GenConfig, Topology};
use aflow::evaluation::{contribution_report, evaluate_forecasts, network_contribution, smape, smape_term};
use aflow::forecast::{fit_all, forecast, forecast_all, ArnetModel, FitDiagnostics, FittedModel, ForecastConfig, ModelKind};
use aflow::graph::{bowtie_attention, bowtie_decompose, build_graph, strongly_connected_components, Component};
use aflow::persistence::{apply_view_filters, extract_persistent_network, is_persistent, simulate_persistence_probability, smooth_link_presence, PresenceVector};
use aflow::stats::{gini, pearson_test, spearman};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = Box<dyn FnOnce() -> Result<Option<String>, String>>;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn persistence_simulation() -> Outcome {
    let start = Instant::now();
    let half = simulate_persistence_probability(0.5, 63, 100_000, 42).map_err(|e| e.to_string())?;
    let high = simulate_persistence_probability(0.9, 63, 100_000, 42).map_err(|e| e.to_string())?;
    let one = simulate_persistence_probability(1.0, 63, 100_000, 42).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(half <= 0.001, || format!("xi(0.5) = {half}"))?;
    ensure((high - 0.92).abs() <= 0.02, || format!("xi(0.9) = {high}"))?;
    ensure(one == 1.0, || format!("xi(1) = {one}"))?;
    ensure(secs < 10.0, || format!("took {secs:.2}s"))?;
    Ok(format!("xi(0.5)={half} xi(0.9)={high:.4} xi(1)={one} in {secs:.2}s"))
}

fn bowtie_oracle_equivalence() -> Outcome {
    let probs = [0.02, 0.05, 0.1];
    for seed in 0..200u64 {
        let n = 1 + (seed as usize * 7919) % 50;
        let p = probs[seed as usize % 3];
        let g = common::random_digraph(n, p, seed);
        let mut sccs = strongly_connected_components(&g);
        for c in &mut sccs {
            c.sort_unstable();
        }
        sccs.sort();
        let expected = common::scc_oracle(&g);
        ensure(sccs == expected, || format!("seed {seed}: SCC partition differs"))?;
        let bt = bowtie_decompose(&g).map_err(|e| e.to_string())?;
        let oracle = common::bowtie_oracle(&g);
        ensure(bt.assignment == oracle, || format!("seed {seed} (n={n}, p={p}): assignment differs"))?;
    }
    Ok("200 graphs match".into())
}

fn smape_suite() -> Outcome {
    let err = |e: aflow::Error| e.to_string();
    ensure(smape(&[5.0, 7.0], &[5.0, 7.0]).map_err(err)? == 0.0, || "identical values".into())?;
    ensure(smape(&[100.0], &[0.0]).map_err(err)? == 200.0, || "100 vs 0".into())?;
    let hand = 100.0 * (50.0 / 250.0 + 50.0 / 350.0);
    let got = smape(&[100.0, 200.0], &[150.0, 150.0]).map_err(err)?;
    ensure(got == hand, || format!("two-point example gave {got}, expected {hand}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..1000 {
        let n = rng.random_range(1..30);
        let mut y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1e4) }).collect();
        let mut f: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1e4) }).collect();
        let both = rng.random_range(0..n);
        y[both] = 0.0;
        f[both] = 0.0;
        let a = smape(&y, &f).map_err(err)?;
        let b = smape(&f, &y).map_err(err)?;
        ensure(a == b, || format!("case {case}: asymmetric {a} vs {b}"))?;
        ensure(smape_term(y[both], f[both]) == 0.0, || format!("case {case}: both-zero term nonzero"))?;
        let manual: f64 = y
            .iter()
            .zip(&f)
            .map(|(&u, &v)| if u == 0.0 && v == 0.0 { 0.0 } else { 200.0 * (u - v).abs() / (u.abs() + v.abs()) })
            .sum::<f64>()
            / n as f64;
        ensure((a - manual).abs() <= 1e-9, || format!("case {case}: {a} vs hand {manual}"))?;
        ensure((0.0..=200.0).contains(&a), || format!("case {case}: {a} out of range"))?;
    }
    Ok("examples exact, 1000 random vectors".into())
}

fn mean_abs(diffs: &[f64]) -> f64 {
    diffs.iter().map(|d| d.abs()).sum::<f64>() / diffs.len() as f64
}

fn arnet_recovery() -> Outcome {
    let cfg = GenConfig {
        n_videos: 100,
        topology: Topology::Fixed { targets: 50, in_degree: 2 },
        noise_scale: 0.01,
        presence_prob: (1.0, 1.0),
        level_volatility: 0.5,
        level_persistence: 0.5,
        seed: 7,
        ..GenConfig::default()
    };
    let g = generate(&cfg).map_err(|e| e.to_string())?;
    let ds = g.dataset().map_err(|e| e.to_string())?;
    let pn = extract_persistent_network(&ds, &apply_view_filters(&ds), 15).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let models = fit_all(ModelKind::Arnet, &ds, &pn, &ForecastConfig::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();

    let true_beta = g.truth.beta();
    let targets: Vec<&VideoId> = g.truth.targets().into_iter().collect();
    ensure(targets.len() == 50, || format!("{} true targets", targets.len()))?;
    let mut alpha_err = Vec::new();
    let mut beta_err = Vec::new();
    for t in &targets {
        let Some(m) = models.get(*t).and_then(FittedModel::as_arnet) else {
            return Err(format!("{t} was not fitted"));
        };
        for (a, b) in m.alpha.iter().zip(&g.truth.alpha[*t]) {
            alpha_err.push(a - b);
        }
        let fitted: BTreeMap<&VideoId, f64> = m.beta.iter().map(|(u, b)| (u, *b)).collect();
        for ((u, v), b) in &true_beta {
            if v == *t {
                beta_err.push(fitted.get(u).copied().unwrap_or(0.0) - b);
            }
        }
    }
    let (ma, mb) = (mean_abs(&alpha_err), mean_abs(&beta_err));
    ensure(beta_err.len() == 100, || format!("{} true edges", beta_err.len()))?;
    ensure(ma <= 0.05, || format!("alpha MAE {ma:.4}"))?;
    ensure(mb <= 0.05, || format!("beta MAE {mb:.4}"))?;
    ensure(secs < 60.0, || format!("fit took {secs:.2}s"))?;
    Ok(format!("alpha MAE {ma:.4}, beta MAE {mb:.4}, fit {secs:.2}s"))
}

fn networked_dataset() -> Result<Dataset, String> {
    let cfg = GenConfig { n_videos: 300, noise_scale: 0.05, seed: 1, ..GenConfig::default() };
    generate(&cfg).and_then(|g| g.dataset()).map_err(|e| e.to_string())
}

fn model_ranking() -> Outcome {
    let ds = networked_dataset()?;
    let pn = extract_persistent_network(&ds, &apply_view_filters(&ds), 15).map_err(|e| e.to_string())?;
    let cfg = ForecastConfig::default();
    let mut overall = BTreeMap::new();
    for kind in ModelKind::ALL {
        let models = fit_all(kind, &ds, &pn, &cfg).map_err(|e| e.to_string())?;
        let fc = forecast_all(&models, &ds, &cfg).map_err(|e| e.to_string())?;
        overall.insert(kind, evaluate_forecasts(&fc).map_err(|e| e.to_string())?.overall);
    }
    let s = |k| overall[&k];
    let (naive, sn, ar, arnet) = (s(ModelKind::Naive), s(ModelKind::SeasonalNaive), s(ModelKind::Ar), s(ModelKind::Arnet));
    let detail = format!("naive {naive:.3}, snaive {sn:.3}, ar {ar:.3}, arnet {arnet:.3}");
    ensure(arnet <= 0.95 * ar, || format!("arnet not 5% below ar: {detail}"))?;
    ensure(ar <= sn && sn <= naive, || format!("baseline order broken: {detail}"))?;
    Ok(detail)
}

fn eta_properties() -> Outcome {
    let ds = networked_dataset()?;
    let pn = extract_persistent_network(&ds, &apply_view_filters(&ds), 15).map_err(|e| e.to_string())?;
    let cfg = ForecastConfig::default();
    let models = fit_all(ModelKind::Arnet, &ds, &pn, &cfg).map_err(|e| e.to_string())?;
    let fc = forecast_all(&models, &ds, &cfg).map_err(|e| e.to_string())?;
    let report = contribution_report(&ds, &models, &fc, &cfg).map_err(|e| e.to_string())?;
    ensure(!report.eta.is_empty(), || "no contribution ratios".into())?;
    for (id, e) in &report.eta {
        ensure((0.0..=1.0).contains(e), || format!("eta of {id} is {e}"))?;
    }

    let ids: Vec<VideoId> = ["u1", "u2"].iter().map(|s| VideoId::new(*s).expect("id")).collect();
    let diag = FitDiagnostics { iterations: 0, objective: 0.0, converged: true };
    let history: Vec<f64> = (0..14).map(|i| 100.0 + 10.0 * (i % 7) as f64).collect();
    let neighbors = vec![vec![50.0, 60.0, 70.0], vec![10.0, 0.0, 30.0]];

    let no_network = ArnetModel {
        alpha: vec![0.1, 0.0, 0.2, 0.0, 0.0, 0.0, 0.3],
        beta: ids.iter().map(|u| (u.clone(), 0.0)).collect(),
        diagnostics: diag.clone(),
    };
    let f = forecast(&FittedModel::Arnet(no_network.clone()), &history, &neighbors, 3).map_err(|e| e.to_string())?;
    let e0 = network_contribution(&no_network, &neighbors, &f).map_err(|e| e.to_string())?;
    ensure(e0 == 0.0, || format!("beta = 0 gives eta {e0}"))?;

    let pure = ArnetModel { alpha: vec![0.0; 7], beta: vec![(ids[0].clone(), 0.4), (ids[1].clone(), 0.7)], diagnostics: diag };
    let f = forecast(&FittedModel::Arnet(pure.clone()), &history, &neighbors, 3).map_err(|e| e.to_string())?;
    let e1 = network_contribution(&pure, &neighbors, &f).map_err(|e| e.to_string())?;
    ensure((e1 - 1.0).abs() <= 1e-12, || format!("alpha = 0 gives eta {e1}"))?;
    Ok(format!("{} fitted targets in [0, 1], mean {:.3}", report.eta.len(), report.mean_eta.unwrap_or(f64::NAN)))
}

fn presence(bits: &[u8]) -> PresenceVector {
    PresenceVector(bits.iter().map(|&b| b == 1).collect())
}

fn smoothing_suite() -> Outcome {
    let ones = PresenceVector(vec![true; 63]);
    ensure(smooth_link_presence(&ones) == ones && is_persistent(&ones), || "all-ones".into())?;
    let mut gap = vec![1u8; 63];
    gap[30] = 0;
    ensure(smooth_link_presence(&presence(&gap)) == ones, || "interior gap not corrected".into())?;
    ensure(is_persistent(&presence(&gap)), || "62/63 not persistent".into())?;
    let alternating: Vec<u8> = (0..63).map(|i| (i % 2 == 0) as u8).collect();
    ensure(!is_persistent(&presence(&alternating)), || "alternation persists".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..10_000 {
        let density: f64 = rng.random_range(0.3..1.0);
        let base = PresenceVector((0..63).map(|_| rng.random_bool(density)).collect());
        let mut more = base.clone();
        for _ in 0..rng.random_range(1..5) {
            let i = rng.random_range(0..63);
            more.0[i] = true;
        }
        ensure(smooth_link_presence(&more).dominates(&smooth_link_presence(&base)), || format!("case {case}: output not dominated"))?;
        ensure(!is_persistent(&base) || is_persistent(&more), || format!("case {case}: lost persistence"))?;
    }
    Ok("fixed cases and 10000 monotonicity vectors".into())
}

fn statistics_oracles() -> Outcome {
    let err = |e: aflow::Error| e.to_string();
    let g = gini(&[1.0, 2.0, 3.0, 4.0]).map_err(err)?;
    ensure((g - 0.25).abs() <= 1e-12, || format!("gini([1,2,3,4]) = {g}"))?;
    for n in 2..10 {
        let mut v = vec![0.0; n];
        v[n / 2] = 5.0;
        let g = gini(&v).map_err(err)?;
        let want = (n as f64 - 1.0) / n as f64;
        ensure((g - want).abs() <= 1e-12, || format!("single holder n={n}: {g}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut compared = 0;
    for case in 0..1000 {
        let n = rng.random_range(3..40);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
        let oracle = common::spearman_oracle(&x, &y);
        match spearman(&x, &y) {
            Ok(r) => {
                ensure((r - oracle).abs() <= 1e-12, || format!("case {case}: spearman {r} vs {oracle}"))?;
                compared += 1;
            }
            Err(_) => ensure(oracle.is_nan(), || format!("case {case}: rejected but oracle {oracle}"))?,
        }
    }

    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let n = rng.random_range(4..60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let w: f64 = rng.random_range(-1.0..1.0);
        let y: Vec<f64> = x.iter().map(|v| w * v + rng.random_range(-3.0..3.0)).collect();
        let t = pearson_test(&x, &y).map_err(err)?;
        let df = (n - 2) as f64;
        let stat = t.r * (df / (1.0 - t.r * t.r)).sqrt();
        let oracle = common::t_p_oracle(stat, df);
        worst = worst.max((t.p - oracle).abs());
        ensure((t.p - oracle).abs() <= 1e-6, || format!("case {case}: p {} vs oracle {oracle}", t.p))?;
    }
    Ok(format!("{compared} spearman vectors, pearson max |dp| {worst:.2e}"))
}

fn within_unit(m: &TransferMatrix) -> Result<(), String> {
    for r in 1..=m.max_position() {
        for b in 0..m.bins.len() {
            let p = m.prob(r, b);
            ensure((0.0..=1.0).contains(&p), || format!("entry ({r}, {b}) = {p}"))?;
        }
        let s = m.row_sum(r);
        ensure(s <= 1.0 + 1e-12, || format!("row {r} sums to {s}"))?;
    }
    Ok(())
}

fn display_probability() -> Outcome {
    let kernel = default_kernel();
    let relevant_len = 12;
    let net = generate_paired_lists(&kernel, 200, 50, relevant_len, 9).map_err(|e| e.to_string())?;
    let m = display_probability_matrix(&net, &default_recommended_bins(), relevant_len as u32).map_err(|e| e.to_string())?;
    within_unit(&m)?;
    within_unit(&origin_probability_matrix(&net, &default_relevant_bins(), 15).map_err(|e| e.to_string())?)?;
    let mut worst: f64 = 0.0;
    for r in 1..=relevant_len as u32 {
        let n = m.totals[r as usize - 1];
        ensure(n >= 10_000, || format!("row {r} has {n} pairs"))?;
        for b in 0..m.bins.len() {
            let p = kernel.rows.get(r as usize - 1).map_or(0.0, |row| row[b]);
            let est = m.prob(r, b);
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            if sigma == 0.0 {
                ensure(est == p, || format!("({r}, {}) = {est}, kernel {p}", m.bins[b]))?;
            } else {
                worst = worst.max((est - p).abs() / sigma);
                ensure((est - p).abs() <= 3.0 * sigma, || format!("({r}, {}) = {est}, kernel {p} +- {:.4}", m.bins[b], 3.0 * sigma))?;
            }
        }
    }
    Ok(format!("10000 paired lists, worst deviation {worst:.2} sigma"))
}

fn aflow(args: &[&str]) -> i32 {
    let mut full = vec!["aflow"];
    full.extend_from_slice(args);
    aflow::cli::run(full, std::iter::empty())
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in fs::read_dir(dir).expect("readable dir") {
        let path = entry.expect("dir entry").path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            let rel = path.strip_prefix(root).expect("under root").to_string_lossy().into_owned();
            out.insert(rel, fs::read(&path).expect("readable file"));
        }
    }
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let data_s = data.to_str().ok_or("non-UTF-8 temp path")?;
    let code = aflow(&["--out", data_s, "--seed", "3", "generate", "--n-videos", "120"]);
    ensure(code == 0, || format!("generate exited {code}"))?;
    let mut trees = Vec::new();
    for threads in ["1", "4"] {
        let out = tmp.path().join(format!("run{threads}"));
        let out_s = out.to_str().ok_or("non-UTF-8 temp path")?;
        let code = aflow(&["--data", data_s, "--out", out_s, "--threads", threads, "pipeline"]);
        ensure(code == 0, || format!("pipeline with {threads} threads exited {code}"))?;
        let mut files = BTreeMap::new();
        collect_files(&out, &out, &mut files);
        trees.push(files);
    }
    ensure(trees[0].contains_key(aflow::cli::MANIFEST_FILE), || "no manifest".into())?;
    let names: Vec<&String> = trees[0].keys().collect();
    ensure(names == trees[1].keys().collect::<Vec<_>>(), || "different file sets".into())?;
    for (name, bytes) in &trees[0] {
        ensure(trees[1][name] == *bytes, || format!("{name} differs between thread counts"))?;
    }
    Ok(format!("{} files byte-identical", names.len()))
}

fn real_data() -> Result<Option<String>, String> {
    let Some(dir) = std::env::var_os("AFLOW_REAL_DATA") else { return Ok(None) };
    let err = |e: aflow::Error| e.to_string();
    let ds = Dataset::load_dir(Path::new(&dir)).map_err(err)?;
    let date = chrono::NaiveDate::from_ymd_opt(2018, 10, 1).expect("valid date");
    let snap = ds.network().snapshots().iter().find(|s| s.date() == date).ok_or("no snapshot on 2018-10-01")?;
    let g = build_graph(snap, ds.corpus(), 15).map_err(err)?;
    let bt = bowtie_attention(&bowtie_decompose(&g).map_err(err)?, &g, &ds, date).map_err(err)?;
    let views = bt.sizes_by_views.ok_or("no view fractions")?;
    let pct = |x: f64| 100.0 * x;
    let checks = [
        ("LSCC nodes", pct(bt.node_fraction(Component::Lscc)), 23.11),
        ("IN nodes", pct(bt.node_fraction(Component::In)), 68.54),
        ("LSCC views", pct(views[0]), 82.60),
        ("IN views", pct(views[1]), 12.74),
    ];
    for (label, got, want) in checks {
        ensure((got - want).abs() <= 0.5, || format!("{label} {got:.2}% vs {want}%"))?;
    }
    let pn = extract_persistent_network(&ds, &apply_view_filters(&ds), 15).map_err(err)?;
    let (links, targets) = (pn.len() as f64, pn.targets().len() as f64);
    ensure((links / 52_758.0 - 1.0).abs() <= 0.01, || format!("{links} persistent links"))?;
    ensure((targets / 13_710.0 - 1.0).abs() <= 0.01, || format!("{targets} persistent targets"))?;
    let cfg = ForecastConfig::default();
    let models = fit_all(ModelKind::Arnet, &ds, &pn, &cfg).map_err(err)?;
    let fc = forecast_all(&models, &ds, &cfg).map_err(err)?;
    let mean = contribution_report(&ds, &models, &fc, &cfg).map_err(err)?.mean_eta.ok_or("no contribution ratios")?;
    ensure((mean - 0.314).abs() <= 0.02, || format!("mean eta {mean:.4}"))?;
    Ok(Some(format!("{links} links, {targets} targets, mean eta {mean:.3}")))
}

fn run_check(f: impl FnOnce() -> Result<Option<String>, String>) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(Some(detail))) => Verdict::Pass(detail),
        Ok(Ok(None)) => Verdict::Skip("set AFLOW_REAL_DATA to a dataset directory".into()),
        Ok(Err(detail)) => Verdict::Fail(detail),
        Err(_) => Verdict::Fail("panicked".into()),
    }
}

fn main() {
    let checks: Vec<(&str, Check)> = vec![
        ("persistence simulation", Box::new(|| persistence_simulation().map(Some))),
        ("bow-tie oracle equivalence", Box::new(|| bowtie_oracle_equivalence().map(Some))),
        ("smape suite", Box::new(|| smape_suite().map(Some))),
        ("arnet recovery", Box::new(|| arnet_recovery().map(Some))),
        ("model ranking", Box::new(|| model_ranking().map(Some))),
        ("contribution ratio properties", Box::new(|| eta_properties().map(Some))),
        ("smoothing suite", Box::new(|| smoothing_suite().map(Some))),
        ("statistics oracles", Box::new(|| statistics_oracles().map(Some))),
        ("display probability matrices", Box::new(|| display_probability().map(Some))),
        ("pipeline determinism", Box::new(|| determinism().map(Some))),
        ("real data reproduction", Box::new(real_data)),
    ];
    let mut failed = Vec::new();
    for (name, check) in checks {
        match run_check(check) {
            Verdict::Pass(d) => println!("PASS {name}: {d}"),
            Verdict::Skip(d) => println!("SKIP {name}: {d}"),
            Verdict::Fail(d) => {
                println!("FAIL {name}: {d}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
}
