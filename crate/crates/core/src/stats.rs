//! Series preprocessing and the statistical tests used on link pairs.

use std::collections::{BTreeSet, HashMap};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data_model::{Dataset, VideoId};
use crate::error::{Error, Result};
use crate::persistence::ViewFilters;

/// Two-sided significance level for correlation tests.
pub const SIGNIFICANCE: f64 = 0.05;

/// Linear-interpolation quantile of an ascending slice (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample autocorrelation at `lag` (denominator over the full series).
pub fn acf(xs: &[f64], lag: usize) -> f64 {
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = (lag..xs.len()).map(|i| (xs[i] - m) * (xs[i - lag] - m)).sum();
    num / denom
}

/// 90% autocorrelation test for seasonality at `period`.
pub fn seasonality_test(xs: &[f64], period: usize) -> Result<bool> {
    if period < 2 || xs.len() < 3 * period {
        return Err(Error::data(format!("seasonality test needs at least {} points", 3 * period.max(2))));
    }
    let band: f64 = 1.0 + 2.0 * (1..period).map(|k| acf(xs, k).powi(2)).sum::<f64>();
    let limit = 1.645 * (band / xs.len() as f64).sqrt();
    Ok(acf(xs, period).abs() > limit)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub values: Vec<f64>,
    pub was_seasonal: bool,
    /// Set when non-positive values forced an additive decomposition.
    pub additive_fallback: bool,
}

/// Seasonal indices from a classical decomposition around a centred
/// moving average; phase 0 is the first element of `xs`.
fn seasonal_indices(xs: &[f64], period: usize, multiplicative: bool) -> Vec<f64> {
    let n = xs.len();
    let half = period / 2;
    let trend: Vec<Option<f64>> = (0..n)
        .map(|t| {
            if t < half || t + half >= n {
                return None;
            }
            if period % 2 == 1 {
                Some(mean(&xs[t - half..=t + half]))
            } else {
                // 2 x m moving average
                let w = &xs[t - half..=t + half];
                let inner: f64 = w[1..period].iter().sum();
                Some((inner + 0.5 * (w[0] + w[period])) / period as f64)
            }
        })
        .collect();
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (t, tr) in trend.iter().enumerate() {
        if let Some(tr) = tr {
            let detr = if multiplicative { xs[t] / tr } else { xs[t] - tr };
            sums[t % period] += detr;
            counts[t % period] += 1;
        }
    }
    let mut idx: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let centre = mean(&idx);
    for v in &mut idx {
        if multiplicative {
            *v /= centre;
        } else {
            *v -= centre;
        }
    }
    idx
}

/// Deseasonalise (when the seasonality test fires), remove an OLS linear
/// trend, then z-normalise. Degenerate residuals come back as zeros.
pub fn preprocess(xs: &[f64], period: usize) -> Result<ResidualSeries> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::data("non-finite value in series"));
    }
    let was_seasonal = seasonality_test(xs, period)?;
    let mut additive_fallback = false;
    let mut work = xs.to_vec();
    if was_seasonal {
        let multiplicative = xs.iter().all(|&x| x > 0.0);
        additive_fallback = !multiplicative;
        let idx = seasonal_indices(xs, period, multiplicative);
        for (t, v) in work.iter_mut().enumerate() {
            if multiplicative {
                *v /= idx[t % period];
            } else {
                *v -= idx[t % period];
            }
        }
    }

    let n = work.len() as f64;
    let tbar = (n - 1.0) / 2.0;
    let ybar = mean(&work);
    let sxx: f64 = (0..work.len()).map(|t| (t as f64 - tbar).powi(2)).sum();
    let sxy: f64 = work.iter().enumerate().map(|(t, y)| (t as f64 - tbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    for (t, v) in work.iter_mut().enumerate() {
        *v -= ybar + slope * (t as f64 - tbar);
    }

    let scale = 1.0f64.max(xs.iter().map(|x| x.abs()).sum::<f64>() / n);
    let sd = (work.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    if sd <= 1e-9 * scale {
        work.iter_mut().for_each(|v| *v = 0.0);
    } else {
        let m = mean(&work);
        work.iter_mut().for_each(|v| *v = (*v - m) / sd);
    }
    Ok(ResidualSeries { values: work, was_seasonal, additive_fallback })
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::data("pearson: length mismatch"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::data("pearson: zero-variance input"));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PearsonTest {
    pub r: f64,
    pub p: f64,
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Pearson's r with a two-sided t-test on n - 2 degrees of freedom.
pub fn pearson_test(a: &[f64], b: &[f64]) -> Result<PearsonTest> {
    if a.len() < 3 {
        return Err(Error::data("pearson test needs at least 3 points"));
    }
    let r = pearson(a, b)?;
    let df = (a.len() - 2) as f64;
    let p = if r.abs() >= 1.0 { 0.0 } else { t_two_sided_p(r * (df / (1.0 - r * r)).sqrt(), df) };
    Ok(PearsonTest { r, p })
}

/// 1-based ranks with ties sharing their average rank.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Percentile rank in `[0, 100]` from mid-ranks; a single value maps to 100.
pub fn percentile_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n == 1 {
        return vec![100.0];
    }
    midranks(xs).into_iter().map(|r| 100.0 * (r - 1.0) / (n - 1) as f64).collect()
}

/// Spearman's rho: Pearson correlation of mid-ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::data("spearman needs two equal-length inputs of at least 3 points"));
    }
    pearson(&midranks(xs), &midranks(ys)).map_err(|_| Error::data("spearman: constant input"))
}

/// Gini coefficient of non-negative values.
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::data("gini needs finite non-negative values"));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::data("gini of all-zero values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let weighted: f64 = sorted.iter().enumerate().map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x).sum();
    Ok(weighted / (n * total))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkCorrelation {
    pub group: String,
    pub source: VideoId,
    pub target: VideoId,
    pub r: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupFraction {
    pub group: String,
    pub tested: usize,
    pub significant: usize,
    /// Pairs with a degenerate (constant) residual, excluded from `tested`.
    pub skipped: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub links: Vec<LinkCorrelation>,
    pub groups: Vec<GroupFraction>,
}

/// Tests every pair of every group on preprocessed residuals and reports
/// the fraction with p < 0.05 (either sign).
pub fn correlated_link_fractions(
    groups: &[(String, Vec<(VideoId, VideoId)>)],
    views: impl Fn(&VideoId) -> Option<Vec<f64>> + Sync,
    period: usize,
) -> Result<CorrelationReport> {
    let ids: BTreeSet<&VideoId> = groups.iter().flat_map(|(_, pairs)| pairs.iter().flat_map(|(u, v)| [u, v])).collect();
    let residuals: HashMap<&VideoId, ResidualSeries> = ids
        .into_par_iter()
        .map(|id| {
            let series = views(id).ok_or_else(|| Error::data(format!("no views for {id}")))?;
            Ok((id, preprocess(&series, period)?))
        })
        .collect::<Result<_>>()?;

    let mut report = CorrelationReport::default();
    for (name, pairs) in groups {
        let tests: Vec<Option<PearsonTest>> = pairs
            .par_iter()
            .map(|(u, v)| pearson_test(&residuals[u].values, &residuals[v].values).ok())
            .collect();
        let mut tested = 0;
        let mut significant = 0;
        for ((u, v), t) in pairs.iter().zip(tests) {
            let Some(t) = t else { continue };
            tested += 1;
            if t.p < SIGNIFICANCE {
                significant += 1;
            }
            report.links.push(LinkCorrelation { group: name.clone(), source: u.clone(), target: v.clone(), r: t.r, p: t.p });
        }
        let fraction = if tested > 0 { significant as f64 / tested as f64 } else { 0.0 };
        report.groups.push(GroupFraction {
            group: name.clone(),
            tested,
            significant,
            skipped: pairs.len() - tested,
            fraction,
        });
    }
    Ok(report)
}

/// Convenience wrapper reading window views from a dataset.
pub fn dataset_views(dataset: &Dataset) -> impl Fn(&VideoId) -> Option<Vec<f64>> + Sync + '_ {
    |id| dataset.views(id).map(|v| v.iter().map(|&x| x as f64).collect())
}

/// Uniformly samples `n` distinct ordered pairs `(source, target)` that
/// pass both view filters and never appear in `connected` in either
/// direction.
pub fn sample_random_pairs(
    filters: &ViewFilters,
    connected: &BTreeSet<(VideoId, VideoId)>,
    n: usize,
    seed: u64,
) -> Result<Vec<(VideoId, VideoId)>> {
    let ids: Vec<&VideoId> = filters.means().keys().collect();
    // sources sorted by mean so each target's admissible sources are a suffix
    let mut by_mean: Vec<(f64, usize)> = ids.iter().enumerate().map(|(i, id)| (filters.means()[*id], i)).collect();
    by_mean.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let linked = |a: usize, b: usize| {
        let (u, v) = (ids[a].clone(), ids[b].clone());
        connected.contains(&(u.clone(), v.clone())) || connected.contains(&(v, u))
    };

    let mut blocks: Vec<(usize, usize, Vec<usize>)> = Vec::new(); // (target, suffix start, excluded sorted positions)
    let mut total = 0usize;
    for (t, id) in ids.iter().enumerate() {
        if !filters.target_eligible(id) {
            continue;
        }
        let target_mean = filters.means()[*id];
        let start = by_mean.partition_point(|(m, _)| !filters.source_passes(*m, target_mean));
        let excluded: Vec<usize> = (start..by_mean.len()).filter(|&k| by_mean[k].1 == t || linked(by_mean[k].1, t)).collect();
        let count = by_mean.len() - start - excluded.len();
        if count > 0 {
            total += count;
            blocks.push((t, start, excluded));
        }
    }
    if total < n {
        return Err(Error::data(format!("only {total} eligible unconnected pairs, {n} requested")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, total, n).into_vec();
    picks.sort_unstable();
    let mut out = Vec::with_capacity(n);
    let mut base = 0usize;
    let mut picks = picks.into_iter().peekable();
    for (t, start, excluded) in &blocks {
        let count = by_mean.len() - start - excluded.len();
        while let Some(&k) = picks.peek() {
            if k >= base + count {
                break;
            }
            // k - base-th admissible position in the suffix, skipping excluded ones
            let mut pos = start + (k - base);
            for &e in excluded {
                if e <= pos {
                    pos += 1;
                } else {
                    break;
                }
            }
            out.push((ids[by_mean[pos].1].clone(), ids[*t].clone()));
            picks.next();
        }
        base += count;
    }
    Ok(out)
}
