//! Forecast accuracy and network attribution.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{Dataset, VideoId, VideoMeta};
use crate::error::{Error, Result};
use crate::forecast::{network_inflow, ArnetModel, FittedModel, ForecastConfig, VideoForecast};
use crate::stats::{percentile_ranks, quantile_sorted};

pub const DEFAULT_OUTLIER_BINS: usize = 10;

/// One SMAPE term on the 0..200 scale; zero when both values are zero.
pub fn smape_term(y: f64, y_hat: f64) -> f64 {
    let denom = y.abs() + y_hat.abs();
    if denom == 0.0 {
        0.0
    } else {
        200.0 * (y - y_hat).abs() / denom
    }
}

/// Symmetric mean absolute percentage error of one forecast.
pub fn smape(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::data(format!("smape needs equal non-empty lengths, got {} and {}", y.len(), y_hat.len())));
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| smape_term(*a, *b)).sum::<f64>() / y.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_video: BTreeMap<VideoId, f64>,
    /// Mean over videos for horizon day `h + 1`.
    pub per_horizon: Vec<f64>,
    pub overall: f64,
}

pub fn evaluate_forecasts(forecasts: &BTreeMap<VideoId, VideoForecast>) -> Result<EvalReport> {
    let horizon = forecasts
        .values()
        .next()
        .map(|f| f.y_true.len())
        .ok_or_else(|| Error::data("no forecasts to evaluate"))?;
    let mut per_video = BTreeMap::new();
    let mut per_horizon = vec![0.0; horizon];
    for (id, f) in forecasts {
        if f.y_true.len() != horizon || f.y_pred.len() != horizon {
            return Err(Error::data(format!("forecast of {id} does not span {horizon} days")));
        }
        per_video.insert(id.clone(), smape(&f.y_true, &f.y_pred)?);
        for (h, (y, p)) in f.y_true.iter().zip(&f.y_pred).enumerate() {
            per_horizon[h] += smape_term(*y, *p);
        }
    }
    let n = forecasts.len() as f64;
    per_horizon.iter_mut().for_each(|v| *v /= n);
    let overall = per_video.values().sum::<f64>() / n;
    Ok(EvalReport { per_video, per_horizon, overall })
}

/// Share of the predicted horizon views that comes from network terms.
pub fn network_contribution(model: &ArnetModel, neighbor_values: &[Vec<f64>], forecast: &[f64]) -> Result<f64> {
    let inflow: f64 = network_inflow(model, neighbor_values, forecast.len())?.iter().sum();
    let total: f64 = forecast.iter().sum();
    if total <= 0.0 {
        return Err(Error::data("network contribution of a zero forecast"));
    }
    Ok(inflow / total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtistRow {
    pub artist_id: String,
    pub views: f64,
    pub views_without_network: f64,
    pub pct_with: f64,
    pub pct_without: f64,
    pub pct_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContributionReport {
    pub eta: BTreeMap<VideoId, f64>,
    /// Targets whose predicted horizon total is zero.
    pub zero_forecast: Vec<VideoId>,
    pub mean_eta: Option<f64>,
    pub same_artist_share: f64,
    pub artists: Vec<ArtistRow>,
    pub outliers: Vec<String>,
}

/// Share of estimated network views carried by edges whose endpoints
/// share an artist. Zero when there are no network views.
pub fn same_artist_contribution(
    models: &BTreeMap<VideoId, FittedModel>,
    forecasts: &BTreeMap<VideoId, VideoForecast>,
    metadata: &BTreeMap<VideoId, VideoMeta>,
) -> Result<f64> {
    let mut same = 0.0;
    let mut total = 0.0;
    for (v, model) in models {
        let Some(m) = model.as_arnet() else { continue };
        let f = forecasts.get(v).ok_or_else(|| Error::data(format!("no forecast for {v}")))?;
        let artist_v = metadata.get(v).map(|x| &x.artist_id);
        for ((u, b), vals) in m.beta.iter().zip(&f.neighbor_values) {
            let flow = b * vals.iter().sum::<f64>();
            total += flow;
            if artist_v.is_some() && metadata.get(u).map(|x| &x.artist_id) == artist_v {
                same += flow;
            }
        }
    }
    Ok(if total > 0.0 { same / total } else { 0.0 })
}

/// Percentile shift of each artist when estimated network views are
/// removed. `videos` holds (artist, observed views, network views).
pub fn artist_shift(videos: &[(String, f64, f64)]) -> Vec<ArtistRow> {
    let mut totals: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for (artist, views, inflow) in videos {
        let t = totals.entry(artist).or_default();
        t.0 += views;
        t.1 += (views - inflow).max(0.0);
    }
    let with: Vec<f64> = totals.values().map(|t| t.0).collect();
    let without: Vec<f64> = totals.values().map(|t| t.1).collect();
    let (pw, po) = (percentile_ranks(&with), percentile_ranks(&without));
    totals
        .keys()
        .enumerate()
        .map(|(i, a)| ArtistRow {
            artist_id: a.to_string(),
            views: with[i],
            views_without_network: without[i],
            pct_with: pw[i],
            pct_without: po[i],
            pct_change: pw[i] - po[i],
        })
        .collect()
}

/// Artist shift over the test days of `config`, using observed neighbour
/// views for the network terms of each fitted ARNet target.
pub fn artist_percentile_change(dataset: &Dataset, models: &BTreeMap<VideoId, FittedModel>, config: &ForecastConfig) -> Result<Vec<ArtistRow>> {
    let (start, end) = (config.train_days, config.train_days + config.horizon);
    let test_views = |id: &VideoId| -> Result<Vec<f64>> {
        let v = dataset.views(id).ok_or_else(|| Error::data(format!("no views for {id}")))?;
        v.get(start..end)
            .map(|s| s.iter().map(|&x| x as f64).collect())
            .ok_or_else(|| Error::data(format!("series of {id} shorter than {end} days")))
    };
    let videos: Vec<(String, f64, f64)> = dataset
        .metadata()
        .par_iter()
        .map(|(id, meta)| {
            let views: f64 = test_views(id)?.iter().sum();
            let inflow = match models.get(id).and_then(FittedModel::as_arnet) {
                Some(m) => {
                    let nb = m.beta.iter().map(|(u, _)| test_views(u)).collect::<Result<Vec<_>>>()?;
                    network_inflow(m, &nb, config.horizon)?.iter().sum()
                }
                None => 0.0,
            };
            Ok((meta.artist_id.clone(), views, inflow))
        })
        .collect::<Result<_>>()?;
    Ok(artist_shift(&videos))
}

/// Artists whose change lies outside the Tukey fences of their bin, with
/// bins of equal width over the without-network percentile.
pub fn outlier_artists(rows: &[ArtistRow], n_bins: usize) -> Result<Vec<String>> {
    if rows.is_empty() || n_bins == 0 {
        return Err(Error::data("outlier detection needs rows and at least one bin"));
    }
    let width = 100.0 / n_bins as f64;
    let mut bins: Vec<Vec<&ArtistRow>> = vec![Vec::new(); n_bins];
    for r in rows {
        let b = ((r.pct_without / width).floor() as usize).min(n_bins - 1);
        bins[b].push(r);
    }
    let mut flagged = Vec::new();
    for bin in bins.iter().filter(|b| !b.is_empty()) {
        let mut changes: Vec<f64> = bin.iter().map(|r| r.pct_change).collect();
        changes.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile_sorted(&changes, 0.25), quantile_sorted(&changes, 0.75));
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        flagged.extend(bin.iter().filter(|r| r.pct_change < lo || r.pct_change > hi).map(|r| r.artist_id.clone()));
    }
    flagged.sort();
    Ok(flagged)
}

/// Contribution ratios, same-artist share and artist shifts of ARNet
/// forecasts.
pub fn contribution_report(
    dataset: &Dataset,
    models: &BTreeMap<VideoId, FittedModel>,
    forecasts: &BTreeMap<VideoId, VideoForecast>,
    config: &ForecastConfig,
) -> Result<ContributionReport> {
    let mut eta = BTreeMap::new();
    let mut zero_forecast = Vec::new();
    for (id, model) in models {
        let Some(m) = model.as_arnet() else { continue };
        let f = forecasts.get(id).ok_or_else(|| Error::data(format!("no forecast for {id}")))?;
        if f.y_pred.iter().sum::<f64>() <= 0.0 {
            zero_forecast.push(id.clone());
            continue;
        }
        let e = network_contribution(m, &f.neighbor_values, &f.y_pred)?;
        if !(-1e-12..=1.0 + 1e-12).contains(&e) {
            return Err(Error::Numerical(format!("contribution ratio {e} of {id} outside [0, 1]")));
        }
        eta.insert(id.clone(), e);
    }
    let mean_eta = (!eta.is_empty()).then(|| eta.values().sum::<f64>() / eta.len() as f64);
    let artists = artist_percentile_change(dataset, models, config)?;
    let outliers = outlier_artists(&artists, DEFAULT_OUTLIER_BINS)?;
    Ok(ContributionReport {
        eta,
        zero_forecast,
        mean_eta,
        same_artist_share: same_artist_contribution(models, forecasts, dataset.metadata())?,
        artists,
        outliers,
    })
}
