//! Naive, Seasonal Naive, AR and ARNet forecasters under a chronological
//! train/test split.
//!
//! ARNet predicts a target's views as an autoregression on its own past
//! plus a weighted sum of the same-day views of its incoming persistent
//! neighbours:
//!
//! ```text
//! y_v[t] ~ sum_{tau=1..p} alpha_tau * y_v[t - tau] + sum_{u -> v} beta_u * y_u[t]
//! ```
//!
//! with `alpha >= 0` and `0 <= beta <= 1`, fitted by minimising a smoothed
//! training SMAPE with [`crate::optim::minimize`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{Dataset, VideoId};
use crate::error::{Error, Result};
use crate::graph::{strongly_connected_components, DirectedGraph};
use crate::optim::{minimize, Bounds, MinimizerConfig, Termination};
use crate::persistence::PersistentNetwork;

/// Denominator smoothing of the training objective.
pub const SMAPE_EPSILON: f64 = 1e-8;
/// Ridge added to the AR normal equations.
pub const AR_RIDGE: f64 = 1e-8;
pub const INITIAL_BETA: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborMode {
    /// Neighbour views on test days are taken as observed.
    #[default]
    Observed,
    /// Neighbour views on test days are themselves forecast.
    Forecast,
}

impl FromStr for NeighborMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observed" => Ok(NeighborMode::Observed),
            "forecast" => Ok(NeighborMode::Forecast),
            _ => Err(Error::Usage(format!("unknown neighbor mode {s:?} (observed|forecast)"))),
        }
    }
}

impl fmt::Display for NeighborMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeighborMode::Observed => "observed",
            NeighborMode::Forecast => "forecast",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub p: usize,
    pub m_star: usize,
    pub train_days: usize,
    pub horizon: usize,
    pub neighbor_mode: NeighborMode,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig { p: 7, m_star: 7, train_days: 56, horizon: 7, neighbor_mode: NeighborMode::Observed }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.m_star == 0 {
            return Err(Error::Usage("lag order and seasonal period must be >= 1".into()));
        }
        if self.train_days < self.p + 1 {
            return Err(Error::Usage(format!("train_days {} must be >= p + 1 = {}", self.train_days, self.p + 1)));
        }
        if self.horizon == 0 {
            return Err(Error::Usage("horizon must be >= 1".into()));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        self.train_days + self.horizon
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Naive,
    #[serde(rename = "snaive")]
    SeasonalNaive,
    Ar,
    Arnet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Naive, ModelKind::SeasonalNaive, ModelKind::Ar, ModelKind::Arnet];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Naive => "naive",
            ModelKind::SeasonalNaive => "snaive",
            ModelKind::Ar => "ar",
            ModelKind::Arnet => "arnet",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown model {s:?} (naive|snaive|ar|arnet)")))
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Every horizon value is the last training observation.
pub fn predict_naive(history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let last = *history.last().ok_or_else(|| Error::data("naive forecast of an empty history"))?;
    Ok(vec![last; horizon])
}

/// Repeats the last seasonal cycle of the history.
pub fn predict_seasonal_naive(history: &[f64], m_star: usize, horizon: usize) -> Result<Vec<f64>> {
    if m_star == 0 || history.len() < m_star {
        return Err(Error::data(format!("seasonal naive needs at least {m_star} observations")));
    }
    let cycle = &history[history.len() - m_star..];
    Ok((0..horizon).map(|h| cycle[h % m_star]).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    /// `alpha[tau - 1]` weighs `y[t - tau]`.
    pub alpha: Vec<f64>,
}

fn lag_value(alpha: &[f64], series: &[f64], t: usize) -> f64 {
    alpha.iter().enumerate().map(|(k, a)| a * series[t - k - 1]).sum()
}

/// Least-squares AR(p) without intercept on one-step-ahead targets.
pub fn fit_ar(series: &[f64], p: usize) -> Result<ArModel> {
    if p == 0 {
        return Err(Error::data("AR order must be >= 1"));
    }
    if series.len() < 2 * p + 1 {
        return Err(Error::data(format!("AR({p}) needs at least {} training points, got {}", 2 * p + 1, series.len())));
    }
    let rows = series.len() - p;
    let x = DMatrix::from_fn(rows, p, |r, k| series[r + p - k - 1]);
    let y = DVector::from_iterator(rows, series[p..].iter().copied());
    let xtx = x.transpose() * &x + DMatrix::identity(p, p) * AR_RIDGE;
    let xty = x.transpose() * y;
    let alpha = match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => xtx.lu().solve(&xty).ok_or_else(|| Error::Numerical("singular AR normal equations".into()))?,
    };
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numerical("non-finite AR coefficients".into()));
    }
    Ok(ArModel { alpha: alpha.iter().copied().collect() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArnetModel {
    pub alpha: Vec<f64>,
    /// Link strength of each incoming neighbour, in neighbour order.
    pub beta: Vec<(VideoId, f64)>,
    pub diagnostics: FitDiagnostics,
}

impl ArnetModel {
    pub fn beta_values(&self) -> Vec<f64> {
        self.beta.iter().map(|(_, b)| *b).collect()
    }

    /// Same coefficients with every link strength set to zero.
    pub fn without_network(&self) -> ArnetModel {
        ArnetModel { beta: self.beta.iter().map(|(u, _)| (u.clone(), 0.0)).collect(), ..self.clone() }
    }
}

/// Mean smoothed SMAPE of one-step-ahead ARNet predictions over the rows
/// `p..target.len()`, with its gradient.
pub fn arnet_objective(params: &[f64], target: &[f64], neighbors: &[&[f64]], p: usize, grad: &mut [f64]) -> f64 {
    let (alpha, beta) = params.split_at(p);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let rows = target.len() - p;
    let mut total = 0.0;
    for t in p..target.len() {
        let mut pred = lag_value(alpha, target, t);
        for (b, n) in beta.iter().zip(neighbors) {
            pred += b * n[t];
        }
        let y = target[t];
        let err = y - pred;
        let denom = y.abs() + pred.abs() + SMAPE_EPSILON;
        total += err.abs() / denom;
        let sign_err = if err > 0.0 { 1.0 } else if err < 0.0 { -1.0 } else { 0.0 };
        let d_pred = (-sign_err * denom - err.abs() * pred.signum()) / (denom * denom);
        for k in 0..p {
            grad[k] += d_pred * target[t - k - 1];
        }
        for (j, n) in neighbors.iter().enumerate() {
            grad[p + j] += d_pred * n[t];
        }
    }
    let scale = 200.0 / rows as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    total * scale
}

/// Fits ARNet on the training slices. `neighbors` are aligned with
/// `target` and ordered like `neighbor_ids`. With no neighbours this is a
/// non-negative AR fit.
pub fn fit_arnet(target: &[f64], neighbor_ids: &[VideoId], neighbors: &[&[f64]], p: usize) -> Result<ArnetModel> {
    fit_arnet_with(target, neighbor_ids, neighbors, p, &MinimizerConfig::default())
}

pub fn fit_arnet_with(
    target: &[f64],
    neighbor_ids: &[VideoId],
    neighbors: &[&[f64]],
    p: usize,
    optimizer: &MinimizerConfig,
) -> Result<ArnetModel> {
    if neighbor_ids.len() != neighbors.len() {
        return Err(Error::data("neighbour ids and series differ in count"));
    }
    if p == 0 || target.len() < p + 1 {
        return Err(Error::data(format!("ARNet with p = {p} needs more than {p} training points")));
    }
    if neighbors.iter().any(|n| n.len() != target.len()) {
        return Err(Error::data("neighbour series not aligned with the target"));
    }
    if target.iter().chain(neighbors.iter().flat_map(|n| n.iter())).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Numerical("ARNet inputs must be finite and non-negative".into()));
    }
    let k = neighbors.len();
    let lower = vec![0.0; p + k];
    let mut upper = vec![f64::INFINITY; p];
    upper.extend(std::iter::repeat_n(1.0, k));
    let bounds = Bounds::new(lower, upper)?;
    let mut x0 = vec![1.0 / p as f64; p];
    x0.extend(std::iter::repeat_n(INITIAL_BETA, k));

    let result = minimize(|x, g| arnet_objective(x, target, neighbors, p, g), &x0, &bounds, optimizer)?;
    if !result.value.is_finite() {
        return Err(Error::Numerical("ARNet objective diverged".into()));
    }
    let mut params = result.x;
    bounds.project(&mut params);
    let beta = neighbor_ids.iter().cloned().zip(params[p..].iter().copied()).collect();
    params.truncate(p);
    Ok(ArnetModel {
        alpha: params,
        beta,
        diagnostics: FitDiagnostics {
            iterations: result.iterations,
            objective: result.value,
            converged: result.termination == Termination::ProjectedGradient,
        },
    })
}

/// Recursive multi-step forecast of `alpha`-lags plus network terms.
/// `history` is the training series; `network[h]` is the network inflow
/// on horizon day `h`. Outputs are clamped at zero and the clamped values
/// feed later lags.
fn recursive_forecast(alpha: &[f64], history: &[f64], network: &[f64]) -> Result<Vec<f64>> {
    let p = alpha.len();
    if history.len() < p {
        return Err(Error::data(format!("forecast needs {p} observations of history")));
    }
    let mut series = history.to_vec();
    for &inflow in network {
        let t = series.len();
        let pred = (lag_value(alpha, &series, t) + inflow).max(0.0);
        series.push(pred);
    }
    Ok(series.split_off(history.len()))
}

/// Network inflow `sum_u beta_u * y_u[h]` for each horizon day.
pub fn network_inflow(model: &ArnetModel, neighbor_values: &[Vec<f64>], horizon: usize) -> Result<Vec<f64>> {
    if neighbor_values.len() != model.beta.len() {
        return Err(Error::data(format!(
            "model has {} neighbours, {} neighbour series supplied",
            model.beta.len(),
            neighbor_values.len()
        )));
    }
    (0..horizon)
        .map(|h| {
            model.beta.iter().zip(neighbor_values).try_fold(0.0, |acc, ((u, b), vals)| {
                let v = vals.get(h).ok_or_else(|| Error::data(format!("missing value of neighbour {u} on horizon day {}", h + 1)))?;
                Ok(acc + b * v)
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedModel {
    Naive,
    #[serde(rename = "snaive")]
    SeasonalNaive { m_star: usize },
    Ar(ArModel),
    Arnet(ArnetModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Naive => ModelKind::Naive,
            FittedModel::SeasonalNaive { .. } => ModelKind::SeasonalNaive,
            FittedModel::Ar(_) => ModelKind::Ar,
            FittedModel::Arnet(_) => ModelKind::Arnet,
        }
    }

    pub fn as_arnet(&self) -> Option<&ArnetModel> {
        match self {
            FittedModel::Arnet(m) => Some(m),
            _ => None,
        }
    }
}

/// Horizon forecast of one model. `neighbor_values[j][h]` is the value of
/// the j-th incoming neighbour on horizon day h (ARNet only).
pub fn forecast(model: &FittedModel, history: &[f64], neighbor_values: &[Vec<f64>], horizon: usize) -> Result<Vec<f64>> {
    let out = match model {
        FittedModel::Naive => predict_naive(history, horizon)?,
        FittedModel::SeasonalNaive { m_star } => predict_seasonal_naive(history, *m_star, horizon)?,
        FittedModel::Ar(ar) => recursive_forecast(&ar.alpha, history, &vec![0.0; horizon])?,
        FittedModel::Arnet(m) => recursive_forecast(&m.alpha, history, &network_inflow(m, neighbor_values, horizon)?)?,
    };
    Ok(out.into_iter().map(|v| v.max(0.0)).collect())
}

/// Target videos with their incoming persistent neighbours.
pub fn forecast_targets(pn: &PersistentNetwork) -> BTreeMap<VideoId, Vec<VideoId>> {
    pn.in_neighbors()
}

fn series_f64(dataset: &Dataset, id: &VideoId, len: usize) -> Result<Vec<f64>> {
    let v = dataset.views(id).ok_or_else(|| Error::data(format!("no views for {id}")))?;
    if v.len() < len {
        return Err(Error::data(format!("series of {id} has {} days, {len} needed", v.len())));
    }
    Ok(v[..len].iter().map(|&x| x as f64).collect())
}

/// Fits one model kind for every target of the persistent network.
/// Targets are fitted in parallel; the result is keyed by id, so it does
/// not depend on scheduling.
pub fn fit_all(kind: ModelKind, dataset: &Dataset, pn: &PersistentNetwork, config: &ForecastConfig) -> Result<BTreeMap<VideoId, FittedModel>> {
    config.validate()?;
    if dataset.window().len < config.window_len() {
        return Err(Error::Usage(format!(
            "window of {} days is shorter than train_days + horizon = {}",
            dataset.window().len,
            config.window_len()
        )));
    }
    let targets: Vec<(VideoId, Vec<VideoId>)> = forecast_targets(pn).into_iter().collect();
    targets
        .par_iter()
        .map(|(id, neighbors)| {
            let train = series_f64(dataset, id, config.train_days)?;
            let model = match kind {
                ModelKind::Naive => FittedModel::Naive,
                ModelKind::SeasonalNaive => FittedModel::SeasonalNaive { m_star: config.m_star },
                ModelKind::Ar => FittedModel::Ar(fit_ar(&train, config.p)?),
                ModelKind::Arnet => {
                    let series: Vec<Vec<f64>> =
                        neighbors.iter().map(|u| series_f64(dataset, u, config.train_days)).collect::<Result<_>>()?;
                    let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
                    FittedModel::Arnet(fit_arnet(&train, neighbors, &refs, config.p)?)
                }
            };
            Ok((id.clone(), model))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoForecast {
    pub y_true: Vec<f64>,
    pub y_pred: Vec<f64>,
    /// Neighbour values used on each horizon day (ARNet only), aligned
    /// with the model's `beta`.
    pub neighbor_values: Vec<Vec<f64>>,
}

/// Horizon forecasts for every fitted target.
pub fn forecast_all(
    models: &BTreeMap<VideoId, FittedModel>,
    dataset: &Dataset,
    config: &ForecastConfig,
) -> Result<BTreeMap<VideoId, VideoForecast>> {
    config.validate()?;
    let (train, horizon) = (config.train_days, config.horizon);
    let observed = |u: &VideoId| -> Result<Vec<f64>> { Ok(series_f64(dataset, u, train + horizon)?[train..].to_vec()) };

    let uses_forecast_mode = config.neighbor_mode == NeighborMode::Forecast;
    let order: Vec<Vec<VideoId>> = if uses_forecast_mode {
        upstream_first_components(models)?
    } else {
        vec![models.keys().cloned().collect()]
    };

    let mut out: BTreeMap<VideoId, VideoForecast> = BTreeMap::new();
    for component in order {
        let members: BTreeSet<&VideoId> = component.iter().collect();
        let batch: Vec<(VideoId, VideoForecast)> = component
            .par_iter()
            .map(|id| {
                let model = &models[id];
                let full = series_f64(dataset, id, train + horizon)?;
                let neighbor_values = match model {
                    FittedModel::Arnet(m) => m
                        .beta
                        .iter()
                        .map(|(u, _)| {
                            if !uses_forecast_mode {
                                return observed(u);
                            }
                            match out.get(u) {
                                Some(f) if !members.contains(u) => Ok(f.y_pred.clone()),
                                _ => predict_seasonal_naive(&series_f64(dataset, u, train)?, config.m_star, horizon),
                            }
                        })
                        .collect::<Result<Vec<_>>>()?,
                    _ => Vec::new(),
                };
                let y_pred = forecast(model, &full[..train], &neighbor_values, horizon)?;
                Ok((id.clone(), VideoForecast { y_true: full[train..].to_vec(), y_pred, neighbor_values }))
            })
            .collect::<Result<_>>()?;
        out.extend(batch);
    }
    Ok(out)
}

/// Strongly connected groups of modelled targets, upstream groups first.
fn upstream_first_components(models: &BTreeMap<VideoId, FittedModel>) -> Result<Vec<Vec<VideoId>>> {
    let edges: Vec<(VideoId, VideoId)> = models
        .iter()
        .filter_map(|(v, m)| m.as_arnet().map(|a| (v, a)))
        .flat_map(|(v, a)| a.beta.iter().filter(|(u, _)| models.contains_key(u)).map(move |(u, _)| (u.clone(), v.clone())))
        .collect();
    let g = DirectedGraph::new(models.keys().cloned(), edges)?;
    let mut comps = strongly_connected_components(&g);
    comps.reverse();
    Ok(comps.into_iter().map(|c| c.into_iter().map(|i| g.nodes()[i].clone()).collect()).collect())
}
