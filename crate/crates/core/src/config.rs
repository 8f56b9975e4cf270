//! Run configuration resolved from defaults, a flat `key = value` file,
//! `AFLOW_*` environment variables and command-line flags, in increasing
//! order of precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;

use crate::datagen::{GenConfig, Topology};
use crate::error::{Error, Result};
use crate::forecast::{ForecastConfig, ModelKind, NeighborMode};

pub const ENV_PREFIX: &str = "AFLOW_";

/// Every recognised key with its default value.
pub const KEYS: &[(&str, &str)] = &[
    ("data", "data"),
    ("out", "out"),
    ("cutoff", "15"),
    ("window", "63"),
    ("train_days", "56"),
    ("horizon", "7"),
    ("p", "7"),
    ("m_star", "7"),
    ("neighbor_mode", "observed"),
    ("seed", "42"),
    ("threads", "0"),
    ("min_target_mean", "100"),
    ("min_source_ratio", "0.01"),
    ("period", "7"),
    ("date", ""),
    ("min_indegree", "1"),
    ("random_pairs", "1000"),
    ("p_grid", "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.85,0.9,0.95,1"),
    ("trials", "100000"),
    ("models", "naive,snaive,ar,arnet"),
    ("n_videos", "200"),
    ("n_artists", "40"),
    ("edge_density", "0.02"),
    ("targets", ""),
    ("in_degree", "2"),
    ("noise_scale", "0.05"),
    ("presence_min", "0.9"),
    ("presence_max", "1"),
    ("burn_in", "28"),
    ("start_date", "2018-09-01"),
];

/// Keys left out of the manifest echo because they never change results.
pub const NON_RESULT_KEYS: &[&str] = &["out", "threads"];

/// Raw layered settings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn check_key(key: &str, origin: &str) -> Result<()> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(Error::Usage(format!("unknown configuration key {key:?} in {origin}")))
    }
}

impl Settings {
    pub fn defaults() -> Self {
        Settings { values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("{origin}:{}: expected key = value", i + 1)))?;
            let key = k.trim();
            check_key(key, origin)?;
            self.values.insert(key.to_string(), v.trim().to_string());
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies `AFLOW_<KEY>` variables; the key part is lower-cased.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            let key = key.to_ascii_lowercase();
            check_key(&key, "environment")?;
            self.values.insert(key, value);
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        check_key(key, "flags")?;
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key);
        raw.parse().map_err(|e| Error::Usage(format!("{key} = {raw:?}: {e}")))
    }

    fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.get(key).is_empty() { Ok(None) } else { self.parse(key).map(Some) }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| Error::Usage(format!("{key}: {s:?}: {e}"))))
            .collect()
    }

    /// Resolved values that can influence results.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.values.iter().filter(|(k, _)| !NON_RESULT_KEYS.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub cutoff: u32,
    pub window: usize,
    pub forecast: ForecastConfig,
    pub seed: u64,
    pub threads: usize,
    pub min_target_mean: f64,
    pub min_source_ratio: f64,
    pub period: usize,
    pub date: Option<NaiveDate>,
    pub min_indegree: usize,
    pub random_pairs: usize,
    pub p_grid: Vec<f64>,
    pub trials: usize,
    pub models: Vec<ModelKind>,
    pub generator: GenConfig,
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let forecast = ForecastConfig {
            p: s.parse("p")?,
            m_star: s.parse("m_star")?,
            train_days: s.parse("train_days")?,
            horizon: s.parse("horizon")?,
            neighbor_mode: s.parse::<NeighborMode>("neighbor_mode")?,
        };
        forecast.validate()?;
        let window: usize = s.parse("window")?;
        let cutoff: u32 = s.parse("cutoff")?;
        if cutoff == 0 || window == 0 {
            return Err(Error::Usage("cutoff and window must be >= 1".into()));
        }
        let seed = s.parse("seed")?;
        let topology = match s.optional::<usize>("targets")? {
            Some(targets) => Topology::Fixed { targets, in_degree: s.parse("in_degree")? },
            None => Topology::Random { edge_density: s.parse("edge_density")? },
        };
        let generator = GenConfig {
            n_videos: s.parse("n_videos")?,
            n_artists: s.parse("n_artists")?,
            days: window,
            burn_in: s.parse("burn_in")?,
            start_date: s.parse("start_date")?,
            noise_scale: s.parse("noise_scale")?,
            presence_prob: (s.parse("presence_min")?, s.parse("presence_max")?),
            topology,
            seed,
            ..GenConfig::default()
        };
        let p_grid: Vec<f64> = s.list("p_grid")?;
        if p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Usage("p_grid values must lie in [0, 1]".into()));
        }
        let models: Vec<ModelKind> = s.list("models")?;
        if models.is_empty() {
            return Err(Error::Usage("models must name at least one model".into()));
        }
        Ok(RunConfig {
            data: PathBuf::from(s.get("data")),
            out: PathBuf::from(s.get("out")),
            cutoff,
            window,
            forecast,
            seed,
            threads: s.parse("threads")?,
            min_target_mean: s.parse("min_target_mean")?,
            min_source_ratio: s.parse("min_source_ratio")?,
            period: s.parse("period")?,
            date: s.optional("date")?,
            min_indegree: s.parse("min_indegree")?,
            random_pairs: s.parse("random_pairs")?,
            p_grid,
            trials: s.parse("trials")?,
            models,
            generator,
        })
    }
}
