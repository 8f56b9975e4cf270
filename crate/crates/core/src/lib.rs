//! Measurement and forecasting toolkit for dynamic item-to-item
//! recommendation networks.
//!
//! The crate covers the whole path from raw daily snapshots of ranked
//! recommendation lists to per-link attention-flow estimates:
//!
//! * [`data_model`] ingests and validates snapshots, view series and metadata.
//! * [`datagen`] builds synthetic datasets with known ground truth.
//! * [`graph`] measures bow-tie structure, degree statistics and link churn.
//! * [`alignment`] relates the relevant and recommended lists.
//! * [`persistence`] extracts the persistent network by majority smoothing.
//! * [`stats`] holds preprocessing and correlation tests.
//! * [`forecast`] fits Naive, Seasonal Naive, AR and ARNet forecasters.
//! * [`evaluation`] computes SMAPE and network contribution ratios.
//! * [`cli`] wires everything into the `aflow` command.

pub mod alignment;
pub mod cli;
pub mod config;
pub mod data_model;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod forecast;
pub mod graph;
pub mod optim;
pub mod persistence;
pub mod stats;

pub use error::{Error, Result};
