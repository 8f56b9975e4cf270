//! Display and origin probabilities between the relevant and recommended
//! lists of the same (day, source).

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{DynamicNetwork, ListKind, VideoId};
use crate::error::{Error, Result};

/// Inclusive range of list positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionBin {
    pub lo: u32,
    pub hi: u32,
}

impl PositionBin {
    pub const fn new(lo: u32, hi: u32) -> Self {
        PositionBin { lo, hi }
    }

    pub fn contains(&self, position: u32) -> bool {
        (self.lo..=self.hi).contains(&position)
    }

    pub fn width(&self) -> u32 {
        self.hi - self.lo + 1
    }
}

impl fmt::Display for PositionBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}-{}", self.lo, self.hi)
        }
    }
}

pub const DEFAULT_MAX_RELEVANT: u32 = 50;
pub const DEFAULT_MAX_RECOMMENDED: u32 = 15;

pub fn default_recommended_bins() -> Vec<PositionBin> {
    vec![PositionBin::new(1, 1), PositionBin::new(2, 5), PositionBin::new(6, 10), PositionBin::new(11, 15)]
}

pub fn default_relevant_bins() -> Vec<PositionBin> {
    vec![
        PositionBin::new(1, 1),
        PositionBin::new(2, 5),
        PositionBin::new(6, 10),
        PositionBin::new(11, 15),
        PositionBin::new(16, 20),
        PositionBin::new(21, 30),
        PositionBin::new(31, 40),
        PositionBin::new(41, 50),
    ]
}

/// Row-conditional probabilities: row = position on one list, column =
/// position bin on the other list. The row remainder is "not shown".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub bins: Vec<PositionBin>,
    /// Row totals, indexed by position - 1.
    pub totals: Vec<u64>,
    pub counts: Vec<Vec<u64>>,
    pub probs: Vec<Vec<f64>>,
}

impl TransferMatrix {
    pub fn max_position(&self) -> u32 {
        self.totals.len() as u32
    }

    pub fn prob(&self, position: u32, bin: usize) -> f64 {
        self.probs[position as usize - 1][bin]
    }

    pub fn row_sum(&self, position: u32) -> f64 {
        self.probs[position as usize - 1].iter().sum()
    }
}

pub type DisplayProbabilityMatrix = TransferMatrix;

fn check_bins(bins: &[PositionBin]) -> Result<()> {
    if bins.is_empty() {
        return Err(Error::data("no position bins"));
    }
    for b in bins {
        if b.lo == 0 || b.lo > b.hi {
            return Err(Error::data(format!("invalid position bin {}-{}", b.lo, b.hi)));
        }
    }
    for w in bins.windows(2) {
        if w[1].lo <= w[0].hi {
            return Err(Error::data("position bins must be ordered and disjoint"));
        }
    }
    Ok(())
}

struct Tally {
    totals: Vec<u64>,
    counts: Vec<Vec<u64>>,
    pairs: u64,
}

impl Tally {
    fn new(rows: usize, cols: usize) -> Self {
        Tally { totals: vec![0; rows], counts: vec![vec![0; cols]; rows], pairs: 0 }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.totals.iter_mut().zip(other.totals) {
            *a += b;
        }
        for (ra, rb) in self.counts.iter_mut().zip(other.counts) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        self.pairs += other.pairs;
        self
    }
}

/// Probability that an item at position r of the `from` list lands in
/// each bin of the `to` list, over (day, source) pairs holding both lists.
pub fn transfer_matrix(net: &DynamicNetwork, from: ListKind, to: ListKind, bins: &[PositionBin], max_from: u32) -> Result<TransferMatrix> {
    check_bins(bins)?;
    if max_from == 0 {
        return Err(Error::data("maximum position must be >= 1"));
    }
    let rows = max_from as usize;
    let cols = bins.len();
    let tally = net
        .snapshots()
        .par_iter()
        .map(|snap| {
            let mut t = Tally::new(rows, cols);
            let to_lists = snap.lists(to);
            for (source, list) in snap.lists(from) {
                let Some(other) = to_lists.get(source) else { continue };
                t.pairs += 1;
                let other_pos: HashMap<&VideoId, u32> = other.entries().iter().map(|e| (&e.target, e.position)).collect();
                for e in list.entries().iter().filter(|e| e.position <= max_from) {
                    let r = e.position as usize - 1;
                    t.totals[r] += 1;
                    if let Some(&q) = other_pos.get(&e.target) {
                        if let Some(b) = bins.iter().position(|b| b.contains(q)) {
                            t.counts[r][b] += 1;
                        }
                    }
                }
            }
            t
        })
        .reduce(|| Tally::new(rows, cols), Tally::merge);
    if tally.pairs == 0 {
        return Err(Error::data("no (day, source) pairs with both list kinds"));
    }
    let probs = tally
        .counts
        .iter()
        .zip(&tally.totals)
        .map(|(row, &n)| row.iter().map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 }).collect())
        .collect();
    Ok(TransferMatrix { bins: bins.to_vec(), totals: tally.totals, counts: tally.counts, probs })
}

/// Relevant position -> recommended bin.
pub fn display_probability_matrix(net: &DynamicNetwork, bins: &[PositionBin], max_rel: u32) -> Result<DisplayProbabilityMatrix> {
    transfer_matrix(net, ListKind::Relevant, ListKind::Recommended, bins, max_rel)
}

/// Recommended position -> relevant bin.
pub fn origin_probability_matrix(net: &DynamicNetwork, bins_rel: &[PositionBin], max_rec: u32) -> Result<TransferMatrix> {
    transfer_matrix(net, ListKind::Recommended, ListKind::Relevant, bins_rel, max_rec)
}
