#![allow(dead_code)]

use aflow::graph::{Component, DirectedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_digraph(n: usize, p: f64, seed: u64) -> DirectedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adj = (0..n)
        .map(|u| (0..n).filter(|&v| v != u && rng.random::<f64>() < p).collect())
        .collect();
    DirectedGraph::from_indices(n, adj)
}

/// Reflexive transitive closure by Warshall's algorithm.
pub fn closure(g: &DirectedGraph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for (u, v) in g.edges() {
        r[u][v] = true;
    }
    for k in 0..n {
        let via = r[k].clone();
        for row in r.iter_mut() {
            if row[k] {
                for (cell, &reach) in row.iter_mut().zip(&via) {
                    *cell |= reach;
                }
            }
        }
    }
    r
}

/// Mutual-reachability classes, each sorted, ordered by smallest member.
pub fn scc_oracle(g: &DirectedGraph) -> Vec<Vec<usize>> {
    let r = closure(g);
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| r[i][j] && r[j][i]).collect();
        for &j in &class {
            seen[j] = true;
        }
        out.push(class);
    }
    out
}

pub fn bowtie_oracle(g: &DirectedGraph) -> Vec<Component> {
    let r = closure(g);
    let n = g.node_count();
    let classes = scc_oracle(g);
    // classes are ordered by smallest member, and node names follow index order
    let best = classes.iter().map(Vec::len).max().unwrap_or(0);
    let core = classes.iter().find(|c| c.len() == best).cloned().unwrap_or_default();
    let l = core[0];
    let mut out = vec![Component::Disconnected; n];
    for i in 0..n {
        out[i] = if core.contains(&i) {
            Component::Lscc
        } else if r[i][l] {
            Component::In
        } else if r[l][i] {
            Component::Out
        } else {
            Component::Disconnected
        };
    }
    let ins: Vec<usize> = (0..n).filter(|&i| out[i] == Component::In).collect();
    let outs: Vec<usize> = (0..n).filter(|&i| out[i] == Component::Out).collect();
    for i in 0..n {
        if out[i] == Component::Disconnected && (ins.iter().any(|&a| r[a][i]) || outs.iter().any(|&b| r[i][b])) {
            out[i] = Component::Tendrils;
        }
    }
    out
}

/// Two-sided Student-t tail probability by Simpson integration.
///
/// With `x = sqrt(df) tan(theta)` the density becomes proportional to
/// `cos(theta)^(df - 1)` on `[0, pi/2)`, so the upper tail from `|t|` is a
/// ratio of two smooth integrals.
pub fn t_p_oracle(t: f64, df: f64) -> f64 {
    let f = |theta: f64| theta.cos().powf(df - 1.0);
    let simpson = |a: f64, b: f64| {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let half = std::f64::consts::FRAC_PI_2;
    let theta0 = (t.abs() / df.sqrt()).atan();
    simpson(theta0, half) / simpson(0.0, half)
}

/// Spearman by brute-force mid-ranks: each rank counts strictly smaller
/// values plus half the ties.
pub fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let less = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Least squares via Gaussian elimination with partial pivoting on the
/// normal equations.
pub fn least_squares_oracle(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = rows[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, &target) in rows.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
            a[i][k] += row[i] * target;
        }
    }
    for col in 0..k {
        let pivot = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        let pivot_row = a[col].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != col {
                let factor = row[col] / pivot_row[col];
                for (cell, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                    *cell -= factor * p;
                }
            }
        }
    }
    (0..k).map(|i| a[i][k] / a[i][i]).collect()
}
