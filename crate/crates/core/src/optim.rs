//! Box-constrained limited-memory quasi-Newton minimiser.
//!
//! Directions come from the usual two-loop recursion restricted to the
//! free variables (those not held at a bound by their gradient); steps
//! follow the projected path `P(x + t d)` with Armijo backtracking, so
//! every accepted iterate is feasible and the objective never increases.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::data("bound vectors differ in length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::data("lower bound above upper bound"));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Infinity norm of `P(x - g) - x`.
    pub fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .zip(g)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((xi, gi), (l, u))| ((xi - gi).clamp(*l, *u) - xi).abs())
            .fold(0.0, f64::max)
    }

    fn is_fixed(&self, i: usize, x: f64, g: f64) -> bool {
        (x <= self.lower[i] && g > 0.0) || (x >= self.upper[i] && g < 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizerConfig {
    pub memory: usize,
    pub max_iterations: usize,
    pub projected_gradient_tolerance: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        MinimizerConfig {
            memory: 10,
            max_iterations: 500,
            projected_gradient_tolerance: 1e-6,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ProjectedGradient,
    MaxIterations,
    /// No feasible decrease along either the quasi-Newton or the steepest
    /// descent path.
    NoProgress,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct History {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
}

impl History {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy <= 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() || sy <= 0.0 {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// `-H g` restricted to the free coordinates.
    fn direction(&self, g: &[f64], free: &[bool]) -> Vec<f64> {
        let mut q: Vec<f64> = g.iter().zip(free).map(|(gi, &f)| if f { *gi } else { 0.0 }).collect();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = self.pairs.back().map(|(s, y, _)| dot(s, y) / dot(y, y)).unwrap_or(1.0);
        for qi in &mut q {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        q.iter().zip(free).map(|(qi, &f)| if f { -qi } else { 0.0 }).collect()
    }
}

/// Minimises `objective` over `bounds` from `x0`. The objective writes the
/// gradient into its second argument and returns the value.
pub fn minimize<F>(mut objective: F, x0: &[f64], bounds: &Bounds, config: &MinimizerConfig) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    if bounds.len() != n {
        return Err(Error::data("bounds and starting point differ in length"));
    }
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("objective not finite at the starting point".into()));
    }
    let mut history = History { pairs: VecDeque::with_capacity(config.memory), capacity: config.memory.max(1) };
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    while iterations < config.max_iterations {
        if bounds.projected_gradient_norm(&x, &g) < config.projected_gradient_tolerance {
            termination = Termination::ProjectedGradient;
            break;
        }
        let free: Vec<bool> = (0..n).map(|i| !bounds.is_fixed(i, x[i], g[i])).collect();
        let mut accepted = None;
        for attempt in 0..2 {
            let steepest = attempt == 1 || history.pairs.is_empty();
            let mut d = if steepest {
                g.iter().zip(&free).map(|(gi, &f)| if f { -gi } else { 0.0 }).collect()
            } else {
                history.direction(&g, &free)
            };
            if dot(&d, &g) >= 0.0 {
                d = g.iter().zip(&free).map(|(gi, &f)| if f { -gi } else { 0.0 }).collect();
            }
            let mut step = if steepest {
                let norm = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if norm > 0.0 { (1.0 / norm).min(1.0) } else { 0.0 }
            } else {
                1.0
            };
            for _ in 0..config.max_backtracks {
                for i in 0..n {
                    x_new[i] = x[i] + step * d[i];
                }
                bounds.project(&mut x_new);
                let decrease: f64 = (0..n).map(|i| g[i] * (x_new[i] - x[i])).sum();
                if x_new == x {
                    break;
                }
                let f_new = objective(&x_new, &mut g_new);
                if f_new.is_finite() && f_new <= f + config.armijo * decrease.min(0.0) && f_new <= f {
                    accepted = Some(f_new);
                    break;
                }
                step *= 0.5;
            }
            if accepted.is_some() || steepest {
                break;
            }
            history.pairs.clear();
        }
        let Some(f_new) = accepted else {
            termination = Termination::NoProgress;
            break;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        history.push(s, y);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        trace.push(f);
        iterations += 1;
    }

    Ok(Minimum { x, value: f, iterations, termination, trace })
}
