//! Limited-memory quasi-Newton minimization with backtracking line search.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    /// Step tried first on a steepest-descent iteration, as a bound on the
    /// largest component of the step.
    pub initial_step: f64,
    pub backtrack: f64,
    /// Armijo constant.
    pub sufficient_decrease: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            initial_step: 0.5,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub memory: usize,
    pub max_iters: usize,
    pub line_search: LineSearch,
    /// Use plain gradient descent instead of quasi-Newton directions.
    pub gradient_descent: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            memory: 12,
            max_iters: 2000,
            line_search: LineSearch::default(),
            gradient_descent: false,
        }
    }
}

/// Objective value, gradient in the optimization variables, and the
/// caller's stationarity measure used for the stopping test.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub stationarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    LineSearchFailed,
    /// The value stopped changing beyond round-off before `tol` was met.
    Stalled,
}

const STALL_LIMIT: usize = 20;
/// Relative size of value changes treated as round-off.
pub const ROUNDOFF: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub stationarity: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub history: Vec<HistoryEntry>,
    pub restarts: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-loop recursion: `-H g`.
fn direction(grad: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(q, y)| *q -= a * y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|q| *q *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(q, s)| *q += (a - b) * s);
    }
    q.iter_mut().for_each(|q| *q = -*q);
    q
}

/// Minimizes `f` from `x0` until `stationarity < tol` or the iteration
/// budget runs out. Accepted steps satisfy the sufficient-decrease test or,
/// once value changes are at round-off level (relative `1e-13`), the
/// approximate Wolfe slope test; recorded values are therefore
/// non-increasing up to that round-off.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, tol: f64, opts: &Options) -> Outcome
where
    F: FnMut(&[f64]) -> Evaluation,
{
    let ls = opts.line_search;
    let mut x = x0;
    let mut cur = f(&x);
    let mut history = vec![HistoryEntry {
        iteration: 0,
        energy: cur.value,
        grad_norm: cur.stationarity,
    }];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut restarts = 0;
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;
    // Consecutive round-off-level steps that found no new best stationarity.
    let mut stalled = 0;
    let mut best_stationarity = cur.stationarity;

    while iterations < opts.max_iters {
        if cur.stationarity < tol {
            stop = StopReason::Converged;
            break;
        }
        let quasi_newton = !opts.gradient_descent && !pairs.is_empty();
        let mut d = if quasi_newton {
            direction(&cur.gradient, &pairs)
        } else {
            cur.gradient.iter().map(|g| -g).collect()
        };
        let mut slope = dot(&cur.gradient, &d);
        if slope >= 0.0 {
            pairs.clear();
            restarts += 1;
            d = cur.gradient.iter().map(|g| -g).collect();
            slope = dot(&cur.gradient, &d);
        }
        let mut step = if quasi_newton {
            1.0
        } else {
            let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if dmax > 0.0 {
                ls.initial_step / dmax
            } else {
                0.0
            }
        };

        let noise = ROUNDOFF * cur.value.abs().max(1.0);
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x + step * d).collect();
            let eval = f(&trial);
            if eval.value.is_finite() {
                let armijo =
                    eval.value < cur.value && eval.value <= cur.value + ls.sufficient_decrease * step * slope;
                // Near convergence the value change drowns in round-off.
                // A step whose value is unchanged up to round-off is then
                // judged by its slope (approximate Wolfe conditions).
                let new_slope = dot(&eval.gradient, &d);
                let flat = (eval.value - cur.value).abs() <= noise
                    && new_slope <= (2.0 * ls.sufficient_decrease - 1.0) * slope
                    && new_slope >= 0.9 * slope;
                if armijo || flat {
                    accepted = Some((trial, eval));
                    break;
                }
            }
            step *= ls.backtrack;
        }
        let Some((next_x, next)) = accepted else {
            if pairs.is_empty() {
                stop = StopReason::LineSearchFailed;
                break;
            }
            pairs.clear();
            restarts += 1;
            continue;
        };

        let s: Vec<f64> = next_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.gradient.iter().zip(&cur.gradient).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        } else {
            // Curvature breakdown.
            pairs.clear();
            restarts += 1;
        }
        let change = cur.value - next.value;
        if change.abs() <= noise && next.stationarity >= best_stationarity {
            stalled += 1;
        } else {
            stalled = 0;
        }
        best_stationarity = best_stationarity.min(next.stationarity);
        x = next_x;
        cur = next;
        iterations += 1;
        history.push(HistoryEntry {
            iteration: iterations,
            energy: cur.value,
            grad_norm: cur.stationarity,
        });
        if stalled >= STALL_LIMIT && cur.stationarity >= tol {
            stop = StopReason::Stalled;
            break;
        }
    }
    if stop == StopReason::MaxIterations && cur.stationarity < tol {
        stop = StopReason::Converged;
    }
    Outcome {
        x,
        value: cur.value,
        stationarity: cur.stationarity,
        iterations,
        stop,
        history,
        restarts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Evaluation {
        let (a, b) = (x[0], x[1]);
        let value = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let gradient = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        let stationarity = gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        Evaluation {
            value,
            gradient,
            stationarity,
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let out = minimize(rosenbrock, vec![-1.2, 1.0], 1e-9, &Options::default());
        assert_eq!(out.stop, StopReason::Converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
        assert!(out.history.windows(2).all(|w| w[1].energy <= w[0].energy));
    }

    #[test]
    fn gradient_descent_fallback_makes_progress() {
        let quad = |x: &[f64]| {
            let gradient: Vec<f64> = x.iter().enumerate().map(|(i, v)| 2.0 * (i + 1) as f64 * v).collect();
            Evaluation {
                value: x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum(),
                stationarity: gradient.iter().fold(0.0f64, |m, g| m.max(g.abs())),
                gradient,
            }
        };
        let opts = Options {
            gradient_descent: true,
            max_iters: 5000,
            ..Options::default()
        };
        let out = minimize(quad, vec![1.0, -1.0, 0.5], 1e-8, &opts);
        assert_eq!(out.stop, StopReason::Converged);
    }

    #[test]
    fn respects_iteration_budget() {
        let opts = Options {
            max_iters: 1,
            ..Options::default()
        };
        let out = minimize(rosenbrock, vec![-1.2, 1.0], 1e-12, &opts);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.stop, StopReason::MaxIterations);
    }
}
