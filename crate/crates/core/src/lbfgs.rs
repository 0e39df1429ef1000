//! Limited-memory BFGS with a backtracking Armijo line search and best-so-far tracking.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub history: usize,
    /// Stop when `|f_k − f_{k+1}| ≤ tolerance · max(|f_k|, |f_{k+1}|, 1)`.
    pub tolerance: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { history: 10, tolerance: 1e-8, armijo: 1e-4, max_backtracks: 30 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsOutcome {
    /// Earliest point attaining the lowest objective seen.
    pub best_x: Vec<f64>,
    pub best_f: f64,
    /// Best objective after 0, 1, ... iterations.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn two_loop(grad: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alpha = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alpha.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in hist.iter().zip(alpha.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimize `eval` from `x0` for at most `max_iter` iterations. `project` is applied to
/// every trial point (use it for box constraints or clipping); the Armijo test is taken
/// along the projected step.
pub fn minimize(
    x0: Vec<f64>,
    max_iter: usize,
    cfg: &LbfgsConfig,
    mut eval: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    mut project: impl FnMut(&mut [f64]),
) -> Result<LbfgsOutcome> {
    let mut x = x0;
    let (mut f, mut grad) = eval(&x)?;
    let mut evaluations = 1;
    let mut best_x = x.clone();
    let mut best_f = f;
    let mut trace = alloc::vec![f];
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;

    while iterations < max_iter && best_f > 0.0 {
        let mut dir = two_loop(&grad, &hist);
        if dot(&dir, &grad) >= 0.0 {
            hist.clear();
            dir = grad.iter().map(|g| -g).collect();
        }
        let gnorm = math::sqrt64(dot(&grad, &grad));
        if gnorm == 0.0 {
            break;
        }
        let mut t = if hist.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            project(&mut xn);
            let (fn_, gn) = eval(&xn)?;
            evaluations += 1;
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if fn_ <= f + cfg.armijo * dot(&grad, &step) {
                accepted = Some((xn, fn_, gn, step));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        let Some((xn, fn_, gn, s)) = accepted else {
            trace.push(best_f);
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let y: Vec<f64> = gn.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if hist.len() == cfg.history {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let converged = (f - fn_).abs() <= cfg.tolerance * f.abs().max(fn_.abs()).max(1.0);
        if fn_ < best_f {
            best_f = fn_;
            best_x.clone_from(&xn);
        }
        trace.push(best_f);
        x = xn;
        f = fn_;
        grad = gn;
        if converged {
            break;
        }
    }
    Ok(LbfgsOutcome { best_x, best_f, trace, iterations, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a);
        let g = alloc::vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn solves_rosenbrock() {
        let out = minimize(alloc::vec![-1.2, 1.0], 500, &LbfgsConfig::default(), rosenbrock, |_| {}).unwrap();
        assert!(out.best_f < 1e-8, "{out:?}");
        assert!((out.best_x[0] - 1.0).abs() < 1e-3);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn stops_immediately_at_zero() {
        let out = minimize(alloc::vec![1.0, 1.0], 100, &LbfgsConfig::default(), rosenbrock, |_| {}).unwrap();
        assert_eq!((out.iterations, out.trace.len(), out.best_f), (0, 1, 0.0));
    }

    #[test]
    fn projection_keeps_iterates_in_box() {
        let out = minimize(
            alloc::vec![0.0, 0.0],
            200,
            &LbfgsConfig::default(),
            |x| Ok(((x[0] - 3.0).powi(2) + (x[1] + 3.0).powi(2), alloc::vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 3.0)])),
            |x| x.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0)),
        )
        .unwrap();
        assert_eq!(out.best_x, alloc::vec![1.0, -1.0]);
    }

    #[test]
    fn respects_iteration_budget() {
        let out = minimize(alloc::vec![-1.2, 1.0], 3, &LbfgsConfig::default(), rosenbrock, |_| {}).unwrap();
        assert_eq!(out.iterations, 3);
        assert_eq!(out.trace.len(), 4);
    }
}
