//! Box-constrained limited-memory quasi-Newton minimizer.
//!
//! Projected L-BFGS: the two-loop recursion proposes a direction, trial
//! points are projected onto the box, and a backtracking Armijo search on
//! the projected arc accepts the step. When the quasi-Newton direction is
//! not a descent direction the iteration falls back to projected steepest
//! descent. Deterministic for fixed inputs.

use std::collections::VecDeque;
use std::time::Instant;

/// Minimizer knobs.
#[derive(Debug, Clone)]
pub struct OptimConfig {
    /// L-BFGS memory (number of curvature pairs kept).
    pub memory: usize,
    /// Stop when the projected gradient's infinity norm drops below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Cooperative deadline; the loop returns its best iterate on expiry.
    pub deadline: Option<Instant>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            memory: 8,
            grad_tol: 1e-6,
            max_iter: 400,
            deadline: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Projected-gradient tolerance reached (as opposed to stall, iteration
    /// budget, or deadline).
    pub converged: bool,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `f` (returning value and gradient) over the box [lo, hi].
pub fn minimize_box<F>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    cfg: &OptimConfig,
) -> OptimOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut value, mut grad) = f(&x);

    // Curvature pairs (s, y, 1/sᵀy), newest last.
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();

    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        if let Some(deadline) = cfg.deadline {
            if Instant::now() >= deadline {
                break;
            }
        }
        // Projected gradient: x - P(x - g).
        let pg: Vec<f64> = (0..n)
            .map(|i| x[i] - (x[i] - grad[i]).clamp(lo[i], hi[i]))
            .collect();
        if inf_norm(&pg) <= cfg.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        // Two-loop recursion.
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        if !pairs.is_empty() {
            let mut alphas = Vec::with_capacity(pairs.len());
            for (s, y, rho) in pairs.iter().rev() {
                let a = rho * dot(s, &d);
                for i in 0..n {
                    d[i] -= a * y[i];
                }
                alphas.push(a);
            }
            let (s_last, y_last, _) = pairs.back().unwrap();
            let gamma = dot(s_last, y_last) / dot(y_last, y_last);
            for di in d.iter_mut() {
                *di *= gamma;
            }
            for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
                let b = rho * dot(y, &d);
                for i in 0..n {
                    d[i] += (a - b) * s[i];
                }
            }
        }

        // Try the quasi-Newton direction, then steepest descent.
        let mut moved = false;
        for attempt in 0..2 {
            let dir: Vec<f64> = if attempt == 0 && dot(&d, &grad) < 0.0 {
                d.clone()
            } else if attempt == 0 {
                continue;
            } else {
                // Scale the raw gradient to a modest first move.
                let scale = 0.1 / inf_norm(&grad).max(1e-12);
                grad.iter().map(|g| -g * scale.min(1.0)).collect()
            };

            let mut alpha = 1.0;
            for _ in 0..40 {
                let mut trial: Vec<f64> = (0..n).map(|i| x[i] + alpha * dir[i]).collect();
                project(&mut trial, lo, hi);
                let step: Vec<f64> = (0..n).map(|i| trial[i] - x[i]).collect();
                if inf_norm(&step) < 1e-15 {
                    break;
                }
                let (v_trial, g_trial) = f(&trial);
                let slope = dot(&grad, &step);
                if v_trial <= value + 1e-4 * slope.min(0.0) && v_trial < value {
                    let s = step;
                    let y: Vec<f64> = (0..n).map(|i| g_trial[i] - grad[i]).collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-12 * inf_norm(&s) * inf_norm(&y) {
                        if pairs.len() == cfg.memory {
                            pairs.pop_front();
                        }
                        pairs.push_back((s.clone(), y.clone(), 1.0 / sy));
                    }
                    x = trial;
                    value = v_trial;
                    grad = g_trial;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            break; // line-search stall: return the best iterate
        }
    }

    OptimOutcome {
        x,
        value,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_bowl_reaches_minimum() {
        let f = |x: &[f64]| {
            let v = (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
            (v, vec![2.0 * (x[0] - 3.0), 20.0 * (x[1] + 1.0)])
        };
        let out = minimize_box(
            f,
            &[0.0, 0.0],
            &[-10.0, -10.0],
            &[10.0, 10.0],
            &OptimConfig::default(),
        );
        assert!(out.converged);
        assert_abs_diff_eq!(out.x[0], 3.0, epsilon = 1e-5);
        assert_abs_diff_eq!(out.x[1], -1.0, epsilon = 1e-5);
    }

    #[test]
    fn active_bound_is_found() {
        // Minimum of (x-3)² over x <= 1 sits on the bound.
        let f = |x: &[f64]| ((x[0] - 3.0).powi(2), vec![2.0 * (x[0] - 3.0)]);
        let out = minimize_box(f, &[0.0], &[-1.0], &[1.0], &OptimConfig::default());
        assert!(out.converged);
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn rosenbrock_in_a_box() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            (
                v,
                vec![
                    -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                    200.0 * (b - a * a),
                ],
            )
        };
        let cfg = OptimConfig {
            max_iter: 2000,
            grad_tol: 1e-8,
            ..Default::default()
        };
        let out = minimize_box(f, &[-1.2, 1.0], &[-2.0, -2.0], &[2.0, 2.0], &cfg);
        assert!(out.converged, "iters {} value {}", out.iterations, out.value);
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(out.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn unbounded_variables_accept_infinite_box() {
        let f = |x: &[f64]| ((x[0] + 7.0).powi(2), vec![2.0 * (x[0] + 7.0)]);
        let out = minimize_box(
            f,
            &[0.0],
            &[f64::NEG_INFINITY],
            &[f64::INFINITY],
            &OptimConfig::default(),
        );
        assert!(out.converged);
        assert_abs_diff_eq!(out.x[0], -7.0, epsilon = 1e-6);
    }

    #[test]
    fn deterministic_across_runs() {
        let f = |x: &[f64]| {
            let v = x.iter().enumerate().map(|(i, &t)| (i as f64 + 1.0) * t * t).sum::<f64>();
            (v, x.iter().enumerate().map(|(i, &t)| 2.0 * (i as f64 + 1.0) * t).collect())
        };
        let lo = vec![-5.0; 6];
        let hi = vec![5.0; 6];
        let x0 = vec![1.5; 6];
        let a = minimize_box(f, &x0, &lo, &hi, &OptimConfig::default());
        let b = minimize_box(f, &x0, &lo, &hi, &OptimConfig::default());
        assert_eq!(a.x, b.x);
    }
}
