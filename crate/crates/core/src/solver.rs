//! Limited-memory BFGS with a backtracking line search.
//!
//! Steps are accepted on the sufficient-decrease (Armijo) condition. Close to
//! the optimum the objective change drops below floating resolution, so a
//! step whose directional derivative is still non-positive is also accepted
//! when the objective has not risen beyond rounding; for convex objectives
//! that step cannot increase the exact objective. The relaxed rule only
//! applies to the first few trial steps of a line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Backtracks within which the rounding-level acceptance rule applies.
const FLAT_BACKTRACKS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop when `‖∇f‖₂` falls to this value.
    pub gradient_tolerance: f64,
    /// Number of correction pairs kept.
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Step shrink factor per backtrack.
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            gradient_tolerance: 1e-7,
            memory: 10,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            gradient_tolerance: tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidArgument("gradient_tolerance must be > 0".into()));
        }
        if self.memory == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "memory and max_iterations must be >= 1".into(),
            ));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidArgument(
                "line search needs 0 < armijo < 0.5 and 0 < backtrack < 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// `false` when `max_iterations` ran out before the tolerance was met.
    pub converged: bool,
    /// Objective value after every accepted step, starting at `x0`.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f`, where `f(x, grad)` returns the value and writes `∇f(x)`.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, cfg: &SolverConfig) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::LineSearch {
            iteration: 0,
            reason: "objective is not finite at the starting point".into(),
        });
    }
    let mut trace = vec![fx];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha = vec![0.0; cfg.memory];

    for iteration in 0..cfg.max_iterations {
        let gnorm = norm(&g);
        if gnorm <= cfg.gradient_tolerance {
            return Ok(Minimum {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations: iteration,
                converged: true,
                trace,
            });
        }

        // two-loop recursion
        dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        for (i, (s, y, rho)) in pairs.iter().enumerate().rev() {
            alpha[i] = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= alpha[i] * yi);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for (i, (s, y, rho)) in pairs.iter().enumerate() {
            let beta = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (alpha[i] - beta) * si);
        }
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // the curvature pairs produced an ascent direction; restart
            pairs.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = -gnorm * gnorm;
        }

        let mut step = if pairs.is_empty() { 1.0 / gnorm.max(1.0) } else { 1.0 };
        let mut accepted = false;
        for backtracks in 0..=cfg.max_backtracks {
            x_new
                .iter_mut()
                .zip(&x)
                .zip(&dir)
                .for_each(|((xn, xi), di)| *xn = xi + step * di);
            if x_new == x {
                // step fell below the resolution of x
                break;
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() {
                let armijo = f_new <= fx + cfg.armijo * step * slope;
                let flat = backtracks <= FLAT_BACKTRACKS
                    && f_new <= fx + 4.0 * f64::EPSILON * fx.abs()
                    && dot(&g_new, &dir) <= 0.0;
                if armijo || flat {
                    let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
                        if pairs.len() == cfg.memory {
                            pairs.pop_front();
                        }
                        pairs.push_back((s, y, 1.0 / sy));
                    }
                    std::mem::swap(&mut x, &mut x_new);
                    std::mem::swap(&mut g, &mut g_new);
                    fx = f_new;
                    trace.push(fx);
                    accepted = true;
                    break;
                }
            }
            step *= cfg.backtrack;
        }
        if !accepted {
            return Err(Error::LineSearch {
                iteration,
                reason: format!(
                    "no acceptable step after {} backtracks (gradient norm {gnorm:e})",
                    cfg.max_backtracks
                ),
            });
        }
    }
    let grad_norm = norm(&g);
    Ok(Minimum {
        x,
        value: fx,
        converged: grad_norm <= cfg.gradient_tolerance,
        grad_norm,
        iterations: cfg.max_iterations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_quadratic() {
        let m = minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] - 3.0);
                (x[0] - 3.0).powi(2)
            },
            vec![0.0],
            &SolverConfig::with_tolerance(1e-10),
        )
        .unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 3.0).abs() <= 1e-8);
        assert!(m.value <= m.trace[0]);
    }

    #[test]
    fn rosenbrock_and_monotone_trace() {
        let m = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            vec![-1.2, 1.0],
            &SolverConfig::with_tolerance(1e-9),
        )
        .unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
        for w in m.trace.windows(2) {
            assert!(w[1] <= w[0] + 4.0 * f64::EPSILON * w[0].abs());
        }
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let cfg = SolverConfig {
            max_iterations: 2,
            gradient_tolerance: 1e-14,
            ..SolverConfig::default()
        };
        let m = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            vec![-1.2, 1.0],
            &cfg,
        )
        .unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 2);
    }

    #[test]
    fn inconsistent_gradient_reports_line_search_failure() {
        // gradient points uphill: no step along -g can decrease f
        let r = minimize(
            |x, g| {
                g[0] = -2.0 * x[0] - 1.0;
                x[0] * x[0]
            },
            vec![1.0],
            &SolverConfig::default(),
        );
        assert!(matches!(r, Err(Error::LineSearch { .. })));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SolverConfig {
            gradient_tolerance: 0.0,
            ..SolverConfig::default()
        };
        assert!(minimize(|_, _| 0.0, vec![0.0], &cfg).is_err());
    }
}
