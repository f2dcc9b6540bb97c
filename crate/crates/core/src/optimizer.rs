//! Derivative-free tuning of gate angles.
//!
//! Each coordinate is searched on the circle: a coarse four-point probe at
//! quarter turns brackets the minimum, then the bracket is shrunk with steps
//! taken from a two-slope linear model (the intersection of the secants on
//! either side of the best point). Fitness near an exact repair behaves like
//! `c·|θ − θ*|`, which that model solves in one step; smooth minima converge
//! like a secant method. Golden-section steps take over whenever the model
//! step is unusable.
//!
//! Angles are periodic in 2π; results are wrapped to `(−π, π]`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptBudget {
    /// Hard cap on objective calls, including the initial point.
    pub max_evals: usize,
    /// Search stops once the bracket around the best angle is narrower than this (radians).
    pub tolerance: f64,
}

impl Default for OptBudget {
    fn default() -> Self {
        OptBudget { max_evals: 20, tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// The objective asked to stop at `best`.
    pub stopped: bool,
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t > PI {
        t - TAU
    } else {
        t
    }
}

/// Minimises `objective` starting from `init`.
pub fn minimize<F>(mut objective: F, init: &[f64], budget: OptBudget) -> OptResult
where
    F: FnMut(&[f64]) -> f64,
{
    minimize_until(|x| ControlFlow::Continue(objective(x)), init, budget)
}

/// Like [`minimize`], but the objective may return `Break(value)` to end the
/// search at the point just evaluated (which is then reported as best).
pub fn minimize_until<F>(objective: F, init: &[f64], budget: OptBudget) -> OptResult
where
    F: FnMut(&[f64]) -> ControlFlow<f64, f64>,
{
    let mut search = Search {
        objective,
        evals: 0,
        max_evals: budget.max_evals.max(1),
        best: init.iter().map(|t| wrap_angle(*t)).collect(),
        best_value: f64::INFINITY,
        stopped: false,
    };
    let start = search.best.clone();
    search.best_value = match search.eval(&start) {
        Some(v) => v,
        None => unreachable!("the first evaluation always fits the budget"),
    };
    let dim = init.len();
    if dim > 0 {
        let mut steps = vec![FRAC_PI_2; dim];
        'cycles: loop {
            for (k, step) in steps.iter_mut().enumerate() {
                if search.done() {
                    break 'cycles;
                }
                let remaining = search.max_evals - search.evals;
                let share = if dim == 1 { remaining } else { (remaining / (dim - k)).max(4).min(remaining) };
                let width = search.line(k, *step, share, budget.tolerance);
                *step = (width / 2.0).max(budget.tolerance);
            }
            let converged = steps.iter().all(|s| *s <= budget.tolerance);
            if search.done() || converged || dim == 1 {
                break;
            }
        }
    }
    OptResult { best: search.best, value: search.best_value, evals: search.evals, stopped: search.stopped }
}

struct Search<F> {
    objective: F,
    evals: usize,
    max_evals: usize,
    best: Vec<f64>,
    best_value: f64,
    stopped: bool,
}

impl<F> Search<F>
where
    F: FnMut(&[f64]) -> ControlFlow<f64, f64>,
{
    fn done(&self) -> bool {
        self.stopped || self.evals >= self.max_evals
    }

    /// Evaluates `x`, keeping it if it improves on the best point.
    /// Returns `None` when the budget is spent or the objective stopped.
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.done() {
            return None;
        }
        let wrapped: Vec<f64> = x.iter().map(|t| wrap_angle(*t)).collect();
        self.evals += 1;
        let value = match (self.objective)(&wrapped) {
            ControlFlow::Continue(v) => v,
            ControlFlow::Break(v) => {
                self.stopped = true;
                self.best = wrapped;
                self.best_value = v;
                return None;
            }
        };
        if value < self.best_value {
            self.best = wrapped;
            self.best_value = value;
        }
        Some(value)
    }

    fn eval_along(&mut self, k: usize, t: f64) -> Option<f64> {
        let mut x = self.best.clone();
        x[k] = t;
        self.eval(&x)
    }

    /// Searches coordinate `k` around the current best with initial step `h`.
    /// Returns the width of the final bracket.
    fn line(&mut self, k: usize, h: f64, cap: usize, tol: f64) -> f64 {
        let limit = self.evals + cap;
        let b0 = self.best[k];
        let fb0 = self.best_value;
        // Coarse probe: b0 ± h, and the opposite point when h spans a quarter turn.
        let mut pts: Vec<(f64, f64)> = vec![(b0, fb0)];
        let mut offsets = vec![h, -h];
        if h >= FRAC_PI_2 {
            offsets.push(PI);
        }
        for off in offsets {
            if self.evals >= limit {
                return 2.0 * h;
            }
            match self.eval_along(k, b0 + off) {
                Some(v) => pts.push((b0 + off, v)),
                None => return 2.0 * h,
            }
        }
        // Bracket around the best probe, using its neighbours on the circle.
        let (a, b, c) = bracket(&pts, h);
        let (mut a, mut b, mut c) = (a, b, c);
        while self.evals < limit && !self.done() && c.0 - a.0 > tol {
            let Some(m) = model_step(a, b, c) else { break };
            let Some(fm) = self.eval_along(k, m) else { break };
            let p = (m, fm);
            if m < b.0 {
                if fm < b.1 {
                    c = b;
                    b = p;
                } else {
                    a = p;
                }
            } else if fm < b.1 {
                a = b;
                b = p;
            } else {
                c = p;
            }
        }
        c.0 - a.0
    }
}

/// Picks the best probed point and its immediate neighbours (in angle order,
/// wrapping around the circle when the probes cover it).
fn bracket(pts: &[(f64, f64)], h: f64) -> ((f64, f64), (f64, f64), (f64, f64)) {
    // Ties go to the earliest probe, i.e. the starting point.
    let best_x = pts.iter().fold(pts[0], |acc, p| if p.1 < acc.1 { *p } else { acc }).0;
    let mut sorted = pts.to_vec();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let best = sorted.iter().position(|p| p.0 == best_x).unwrap();
    let n = sorted.len();
    let full_circle = h >= FRAC_PI_2 && n == 4;
    let left = if best > 0 {
        sorted[best - 1]
    } else if full_circle {
        (sorted[n - 1].0 - TAU, sorted[n - 1].1)
    } else {
        // best is an end point: mirror the step to keep a bracket
        (sorted[best].0 - h, f64::INFINITY)
    };
    let right = if best + 1 < n {
        sorted[best + 1]
    } else if full_circle {
        (sorted[0].0 + TAU, sorted[0].1)
    } else {
        (sorted[best].0 + h, f64::INFINITY)
    };
    (left, sorted[best], right)
}

const GOLDEN: f64 = 0.381_966_011_250_105;

/// Next trial point inside `(a, c)` from the two-slope model, or a golden
/// section step into the larger half when the model degenerates.
fn model_step(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Option<f64> {
    let width = c.0 - a.0;
    let min_sep = width * 1e-3;
    let golden = || {
        if b.0 - a.0 > c.0 - b.0 {
            b.0 - GOLDEN * (b.0 - a.0)
        } else {
            b.0 + GOLDEN * (c.0 - b.0)
        }
    };
    let left_slope = (a.1 - b.1) / (b.0 - a.0);
    let right_slope = (c.1 - b.1) / (c.0 - b.0);
    if left_slope == 0.0 && right_slope == 0.0 {
        return None;
    }
    let trial = if left_slope.is_finite() && right_slope.is_finite() {
        let s = left_slope.max(right_slope);
        if left_slope >= right_slope {
            (b.1 - c.1 + s * (b.0 + c.0)) / (2.0 * s)
        } else {
            (a.1 - b.1 + s * (a.0 + b.0)) / (2.0 * s)
        }
    } else {
        golden()
    };
    let usable = trial.is_finite() && trial > a.0 + min_sep && trial < c.0 - min_sep && (trial - b.0).abs() > min_sep;
    let step = if usable { trial } else { golden() };
    (step > a.0 && step < c.0 && step != b.0).then_some(step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_into_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.5), 0.5);
    }

    #[test]
    fn cosine_well() {
        let r = minimize(|x| 1.0 - (x[0] - 1.0).cos(), &[0.0], OptBudget::default());
        assert!(r.evals <= 20);
        assert!((r.best[0] - 1.0).abs() < 0.15, "{r:?}");
    }

    #[test]
    fn constant_objective_keeps_init() {
        let r = minimize(|_| 3.0, &[0.25], OptBudget::default());
        assert_eq!(r.best, [0.25]);
        assert_eq!(r.value, 3.0);
    }

    #[test]
    fn single_evaluation_budget() {
        let mut calls = 0;
        let r = minimize(
            |x| {
                calls += 1;
                (x[0] - 1.0).abs()
            },
            &[0.0],
            OptBudget { max_evals: 1, ..OptBudget::default() },
        );
        assert_eq!(calls, 1);
        assert_eq!(r.evals, 1);
        assert_eq!(r.value, 1.0);
        assert_eq!(r.best, [0.0]);
    }

    #[test]
    fn cone_minimum_is_located_precisely() {
        let target = -0.955_316_618_124_509_3;
        let r = minimize(|x| 3.0 * (wrap_angle(x[0] - target)).abs(), &[0.0], OptBudget::default());
        assert!((r.best[0] - target).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn break_ends_search() {
        let mut calls = 0;
        let r = minimize_until(
            |x| {
                calls += 1;
                let v = (x[0] - 1.0).abs();
                if calls == 3 {
                    ControlFlow::Break(v)
                } else {
                    ControlFlow::Continue(v)
                }
            },
            &[0.0],
            OptBudget::default(),
        );
        assert_eq!(calls, 3);
        assert!(r.stopped);
        assert_eq!(r.evals, 3);
    }

    #[test]
    fn three_dimensional_search_improves() {
        let f = |x: &[f64]| (1.0 - (x[0] - 0.5).cos()) + (1.0 - (x[1] + 1.0).cos()) + (1.0 - (x[2] - 2.0).cos());
        let budget = OptBudget { max_evals: 60, ..OptBudget::default() };
        let r = minimize(f, &[0.0, 0.0, 0.0], budget);
        assert!(r.evals <= 60);
        assert!(r.value < 0.05 * f(&[0.0, 0.0, 0.0]), "{r:?}");
    }
}
