//! Local minimizers used by the fitting routines.
//!
//! [`spg_minimize`] is a spectral projected-gradient method for problems
//! whose feasible set has a cheap Euclidean projection (the PCMC rate
//! constraints are separable by pair). [`lbfgs_minimize`] is a plain
//! limited-memory BFGS for unconstrained reparameterized problems.
//! Both use monotone Armijo backtracking, so the accepted objective
//! sequence never increases.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub max_iters: usize,
    /// Relative objective decrease treated as stalled.
    pub ftol: f64,
    /// Stop when the projected gradient (or gradient) infinity norm falls below this.
    pub pgtol: f64,
    /// Number of consecutive stalled iterations before declaring convergence.
    pub stall_iters: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            ftol: 1e-10,
            pgtol: 1e-8,
            stall_iters: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub f_initial: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Forward-difference gradient with step `step * max(1, |x_i|)`.
pub fn forward_difference<F>(mut f: F, x: &[f64], fx: f64, step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let d = (f(&probe) - fx) / h;
            probe[i] = x[i];
            d
        })
        .collect()
}

/// Backtracking along `x + t d` until the Armijo condition holds.
/// Returns the accepted point and its objective, or `None` when the step
/// collapses below machine resolution.
fn armijo<F>(f: &mut F, x: &[f64], fx: f64, d: &[f64], gd: f64, t0: f64) -> Option<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> f64,
{
    const C1: f64 = 1e-4;
    let mut t = t0;
    let mut trial = x.to_vec();
    for _ in 0..60 {
        for ((xt, xi), di) in trial.iter_mut().zip(x).zip(d) {
            *xt = xi + t * di;
        }
        let ft = f(&trial);
        if ft.is_finite() && ft <= fx + C1 * t * gd {
            return Some((trial, ft));
        }
        // Safeguarded quadratic interpolation of the step.
        let next = if ft.is_finite() {
            let denom = 2.0 * (ft - fx - t * gd);
            if denom > 0.0 {
                (-gd * t * t / denom).clamp(0.1 * t, 0.5 * t)
            } else {
                0.5 * t
            }
        } else {
            0.1 * t
        };
        t = next;
        if t < 1e-16 {
            break;
        }
    }
    None
}

struct StallTracker {
    ftol: f64,
    needed: usize,
    count: usize,
}

impl StallTracker {
    fn update(&mut self, f_old: f64, f_new: f64) -> bool {
        let rel = (f_old - f_new) / f_new.abs().max(1.0);
        if rel <= self.ftol {
            self.count += 1;
        } else {
            self.count = 0;
        }
        self.count >= self.needed
    }
}

/// Spectral projected gradient with monotone line search.
///
/// `project` must map any point to the nearest feasible point; iterates are
/// convex combinations of feasible points and therefore stay feasible.
/// Returns `None` if the objective is not finite at the projected start.
pub fn spg_minimize<F, G, P>(
    x0: &[f64],
    mut f: F,
    mut grad: G,
    project: P,
    opts: &OptimOptions,
) -> Option<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64], f64) -> Vec<f64>,
    P: Fn(&mut [f64]),
{
    const LAMBDA_MIN: f64 = 1e-10;
    const LAMBDA_MAX: f64 = 1e10;

    let mut x = x0.to_vec();
    project(&mut x);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return None;
    }
    let f_initial = fx;
    let mut g = grad(&x, fx);

    let projected_step = |x: &[f64], g: &[f64], lambda: f64| -> Vec<f64> {
        let mut p: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - lambda * gi).collect();
        project(&mut p);
        p.iter().zip(x).map(|(pi, xi)| pi - xi).collect()
    };

    let pg0 = inf_norm(&projected_step(&x, &g, 1.0));
    if pg0 <= opts.pgtol {
        return Some(OptimResult {
            x,
            f: fx,
            f_initial,
            iterations: 0,
            converged: true,
        });
    }
    let mut lambda = (1.0 / pg0).clamp(LAMBDA_MIN, LAMBDA_MAX);
    let mut stall = StallTracker {
        ftol: opts.ftol,
        needed: opts.stall_iters.max(1),
        count: 0,
    };

    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let d = projected_step(&x, &g, lambda);
        let gd = dot(&g, &d);
        if inf_norm(&d) <= opts.pgtol * lambda.max(1.0) || gd >= 0.0 {
            converged = true;
            break;
        }
        let Some((x_new, f_new)) = armijo(&mut f, &x, fx, &d, gd, 1.0) else {
            break;
        };
        let g_new = grad(&x_new, f_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        lambda = if sy > 0.0 {
            (dot(&s, &s) / sy).clamp(LAMBDA_MIN, LAMBDA_MAX)
        } else {
            LAMBDA_MAX.min(1.0 / inf_norm(&g_new).max(1e-300))
        };
        let stalled = stall.update(fx, f_new);
        x = x_new;
        fx = f_new;
        g = g_new;
        if stalled || inf_norm(&projected_step(&x, &g, 1.0)) <= opts.pgtol {
            converged = true;
            break;
        }
    }
    Some(OptimResult {
        x,
        f: fx,
        f_initial,
        iterations,
        converged,
    })
}

/// Limited-memory BFGS (memory 10) for an objective returning `(f, grad)`.
/// Returns `None` if the objective is not finite at `x0`.
pub fn lbfgs_minimize<FG>(x0: &[f64], mut fg: FG, opts: &OptimOptions) -> Option<OptimResult>
where
    FG: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    const MEMORY: usize = 10;

    let mut x = x0.to_vec();
    let (mut fx, mut g) = fg(&x);
    if !fx.is_finite() {
        return None;
    }
    let f_initial = fx;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut stall = StallTracker {
        ftol: opts.ftol,
        needed: opts.stall_iters.max(1),
        count: 0,
    };
    let mut converged = inf_norm(&g) <= opts.pgtol;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iters {
        iterations += 1;
        // Two-loop recursion for d = -H g.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map_or(1.0 / inf_norm(&g).max(1.0), |(s, y, _)| {
                dot(s, y) / dot(y, y)
            });
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut gd = dot(&g, &d);
        if !(gd < 0.0) {
            // Not a descent direction; restart from steepest descent.
            history.clear();
            let scale = 1.0 / inf_norm(&g).max(1.0);
            d = g.iter().map(|v| -scale * v).collect();
            gd = dot(&g, &d);
        }

        let mut cached: Option<Vec<f64>> = None;
        let accepted = armijo(
            &mut |p: &[f64]| {
                let (fp, gp) = fg(p);
                cached = Some(gp);
                fp
            },
            &x,
            fx,
            &d,
            gd,
            1.0,
        );
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        // The last evaluation inside the line search is the accepted point.
        let g_new = cached.take().expect("line search evaluated at least once");
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(1e-300) {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let stalled = stall.update(fx, f_new);
        x = x_new;
        fx = f_new;
        g = g_new;
        converged = stalled || inf_norm(&g) <= opts.pgtol;
    }
    Some(OptimResult {
        x,
        f: fx,
        f_initial,
        iterations,
        converged,
    })
}
