//! Quasi-Newton baseline: BFGS with forward-difference gradients and a
//! Wolfe line search. Every function value, including those spent on
//! gradients, counts against the budget.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cmaes::StartConfig;
use crate::error::{invalid, Result};
use crate::record::{Evaluator, RunRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfgsConfig {
    /// Relative finite-difference step: `h_i = fd_step * max(1, |x_i|)`.
    pub fd_step: f64,
    /// Sufficient decrease constant.
    pub wolfe_c1: f64,
    /// Curvature constant.
    pub wolfe_c2: f64,
    /// Function evaluations allowed per line search (gradients excluded).
    pub max_line_steps: usize,
    /// Restart from a fresh uniform point when progress stalls; otherwise
    /// the run ends with a failure.
    pub restart_on_failure: bool,
    pub start: StartConfig,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self {
            fd_step: 1e-8,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_steps: 30,
            restart_on_failure: true,
            start: StartConfig::default(),
        }
    }
}

impl BfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fd_step > 0.0) {
            return Err(invalid("fd_step", "must be positive"));
        }
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(invalid("wolfe constants", "need 0 < c1 < c2 < 1"));
        }
        if self.max_line_steps == 0 {
            return Err(invalid("max_line_steps", "must be at least 1"));
        }
        Ok(())
    }
}

struct Point {
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
}

enum Search {
    Found(Point),
    Failed,
    /// The evaluator ran out of budget or hit the target.
    Stopped,
}

fn gradient(ev: &mut Evaluator<'_>, x: &DVector<f64>, f: f64, fd_step: f64) -> Option<DVector<f64>> {
    let mut g = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + fd_step * xi.abs().max(1.0);
        let h = probe[i] - xi;
        g[i] = (ev.evaluate(probe.as_slice())? - f) / h;
        probe[i] = xi;
    }
    Some(g)
}

/// Line search along `p` from `start` for a step satisfying the strong Wolfe
/// conditions (bracketing then zoom). Falls back to the best sufficient
/// decrease point found when the curvature condition cannot be met.
fn line_search(ev: &mut Evaluator<'_>, start: &Point, p: &DVector<f64>, cfg: &BfgsConfig) -> Search {
    let f0 = start.f;
    let d0 = start.g.dot(p);
    let mut steps = 0;
    let armijo = |a: f64, f: f64| f <= f0 + cfg.wolfe_c1 * a * d0;
    let curvature = |d: f64| d.abs() <= -cfg.wolfe_c2 * d0;

    // (alpha, f, slope, point) of the lower bracket end; alpha = 0 is `start`.
    let mut lo: (f64, f64, f64, Option<Point>) = (0.0, f0, d0, None);
    let mut hi: Option<(f64, f64)> = None;
    let mut alpha = 1.0;

    while steps < cfg.max_line_steps {
        if let Some((a_hi, f_hi)) = hi {
            // Quadratic interpolation through lo and hi, kept away from both ends.
            let (a_lo, f_lo, d_lo) = (lo.0, lo.1, lo.2);
            let w = a_hi - a_lo;
            let denom = 2.0 * (f_hi - f_lo - d_lo * w);
            let mut t = if denom > 0.0 { -d_lo * w * w / denom } else { 0.5 * w };
            let (a, b) = (0.1 * w, 0.9 * w);
            t = if w > 0.0 { t.clamp(a, b) } else { t.clamp(b, a) };
            alpha = a_lo + t;
        }
        let x = &start.x + alpha * p;
        steps += 1;
        let Some(f) = ev.evaluate(x.as_slice()) else {
            return Search::Stopped;
        };
        if !armijo(alpha, f) || f >= lo.1 && lo.3.is_some() {
            hi = Some((alpha, f));
            continue;
        }
        let Some(g) = gradient(ev, &x, f, cfg.fd_step) else {
            return Search::Stopped;
        };
        let d = g.dot(p);
        let point = Point { x, f, g };
        if curvature(d) {
            return Search::Found(point);
        }
        match hi {
            None if d < 0.0 => {
                lo = (alpha, f, d, Some(point));
                alpha *= 2.0;
            }
            None => {
                hi = Some((lo.0, lo.1));
                lo = (alpha, f, d, Some(point));
            }
            Some((a_hi, f_hi)) => {
                if d * (a_hi - lo.0) >= 0.0 {
                    hi = Some((lo.0, lo.1));
                } else {
                    hi = Some((a_hi, f_hi));
                }
                lo = (alpha, f, d, Some(point));
            }
        }
    }
    match lo.3 {
        Some(p) if p.f < f0 => Search::Found(p),
        _ => Search::Failed,
    }
}

/// Minimizes `objective` from a uniform random start in the start box.
pub fn minimize<R: Rng + ?Sized>(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    dim: usize,
    cfg: &BfgsConfig,
    budget: usize,
    target: f64,
    rng: &mut R,
) -> Result<RunRecord> {
    cfg.validate()?;
    if dim == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    let mut ev = Evaluator::new(objective, budget, target);
    let mut restarts = 0;
    let mut failed = false;
    let b = cfg.start.box_half_width;

    'runs: loop {
        let x = DVector::from_fn(dim, |_, _| rng.random_range(-b..=b));
        let Some(f) = ev.evaluate(x.as_slice()) else { break };
        let Some(g) = gradient(&mut ev, &x, f, cfg.fd_step) else { break };
        let mut cur = Point { x, f, g };
        let mut h = DMatrix::<f64>::identity(dim, dim);
        let mut fresh_h = true;

        loop {
            if !cur.g.iter().all(|v| v.is_finite()) || cur.g.norm() == 0.0 {
                break;
            }
            let mut p = -(&h * &cur.g);
            if cur.g.dot(&p) >= 0.0 {
                h.fill_with_identity();
                fresh_h = true;
                p = -cur.g.clone();
            }
            match line_search(&mut ev, &cur, &p, cfg) {
                Search::Stopped => break 'runs,
                Search::Failed if fresh_h => break,
                Search::Failed => {
                    h.fill_with_identity();
                    fresh_h = true;
                }
                Search::Found(next) => {
                    let s = &next.x - &cur.x;
                    let y = &next.g - &cur.g;
                    let sy = s.dot(&y);
                    if sy > 0.0 && sy.is_finite() {
                        if fresh_h {
                            // Scale the first inverse Hessian guess to the observed curvature.
                            h *= sy / y.dot(&y);
                        }
                        let rho = 1.0 / sy;
                        let hy = &h * &y;
                        let yhy = y.dot(&hy);
                        h += (rho * rho * yhy + rho) * &s * s.transpose() - rho * (&hy * s.transpose() + &s * hy.transpose());
                        fresh_h = false;
                    }
                    cur = next;
                }
            }
        }
        if !cfg.restart_on_failure {
            failed = true;
            break;
        }
        restarts += 1;
    }
    Ok(ev.finish(restarts, Vec::new(), failed))
}
