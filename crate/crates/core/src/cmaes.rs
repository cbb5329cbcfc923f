//! The (mu/mu_w, lambda)-CMA-ES with an ask/tell interface.
//!
//! [`CmaState`] only ever consumes the ranking of a population, never the
//! objective values themselves, so any strictly increasing transform of the
//! objective yields the same sequence of search distributions.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{sample, EigenCache, GaussianParams};
use crate::error::{invalid, Error, Result};
use crate::record::{Evaluator, RunRecord};

/// Strategy constants for one (dimension, population size) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaParams {
    pub dim: usize,
    pub lambda: usize,
    pub mu: usize,
    /// Positive, non-increasing, summing to one.
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c1: f64,
    pub cmu: f64,
    pub cc: f64,
    pub csigma: f64,
    pub dsigma: f64,
    pub chi_n: f64,
}

/// `4 + floor(3 ln n)`.
pub fn default_lambda(n: usize) -> usize {
    4 + (3.0 * (n as f64).ln()).floor() as usize
}

/// Standard strategy parameters for dimension `n`, with an optional population
/// size override.
pub fn default_params(n: usize, lambda_override: Option<usize>) -> Result<CmaParams> {
    if n == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    let lambda = match lambda_override {
        Some(l) if l < 2 => return Err(invalid("lambda", format!("must be >= 2, got {l}"))),
        Some(l) => l,
        None => default_lambda(n),
    };
    params_with_mu(n, lambda, lambda / 2)
}

/// Standard constants for an explicit parent count `mu`.
pub fn params_with_mu(n: usize, lambda: usize, mu: usize) -> Result<CmaParams> {
    if n == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    if lambda < 2 || mu == 0 || mu > lambda {
        return Err(invalid("mu", format!("mu = {mu} with lambda = {lambda}")));
    }
    let raw: Vec<f64> = (1..=mu)
        .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let nf = n as f64;
    let cc = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    let csigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let cmu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
    let dsigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + csigma;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let params = CmaParams {
        dim: n,
        lambda,
        mu,
        weights,
        mu_eff,
        c1,
        cmu: cmu.max(0.0),
        cc,
        csigma,
        dsigma,
        chi_n,
    };
    params.validate()?;
    Ok(params)
}

impl CmaParams {
    pub fn validate(&self) -> Result<()> {
        if self.mu == 0 || self.mu > self.lambda || self.weights.len() != self.mu {
            return Err(invalid("mu", format!("mu = {} with lambda = {}", self.mu, self.lambda)));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("sum to {sum}")));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) || self.weights.windows(2).any(|p| p[1] > p[0]) {
            return Err(invalid("weights", "must be positive and non-increasing"));
        }
        if self.c1 < 0.0 || self.cmu < 0.0 || self.c1 + self.cmu > 1.0 {
            return Err(invalid("c1/cmu", format!("c1 = {}, cmu = {}", self.c1, self.cmu)));
        }
        Ok(())
    }
}

/// A population with its ranking, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPopulation {
    pub points: Vec<DVector<f64>>,
    pub order: Vec<usize>,
}

impl RankedPopulation {
    /// Ranks `points` by ascending `values` (see [`rank_order`]).
    pub fn from_values(points: Vec<DVector<f64>>, values: &[f64]) -> Self {
        let order = rank_order(values);
        Self { points, order }
    }
}

/// Indices of `values` sorted best (smallest) first.
///
/// The sort is stable, so ties keep evaluation order. Non-finite values rank
/// after every finite one and tie with each other.
pub fn rank_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| compare_objective(values[a], values[b]));
    idx
}

fn compare_objective(a: f64, b: f64) -> Ordering {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => a.partial_cmp(&b).unwrap_or(Ordering::Equal),
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => Ordering::Equal,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaState {
    dist: GaussianParams,
    eigen: EigenCache,
    path_c: DVector<f64>,
    path_sigma: DVector<f64>,
    gen: usize,
    params: CmaParams,
    pending: Option<Vec<DVector<f64>>>,
}

impl CmaState {
    pub fn new(dist: GaussianParams, params: CmaParams) -> Result<Self> {
        if dist.dim() != params.dim {
            return Err(Error::DimensionMismatch {
                expected: params.dim,
                actual: dist.dim(),
            });
        }
        params.validate()?;
        let eigen = EigenCache::compute(&dist)?;
        let n = params.dim;
        Ok(Self {
            dist,
            eigen,
            path_c: DVector::zeros(n),
            path_sigma: DVector::zeros(n),
            gen: 0,
            params,
            pending: None,
        })
    }

    pub fn dist(&self) -> &GaussianParams {
        &self.dist
    }

    pub fn eigen(&self) -> &EigenCache {
        &self.eigen
    }

    pub fn params(&self) -> &CmaParams {
        &self.params
    }

    pub fn generation(&self) -> usize {
        self.gen
    }

    pub fn path_c(&self) -> &DVector<f64> {
        &self.path_c
    }

    pub fn path_sigma(&self) -> &DVector<f64> {
        &self.path_sigma
    }

    /// Swaps in new strategy constants (e.g. a different population size),
    /// keeping the distribution and evolution paths.
    pub fn set_params(&mut self, params: CmaParams) -> Result<()> {
        if params.dim != self.params.dim {
            return Err(Error::DimensionMismatch {
                expected: self.params.dim,
                actual: params.dim,
            });
        }
        params.validate()?;
        self.params = params;
        self.pending = None;
        Ok(())
    }

    /// Samples `lambda` candidates and remembers them for the next [`tell`].
    ///
    /// [`tell`]: CmaState::tell
    pub fn ask<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<DVector<f64>>> {
        let points = sample(&self.dist, &self.eigen, self.params.lambda, rng)?;
        self.pending = Some(points.clone());
        Ok(points)
    }

    /// Updates mean, covariance and step size from a ranked population.
    pub fn tell(&mut self, pop: &RankedPopulation) -> Result<()> {
        let asked = self
            .pending
            .as_ref()
            .ok_or_else(|| Error::PopulationMismatch("tell without a preceding ask".into()))?;
        if asked != &pop.points {
            return Err(Error::PopulationMismatch("points differ from the last ask".into()));
        }
        check_permutation(&pop.order, pop.points.len())?;

        let p = &self.params;
        let n = p.dim;
        let sigma = self.dist.sigma();
        if sigma <= 0.0 {
            return Err(invalid("sigma", "cannot update a zero step size distribution"));
        }
        let old_mean = self.dist.mean().clone();

        // Steps of the mu best points, in units of sigma, pre-scaled by sqrt(w_i)
        // so that Y Y^T is the weighted rank-mu sum.
        let mut steps = DMatrix::zeros(n, p.mu);
        let mut new_mean = DVector::zeros(n);
        for (rank, &w) in p.weights.iter().enumerate() {
            let x = &pop.points[pop.order[rank]];
            if x.iter().any(|v| !v.is_finite()) {
                return Err(invalid("population", "non-finite point among the selected parents"));
            }
            new_mean.axpy(w, x, 1.0);
            steps.set_column(rank, &((x - &old_mean) * (w.sqrt() / sigma)));
        }
        let mean_step = (&new_mean - &old_mean) / sigma;

        let cs = p.csigma;
        let whitened_step = self.eigen.inv_sqrt() * &mean_step;
        let path_sigma = &self.path_sigma * (1.0 - cs) + whitened_step * (cs * (2.0 - cs) * p.mu_eff).sqrt();
        let ps_norm = path_sigma.norm();
        let decay = 1.0 - (1.0 - cs).powi(2 * (self.gen as i32 + 1));
        let hsig = ps_norm / decay.max(f64::MIN_POSITIVE).sqrt() < (1.4 + 2.0 / (n as f64 + 1.0)) * p.chi_n;
        let hsig = if hsig { 1.0 } else { 0.0 };

        let cc = p.cc;
        let path_c = &self.path_c * (1.0 - cc) + &mean_step * (hsig * (cc * (2.0 - cc) * p.mu_eff).sqrt());

        let c = self.dist.cov();
        let mut cov = c * (1.0 - p.c1 - p.cmu);
        if p.c1 > 0.0 {
            cov += (&path_c * path_c.transpose() + c * ((1.0 - hsig) * cc * (2.0 - cc))) * p.c1;
        }
        if p.cmu > 0.0 {
            cov += (&steps * steps.transpose()) * p.cmu;
        }

        let exponent = ((cs / p.dsigma) * (ps_norm / p.chi_n - 1.0)).min(1.0);
        let new_sigma = sigma * exponent.exp();

        // Nothing is committed unless the new covariance decomposes.
        let mut dist = self.dist.clone();
        dist.set_mean(new_mean)?;
        dist.set_sigma(new_sigma)?;
        dist.set_cov(cov)?;
        let eigen = match EigenCache::compute(&dist) {
            Ok(e) if e.condition() <= MAX_CONDITION => e,
            _ => {
                dist.set_cov(floor_eigenvalues(dist.cov())?)?;
                EigenCache::compute(&dist)?
            }
        };
        self.eigen = eigen;
        self.dist = dist;
        self.path_sigma = path_sigma;
        self.path_c = path_c;
        self.gen += 1;
        self.pending = None;
        Ok(())
    }
}

/// Condition number above which `C` is repaired; rounding in the update
/// would otherwise eventually make it indefinite. Well above the default
/// restart limit, so ordinary runs never get here.
pub const MAX_CONDITION: f64 = 1e16;

/// Condition number `C` is brought back to by the repair; far enough above
/// rounding that the rebuilt matrix is safely positive definite.
const REPAIRED_CONDITION: f64 = 1e14;

/// Raises every eigenvalue of `cov` to at least `max / REPAIRED_CONDITION`.
fn floor_eigenvalues(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = cov.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: eig.eigenvalues.min() });
    }
    let floored = eig.eigenvalues.map(|v| v.max(max / REPAIRED_CONDITION));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose())
}

fn check_permutation(order: &[usize], len: usize) -> Result<()> {
    if order.len() != len {
        return Err(Error::PopulationMismatch(format!(
            "ranking has {} entries for {len} points",
            order.len()
        )));
    }
    let mut seen = vec![false; len];
    for &i in order {
        if i >= len || seen[i] {
            return Err(Error::PopulationMismatch("ranking is not a permutation".into()));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Thresholds for [`should_restart`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartCriteria {
    /// Restart when `sigma * max(D)` drops below this.
    pub tol_x: f64,
    /// Restart when the condition number of `C` exceeds this.
    pub max_condition: f64,
    /// Restart when the range of per-generation best values over the window
    /// is at most this. Zero compares ranks only.
    pub tol_flat: f64,
    /// Restart when the median per-generation best over the last fifth of a
    /// [`stagnation_window`] is no better than over its first fifth.
    pub stagnation: bool,
}

impl Default for RestartCriteria {
    fn default() -> Self {
        Self {
            tol_x: 1e-12,
            max_condition: 1e14,
            tol_flat: 0.0,
            stagnation: true,
        }
    }
}

/// `10 + ceil(30 n / lambda)` generations.
pub fn flat_window(n: usize, lambda: usize) -> usize {
    10 + (30 * n).div_ceil(lambda)
}

/// `120 + ceil(30 n / lambda)` generations.
pub fn stagnation_window(n: usize, lambda: usize) -> usize {
    120 + (30 * n).div_ceil(lambda)
}

fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Whether the run should be abandoned and restarted. `history` holds the best
/// objective value of each past generation, oldest first.
pub fn should_restart(state: &CmaState, history: &[f64], criteria: &RestartCriteria) -> bool {
    let eigen = state.eigen();
    if state.dist().sigma() * eigen.max_scale() < criteria.tol_x {
        return true;
    }
    if eigen.condition() > criteria.max_condition {
        return true;
    }
    let window = flat_window(state.params().dim, state.params().lambda);
    if history.len() >= window {
        let recent = &history[history.len() - window..];
        let hi = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = recent.iter().copied().fold(f64::INFINITY, f64::min);
        if hi - lo <= criteria.tol_flat {
            return true;
        }
    }
    let window = stagnation_window(state.params().dim, state.params().lambda);
    if criteria.stagnation && history.len() >= window {
        // Comparisons only, so the decision survives monotone transforms.
        let recent = &history[history.len() - window..];
        let fifth = window / 5;
        if lower_median(&recent[window - fifth..]) >= lower_median(&recent[..fifth]) {
            return true;
        }
    }
    false
}

/// How a run picks its initial search distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartConfig {
    /// Initial means are uniform in `[-box, box]^n`.
    pub box_half_width: f64,
    pub sigma0: f64,
}

impl Default for StartConfig {
    fn default() -> Self {
        Self {
            box_half_width: 5.0,
            sigma0: 2.0,
        }
    }
}

/// `N(u, sigma0^2 I)` with `u` uniform in the start box.
pub fn initial_distribution<R: Rng + ?Sized>(dim: usize, start: &StartConfig, rng: &mut R) -> Result<GaussianParams> {
    let b = start.box_half_width;
    let mean = DVector::from_fn(dim, |_, _| rng.random_range(-b..=b));
    GaussianParams::isotropic(mean, start.sigma0)
}

/// Settings for [`minimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaRunConfig {
    /// Population size of the first start; defaults to `4 + floor(3 ln n)`.
    pub lambda: Option<usize>,
    pub start: StartConfig,
    pub restart: RestartCriteria,
    /// Population growth factor applied at each restart.
    pub lambda_growth: usize,
}

impl Default for CmaRunConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            start: StartConfig::default(),
            restart: RestartCriteria::default(),
            lambda_growth: 2,
        }
    }
}

/// Plain CMA-ES with increasing-population restarts, until `target` is
/// reached or `budget` true evaluations are spent.
pub fn minimize<R: Rng + ?Sized>(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    dim: usize,
    cfg: &CmaRunConfig,
    budget: usize,
    target: f64,
    rng: &mut R,
) -> Result<RunRecord> {
    let mut lambda = default_params(dim, cfg.lambda)?.lambda;
    let mut ev = Evaluator::new(objective, budget, target);
    let mut restarts = 0;
    'runs: while !ev.is_done() {
        let dist = initial_distribution(dim, &cfg.start, rng)?;
        let mut state = CmaState::new(dist, default_params(dim, Some(lambda))?)?;
        let mut history = Vec::new();
        loop {
            let points = state.ask(rng)?;
            let Some(values) = ev.evaluate_all(&points) else {
                break 'runs;
            };
            history.push(values.iter().copied().fold(f64::INFINITY, f64::min));
            if state.tell(&RankedPopulation::from_values(points, &values)).is_err()
                || should_restart(&state, &history, &cfg.restart)
            {
                break;
            }
        }
        restarts += 1;
        lambda *= cfg.lambda_growth.max(1);
    }
    Ok(ev.finish(restarts, Vec::new(), false))
}
