//! Epoch controller for surrogate-assisted CMA-ES.
//!
//! Each epoch trains a surrogate around the current search distribution,
//! optimizes it while the search distribution stays inside a KL trust region
//! around the training distribution, spends one generation of true
//! evaluations, and uses the surrogate's error on that generation to resize
//! the trust region for the next epoch:
//!
//! ```text
//! Err       <- (1 - alpha_s) Err + alpha_s Err_hat
//! KL_thresh <- exp((tau_err - Err) / tau_err * ln KL_max)
//! ```
//!
//! The surrogate hyper-parameters are tuned alongside by a one-generation
//! CMA-ES step per epoch on `[0, 1]^3`, scored by drift error.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cmaes::{
    default_lambda, default_params, initial_distribution, params_with_mu, should_restart, CmaParams, CmaState,
    RankedPopulation, RestartCriteria, StartConfig,
};
use crate::distribution::{kl_divergence_cached, EigenCache, GaussianParams};
use crate::error::{invalid, Error, Result};
use crate::record::{Evaluator, RunRecord};
use crate::surrogate::{drift_error, train, EvaluatedSample, SurrogateHyperParams, TrainingPool};

/// How long each epoch optimizes the surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Until `KL(current || training) > KL_thresh`.
    KlTrustRegion,
    /// A generation count scaled linearly by the relaxed error:
    /// `n_max` at zero error, none at `tau_err`.
    FixedGenerations { n_max: usize },
}

/// Search ranges of the tuned hyper-parameters. Each maps from `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperRanges {
    pub q_min: usize,
    pub q_max: usize,
    /// Log-scaled.
    pub width: (f64, f64),
    /// Log-scaled.
    pub cost: (f64, f64),
    pub cost_growth: f64,
    /// Dual coordinate updates per training point.
    pub solver_iters_per_q: usize,
    pub warm_start: bool,
}

impl HyperRanges {
    /// `q` fixed at `20 (4 + floor(3 ln n))`, width multiplier in `[1, 2]`,
    /// cost in `[1e6, 1e10]`.
    ///
    /// Drift error on a single fresh generation rewards small training sets
    /// even though large ones make the optimizer faster, so `q` is not left
    /// to the tuner by default. Narrower widths and softer costs were
    /// consistently slower on Rosenbrock and ellipsoids in 20-D.
    pub fn for_dim(n: usize) -> Self {
        let q = (20 * default_lambda(n)).max(4 * n);
        Self {
            q_min: q,
            q_max: q,
            width: (1.0, 2.0),
            cost: (1e6, 1e10),
            cost_growth: 1.05,
            solver_iters_per_q: 300,
            warm_start: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_min < 2 || self.q_max < self.q_min {
            return Err(invalid("q range", format!("[{}, {}]", self.q_min, self.q_max)));
        }
        for (name, (lo, hi)) in [("width range", self.width), ("cost range", self.cost)] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(invalid(name, format!("[{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Maps a tuner point (clamped to the unit cube) to hyper-parameters.
    pub fn decode(&self, u: &DVector<f64>) -> SurrogateHyperParams {
        let c = |i: usize| u[i].clamp(0.0, 1.0);
        let log_lerp = |(lo, hi): (f64, f64), t: f64| (lo.ln() + t * (hi.ln() - lo.ln())).exp();
        let q = (self.q_min as f64 + c(0) * (self.q_max - self.q_min) as f64).round() as usize;
        SurrogateHyperParams {
            q,
            width: log_lerp(self.width, c(1)),
            cost_base: log_lerp(self.cost, c(2)),
            cost_growth: self.cost_growth,
            solver_iters: self.solver_iters_per_q * q,
            warm_start: self.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub tau_err: f64,
    pub ln_kl_max: f64,
    pub boost_threshold: f64,
    pub boost_factor: usize,
    /// Parents of a boosted generation as a multiple of the base `mu`,
    /// capped at half the boosted population. `None` uses half the boosted
    /// population.
    pub boost_mu_factor: Option<usize>,
    /// Smoothing weight of the newest drift error in the relaxed error.
    pub alpha_s: f64,
    /// True-objective generations before the first surrogate is trained.
    pub n_start: usize,
    /// Initial relaxed error; `None` means `tau_err`.
    pub err_init: Option<f64>,
    pub schedule: Schedule,
    /// Base population size; defaults to `4 + floor(3 ln n)`.
    pub lambda: Option<usize>,
    /// Ranges of the tuned hyper-parameters; defaults from the dimension.
    pub hyper_ranges: Option<HyperRanges>,
    /// Initial tuner mean in `[0, 1]^3` (q, width, cost).
    pub tuner_start: [f64; 3],
    pub tuner_sigma0: f64,
    /// Hard cap on surrogate generations in one epoch.
    pub max_surrogate_generations: usize,
    pub start: StartConfig,
    pub restart: RestartCriteria,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            tau_err: 0.45,
            ln_kl_max: 6.0,
            boost_threshold: 0.35,
            boost_factor: 100,
            boost_mu_factor: Some(2),
            alpha_s: 0.2,
            n_start: 10,
            err_init: None,
            schedule: Schedule::KlTrustRegion,
            lambda: None,
            hyper_ranges: None,
            tuner_start: [0.5, 0.3, 0.5],
            tuner_sigma0: 0.1,
            max_surrogate_generations: 1000,
            start: StartConfig::default(),
            restart: RestartCriteria::default(),
        }
    }
}

impl ControllerConfig {
    pub fn fixed_generations(n_max: usize) -> Self {
        Self {
            schedule: Schedule::FixedGenerations { n_max },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_err > 0.0 && self.tau_err < 1.0) {
            return Err(invalid("tau_err", "must lie in (0, 1)"));
        }
        if !(self.ln_kl_max > 0.0) {
            return Err(invalid("ln_kl_max", "must be positive"));
        }
        if !(self.alpha_s > 0.0 && self.alpha_s <= 1.0) {
            return Err(invalid("alpha_s", "must lie in (0, 1]"));
        }
        if self.boost_factor == 0 {
            return Err(invalid("boost_factor", "must be at least 1"));
        }
        if self.boost_mu_factor == Some(0) {
            return Err(invalid("boost_mu_factor", "must be at least 1"));
        }
        if let Some(e) = self.err_init {
            if !(0.0..=1.0).contains(&e) {
                return Err(invalid("err_init", "must lie in [0, 1]"));
            }
        }
        if self.max_surrogate_generations == 0 {
            return Err(invalid("max_surrogate_generations", "must be at least 1"));
        }
        if let Some(r) = &self.hyper_ranges {
            r.validate()?;
        }
        Ok(())
    }

    pub fn ranges_for(&self, dim: usize) -> HyperRanges {
        self.hyper_ranges.unwrap_or_else(|| HyperRanges::for_dim(dim))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub kl_thresh: f64,
    /// Relaxed (smoothed) drift error.
    pub err_relaxed: f64,
    pub hyper: SurrogateHyperParams,
    /// CMA-ES over the unit cube of hyper-parameters.
    pub tuner: CmaState,
    pub ranges: HyperRanges,
    pub epoch_index: usize,
}

impl ControllerState {
    pub fn new(cfg: &ControllerConfig, dim: usize) -> Result<Self> {
        cfg.validate()?;
        let ranges = cfg.ranges_for(dim);
        ranges.validate()?;
        let err = cfg.err_init.unwrap_or(cfg.tau_err);
        let start = DVector::from_column_slice(&cfg.tuner_start);
        let tuner = CmaState::new(
            GaussianParams::isotropic(start.clone(), cfg.tuner_sigma0)?,
            default_params(3, None)?,
        )?;
        Ok(Self {
            kl_thresh: threshold_for(err, cfg),
            err_relaxed: err,
            hyper: ranges.decode(&start),
            tuner,
            ranges,
            epoch_index: 0,
        })
    }

    /// Smooths `err_hat` into the relaxed error and recomputes `kl_thresh`.
    pub fn update_threshold(&mut self, err_hat: f64, cfg: &ControllerConfig) {
        self.err_relaxed = (1.0 - cfg.alpha_s) * self.err_relaxed + cfg.alpha_s * err_hat;
        self.kl_thresh = threshold_for(self.err_relaxed, cfg);
    }
}

/// `exp((tau_err - err) / tau_err * ln_kl_max)`. Not clamped: errors above
/// `tau_err` give thresholds below one.
pub fn threshold_for(err_relaxed: f64, cfg: &ControllerConfig) -> f64 {
    ((cfg.tau_err - err_relaxed) / cfg.tau_err * cfg.ln_kl_max).exp()
}

/// Whether the search distribution has left the trust region around the
/// surrogate's training distribution.
pub fn epoch_should_end(train_dist: &GaussianParams, current: &GaussianParams, kl_thresh: f64) -> Result<bool> {
    let tc = EigenCache::compute(train_dist)?;
    let cc = EigenCache::compute(current)?;
    Ok(kl_divergence_cached(current, &cc, train_dist, &tc)? > kl_thresh)
}

/// Population size for surrogate-scored generations.
pub fn effective_lambda(err_relaxed: f64, base_lambda: usize, cfg: &ControllerConfig) -> usize {
    if err_relaxed < cfg.boost_threshold {
        base_lambda * cfg.boost_factor
    } else {
        base_lambda
    }
}

/// Strategy constants for a surrogate phase of `lambda` candidates.
///
/// A boosted population keeps selection strong: with `mu = lambda / 2` the
/// rank-mu learning rate approaches one and a single boosted generation
/// overwrites the covariance learnt on the true objective.
pub fn surrogate_params(dim: usize, base: &CmaParams, lambda: usize, cfg: &ControllerConfig) -> Result<CmaParams> {
    if lambda == base.lambda {
        return Ok(base.clone());
    }
    match cfg.boost_mu_factor {
        Some(k) => params_with_mu(dim, lambda, (k * base.mu).clamp(1, lambda / 2)),
        None => default_params(dim, Some(lambda)),
    }
}

/// Number of surrogate generations under [`Schedule::FixedGenerations`].
pub fn fixed_generations(err_relaxed: f64, n_max: usize, cfg: &ControllerConfig) -> usize {
    let frac = ((cfg.tau_err - err_relaxed) / cfg.tau_err).clamp(0.0, 1.0);
    (frac * n_max as f64).round() as usize
}

/// Outcome of one tuning step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuneOutcome {
    Updated,
    /// The tuner has no spread left; nothing was evaluated.
    Degenerate,
    /// Every candidate failed to train; state untouched.
    AllFailed,
}

/// One ask/tell of the hyper-parameter tuner.
///
/// Each candidate is scored by training on the `q` nearest points of `pool`
/// (the training distribution's neighbourhood before `fresh` was evaluated)
/// and measuring drift error on `fresh`. The working hyper-parameters become
/// the decoded tuner mean. Uses no true evaluations.
pub fn tune_hyperparams<R: Rng + ?Sized>(
    state: &mut ControllerState,
    pool: &TrainingPool,
    fresh: &[EvaluatedSample],
    rng: &mut R,
) -> Result<TuneOutcome> {
    if fresh.len() < 2 {
        return Err(Error::TooFewTestPoints(fresh.len()));
    }
    if state.tuner.dist().sigma() * state.tuner.eigen().max_scale() == 0.0 {
        return Ok(TuneOutcome::Degenerate);
    }
    let mut tuner = state.tuner.clone();
    let candidates = tuner.ask(rng)?;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut any_ok = false;
    for u in &candidates {
        let hp = state.ranges.decode(u);
        let score = pool
            .training_set(hp.q.min(pool.len()))
            .and_then(|ts| train(&ts, &hp))
            .and_then(|model| drift_error(&model, fresh));
        match score {
            Ok(e) => {
                any_ok = true;
                scores.push(e);
            }
            Err(_) => scores.push(f64::INFINITY),
        }
    }
    if !any_ok {
        return Ok(TuneOutcome::AllFailed);
    }
    if tuner.tell(&RankedPopulation::from_values(candidates, &scores)).is_err() {
        return Ok(TuneOutcome::AllFailed);
    }
    state.hyper = state.ranges.decode(tuner.dist().mean());
    state.tuner = tuner;
    Ok(TuneOutcome::Updated)
}

/// Diagnostics for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub surrogate_generations: usize,
    /// Population size used on the surrogate.
    pub surrogate_lambda: usize,
    /// `KL(current || training)` after each surrogate generation.
    pub kl_trace: Vec<f64>,
    pub kl_at_exit: f64,
    /// Threshold the epoch ran under.
    pub kl_thresh: f64,
    pub drift_err: f64,
    pub err_relaxed: f64,
    pub true_evals_used: usize,
    pub evals_total: usize,
    pub best_f: f64,
    /// Hyper-parameters the epoch's surrogate was trained with.
    pub hyper: SurrogateHyperParams,
    pub tuning: String,
    /// Step size at the end of the surrogate phase over the step size at training.
    pub sigma_ratio: f64,
}

/// Surrogate-assisted CMA-ES. Only true evaluations count against `budget`.
///
/// Starts with `n_start` generations of plain CMA-ES, then repeats epochs
/// until the target is reached or the budget is spent. A degenerate search
/// distribution triggers a restart with doubled population size; the archive
/// and controller state carry over.
pub fn run<R: Rng + ?Sized>(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    dim: usize,
    cfg: &ControllerConfig,
    budget: usize,
    target: f64,
    rng: &mut R,
) -> Result<RunRecord> {
    cfg.validate()?;
    let mut lambda = default_params(dim, cfg.lambda)?.lambda;
    let warmup = lambda * cfg.n_start;
    if budget < warmup {
        return Err(Error::BudgetTooSmall {
            budget,
            required: warmup,
        });
    }
    let mut ctrl = ControllerState::new(cfg, dim)?;
    let mut ev = Evaluator::new(objective, budget, target);
    let mut archive: Vec<EvaluatedSample> = Vec::new();
    let mut epochs = Vec::new();
    let mut restarts = 0;

    'runs: while !ev.is_done() {
        let base = default_params(dim, Some(lambda))?;
        let mut cma = CmaState::new(initial_distribution(dim, &cfg.start, rng)?, base.clone())?;
        let mut history = Vec::new();

        if restarts == 0 {
            for _ in 0..cfg.n_start {
                match true_generation(&mut cma, &mut ev, &mut archive, rng)? {
                    Generation::Told(best) => history.push(best),
                    Generation::Stopped => break 'runs,
                    Generation::Diverged => continue 'runs,
                }
            }
        }

        loop {
            if should_restart(&cma, &history, &cfg.restart) {
                break;
            }
            let pool = TrainingPool::new(&archive, cma.dist(), ctrl.ranges.q_max)?;
            let q = ctrl.hyper.q.min(pool.len());
            let trained_hyper = ctrl.hyper;
            let model = pool.training_set(q).and_then(|ts| train(&ts, &trained_hyper));
            let Ok(model) = model else {
                // Nothing to learn from yet: spend a plain generation.
                match true_generation(&mut cma, &mut ev, &mut archive, rng)? {
                    Generation::Told(best) => history.push(best),
                    Generation::Stopped => break 'runs,
                    Generation::Diverged => break,
                }
                continue;
            };
            let frozen = cma.dist().clone();
            let frozen_cache = cma.eigen().clone();

            let surrogate_lambda = effective_lambda(ctrl.err_relaxed, lambda, cfg);
            let generation_cap = match cfg.schedule {
                Schedule::KlTrustRegion => cfg.max_surrogate_generations,
                Schedule::FixedGenerations { n_max } => fixed_generations(ctrl.err_relaxed, n_max, cfg),
            };
            let mut kl_trace = Vec::new();
            if generation_cap > 0 {
                let mut surrogate = cma.clone();
                surrogate.set_params(surrogate_params(dim, &base, surrogate_lambda, cfg)?)?;
                while kl_trace.len() < generation_cap {
                    let points = surrogate.ask(rng)?;
                    // Higher score = better, CMA-ES minimizes.
                    let keys: Vec<f64> = model.predict_all(&points)?.into_iter().map(|s| -s).collect();
                    if surrogate.tell(&RankedPopulation::from_values(points, &keys)).is_err() {
                        break;
                    }
                    let kl = kl_divergence_cached(surrogate.dist(), surrogate.eigen(), &frozen, &frozen_cache)?;
                    kl_trace.push(kl);
                    if cfg.schedule == Schedule::KlTrustRegion && kl > ctrl.kl_thresh {
                        break;
                    }
                    if surrogate.dist().sigma() * surrogate.eigen().max_scale() < cfg.restart.tol_x {
                        break;
                    }
                }
                surrogate.set_params(base.clone())?;
                cma = surrogate;
            }

            let sigma_ratio = cma.dist().sigma() / frozen.sigma();
            let before = archive.len();
            let used_before = ev.used();
            let outcome = true_generation(&mut cma, &mut ev, &mut archive, rng)?;
            let fresh = &archive[before..];
            if fresh.len() < 2 {
                break 'runs;
            }
            let err_hat = drift_error(&model, fresh)?;
            let kl_thresh = ctrl.kl_thresh;
            ctrl.update_threshold(err_hat, cfg);
            let tuning = match tune_hyperparams(&mut ctrl, &pool, fresh, rng)? {
                TuneOutcome::Updated => "updated",
                TuneOutcome::Degenerate => "degenerate",
                TuneOutcome::AllFailed => "all_failed",
            };
            ctrl.epoch_index += 1;
            epochs.push(EpochReport {
                surrogate_generations: kl_trace.len(),
                surrogate_lambda,
                kl_at_exit: kl_trace.last().copied().unwrap_or(0.0),
                kl_trace,
                kl_thresh,
                drift_err: err_hat,
                err_relaxed: ctrl.err_relaxed,
                true_evals_used: ev.used() - used_before,
                evals_total: ev.used(),
                best_f: ev.best(),
                hyper: SurrogateHyperParams { q, ..trained_hyper },
                tuning: tuning.to_string(),
                sigma_ratio,
            });
            match outcome {
                Generation::Told(best) => history.push(best),
                Generation::Stopped => break 'runs,
                Generation::Diverged => break,
            }
        }
        restarts += 1;
        lambda *= 2;
    }
    Ok(ev.finish(restarts, epochs, false))
}

enum Generation {
    /// Best value of the generation.
    Told(f64),
    /// Budget or target reached mid-generation.
    Stopped,
    /// The update produced an unusable distribution.
    Diverged,
}

/// Samples and truly evaluates one population, archives it and updates `cma`.
fn true_generation<R: Rng + ?Sized>(
    cma: &mut CmaState,
    ev: &mut Evaluator<'_>,
    archive: &mut Vec<EvaluatedSample>,
    rng: &mut R,
) -> Result<Generation> {
    let points = cma.ask(rng)?;
    let mut values = Vec::with_capacity(points.len());
    for x in &points {
        let Some(v) = ev.evaluate(x.as_slice()) else {
            return Ok(Generation::Stopped);
        };
        archive.push(EvaluatedSample {
            point: x.clone(),
            value: v,
            eval_index: ev.used(),
        });
        values.push(v);
    }
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    if ev.is_done() {
        return Ok(Generation::Stopped);
    }
    match cma.tell(&RankedPopulation::from_values(points, &values)) {
        Ok(()) => Ok(Generation::Told(best)),
        Err(_) => Ok(Generation::Diverged),
    }
}
