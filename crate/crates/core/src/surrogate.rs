//! Rank-based surrogate: a Ranking-SVM over a covariance-adapted RBF kernel.
//!
//! Training points are mapped through `C^{-1/2}(x - m)` of the distribution
//! they were selected under, which makes the model invariant to rotations the
//! optimizer has already learned. Only the order of the objective values
//! enters training, so the model is also invariant to monotone transforms of
//! the objective.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distribution::{whiten, EigenCache, GaussianParams};
use crate::error::{invalid, Error, Result};

/// A point with its true objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSample {
    pub point: DVector<f64>,
    pub value: f64,
    /// Global true-evaluation counter, unique per run.
    pub eval_index: usize,
}

/// Orders samples by value (non-finite last), then by evaluation index.
fn by_value(a: &EvaluatedSample, b: &EvaluatedSample) -> Ordering {
    let primary = match (a.value.is_finite(), b.value.is_finite()) {
        (true, true) => a.value.partial_cmp(&b.value).unwrap_or(Ordering::Equal),
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => Ordering::Equal,
    };
    primary.then(a.eval_index.cmp(&b.eval_index))
}

/// `q >= 2` samples sorted best first, plus the distribution they were drawn
/// around.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    samples: Vec<EvaluatedSample>,
    source_dist: GaussianParams,
}

impl TrainingSet {
    pub fn new(mut samples: Vec<EvaluatedSample>, source_dist: GaussianParams) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::ArchiveTooSmall {
                available: samples.len(),
                required: 2,
            });
        }
        if let Some(s) = samples.iter().find(|s| s.point.len() != source_dist.dim()) {
            return Err(Error::DimensionMismatch {
                expected: source_dist.dim(),
                actual: s.point.len(),
            });
        }
        samples.sort_by(by_value);
        Ok(Self { samples, source_dist })
    }

    pub fn samples(&self) -> &[EvaluatedSample] {
        &self.samples
    }

    pub fn source_dist(&self) -> &GaussianParams {
        &self.source_dist
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Archive samples ordered by Mahalanobis distance to a distribution's mean.
///
/// Every training set of size `q` drawn from the same archive and distribution
/// is a prefix of this ordering, so one pool serves any number of `q` values.
#[derive(Debug, Clone)]
pub struct TrainingPool {
    nearest: Vec<EvaluatedSample>,
    source_dist: GaussianParams,
}

impl TrainingPool {
    /// Keeps the `max_q` archive samples closest to `dist.mean` under
    /// `sigma^2 C`; distance ties go to the earlier evaluation.
    pub fn new(archive: &[EvaluatedSample], dist: &GaussianParams, max_q: usize) -> Result<Self> {
        let cache = EigenCache::compute(dist)?;
        let mut keyed = Vec::with_capacity(archive.len());
        for s in archive {
            // sigma is a common factor, so the C-whitened norm orders identically.
            let d = whiten(dist, &cache, &s.point)?.norm_squared();
            keyed.push((d, s));
        }
        keyed.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.eval_index.cmp(&b.1.eval_index))
        });
        let nearest = keyed.into_iter().take(max_q).map(|(_, s)| s.clone()).collect();
        Ok(Self {
            nearest,
            source_dist: dist.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.nearest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nearest.is_empty()
    }

    pub fn source_dist(&self) -> &GaussianParams {
        &self.source_dist
    }

    pub fn training_set(&self, q: usize) -> Result<TrainingSet> {
        if q < 2 || q > self.nearest.len() {
            return Err(Error::ArchiveTooSmall {
                available: self.nearest.len(),
                required: q.max(2),
            });
        }
        TrainingSet::new(self.nearest[..q].to_vec(), self.source_dist.clone())
    }
}

/// The `q` archive samples nearest to `dist.mean` in the `sigma^2 C` metric,
/// sorted by value.
pub fn select_training_set(archive: &[EvaluatedSample], dist: &GaussianParams, q: usize) -> Result<TrainingSet> {
    if q < 2 || archive.len() < q {
        return Err(Error::ArchiveTooSmall {
            available: archive.len(),
            required: q.max(2),
        });
    }
    TrainingPool::new(archive, dist, q)?.training_set(q)
}

/// `exp(-(a-b)^T C^{-1} (a-b) / (2 s^2))` with `C = dist.cov`.
pub fn kernel(a: &DVector<f64>, b: &DVector<f64>, dist: &GaussianParams, s: f64) -> Result<f64> {
    if a.len() != b.len() || a.len() != dist.dim() {
        return Err(Error::DimensionMismatch {
            expected: dist.dim(),
            actual: if a.len() != dist.dim() { a.len() } else { b.len() },
        });
    }
    if !(s > 0.0) {
        return Err(invalid("s", "kernel width must be positive"));
    }
    let cache = EigenCache::compute(dist)?;
    let d = cache.inv_sqrt() * (a - b);
    Ok((-d.norm_squared() / (2.0 * s * s)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateHyperParams {
    /// Training-set size.
    pub q: usize,
    /// Kernel width, as a multiple of the mean pairwise distance between the
    /// whitened training points.
    pub width: f64,
    /// Cost of the chain constraint between the two best points.
    pub cost_base: f64,
    /// Cost ratio between consecutive constraints, best to worst.
    pub cost_growth: f64,
    /// Single-coordinate dual updates.
    pub solver_iters: usize,
    /// Start the dual from a rank-interpolating model instead of zero.
    pub warm_start: bool,
}

impl SurrogateHyperParams {
    /// Defaults for `q` training points: unit width multiplier, cost 1e3
    /// decaying by 1.05 per rank, `50 q` dual updates.
    pub fn with_q(q: usize) -> Self {
        Self {
            q,
            width: 1.0,
            cost_base: 1e3,
            cost_growth: 1.05,
            solver_iters: 50 * q,
            warm_start: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(invalid("q", "training set needs at least 2 points"));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(invalid("width", "must be positive"));
        }
        if !(self.cost_base >= 0.0 && self.cost_base.is_finite()) {
            return Err(invalid("cost_base", "must be non-negative"));
        }
        if !(self.cost_growth > 0.0 && self.cost_growth.is_finite()) {
            return Err(invalid("cost_growth", "must be positive"));
        }
        Ok(())
    }

    /// Box bound of each chain constraint, best pair first:
    /// `cost_base * cost_growth^-(i)` for `i = 0..q-1`.
    pub fn costs(&self, constraints: usize) -> Vec<f64> {
        (0..constraints)
            .map(|i| self.cost_base * self.cost_growth.powi(-(i as i32)))
            .collect()
    }
}

/// A trained rank predictor. Immutable once built.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    /// Training points in the whitened coordinates of `frozen_dist`, best first.
    support: Vec<DVector<f64>>,
    /// One per chain constraint `x_i < x_{i+1}`.
    duals: Vec<f64>,
    costs: Vec<f64>,
    /// Support points with a non-zero coefficient, row-major, and their
    /// coefficients; the prediction hot path.
    active_points: Vec<f64>,
    active_coefficients: Vec<f64>,
    frozen_dist: GaussianParams,
    frozen_cache: EigenCache,
    width: f64,
    train_misrank: f64,
}

impl SurrogateModel {
    pub fn duals(&self) -> &[f64] {
        &self.duals
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn support(&self) -> &[DVector<f64>] {
        &self.support
    }

    pub fn frozen_dist(&self) -> &GaussianParams {
        &self.frozen_dist
    }

    /// Absolute kernel width in whitened coordinates.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Fraction of chain constraints the trained model violates (ties count ½).
    pub fn train_misrank(&self) -> f64 {
        self.train_misrank
    }

    /// Rank score of `x`; larger means better (smaller objective).
    pub fn predict(&self, x: &DVector<f64>) -> Result<f64> {
        let z = whiten(&self.frozen_dist, &self.frozen_cache, x)?;
        Ok(self.score_whitened(&z))
    }

    pub fn predict_all(&self, xs: &[DVector<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    fn score_whitened(&self, z: &DVector<f64>) -> f64 {
        let scale = -1.0 / (2.0 * self.width * self.width);
        let z = z.as_slice();
        self.active_points
            .chunks_exact(z.len())
            .zip(&self.active_coefficients)
            .map(|(s, c)| c * (scale * squared_distance(s, z)).exp())
            .sum()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Trains a Ranking-SVM on the chain constraints `x_1 < x_2 < ... < x_q`.
///
/// The dual `max sum(a) - a^T Q a / 2, 0 <= a_i <= cost_i` is solved by
/// cyclic coordinate ascent for exactly `hp.solver_iters` coordinate steps.
pub fn train(ts: &TrainingSet, hp: &SurrogateHyperParams) -> Result<SurrogateModel> {
    hp.validate()?;
    let dist = ts.source_dist().clone();
    let cache = EigenCache::compute(&dist)?;
    let support: Vec<DVector<f64>> = ts
        .samples()
        .iter()
        .map(|s| whiten(&dist, &cache, &s.point))
        .collect::<Result<_>>()?;
    let q = support.len();

    let mut dist_sq = vec![0.0; q * q];
    let mut total = 0.0;
    for i in 0..q {
        for j in (i + 1)..q {
            let d = squared_distance(support[i].as_slice(), support[j].as_slice());
            dist_sq[i * q + j] = d;
            dist_sq[j * q + i] = d;
            total += d.sqrt();
        }
    }
    let mean_distance = total / (q * (q - 1) / 2) as f64;
    if !(mean_distance > 0.0) || !mean_distance.is_finite() {
        return Err(Error::DegenerateKernel);
    }
    let width = hp.width * mean_distance;
    let scale = -1.0 / (2.0 * width * width);
    let k: Vec<f64> = dist_sq.iter().map(|d| (scale * d).exp()).collect();
    let kij = |i: usize, j: usize| k[i * q + j];

    // Q_ij = <phi(x_i) - phi(x_{i+1}), phi(x_j) - phi(x_{j+1})>
    let m = q - 1;
    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let v = kij(i, j) - kij(i, j + 1) - kij(i + 1, j) + kij(i + 1, j + 1);
            gram[i * m + j] = v;
            gram[j * m + i] = v;
        }
    }
    const DIAG_EPS: f64 = 1e-12;
    if (0..m).all(|i| gram[i * m + i] <= DIAG_EPS) {
        return Err(Error::DegenerateKernel);
    }

    let costs = hp.costs(m);
    let mut duals = if hp.warm_start {
        rank_interpolation_start(&k, q, &costs).unwrap_or_else(|| vec![0.0; m])
    } else {
        vec![0.0; m]
    };
    // gradient of the dual objective: 1 - Q a
    let mut grad: Vec<f64> = (0..m)
        .map(|i| 1.0 - gram[i * m..(i + 1) * m].iter().zip(&duals).map(|(q, a)| q * a).sum::<f64>())
        .collect();
    for step in 0..hp.solver_iters {
        let i = step % m;
        let qii = gram[i * m + i];
        if qii <= DIAG_EPS {
            continue;
        }
        let updated = (duals[i] + grad[i] / qii).clamp(0.0, costs[i]);
        let delta = updated - duals[i];
        if delta != 0.0 {
            duals[i] = updated;
            let row = &gram[i * m..(i + 1) * m];
            for (g, qij) in grad.iter_mut().zip(row) {
                *g -= delta * qij;
            }
        }
    }

    // score(x) = sum_j a_j (K(x_j, x) - K(x_{j+1}, x)) = sum_k c_k K(x_k, x)
    let mut coefficients = vec![0.0; q];
    for (j, a) in duals.iter().enumerate() {
        coefficients[j] += a;
        coefficients[j + 1] -= a;
    }

    let train_scores: Vec<f64> = (0..q)
        .map(|p| (0..q).map(|c| coefficients[c] * kij(c, p)).sum())
        .collect();
    let misrank: f64 = train_scores
        .windows(2)
        .map(|w| pair_loss(w[0], w[1]))
        .sum::<f64>()
        / m as f64;

    Ok(SurrogateModel {
        active_points: support
            .iter()
            .zip(&coefficients)
            .filter(|(_, c)| **c != 0.0)
            .flat_map(|(s, _)| s.iter().copied())
            .collect(),
        active_coefficients: coefficients.iter().copied().filter(|c| *c != 0.0).collect(),
        support,
        duals,
        costs,
        frozen_dist: dist,
        frozen_cache: cache,
        width,
        train_misrank: misrank,
    })
}

/// Duals of the model that interpolates the ranks, clamped into the box.
///
/// With every chain constraint active the scores step down by exactly one
/// per rank, so the expansion coefficients solve `K c = r + t` with `r` the
/// centred reversed ranks and `t` chosen so that `c` sums to zero (a
/// prerequisite for `c = D a`). When the implied duals are feasible this is
/// the exact optimum. A small ridge keeps wide kernels solvable.
fn rank_interpolation_start(k: &[f64], q: usize, costs: &[f64]) -> Option<Vec<f64>> {
    let mut kmat = DMatrix::from_row_slice(q, q, k);
    let ridge = 1e-10 * q as f64;
    for i in 0..q {
        kmat[(i, i)] += ridge;
    }
    let chol = kmat.cholesky()?;
    let ranks = DVector::from_fn(q, |i, _| (q - 1) as f64 / 2.0 - i as f64);
    let c_r = chol.solve(&ranks);
    let c_1 = chol.solve(&DVector::from_element(q, 1.0));
    let shift = -c_r.sum() / c_1.sum();
    let c = c_r + c_1 * shift;
    let mut acc = 0.0;
    let duals: Vec<f64> = (0..q - 1)
        .map(|j| {
            acc += c[j];
            acc.clamp(0.0, costs[j])
        })
        .collect();
    duals.iter().all(|a| a.is_finite()).then_some(duals)
}

/// Loss for a pair whose first element is truly better.
fn pair_loss(better_score: f64, worse_score: f64) -> f64 {
    if better_score > worse_score {
        0.0
    } else if better_score == worse_score {
        0.5
    } else {
        1.0
    }
}

/// Empirical ranking error of `model` on `test`: over all ordered pairs,
/// 1 for a misranked pair, ½ for an objective tie or a score tie, 0 otherwise,
/// divided by `|test| (|test| - 1)`.
pub fn drift_error(model: &SurrogateModel, test: &[EvaluatedSample]) -> Result<f64> {
    if test.len() < 2 {
        return Err(Error::TooFewTestPoints(test.len()));
    }
    let scores: Vec<f64> = test
        .iter()
        .map(|s| model.predict(&s.point))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = test.iter().map(|s| s.value).collect();
    drift_error_from_scores(&scores, &values)
}

/// [`drift_error`] for precomputed scores (larger = better) and true values.
pub fn drift_error_from_scores(scores: &[f64], values: &[f64]) -> Result<f64> {
    let m = values.len();
    if m < 2 {
        return Err(Error::TooFewTestPoints(m));
    }
    if scores.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: scores.len(),
        });
    }
    // Each unordered pair contributes the same loss in both orders.
    let mut total = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            total += match objective_order(values[i], values[j]) {
                Ordering::Equal => 0.5,
                Ordering::Less => pair_loss(scores[i], scores[j]),
                Ordering::Greater => pair_loss(scores[j], scores[i]),
            };
        }
    }
    Ok(2.0 * total / (m * (m - 1)) as f64)
}

fn objective_order(a: f64, b: f64) -> Ordering {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => a.partial_cmp(&b).unwrap_or(Ordering::Equal),
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => Ordering::Equal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn sample(point: &[f64], value: f64, eval_index: usize) -> EvaluatedSample {
        EvaluatedSample {
            point: DVector::from_column_slice(point),
            value,
            eval_index,
        }
    }

    fn unit(n: usize) -> GaussianParams {
        GaussianParams::isotropic(DVector::zeros(n), 1.0).unwrap()
    }

    fn monotone_set(q: usize) -> TrainingSet {
        let archive: Vec<_> = (1..=q).map(|i| sample(&[i as f64], i as f64, i)).collect();
        let dist = GaussianParams::isotropic(DVector::from_element(1, (q as f64 + 1.0) / 2.0), 1.0).unwrap();
        TrainingSet::new(archive, dist).unwrap()
    }

    #[test]
    fn training_set_sorts_with_index_tiebreak() {
        let ts = TrainingSet::new(
            vec![sample(&[0.0], 2.0, 5), sample(&[1.0], 1.0, 9), sample(&[2.0], 1.0, 3), sample(&[3.0], f64::NAN, 0)],
            unit(1),
        )
        .unwrap();
        let idx: Vec<usize> = ts.samples().iter().map(|s| s.eval_index).collect();
        assert_eq!(idx, vec![3, 9, 5, 0]);
    }

    #[test]
    fn selection_takes_whole_archive_when_sizes_match() {
        let archive: Vec<_> = (0..5).map(|i| sample(&[i as f64, 0.0], -(i as f64), i)).collect();
        let ts = select_training_set(&archive, &unit(2), 5).unwrap();
        assert_eq!(ts.len(), 5);
        assert!(select_training_set(&archive, &unit(2), 6).is_err());
    }

    #[test]
    fn selection_is_nearest_neighbours() {
        let archive = vec![
            sample(&[3.0, 0.0], 0.0, 0),
            sample(&[0.5, 0.5], 1.0, 1),
            sample(&[-1.0, 0.0], 2.0, 2),
            sample(&[0.0, -2.5], 3.0, 3),
        ];
        let ts = select_training_set(&archive, &unit(2), 2).unwrap();
        let mut idx: Vec<usize> = ts.samples().iter().map(|s| s.eval_index).collect();
        idx.sort_unstable();
        assert_eq!(idx, vec![1, 2]);
    }

    #[test]
    fn selection_uses_mahalanobis_metric() {
        let dist = GaussianParams::new(
            DVector::zeros(2),
            1.0,
            DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 1.0])),
        )
        .unwrap();
        let archive = vec![sample(&[0.0, 2.0], 0.0, 0), sample(&[10.0, 0.0], 1.0, 1)];
        let ts = select_training_set(&archive, &dist, 2).unwrap();
        assert_eq!(ts.len(), 2);
        let pool = TrainingPool::new(&archive, &dist, 1).unwrap();
        let ts = pool.training_set(1.max(pool.len()));
        assert!(ts.is_err());
        let pool = TrainingPool::new(&archive, &dist, 2).unwrap();
        assert_eq!(pool.nearest[0].eval_index, 1);
    }

    #[test]
    fn kernel_examples() {
        let d = unit(2);
        let a = DVector::from_vec(vec![0.3, -1.0]);
        assert_eq!(kernel(&a, &a, &d, 0.7).unwrap(), 1.0);
        let b = &a + DVector::from_vec(vec![2f64.sqrt(), 0.0]);
        assert!((kernel(&a, &b, &d, 1.0).unwrap() - (-1f64).exp()).abs() < 1e-12);
        assert!(kernel(&a, &b, &d, 0.0).is_err());
    }

    #[test]
    fn two_point_problem() {
        let ts = TrainingSet::new(vec![sample(&[1.0, 0.0], 0.0, 0), sample(&[0.0, 1.0], 1.0, 1)], unit(2)).unwrap();
        let m = train(&ts, &SurrogateHyperParams::with_q(2)).unwrap();
        assert_eq!(m.train_misrank(), 0.0);
        assert!(m.predict(&ts.samples()[0].point).unwrap() > m.predict(&ts.samples()[1].point).unwrap());
    }

    #[test]
    fn monotone_one_dimensional_data() {
        let ts = monotone_set(20);
        let mut hp = SurrogateHyperParams::with_q(20);
        hp.width = 5.0;
        let m = train(&ts, &hp).unwrap();
        assert_eq!(m.train_misrank(), 0.0);
        let scores: Vec<f64> = ts.samples().iter().map(|s| m.predict(&s.point).unwrap()).collect();
        assert!(scores.windows(2).all(|w| w[0] > w[1]), "{scores:?}");
        let s1 = m.predict(&DVector::from_element(1, 1.0)).unwrap();
        let s20 = m.predict(&DVector::from_element(1, 20.0)).unwrap();
        assert!(s1 > s20);
    }

    #[test]
    fn warm_start_interpolates_ranks() {
        let ts = monotone_set(12);
        let mut hp = SurrogateHyperParams::with_q(12);
        hp.width = 0.3;
        hp.cost_base = 1e6;
        hp.solver_iters = 0;
        assert_eq!(train(&ts, &hp).unwrap().train_misrank(), 0.5);
        hp.warm_start = true;
        let m = train(&ts, &hp).unwrap();
        assert_eq!(m.train_misrank(), 0.0);
        // Every constraint is active, so consecutive scores differ by one.
        let scores: Vec<f64> = ts.samples().iter().map(|s| m.predict(&s.point).unwrap()).collect();
        assert!(scores.windows(2).all(|w| (w[0] - w[1] - 1.0).abs() < 1e-6), "{scores:?}");
    }

    #[test]
    fn zero_cost_gives_constant_model() {
        let ts = monotone_set(10);
        let mut hp = SurrogateHyperParams::with_q(10);
        hp.cost_base = 0.0;
        let m = train(&ts, &hp).unwrap();
        assert!(m.duals().iter().all(|a| *a == 0.0));
        assert_eq!(m.predict(&DVector::from_element(1, 3.3)).unwrap(), 0.0);
        assert_eq!(m.train_misrank(), 0.5);
    }

    #[test]
    fn identical_points_cannot_be_trained() {
        let ts = TrainingSet::new(
            (0..4).map(|i| sample(&[1.0, 1.0], i as f64, i)).collect(),
            unit(2),
        )
        .unwrap();
        assert_eq!(
            train(&ts, &SurrogateHyperParams::with_q(4)).unwrap_err(),
            Error::DegenerateKernel
        );
    }

    #[test]
    fn drift_error_examples() {
        let values = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(drift_error_from_scores(&[4.0, 3.0, 2.0, 1.0], &values).unwrap(), 0.0);
        assert_eq!(drift_error_from_scores(&[1.0, 2.0, 3.0, 4.0], &values).unwrap(), 1.0);
        assert_eq!(drift_error_from_scores(&[1.0, 7.0, 3.0, 4.0], &[5.0; 4]).unwrap(), 0.5);
        assert!(drift_error_from_scores(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn drift_error_of_trained_model() {
        let ts = monotone_set(12);
        let m = train(&ts, &SurrogateHyperParams::with_q(12)).unwrap();
        let test: Vec<_> = [2.5, 7.5, 4.0, 10.5].iter().enumerate().map(|(i, x)| sample(&[*x], *x, 100 + i)).collect();
        assert_eq!(drift_error(&m, &test).unwrap(), 0.0);
        assert!(drift_error(&m, &test[..1]).is_err());
    }
}
