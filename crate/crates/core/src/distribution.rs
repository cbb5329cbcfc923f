//! Multivariate Gaussian search distributions.
//!
//! A [`GaussianParams`] is the triple `(mean, sigma, cov)` describing
//! `N(mean, sigma^2 * cov)`. Anything that needs `cov^{1/2}` or `cov^{-1/2}`
//! goes through an [`EigenCache`], which is stamped with the revision of the
//! covariance it was computed from so a stale decomposition is caught instead
//! of silently reused.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `2 * sqrt(2 ln 2)`, the constant relating ranking-error drift to `sqrt(KL)`.
pub const KL_BOUND_CONSTANT: f64 = 2.354_820_045_030_949_3;

/// KL values below this are reported as exactly zero.
const KL_ZERO_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    /// Bumped on every covariance change; eigen caches are keyed on it.
    revision: u64,
}

impl GaussianParams {
    /// Builds a distribution. The upper triangle of `cov` is authoritative and
    /// is mirrored into the lower one.
    ///
    /// `sigma = 0` is accepted and describes a point mass at `mean`; operations
    /// that need a density (KL, Mahalanobis) reject it.
    pub fn new(mean: DVector<f64>, sigma: f64, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(invalid("mean", "dimension must be at least 1"));
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: cov.nrows(),
            });
        }
        check_sigma(sigma)?;
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(invalid("mean", "entries must be finite"));
        }
        let mut params = Self {
            mean,
            sigma,
            cov,
            revision: 0,
        };
        params.symmetrize()?;
        Ok(params)
    }

    /// `N(mean, sigma^2 I)`.
    pub fn isotropic(mean: DVector<f64>, sigma: f64) -> Result<Self> {
        let n = mean.len();
        Self::new(mean, sigma, DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn set_mean(&mut self, mean: DVector<f64>) -> Result<()> {
        if mean.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: mean.len(),
            });
        }
        self.mean = mean;
        Ok(())
    }

    pub fn set_sigma(&mut self, sigma: f64) -> Result<()> {
        check_sigma(sigma)?;
        self.sigma = sigma;
        Ok(())
    }

    /// Replaces the shape covariance and invalidates every eigen cache built
    /// from the previous one.
    pub fn set_cov(&mut self, cov: DMatrix<f64>) -> Result<()> {
        let n = self.dim();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: cov.nrows(),
            });
        }
        self.cov = cov;
        self.revision += 1;
        self.symmetrize()
    }

    /// `sigma^2 * cov`.
    pub fn full_covariance(&self) -> DMatrix<f64> {
        &self.cov * (self.sigma * self.sigma)
    }

    fn symmetrize(&mut self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            for j in i..n {
                let v = self.cov[(i, j)];
                if !v.is_finite() {
                    return Err(invalid("cov", "entries must be finite"));
                }
                self.cov[(j, i)] = v;
            }
        }
        Ok(())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(invalid("sigma", format!("must be finite and >= 0, got {sigma}")))
    }
}

/// Eigendecomposition `cov = B diag(D^2) B^T` plus the derived `cov^{-1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenCache {
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    inv_sqrt: DMatrix<f64>,
    generation_stamp: u64,
}

impl EigenCache {
    /// Decomposes `dist.cov`. Fails if any eigenvalue is not strictly positive.
    pub fn compute(dist: &GaussianParams) -> Result<Self> {
        let eig = dist.cov.clone().symmetric_eigen();
        let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min_eigenvalue > 0.0) || eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        let basis = eig.eigenvectors;
        let scales = eig.eigenvalues.map(f64::sqrt);
        let inv_scales = scales.map(|d| 1.0 / d);
        let inv_sqrt = &basis * DMatrix::from_diagonal(&inv_scales) * basis.transpose();
        Ok(Self {
            basis,
            scales,
            inv_sqrt,
            generation_stamp: dist.revision,
        })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Square roots of the eigenvalues of `cov`.
    pub fn scales(&self) -> &DVector<f64> {
        &self.scales
    }

    /// `cov^{-1/2} = B diag(1/D) B^T`.
    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.inv_sqrt
    }

    pub fn generation_stamp(&self) -> u64 {
        self.generation_stamp
    }

    pub fn max_scale(&self) -> f64 {
        self.scales.max()
    }

    /// `max(D)^2 / min(D)^2`, the condition number of `cov`.
    pub fn condition(&self) -> f64 {
        let (lo, hi) = (self.scales.min(), self.scales.max());
        (hi * hi) / (lo * lo)
    }

    /// `sum ln(D_i^2)`, i.e. `ln det cov`.
    pub fn log_det(&self) -> f64 {
        self.scales.iter().map(|d| 2.0 * d.ln()).sum()
    }

    pub fn is_current_for(&self, dist: &GaussianParams) -> bool {
        self.generation_stamp == dist.revision && self.scales.len() == dist.dim()
    }

    pub(crate) fn check(&self, dist: &GaussianParams) -> Result<()> {
        if self.is_current_for(dist) {
            Ok(())
        } else {
            Err(Error::StaleCache {
                cache: self.generation_stamp,
                dist: dist.revision,
            })
        }
    }
}

/// Draws `count` points from `N(mean, sigma^2 cov)`.
///
/// Each point consumes exactly `n` standard normal draws from `rng`, in order,
/// so identical rng states give identical output.
pub fn sample<R: Rng + ?Sized>(
    dist: &GaussianParams,
    cache: &EigenCache,
    count: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    cache.check(dist)?;
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    let n = dist.dim();
    // B * diag(sigma * D), applied to a standard normal vector.
    let mut transform = cache.basis.clone();
    for (j, mut col) in transform.column_iter_mut().enumerate() {
        col *= dist.sigma * cache.scales[j];
    }
    let mut out = Vec::with_capacity(count);
    let mut z = DVector::zeros(n);
    for _ in 0..count {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut x = dist.mean.clone();
        x.gemv(1.0, &transform, &z, 1.0);
        out.push(x);
    }
    Ok(out)
}

/// `cov^{-1/2} (x - mean)`; `sigma` is not divided out.
pub fn whiten(dist: &GaussianParams, cache: &EigenCache, x: &DVector<f64>) -> Result<DVector<f64>> {
    cache.check(dist)?;
    if x.len() != dist.dim() {
        return Err(Error::DimensionMismatch {
            expected: dist.dim(),
            actual: x.len(),
        });
    }
    Ok(&cache.inv_sqrt * (x - &dist.mean))
}

/// Squared Mahalanobis distance of `x` from the mean under `sigma^2 cov`.
pub fn mahalanobis_sq(dist: &GaussianParams, cache: &EigenCache, x: &DVector<f64>) -> Result<f64> {
    if dist.sigma <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: 0.0 });
    }
    let w = whiten(dist, cache, x)?;
    Ok(w.norm_squared() / (dist.sigma * dist.sigma))
}

/// `KL(q || p)` between `N(m_q, sigma_q^2 C_q)` and `N(m_p, sigma_p^2 C_p)`.
pub fn kl_divergence(q: &GaussianParams, p: &GaussianParams) -> Result<f64> {
    let qc = EigenCache::compute(q)?;
    let pc = EigenCache::compute(p)?;
    kl_divergence_cached(q, &qc, p, &pc)
}

/// [`kl_divergence`] reusing existing decompositions.
pub fn kl_divergence_cached(
    q: &GaussianParams,
    q_cache: &EigenCache,
    p: &GaussianParams,
    p_cache: &EigenCache,
) -> Result<f64> {
    q_cache.check(q)?;
    p_cache.check(p)?;
    let n = p.dim();
    if q.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: q.dim(),
        });
    }
    if q.sigma <= 0.0 || p.sigma <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: 0.0 });
    }
    let w = &p_cache.inv_sqrt;
    // tr(Sigma_p^-1 Sigma_q) = (sigma_q/sigma_p)^2 tr(W C_q W), W = C_p^{-1/2}
    let wc = w * &q.cov;
    let trace: f64 = wc.component_mul(&w.transpose()).sum();
    let ratio = (q.sigma / p.sigma).powi(2);
    let dm = w * (&p.mean - &q.mean);
    let maha = dm.norm_squared() / (p.sigma * p.sigma);
    let log_det_q = 2.0 * n as f64 * q.sigma.ln() + q_cache.log_det();
    let log_det_p = 2.0 * n as f64 * p.sigma.ln() + p_cache.log_det();
    let kl = 0.5 * (ratio * trace + maha - n as f64 - (log_det_q - log_det_p));
    Ok(if kl < KL_ZERO_FLOOR { 0.0 } else { kl })
}

/// Upper bound on the change of expected ranking error between two
/// distributions separated by `kl`: `2 sqrt(2 ln 2) sqrt(kl)`.
pub fn kl_error_bound(kl: f64) -> f64 {
    KL_BOUND_CONSTANT * kl.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(values))
    }

    #[test]
    fn bound_constant_matches_closed_form() {
        assert!((KL_BOUND_CONSTANT - 2.0 * (2.0 * 2f64.ln()).sqrt()).abs() < 1e-15);
        assert_eq!(kl_error_bound(0.0), 0.0);
        assert!((kl_error_bound(1.0) - 2.35482).abs() < 1e-5);
        assert!((kl_error_bound(0.25) - 1.17741).abs() < 1e-5);
    }

    #[test]
    fn lower_triangle_is_overwritten() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 9.0, 1.0]);
        let d = GaussianParams::new(DVector::zeros(2), 1.0, cov).unwrap();
        assert_eq!(d.cov()[(1, 0)], 0.5);
    }

    #[test]
    fn eigen_cache_reconstructs() {
        let cov = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let d = GaussianParams::new(DVector::zeros(3), 1.0, cov.clone()).unwrap();
        let c = EigenCache::compute(&d).unwrap();
        let d2 = c.scales().map(|s| s * s);
        let rebuilt = c.basis() * DMatrix::from_diagonal(&d2) * c.basis().transpose();
        assert!((rebuilt - &cov).abs().max() / cov.abs().max() < 1e-10);
        let gram = c.basis().transpose() * c.basis();
        assert!((gram - DMatrix::identity(3, 3)).abs().max() < 1e-10);
    }

    #[test]
    fn indefinite_covariance_fails_loudly() {
        let d = GaussianParams::new(DVector::zeros(2), 1.0, diag(&[1.0, -1.0])).unwrap();
        assert!(matches!(
            EigenCache::compute(&d),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut d = GaussianParams::isotropic(DVector::zeros(2), 1.0).unwrap();
        let c = EigenCache::compute(&d).unwrap();
        d.set_cov(diag(&[2.0, 1.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample(&d, &c, 1, &mut rng), Err(Error::StaleCache { .. })));
    }

    #[test]
    fn zero_sigma_samples_are_the_mean() {
        let mean = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let d = GaussianParams::isotropic(mean.clone(), 0.0).unwrap();
        let c = EigenCache::compute(&d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for x in sample(&d, &c, 20, &mut rng).unwrap() {
            assert_eq!(x, mean);
        }
    }

    #[test]
    fn standard_normal_moments() {
        let n = 3;
        let d = GaussianParams::isotropic(DVector::zeros(n), 1.0).unwrap();
        let c = EigenCache::compute(&d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let count = 100_000;
        let xs = sample(&d, &c, count, &mut rng).unwrap();
        for i in 0..n {
            let m = xs.iter().map(|x| x[i]).sum::<f64>() / count as f64;
            let v = xs.iter().map(|x| (x[i] - m).powi(2)).sum::<f64>() / (count - 1) as f64;
            assert!(m.abs() < 4.0 / (count as f64).sqrt(), "mean {m}");
            assert!((v - 1.0).abs() < 0.05, "variance {v}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = GaussianParams::new(DVector::zeros(2), 0.7, diag(&[3.0, 0.5])).unwrap();
        let c = EigenCache::compute(&d).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = a.clone();
        assert_eq!(
            sample(&d, &c, 7, &mut a).unwrap(),
            sample(&d, &c, 7, &mut b).unwrap()
        );
    }

    #[test]
    fn whiten_examples() {
        let mean = DVector::from_vec(vec![0.5, -1.0]);
        let d = GaussianParams::isotropic(mean.clone(), 3.0).unwrap();
        let c = EigenCache::compute(&d).unwrap();
        assert!(whiten(&d, &c, &mean).unwrap().norm() < 1e-15);
        let x = DVector::from_vec(vec![2.0, 2.0]);
        assert!((whiten(&d, &c, &x).unwrap() - (&x - &mean)).norm() < 1e-15);

        let d = GaussianParams::new(DVector::zeros(2), 1.0, diag(&[4.0, 1.0])).unwrap();
        let c = EigenCache::compute(&d).unwrap();
        let w = whiten(&d, &c, &DVector::from_vec(vec![2.0, 3.0])).unwrap();
        assert!((w - DVector::from_vec(vec![1.0, 3.0])).norm() < 1e-12);

        assert!(matches!(
            whiten(&d, &c, &DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kl_spot_values() {
        let p = GaussianParams::new(
            DVector::from_vec(vec![1.0, 2.0]),
            0.3,
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        )
        .unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);

        let a = GaussianParams::isotropic(DVector::from_vec(vec![0.0]), 1.0).unwrap();
        let b = GaussianParams::isotropic(DVector::from_vec(vec![1.0]), 1.0).unwrap();
        assert!((kl_divergence(&a, &b).unwrap() - 0.5).abs() < 1e-14);

        // Sigma folded in: variance 4 as sigma = 2 or as cov = 4 gives the same answer.
        let wide = GaussianParams::isotropic(DVector::zeros(1), 2.0).unwrap();
        let wide_cov = GaussianParams::new(DVector::zeros(1), 1.0, diag(&[4.0])).unwrap();
        let unit = GaussianParams::isotropic(DVector::zeros(1), 1.0).unwrap();
        let expected = 0.5 * (4.0 - 1.0 - 4f64.ln());
        assert!((kl_divergence(&wide, &unit).unwrap() - expected).abs() < 1e-14);
        assert!((kl_divergence(&wide_cov, &unit).unwrap() - expected).abs() < 1e-14);
        // asymmetry witness
        let reverse = kl_divergence(&unit, &wide).unwrap();
        assert!((reverse - 0.5 * (0.25 - 1.0 + 4f64.ln())).abs() < 1e-14);
        assert!((reverse - expected).abs() > 0.1);
    }

    #[test]
    fn kl_requires_density() {
        let a = GaussianParams::isotropic(DVector::zeros(2), 0.0).unwrap();
        let b = GaussianParams::isotropic(DVector::zeros(2), 1.0).unwrap();
        assert!(kl_divergence(&a, &b).is_err());
    }
}
