use klcma::distribution::{kl_divergence, sample, whiten, EigenCache, GaussianParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_gaussian(n: usize, rng: &mut ChaCha8Rng) -> GaussianParams {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let cov = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.1;
    let mean = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    GaussianParams::new(mean, rng.random_range(0.3..3.0), cov).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn kl_is_non_negative_and_zero_on_the_diagonal(seed in any::<u64>(), n in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_gaussian(n, &mut rng);
        let q = random_gaussian(n, &mut rng);
        let kl = kl_divergence(&q, &p).unwrap();
        prop_assert!(kl >= 0.0 && kl.is_finite());
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
        prop_assert!(kl > 1e-12, "distinct parameters gave kl = {kl}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn whitened_samples_are_standard_normal(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dist = random_gaussian(n, &mut rng);
        // Whitening leaves sigma in place, so check with unit step size.
        dist.set_sigma(1.0).unwrap();
        let cache = EigenCache::compute(&dist).unwrap();
        let count = 100_000;
        let xs = sample(&dist, &cache, count, &mut rng).unwrap();
        let mut sum = DVector::zeros(n);
        let mut sq = DVector::zeros(n);
        for x in &xs {
            let z = whiten(&dist, &cache, x).unwrap();
            sum += &z;
            sq += z.component_mul(&z);
        }
        let tol = 4.0 / (count as f64).sqrt();
        for i in 0..n {
            let mean = sum[i] / count as f64;
            let var = sq[i] / count as f64 - mean * mean;
            prop_assert!(mean.abs() < tol, "mean {mean}");
            prop_assert!((var - 1.0).abs() < 0.05, "variance {var}");
        }
    }
}

#[test]
fn kl_is_asymmetric() {
    let p = GaussianParams::isotropic(DVector::zeros(1), 1.0).unwrap();
    let q = GaussianParams::isotropic(DVector::zeros(1), 2.0).unwrap();
    let pq = kl_divergence(&p, &q).unwrap();
    let qp = kl_divergence(&q, &p).unwrap();
    // Variance ratio 4 in one dimension.
    assert!((qp - 0.5 * (4.0 - 1.0 - 4f64.ln())).abs() < 1e-12);
    assert!((pq - 0.5 * (0.25 - 1.0 + 4f64.ln())).abs() < 1e-12);
    assert!(pq != qp);
}
