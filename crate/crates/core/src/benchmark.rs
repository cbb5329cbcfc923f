//! Noiseless test functions with random shift, optional rotation and a
//! monotone power transform.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Half-width of the box the optimum shift is drawn from.
pub const OPTIMUM_BOX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionId {
    Sphere,
    Ellipsoid,
    Rosenbrock,
    Discus,
    Cigar,
    Rastrigin,
    AttractiveSector,
}

impl FunctionId {
    pub const ALL: [FunctionId; 7] = [
        FunctionId::Sphere,
        FunctionId::Ellipsoid,
        FunctionId::Rosenbrock,
        FunctionId::Discus,
        FunctionId::Cigar,
        FunctionId::Rastrigin,
        FunctionId::AttractiveSector,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionId::Sphere => "sphere",
            FunctionId::Ellipsoid => "ellipsoid",
            FunctionId::Rosenbrock => "rosenbrock",
            FunctionId::Discus => "discus",
            FunctionId::Cigar => "cigar",
            FunctionId::Rastrigin => "rastrigin",
            FunctionId::AttractiveSector => "attractive_sector",
        }
    }

    /// Difficulty group used to split ECDF outputs.
    pub fn group(self) -> &'static str {
        match self {
            FunctionId::Sphere => "separable",
            FunctionId::Rosenbrock | FunctionId::AttractiveSector => "moderate",
            FunctionId::Ellipsoid | FunctionId::Discus | FunctionId::Cigar => "ill_conditioned",
            FunctionId::Rastrigin => "multimodal",
        }
    }

    /// Point in `z` space where the base function is zero.
    fn reference(self) -> f64 {
        match self {
            FunctionId::Rosenbrock => 1.0,
            _ => 0.0,
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FunctionId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| invalid("function", format!("unknown function id `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub function: FunctionId,
    pub dim: usize,
    #[serde(default)]
    pub rotate: bool,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default = "default_condition")]
    pub condition: f64,
}

fn default_power() -> f64 {
    1.0
}

fn default_condition() -> f64 {
    1e6
}

impl BenchmarkSpec {
    pub fn new(function: FunctionId, dim: usize) -> Self {
        Self {
            function,
            dim,
            rotate: false,
            power: 1.0,
            condition: 1e6,
        }
    }

    pub fn rotated(mut self) -> Self {
        self.rotate = true;
        self
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if self.function == FunctionId::Rosenbrock && self.dim < 2 {
            return Err(invalid("dim", "rosenbrock needs at least 2 dimensions"));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(invalid("power", "must be positive"));
        }
        if !(self.condition > 0.0 && self.condition.is_finite()) {
            return Err(invalid("condition", "must be positive"));
        }
        Ok(())
    }

    /// Short label such as `rosenbrock-20d-p4-rot`.
    pub fn label(&self) -> String {
        let mut s = format!("{}-{}d", self.function, self.dim);
        if self.power != 1.0 {
            s.push_str(&format!("-p{}", self.power));
        }
        if self.rotate {
            s.push_str("-rot");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkInstance {
    spec: BenchmarkSpec,
    optimum: DVector<f64>,
    rotation: DMatrix<f64>,
    eval_count: usize,
}

/// Draws the optimum uniformly in `[-4, 4]^n` and, if requested, a uniformly
/// random orthogonal matrix. Deterministic per `seed`.
pub fn make_instance(spec: &BenchmarkSpec, seed: u64) -> Result<BenchmarkInstance> {
    spec.validate()?;
    let n = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let optimum = DVector::from_fn(n, |_, _| rng.random_range(-OPTIMUM_BOX..=OPTIMUM_BOX));
    let rotation = if spec.rotate {
        random_rotation(n, &mut rng)
    } else {
        DMatrix::identity(n, n)
    };
    Ok(BenchmarkInstance {
        spec: spec.clone(),
        optimum,
        rotation,
        eval_count: 0,
    })
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `R`'s diagonal folded into `Q`.
pub fn random_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

impl BenchmarkInstance {
    pub fn spec(&self) -> &BenchmarkSpec {
        &self.spec
    }

    pub fn optimum(&self) -> &DVector<f64> {
        &self.optimum
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn eval_count(&self) -> usize {
        self.eval_count
    }

    /// Objective value including the power transform. Counts as one evaluation.
    pub fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        let v = self.base_value(x)?;
        self.eval_count += 1;
        Ok(apply_power(v, self.spec.power))
    }

    /// `(objective value, untransformed value)`. Counts as one evaluation.
    pub fn evaluate_with_base(&mut self, x: &[f64]) -> Result<(f64, f64)> {
        let v = self.base_value(x)?;
        self.eval_count += 1;
        Ok((apply_power(v, self.spec.power), v))
    }

    /// Value of the untransformed function (power 1). Not counted.
    pub fn base_value(&self, x: &[f64]) -> Result<f64> {
        let n = self.spec.dim;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        let shifted = DVector::from_iterator(n, x.iter().zip(self.optimum.iter()).map(|(a, b)| a - b));
        let mut z = &self.rotation * shifted;
        z.add_scalar_mut(self.spec.function.reference());
        Ok(base_function(self.spec.function, z.as_slice(), self.spec.condition, self.optimum.as_slice()))
    }
}

/// `v^power`; integer powers use repeated multiplication so `p = 2` is exactly `v * v`.
pub fn apply_power(v: f64, power: f64) -> f64 {
    if power == 1.0 {
        v
    } else if power.fract() == 0.0 && power.abs() <= 64.0 {
        v.powi(power as i32)
    } else {
        v.powf(power)
    }
}

/// Untransformed base functions, each zero at `z = reference` (`1` for
/// Rosenbrock, `0` otherwise). `direction` orients the attractive sector.
pub fn base_function(id: FunctionId, z: &[f64], condition: f64, direction: &[f64]) -> f64 {
    let n = z.len();
    match id {
        FunctionId::Sphere => z.iter().map(|v| v * v).sum(),
        FunctionId::Ellipsoid => z
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let e = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                condition.powf(e) * v * v
            })
            .sum(),
        FunctionId::Rosenbrock => z
            .windows(2)
            .map(|w| 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2))
            .sum(),
        FunctionId::Discus => condition * z[0] * z[0] + z[1..].iter().map(|v| v * v).sum::<f64>(),
        FunctionId::Cigar => z[0] * z[0] + condition * z[1..].iter().map(|v| v * v).sum::<f64>(),
        FunctionId::Rastrigin => {
            let cos_sum: f64 = z.iter().map(|v| (2.0 * std::f64::consts::PI * v).cos()).sum();
            10.0 * (n as f64 - cos_sum) + z.iter().map(|v| v * v).sum::<f64>()
        }
        FunctionId::AttractiveSector => z
            .iter()
            .zip(direction)
            .map(|(v, d)| {
                let s: f64 = if v * d > 0.0 { 100.0 } else { 1.0 };
                s * s * v * v
            })
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_spot_values() {
        let z = [1.0; 5];
        assert_eq!(base_function(FunctionId::Rosenbrock, &z, 1e6, &z), 0.0);
        assert_eq!(base_function(FunctionId::Rosenbrock, &[0.0, 0.0], 1e6, &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn base_function_spot_values() {
        let zero = [0.0; 4];
        for id in FunctionId::ALL {
            if id != FunctionId::Rosenbrock {
                assert_eq!(base_function(id, &zero, 1e6, &[1.0; 4]), 0.0, "{id}");
            }
        }
        assert_eq!(base_function(FunctionId::Ellipsoid, &[1.0, 1.0], 1e6, &[0.0; 2]), 1.0 + 1e6);
        assert_eq!(base_function(FunctionId::Discus, &[1.0, 1.0], 1e6, &[0.0; 2]), 1e6 + 1.0);
        assert_eq!(base_function(FunctionId::Cigar, &[1.0, 1.0], 1e6, &[0.0; 2]), 1.0 + 1e6);
        assert_eq!(base_function(FunctionId::AttractiveSector, &[1.0, 1.0], 1e6, &[1.0, -1.0]), 1e4 + 1.0);
    }

    #[test]
    fn instances_are_seeded() {
        let spec = BenchmarkSpec::new(FunctionId::Ellipsoid, 6).rotated();
        assert_eq!(make_instance(&spec, 9).unwrap(), make_instance(&spec, 9).unwrap());
        assert_ne!(make_instance(&spec, 9).unwrap(), make_instance(&spec, 10).unwrap());
        let plain = make_instance(&BenchmarkSpec::new(FunctionId::Ellipsoid, 6), 9).unwrap();
        assert_eq!(plain.rotation(), &DMatrix::identity(6, 6));
        assert!(plain.optimum().iter().all(|v| v.abs() <= OPTIMUM_BOX));
    }

    #[test]
    fn rotations_are_orthogonal() {
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (seed as usize % 19);
            let q = random_rotation(n, &mut rng);
            let residual = (q.transpose() * &q - DMatrix::identity(n, n)).abs().max();
            assert!(residual < 1e-10, "seed {seed}: {residual}");
        }
    }

    #[test]
    fn optimum_has_zero_value_and_counts_evaluations() {
        for id in FunctionId::ALL {
            let mut inst = make_instance(&BenchmarkSpec::new(id, 7).rotated(), 3).unwrap();
            let opt = inst.optimum().clone();
            assert!(inst.evaluate(opt.as_slice()).unwrap().abs() <= 1e-20, "{id}");
            inst.evaluate(&[0.0; 7]).unwrap();
            assert_eq!(inst.eval_count(), 2);
            assert!(inst.evaluate(&[0.0; 3]).is_err());
            assert_eq!(inst.eval_count(), 2);
        }
    }

    #[test]
    fn squared_instance_is_exact_square() {
        let spec = BenchmarkSpec::new(FunctionId::Rosenbrock, 5).rotated();
        let mut p1 = make_instance(&spec, 1).unwrap();
        let mut p2 = make_instance(&spec.clone().with_power(2.0), 1).unwrap();
        let x = [0.3, -1.2, 2.2, 0.0, 4.9];
        let v = p1.evaluate(&x).unwrap();
        assert_eq!(p2.evaluate(&x).unwrap(), v * v);
    }

    #[test]
    fn parse_round_trip() {
        for id in FunctionId::ALL {
            assert_eq!(id.as_str().parse::<FunctionId>().unwrap(), id);
        }
        assert!("ackley".parse::<FunctionId>().is_err());
        assert!(BenchmarkSpec::new(FunctionId::Rosenbrock, 1).validate().is_err());
        assert!(BenchmarkSpec::new(FunctionId::Sphere, 3).with_power(0.0).validate().is_err());
    }
}
