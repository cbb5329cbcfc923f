use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use klcma::benchmark::BenchmarkSpec;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "kl-acmes")]
    KlAcmes,
    #[serde(rename = "cmaes")]
    Cmaes,
    /// Surrogate-assisted CMA-ES that runs a number of surrogate generations
    /// set linearly by the drift error instead of a KL budget.
    #[serde(rename = "fixed-n-acmes")]
    FixedNAcmes,
    #[serde(rename = "bfgs")]
    Bfgs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::KlAcmes, Algorithm::Cmaes, Algorithm::FixedNAcmes, Algorithm::Bfgs];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::KlAcmes => "kl-acmes",
            Algorithm::Cmaes => "cmaes",
            Algorithm::FixedNAcmes => "fixed-n-acmes",
            Algorithm::Bfgs => "bfgs",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| HarnessError::UnknownAlgorithm(s.to_string()))
    }
}

fn default_runs() -> usize {
    15
}

fn default_target() -> f64 {
    1e-8
}

/// `10^2, 10^1, ..., 10^-8`.
pub fn default_targets_ecdf() -> Vec<f64> {
    (-8..=2).rev().map(|k| 10f64.powi(k)).collect()
}

fn default_n_max() -> usize {
    20
}

fn default_workers() -> usize {
    1
}

/// A grid of benchmark cells. Loaded from TOML with these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub specs: Vec<BenchmarkSpec>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// True evaluations per run.
    pub budget: usize,
    /// Precision on the untransformed function value.
    #[serde(default = "default_target")]
    pub target: f64,
    #[serde(default = "default_targets_ecdf")]
    pub targets_ecdf: Vec<f64>,
    #[serde(default)]
    pub seed_base: u64,
    pub out_dir: PathBuf,
    /// Largest surrogate generation count of fixed-n-acmes.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Cells executed concurrently.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.algorithms.is_empty() {
            return bad("no algorithms");
        }
        if self.specs.is_empty() {
            return bad("no benchmark specs");
        }
        for s in &self.specs {
            s.validate()?;
        }
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        if self.budget == 0 {
            return bad("budget must be at least 1");
        }
        if !(self.target.is_finite() && self.target >= 0.0) {
            return bad("target must be finite and non-negative");
        }
        if self.targets_ecdf.windows(2).any(|w| w[0] <= w[1]) {
            return bad("targets_ecdf must be strictly descending");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        Ok(())
    }

    /// Targets a run records hits for: the ECDF targets plus the main target.
    pub fn hit_targets(&self) -> Vec<f64> {
        let mut t = self.targets_ecdf.clone();
        if !t.contains(&self.target) {
            t.push(self.target);
        }
        t.sort_by(|a, b| b.total_cmp(a));
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!(matches!("cma".parse::<Algorithm>(), Err(HarnessError::UnknownAlgorithm(_))));
    }

    #[test]
    fn toml_with_defaults() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            algorithms = ["cmaes", "kl-acmes"]
            budget = 1000
            out_dir = "out"
            [[specs]]
            function = "rosenbrock"
            dim = 5
            power = 2.0
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.runs, 15);
        assert_eq!(cfg.target, 1e-8);
        assert_eq!(cfg.targets_ecdf.len(), 11);
        assert_eq!(cfg.targets_ecdf[0], 100.0);
        assert_eq!(cfg.specs[0].power, 2.0);
        assert!(!cfg.specs[0].rotate);
        assert_eq!(cfg.hit_targets(), cfg.targets_ecdf);
    }

    #[test]
    fn rejects_bad_configs() {
        let unknown = toml::from_str::<ExperimentConfig>(
            r#"
            algorithms = ["newton"]
            specs = []
            budget = 1
            out_dir = "o"
            "#,
        );
        assert!(unknown.is_err());
        let mut cfg: ExperimentConfig = toml::from_str(
            r#"
            algorithms = ["bfgs"]
            budget = 10
            out_dir = "o"
            targets_ecdf = [1.0, 10.0]
            [[specs]]
            function = "sphere"
            dim = 2
            "#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
        cfg.targets_ecdf = vec![10.0, 1.0];
        cfg.validate().unwrap();
        assert_eq!(cfg.hit_targets(), vec![10.0, 1.0, 1e-8]);
    }
}
