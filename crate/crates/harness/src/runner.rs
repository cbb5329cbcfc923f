use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use klcma::benchmark::{apply_power, make_instance, BenchmarkSpec};
use klcma::bfgs::{self, BfgsConfig};
use klcma::cmaes::{self, CmaRunConfig};
use klcma::record::RunRecord;
use klcma::schedule::{self, ControllerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Algorithm, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::record::{compress_trace, hits_from_trace, write_record, CellRecord};

/// Seed of run `run`. Algorithms and power variants of a function share it,
/// so they see the same instance and the same initial points.
pub fn run_seed(seed_base: u64, run: usize) -> u64 {
    seed_base ^ run as u64
}

/// Optimizer randomness comes from a separate stream of the seed, so it is
/// independent of the instance's optimum and rotation.
fn optimizer_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Runs `algorithm` once on `spec`. `target` applies to the untransformed
/// function; the optimizer stops at the equivalent powered value.
pub fn run_cell(
    algorithm: Algorithm,
    spec: &BenchmarkSpec,
    run: usize,
    cfg: &ExperimentConfig,
) -> Result<CellRecord> {
    let seed = run_seed(cfg.seed_base, run);
    let mut inst = make_instance(spec, seed)?;
    let mut rng = optimizer_rng(seed);
    let target = apply_power(cfg.target, spec.power);
    let mut base_values = Vec::new();
    let mut objective = |x: &[f64]| {
        let (v, base) = inst
            .evaluate_with_base(x)
            .expect("optimizers evaluate points of the instance dimension");
        base_values.push(base);
        v
    };
    let dim = spec.dim;
    let budget = cfg.budget;
    let rec: RunRecord = match algorithm {
        Algorithm::Cmaes => cmaes::minimize(&mut objective, dim, &CmaRunConfig::default(), budget, target, &mut rng)?,
        Algorithm::KlAcmes => schedule::run(&mut objective, dim, &ControllerConfig::default(), budget, target, &mut rng)?,
        Algorithm::FixedNAcmes => {
            let c = ControllerConfig::fixed_generations(cfg.n_max);
            schedule::run(&mut objective, dim, &c, budget, target, &mut rng)?
        }
        Algorithm::Bfgs => bfgs::minimize(&mut objective, dim, &BfgsConfig::default(), budget, target, &mut rng)?,
    };
    if rec.evaluations() != inst.eval_count() || base_values.len() != inst.eval_count() {
        return Err(HarnessError::Audit(format!(
            "{}: optimizer reported {} evaluations, instance counted {}",
            rec_label(algorithm, spec, run),
            rec.evaluations(),
            inst.eval_count()
        )));
    }
    let trace = compress_trace(&base_values);
    Ok(CellRecord {
        algorithm,
        spec: spec.clone(),
        run,
        seed,
        evaluations: inst.eval_count(),
        termination: rec.termination,
        restarts: rec.restarts,
        epochs: rec.epochs.len(),
        hits: hits_from_trace(&trace, &cfg.hit_targets()),
        trace,
    })
}

fn rec_label(algorithm: Algorithm, spec: &BenchmarkSpec, run: usize) -> String {
    format!("{algorithm} {} run {run}", spec.label())
}

/// Every (algorithm, spec, run) cell, in execution order.
pub fn cells(cfg: &ExperimentConfig) -> Vec<(Algorithm, BenchmarkSpec, usize)> {
    let mut out = Vec::new();
    for &a in &cfg.algorithms {
        for s in &cfg.specs {
            for r in 0..cfg.runs {
                out.push((a, s.clone(), r));
            }
        }
    }
    out
}

/// Runs every cell on up to `cfg.workers` threads. Each finished cell is
/// written to `out_dir/records` at once, so a crash loses only the cells in
/// flight. Returns the records in canonical order, or the first cell error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<CellRecord>> {
    cfg.validate()?;
    let dir = cfg.out_dir.join("records");
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let cells = cells(cfg);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<CellRecord>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..cfg.workers.min(cells.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((algorithm, spec, run)) = cells.get(i) else { break };
                let outcome = run_cell(*algorithm, spec, *run, cfg).and_then(|rec| {
                    write_record(&dir, &rec)?;
                    Ok(rec)
                });
                match &outcome {
                    Ok(rec) => eprintln!(
                        "[{}/{}] {}: {} evals, {}, best {:.3e}",
                        i + 1,
                        cells.len(),
                        rec_label(*algorithm, spec, *run),
                        rec.evaluations,
                        rec.termination.as_str(),
                        rec.best()
                    ),
                    Err(e) => eprintln!("[{}/{}] {}: {e}", i + 1, cells.len(), rec_label(*algorithm, spec, *run)),
                }
                results.lock().expect("no worker panicked while holding the lock")[i] = Some(outcome);
            });
        }
    });

    let mut records = Vec::with_capacity(cells.len());
    for r in results.into_inner().expect("workers joined") {
        records.push(r.expect("every cell ran")?);
    }
    records.sort_by_key(|r| r.key());
    Ok(records)
}
