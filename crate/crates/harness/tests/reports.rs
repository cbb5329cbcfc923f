use std::path::Path;

use klcma::benchmark::{BenchmarkSpec, FunctionId};
use klcma::record::{Termination, TracePoint};
use klcma_harness::record::{compress_trace, hits_from_trace, read_records, CellRecord};
use klcma_harness::report::{ecdf, emit_reports, median_trajectory};
use klcma_harness::Algorithm;
use proptest::prelude::*;

fn record(algorithm: Algorithm, function: FunctionId, dim: usize, run: usize, values: &[f64], targets: &[f64]) -> CellRecord {
    let trace = compress_trace(values);
    CellRecord {
        algorithm,
        spec: BenchmarkSpec::new(function, dim),
        run,
        seed: run as u64,
        evaluations: values.len(),
        termination: Termination::Budget,
        restarts: 0,
        epochs: 0,
        hits: hits_from_trace(&trace, targets),
        trace,
    }
}

/// Record whose best value reaches `targets[i]` exactly at `evals[i]`.
fn hitting(dim: usize, run: usize, evals: &[usize]) -> CellRecord {
    let last = evals.iter().copied().max().unwrap_or(1);
    let mut values = vec![1e3; last.max(1)];
    for (k, &e) in evals.iter().enumerate() {
        values[e - 1] = 10f64.powi(-(k as i32));
    }
    record(Algorithm::Cmaes, FunctionId::Sphere, dim, run, &values, &[1.0, 0.1, 0.01])
}

#[test]
fn ecdf_single_step() {
    let r = hitting(20, 0, &[100]);
    let e = ecdf(&[r], &[1.0]);
    assert_eq!(e.steps, vec![(5.0, 1.0)]);
    assert_eq!(e.at(4.99), 0.0);
    assert_eq!(e.at(5.0), 1.0);
}

#[test]
fn ecdf_without_hits_is_zero() {
    let r = record(Algorithm::Bfgs, FunctionId::Sphere, 4, 0, &[5.0, 4.0], &[1.0]);
    let e = ecdf(&[r.clone(), r], &[1.0, 0.1]);
    assert_eq!(e.pairs, 4);
    assert!(e.steps.is_empty());
    assert_eq!(e.at(1e9), 0.0);
}

#[test]
fn ecdf_three_record_fixture() {
    // Targets 1, 0.1, 0.01; hits (evals):
    //   record a, dim 2: 10, 40, never
    //   record b, dim 2: 4, 10, 40
    //   record c, dim 5: 50, never, never
    // evals/dim: a 5, 20; b 2, 5, 20; c 10. Nine pairs, six solved.
    let a = hitting(2, 0, &[10, 40]);
    let b = hitting(2, 1, &[4, 10, 40]);
    let c = hitting(5, 2, &[50]);
    let e = ecdf(&[a, b, c], &[1.0, 0.1, 0.01]);
    assert_eq!(e.pairs, 9);
    assert_eq!(e.steps, vec![(2.0, 1.0 / 9.0), (5.0, 3.0 / 9.0), (10.0, 4.0 / 9.0), (20.0, 6.0 / 9.0)]);
    assert_eq!(e.at(9.0), 3.0 / 9.0);
}

proptest! {
    #[test]
    fn ecdf_is_a_monotone_proportion(hits in prop::collection::vec(prop::collection::vec(1usize..500, 0..4), 1..6)) {
        let records: Vec<CellRecord> = hits
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let mut h = h.clone();
                h.sort_unstable();
                h.dedup();
                hitting(3, i, &h)
            })
            .collect();
        let e = ecdf(&records, &[1.0, 0.1, 0.01]);
        prop_assert!(e.steps.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        prop_assert!(e.steps.iter().all(|(_, p)| *p > 0.0 && *p <= 1.0));
        let solved: usize = records.iter().map(|r| r.hits.len()).sum();
        let last = e.steps.last().map_or(0.0, |s| s.1);
        prop_assert!((last - solved as f64 / e.pairs as f64).abs() < 1e-12);
    }
}

#[test]
fn median_trajectory_examples() {
    let one = hitting(2, 0, &[7]);
    assert_eq!(median_trajectory(std::slice::from_ref(&one), 1.0), Some(&one));
    let runs = [hitting(2, 0, &[300]), hitting(2, 1, &[100]), hitting(2, 2, &[200])];
    assert_eq!(median_trajectory(&runs, 1.0).unwrap().run, 2);
    let with_failure = [hitting(2, 0, &[300]), hitting(2, 1, &[]), hitting(2, 2, &[200]), hitting(2, 3, &[100])];
    assert_eq!(median_trajectory(&with_failure, 1.0).unwrap().run, 2);
    assert_eq!(median_trajectory(&[], 1.0), None);
}

fn compare_or_bless(actual_dir: &Path, name: &str) {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let actual = std::fs::read_to_string(actual_dir.join(name)).unwrap();
    if std::env::var_os("KLCMA_BLESS").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, &actual).unwrap();
    }
    let expected = std::fs::read_to_string(&golden).unwrap_or_else(|e| panic!("{}: {e}", golden.display()));
    assert_eq!(actual, expected, "{name} differs from its golden copy");
}

#[test]
fn empty_record_set_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_reports(&[], 1e-8, &[1.0], dir.path()).unwrap();
    assert_eq!(paths.len(), 2);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("summary.csv")).unwrap(),
        "algorithm,function,dim,median_evals,success_rate\n"
    );
    assert_eq!(
        std::fs::read_to_string(dir.path().join("speedup.csv")).unwrap(),
        "algorithm,function,dim,median_evals,cmaes_median_evals,speedup\n"
    );
}

#[test]
fn two_record_fixture_matches_golden_files() {
    let targets = [1.0, 1e-2];
    let cma = record(Algorithm::Cmaes, FunctionId::Rosenbrock, 2, 0, &[9.0, 3.0, 0.5, 0.5, 1e-3, 2e-3], &targets);
    let kl = record(Algorithm::KlAcmes, FunctionId::Rosenbrock, 2, 0, &[4.0, 0.9, 5e-3], &targets);
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&[kl.clone(), cma.clone()], 1e-2, &targets, dir.path()).unwrap();
    for name in [
        "summary.csv",
        "speedup.csv",
        "ecdf_moderate.csv",
        "records/cmaes__rosenbrock-2d__run000.jsonl",
        "records/kl-acmes__rosenbrock-2d__run000.jsonl",
    ] {
        compare_or_bless(dir.path(), name);
    }
    assert_eq!(read_records(&dir.path().join("records")).unwrap(), vec![kl, cma]);
}

#[test]
fn trace_points_are_monotone() {
    let r = record(Algorithm::Cmaes, FunctionId::Sphere, 2, 0, &[3.0, 5.0, 1.0, f64::NAN, 0.5], &[1.0]);
    assert!(r.trace.windows(2).all(|w| w[0].best >= w[1].best && w[0].eval < w[1].eval));
    assert_eq!(r.trace.last(), Some(&TracePoint { eval: 5, best: 0.5 }));
}
