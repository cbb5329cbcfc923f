//! Aggregates over run records: ECDFs, medians, summary and speedup tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use klcma::benchmark::BenchmarkSpec;

use crate::config::Algorithm;
use crate::error::{HarnessError, Result};
use crate::record::{write_record, CellRecord};

/// Step function of the fraction of (record, target) pairs solved within a
/// budget of `evals_per_dim * dim` evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    pub pairs: usize,
    /// `(evals_per_dim, proportion)` at each step, increasing in both.
    pub steps: Vec<(f64, f64)>,
}

impl Ecdf {
    /// Proportion solved within `evals_per_dim` evaluations per dimension.
    pub fn at(&self, evals_per_dim: f64) -> f64 {
        self.steps
            .iter()
            .take_while(|(x, _)| *x <= evals_per_dim)
            .last()
            .map_or(0.0, |(_, p)| *p)
    }
}

/// ECDF over every (record, target) pair; a pair counts as solved from the
/// first evaluation at which the record's best value reached the target.
/// Each record is scaled by its own dimension.
pub fn ecdf(records: &[CellRecord], targets: &[f64]) -> Ecdf {
    let pairs = records.len() * targets.len();
    let mut solved: Vec<f64> = records
        .iter()
        .flat_map(|r| {
            targets
                .iter()
                .filter_map(move |&t| r.evals_to(t).map(|e| e as f64 / r.spec.dim as f64))
        })
        .collect();
    solved.sort_by(f64::total_cmp);
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for (i, x) in solved.iter().enumerate() {
        let p = (i + 1) as f64 / pairs as f64;
        match steps.last_mut() {
            Some(last) if last.0 == *x => last.1 = p,
            _ => steps.push((*x, p)),
        }
    }
    Ecdf { pairs, steps }
}

/// Element `(len - 1) / 2` of the sorted values: the median for odd counts,
/// the lower median for even ones. `None` sorts last (an unsolved run).
pub fn lower_median(mut values: Vec<Option<usize>>) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    values.sort_by_key(|v| v.unwrap_or(usize::MAX));
    values[(values.len() - 1) / 2]
}

/// The run whose evaluations to `target` is the (lower) median of the cell;
/// unsolved runs rank last and ties go to the lower run index.
pub fn median_trajectory(records: &[CellRecord], target: f64) -> Option<&CellRecord> {
    let mut sorted: Vec<&CellRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.evals_to(target).unwrap_or(usize::MAX), r.run));
    sorted.get(records.len().saturating_sub(1) / 2).copied()
}

/// Function name with the power and rotation suffixes, without dimension.
pub fn function_label(spec: &BenchmarkSpec) -> String {
    let mut s = spec.function.to_string();
    if spec.power != 1.0 {
        s.push_str(&format!("-p{}", spec.power));
    }
    if spec.rotate {
        s.push_str("-rot");
    }
    s
}

type CellKey = (String, usize, Algorithm);

fn by_cell(records: &[CellRecord]) -> BTreeMap<CellKey, Vec<&CellRecord>> {
    let mut cells: BTreeMap<CellKey, Vec<&CellRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((function_label(&r.spec), r.spec.dim, r.algorithm))
            .or_default()
            .push(r);
    }
    cells
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub function: String,
    pub dim: usize,
    pub runs: usize,
    /// `None` when the median run did not reach the target.
    pub median_evals: Option<usize>,
    pub success_rate: f64,
}

pub fn summarize(records: &[CellRecord], target: f64) -> Vec<CellSummary> {
    by_cell(records)
        .into_iter()
        .map(|((function, dim, algorithm), rs)| {
            let hits: Vec<Option<usize>> = rs.iter().map(|r| r.evals_to(target)).collect();
            let solved = hits.iter().filter(|h| h.is_some()).count();
            CellSummary {
                algorithm,
                function,
                dim,
                runs: rs.len(),
                median_evals: lower_median(hits),
                success_rate: solved as f64 / rs.len() as f64,
            }
        })
        .collect()
}

/// Baseline median over algorithm median, when both are finite.
pub fn speedup(baseline: Option<usize>, algorithm: Option<usize>) -> Option<f64> {
    Some(baseline? as f64 / algorithm? as f64)
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "inf".to_string(), |v| v.to_string())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes `summary.csv` (algorithm, function, dim, median evaluations to
/// `target`, success rate).
pub fn write_summary(records: &[CellRecord], target: f64, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["algorithm", "function", "dim", "median_evals", "success_rate"])?;
    for s in summarize(records, target) {
        w.write_record([
            s.algorithm.to_string(),
            s.function,
            s.dim.to_string(),
            fmt_opt(s.median_evals),
            format!("{:.4}", s.success_rate),
        ])?;
    }
    finish(w, path)
}

/// Writes `speedup.csv`: each non-baseline cell against cmaes on the same
/// function and dimension. Cells without a cmaes counterpart are skipped.
pub fn write_speedups(records: &[CellRecord], target: f64, path: &Path) -> Result<()> {
    let summary = summarize(records, target);
    let mut w = csv_writer(path)?;
    w.write_record(["algorithm", "function", "dim", "median_evals", "cmaes_median_evals", "speedup"])?;
    for s in &summary {
        if s.algorithm == Algorithm::Cmaes {
            continue;
        }
        let Some(base) = summary
            .iter()
            .find(|b| b.algorithm == Algorithm::Cmaes && b.function == s.function && b.dim == s.dim)
        else {
            continue;
        };
        w.write_record([
            s.algorithm.to_string(),
            s.function.clone(),
            s.dim.to_string(),
            fmt_opt(s.median_evals),
            fmt_opt(base.median_evals),
            speedup(base.median_evals, s.median_evals).map_or_else(String::new, |v| format!("{v:.4}")),
        ])?;
    }
    finish(w, path)
}

/// Writes one `ecdf_<group>.csv` per function group present. The
/// `best_2009` column is a placeholder for external reference data and is
/// left empty.
pub fn write_ecdfs(records: &[CellRecord], targets: &[f64], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut groups: BTreeMap<&str, BTreeMap<Algorithm, Vec<CellRecord>>> = BTreeMap::new();
    for r in records {
        groups
            .entry(r.spec.function.group())
            .or_default()
            .entry(r.algorithm)
            .or_default()
            .push(r.clone());
    }
    let mut paths = Vec::new();
    for (group, by_algo) in groups {
        let path = dir.join(format!("ecdf_{group}.csv"));
        let mut w = csv_writer(&path)?;
        w.write_record(["algorithm", "evals_per_dim", "proportion", "best_2009"])?;
        for (algorithm, rs) in by_algo {
            for (x, p) in ecdf(&rs, targets).steps {
                w.write_record([algorithm.to_string(), x.to_string(), p.to_string(), String::new()])?;
            }
        }
        finish(w, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes per-run records under `records/`, the summary, the speedup table
/// and the ECDF files into `out_dir`. Returns the report paths (not the
/// per-run files).
pub fn emit_reports(records: &[CellRecord], target: f64, targets_ecdf: &[f64], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let record_dir = out_dir.join("records");
    for r in records {
        write_record(&record_dir, r)?;
    }
    let summary = out_dir.join("summary.csv");
    write_summary(records, target, &summary)?;
    let speedups = out_dir.join("speedup.csv");
    write_speedups(records, target, &speedups)?;
    let mut paths = vec![summary, speedups];
    paths.extend(write_ecdfs(records, targets_ecdf, out_dir)?);
    Ok(paths)
}
