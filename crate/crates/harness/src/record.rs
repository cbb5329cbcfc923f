//! Per-run results and their line-delimited JSON files.
//!
//! A record file starts with one `"record": "run"` line holding the run's
//! metadata, followed by one `"record": "trace"` line per trace point.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use klcma::benchmark::BenchmarkSpec;
use klcma::record::{Termination, TracePoint};
use serde::{Deserialize, Serialize};

use crate::config::Algorithm;
use crate::error::{HarnessError, Result};

/// First evaluation at which the untransformed best value reached `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub target: f64,
    pub eval: usize,
}

/// Outcome of one (algorithm, spec, run) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub algorithm: Algorithm,
    pub spec: BenchmarkSpec,
    pub run: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub termination: Termination,
    pub restarts: usize,
    /// Surrogate epochs; zero for algorithms without a surrogate.
    pub epochs: usize,
    /// Targets never reached are absent.
    pub hits: Vec<Hit>,
    /// Best untransformed value so far, at every evaluation where it
    /// improved and at the last evaluation.
    pub trace: Vec<TracePoint>,
}

impl CellRecord {
    pub fn hit(&self, target: f64) -> Option<usize> {
        self.hits.iter().find(|h| h.target == target).map(|h| h.eval)
    }

    /// Evaluations to `target`, recomputed from the trace.
    pub fn evals_to(&self, target: f64) -> Option<usize> {
        self.trace.iter().find(|t| t.best <= target).map(|t| t.eval)
    }

    pub fn best(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |t| t.best)
    }

    pub fn file_name(&self) -> String {
        format!("{}__{}__run{:03}.jsonl", self.algorithm, self.spec.label(), self.run)
    }

    /// Sort key giving a canonical record order.
    pub fn key(&self) -> (String, usize, Algorithm, usize) {
        (self.spec.label(), self.spec.dim, self.algorithm, self.run)
    }
}

/// Running best of `values` at each improvement and at the end. Non-finite
/// values never become the best.
pub fn compress_trace(values: &[f64]) -> Vec<TracePoint> {
    let mut best = f64::INFINITY;
    let mut out: Vec<TracePoint> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && v < best {
            best = v;
            out.push(TracePoint { eval: i + 1, best });
        }
    }
    if best.is_finite() && out.last().map(|t| t.eval) != Some(values.len()) {
        out.push(TracePoint {
            eval: values.len(),
            best,
        });
    }
    out
}

/// First evaluation reaching each target, in the order given.
pub fn hits_from_trace(trace: &[TracePoint], targets: &[f64]) -> Vec<Hit> {
    targets
        .iter()
        .filter_map(|&target| {
            trace
                .iter()
                .find(|t| t.best <= target)
                .map(|t| Hit { target, eval: t.eval })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Line {
    Run {
        algorithm: Algorithm,
        spec: BenchmarkSpec,
        run: usize,
        seed: u64,
        evaluations: usize,
        termination: Termination,
        restarts: usize,
        epochs: usize,
        hits: Vec<Hit>,
    },
    Trace {
        eval: usize,
        best: f64,
    },
}

/// Writes `rec` into `dir` through a temporary file, so a reader never sees
/// a partial record.
pub fn write_record(dir: &Path, rec: &CellRecord) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join(rec.file_name());
    let tmp = dir.join(format!(".{}.tmp", rec.file_name()));
    let write = || -> std::io::Result<()> {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        let header = Line::Run {
            algorithm: rec.algorithm,
            spec: rec.spec.clone(),
            run: rec.run,
            seed: rec.seed,
            evaluations: rec.evaluations,
            termination: rec.termination,
            restarts: rec.restarts,
            epochs: rec.epochs,
            hits: rec.hits.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for t in &rec.trace {
            serde_json::to_writer(&mut w, &Line::Trace { eval: t.eval, best: t.best })?;
            w.write_all(b"\n")?;
        }
        w.into_inner().map_err(|e| e.into_error())?.sync_all()
    };
    write().map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

pub fn read_record(path: &Path) -> Result<CellRecord> {
    let malformed = |message: String| HarnessError::Record {
        path: path.to_path_buf(),
        message,
    };
    let file = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| malformed("empty file".into()))?
        .map_err(|e| HarnessError::io(path, e))?;
    let Line::Run {
        algorithm,
        spec,
        run,
        seed,
        evaluations,
        termination,
        restarts,
        epochs,
        hits,
    } = serde_json::from_str(&first).map_err(|e| malformed(e.to_string()))?
    else {
        return Err(malformed("first line is not a run header".into()));
    };
    let mut trace = Vec::new();
    for line in lines {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        match serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))? {
            Line::Trace { eval, best } => trace.push(TracePoint { eval, best }),
            Line::Run { .. } => return Err(malformed("second run header".into())),
        }
    }
    Ok(CellRecord {
        algorithm,
        spec,
        run,
        seed,
        evaluations,
        termination,
        restarts,
        epochs,
        hits,
        trace,
    })
}

/// Every `*.jsonl` record in `dir`, in canonical order.
pub fn read_records(dir: &Path) -> Result<Vec<CellRecord>> {
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            out.push(read_record(&path)?);
        }
    }
    out.sort_by_key(|r| r.key());
    Ok(out)
}
