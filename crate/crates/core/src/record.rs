//! Evaluation accounting shared by every optimizer in the crate.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::schedule::EpochReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// 1-based index of the true evaluation.
    pub eval: usize,
    /// Best objective value seen up to and including `eval`.
    pub best: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Target,
    Budget,
    Failure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Target => "target",
            Termination::Budget => "budget",
            Termination::Failure => "failure",
        }
    }
}

/// Outcome of one optimization run, counted in true objective evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub trace: Vec<TracePoint>,
    pub termination: Termination,
    pub best_x: Vec<f64>,
    pub restarts: usize,
    /// Per-epoch diagnostics; empty for optimizers without a surrogate.
    pub epochs: Vec<EpochReport>,
}

impl RunRecord {
    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }

    pub fn best(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |t| t.best)
    }

    /// First evaluation index at which the running best reached `target`.
    pub fn evals_to(&self, target: f64) -> Option<usize> {
        self.trace.iter().find(|t| t.best <= target).map(|t| t.eval)
    }
}

/// Wraps an objective with a budget, a target and a running-best trace.
///
/// Non-finite values are recorded but never become the running best.
pub struct Evaluator<'a> {
    objective: &'a mut dyn FnMut(&[f64]) -> f64,
    budget: usize,
    target: f64,
    trace: Vec<TracePoint>,
    best: f64,
    best_x: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(objective: &'a mut dyn FnMut(&[f64]) -> f64, budget: usize, target: f64) -> Self {
        Self {
            objective,
            budget,
            target,
            trace: Vec::new(),
            best: f64::INFINITY,
            best_x: Vec::new(),
        }
    }

    pub fn used(&self) -> usize {
        self.trace.len()
    }

    pub fn remaining(&self) -> usize {
        self.budget.saturating_sub(self.trace.len())
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn target_reached(&self) -> bool {
        self.best <= self.target
    }

    /// Budget spent or target reached.
    pub fn is_done(&self) -> bool {
        self.target_reached() || self.remaining() == 0
    }

    /// Evaluates `x`, or returns `None` once the run is over.
    pub fn evaluate(&mut self, x: &[f64]) -> Option<f64> {
        if self.is_done() {
            return None;
        }
        let v = (self.objective)(x);
        if v < self.best {
            self.best = v;
            self.best_x = x.to_vec();
        }
        self.trace.push(TracePoint {
            eval: self.trace.len() + 1,
            best: self.best,
        });
        Some(v)
    }

    /// Evaluates a whole population; `None` if the run ended part way through.
    pub fn evaluate_all(&mut self, points: &[DVector<f64>]) -> Option<Vec<f64>> {
        let mut values = Vec::with_capacity(points.len());
        for x in points {
            values.push(self.evaluate(x.as_slice())?);
        }
        Some(values)
    }

    pub fn finish(self, restarts: usize, epochs: Vec<EpochReport>, failed: bool) -> RunRecord {
        let termination = if self.target_reached() {
            Termination::Target
        } else if self.remaining() == 0 {
            Termination::Budget
        } else if failed {
            Termination::Failure
        } else {
            Termination::Budget
        };
        RunRecord {
            trace: self.trace,
            termination,
            best_x: self.best_x,
            restarts,
            epochs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_and_target_stop_evaluation() {
        let mut calls = 0;
        let mut f = |x: &[f64]| {
            calls += 1;
            x[0]
        };
        let mut ev = Evaluator::new(&mut f, 3, 0.0);
        assert_eq!(ev.evaluate(&[5.0]), Some(5.0));
        assert_eq!(ev.evaluate(&[f64::NAN]).map(f64::is_nan), Some(true));
        assert_eq!(ev.evaluate(&[7.0]), Some(7.0));
        assert_eq!(ev.evaluate(&[1.0]), None);
        let rec = ev.finish(0, Vec::new(), false);
        assert_eq!(rec.termination, Termination::Budget);
        assert_eq!(rec.trace.iter().map(|t| t.best).collect::<Vec<_>>(), vec![5.0; 3]);
        assert_eq!(calls, 3);

        let mut g = |x: &[f64]| x[0];
        let mut ev = Evaluator::new(&mut g, 10, 1.0);
        assert!(ev
            .evaluate_all(&[DVector::from_element(1, 2.0), DVector::from_element(1, 0.5), DVector::from_element(1, 9.0)])
            .is_none());
        let rec = ev.finish(0, Vec::new(), false);
        assert_eq!(rec.termination, Termination::Target);
        assert_eq!(rec.evaluations(), 2);
        assert_eq!(rec.evals_to(1.0), Some(2));
    }
}
