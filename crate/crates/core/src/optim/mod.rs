//! Derivative-free minimizers used to tune circuit angles.
//!
//! Both methods minimize; the campaign layer wraps the hypervolume as `-HV`.
//! An "iteration" is one full direction-set sweep for Powell and one
//! generation for CMA-ES.

mod cmaes;
mod line_search;
mod powell;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::QmooError;
use crate::rng::uniform;

pub use cmaes::cmaes_minimize;
pub use line_search::{brent_bounded, brent_bounded_from, LineMinimum};
pub use powell::powell_minimize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Powell,
    Cmaes,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Powell => "powell",
            Method::Cmaes => "cmaes",
        })
    }
}

impl FromStr for Method {
    type Err = QmooError;

    fn from_str(s: &str) -> Result<Self, QmooError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "powell" => Ok(Method::Powell),
            "cmaes" | "cma-es" | "cma" => Ok(Method::Cmaes),
            other => Err(QmooError::domain(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Objective-evaluation budget; `None` means unlimited.
    pub max_evaluations: Option<u64>,
    pub iteration_cap: usize,
    /// CMA-ES offspring per generation.
    pub population: usize,
    pub init_low: f64,
    pub init_high: f64,
    pub seed: u64,
    /// Absolute tolerance of Powell's line searches, in parameter units.
    pub line_tol: f64,
    /// Powell stops once a sweep improves the objective by less than this
    /// relative amount.
    pub ftol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Powell,
            max_evaluations: None,
            iteration_cap: 200,
            population: 10,
            init_low: -PI,
            init_high: PI,
            seed: 0,
            line_tol: 1e-3,
            ftol: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub(crate) fn validate(&self) -> Result<(), QmooError> {
        if self.iteration_cap == 0 {
            return Err(QmooError::domain("iteration cap must be positive"));
        }
        if self.max_evaluations == Some(0) {
            return Err(QmooError::domain("evaluation budget must be positive"));
        }
        if !(self.init_low < self.init_high) {
            return Err(QmooError::domain("initialization box is empty"));
        }
        if !(self.line_tol > 0.0) {
            return Err(QmooError::domain("line tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Objective at this iteration's representative point: the current iterate
    /// for Powell, the best offspring for CMA-ES.
    pub value: f64,
    /// Best value recorded so far.
    pub best: f64,
    pub params: Vec<f64>,
    /// Objective calls made so far.
    pub evaluations: u64,
}

/// Per-iteration history. Iteration 0 is the starting point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    fn push(&mut self, iteration: usize, value: f64, params: &[f64], evaluations: u64) {
        let best = self
            .records
            .last()
            .map_or(value, |r| if value < r.best { value } else { r.best });
        self.records.push(TraceRecord {
            iteration,
            value,
            best,
            params: params.to_vec(),
            evaluations,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    IterationCap,
    EvaluationBudget,
    Converged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub trace: Trace,
    pub evaluations: u64,
    pub iterations: usize,
    pub stop: StopReason,
}

/// Counts calls, maps NaN to `+inf` and enforces the evaluation budget.
pub(crate) struct Counted<'f> {
    f: &'f mut dyn FnMut(&[f64]) -> f64,
    pub calls: u64,
    budget: u64,
}

impl<'f> Counted<'f> {
    pub(crate) fn new(f: &'f mut dyn FnMut(&[f64]) -> f64, budget: Option<u64>) -> Self {
        Self {
            f,
            calls: 0,
            budget: budget.unwrap_or(u64::MAX),
        }
    }

    pub(crate) fn remaining(&self) -> u64 {
        self.budget.saturating_sub(self.calls)
    }

    pub(crate) fn exhausted(&self) -> bool {
        self.calls >= self.budget
    }

    pub(crate) fn call(&mut self, x: &[f64]) -> f64 {
        self.calls += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// I.i.d. uniform draws in `[low, high)`.
pub fn random_init<R: RngCore + ?Sized>(n_params: usize, low: f64, high: f64, rng: &mut R) -> Vec<f64> {
    (0..n_params).map(|_| uniform(rng, low, high)).collect()
}
