//! The layered variational circuit and its hypervolume score.
//!
//! Each of the `L` layers holds `K` blocks. Block `k` applies the phase
//! operator `exp(-i gamma H_k)`, with `H_k` diagonal and carrying the
//! normalized costs of objective `k`, followed by the same single-qudit mixer
//! on every qudit. Blocks run in ascending `k`.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::benchmarks::CostTable;
use crate::error::{QmooError, Result};
use crate::moo::{hypervolume, unit_reference};
use crate::operators::mixer_matrix;
use crate::statevector::{top_k_by_weight, StateVector};

/// Variational angles of an `L`-layer circuit over `K` objectives.
///
/// All per-block vectors are indexed `l * K + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub layers: usize,
    pub objectives: usize,
    pub d: usize,
    pub gammas: Vec<f64>,
    pub beta1: Vec<f64>,
    /// Squeezing angles; all zero and absent from the packed layout at `d = 2`.
    pub beta2: Vec<f64>,
}

/// Number of packed parameters: `3LK`, or `2LK` for qubits.
pub fn n_params(layers: usize, objectives: usize, d: usize) -> usize {
    let per_block = if d == 2 { 2 } else { 3 };
    per_block * layers * objectives
}

impl CircuitParams {
    pub fn zeros(layers: usize, objectives: usize, d: usize) -> Self {
        let blocks = layers * objectives;
        Self {
            layers,
            objectives,
            d,
            gammas: vec![0.0; blocks],
            beta1: vec![0.0; blocks],
            beta2: vec![0.0; blocks],
        }
    }

    fn blocks(&self) -> usize {
        self.layers * self.objectives
    }

    /// Flattens as `(gamma, beta1[, beta2])` per block, layer-major.
    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(n_params(self.layers, self.objectives, self.d));
        for b in 0..self.blocks() {
            out.push(self.gammas[b]);
            out.push(self.beta1[b]);
            if self.d != 2 {
                out.push(self.beta2[b]);
            }
        }
        out
    }

    pub fn unpack(values: &[f64], layers: usize, objectives: usize, d: usize) -> Result<Self> {
        let expected = n_params(layers, objectives, d);
        if layers == 0 || objectives == 0 {
            return Err(QmooError::domain("circuit needs at least one layer and one objective"));
        }
        if values.len() != expected {
            return Err(QmooError::domain(format!(
                "{} parameters, expected {expected} for L = {layers}, K = {objectives}, d = {d}",
                values.len()
            )));
        }
        let mut p = Self::zeros(layers, objectives, d);
        let width = if d == 2 { 2 } else { 3 };
        for (b, chunk) in values.chunks_exact(width).enumerate() {
            p.gammas[b] = chunk[0];
            p.beta1[b] = chunk[1];
            if d != 2 {
                p.beta2[b] = chunk[2];
            }
        }
        Ok(p)
    }
}

/// How solutions are extracted from the final state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShotPolicy {
    Finite(u64),
    /// Selection by exact probabilities, the infinite-shot limit.
    Exact,
}

impl fmt::Display for ShotPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShotPolicy::Finite(n) => write!(f, "{n}"),
            ShotPolicy::Exact => f.write_str("exact"),
        }
    }
}

impl FromStr for ShotPolicy {
    type Err = QmooError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") || s.eq_ignore_ascii_case("inf") {
            return Ok(ShotPolicy::Exact);
        }
        match s.parse::<u64>() {
            Ok(n) if n >= 1 => Ok(ShotPolicy::Finite(n)),
            _ => Err(QmooError::domain(format!(
                "shot policy must be a positive integer or \"exact\", got {s:?}"
            ))),
        }
    }
}

impl Serialize for ShotPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ShotPolicy::Finite(n) => s.serialize_u64(*n),
            ShotPolicy::Exact => s.serialize_str("exact"),
        }
    }
}

impl<'de> Deserialize<'de> for ShotPolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) if n >= 1 => Ok(ShotPolicy::Finite(n)),
            Raw::Num(n) => Err(serde::de::Error::custom(format!("invalid shot count {n}"))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Outcome of scoring one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    pub hv: f64,
    /// Selected basis states with their normalized objective vectors.
    pub solutions: Vec<(usize, Vec<f64>)>,
    /// Probability mass on the exact Pareto set, when one was supplied.
    pub pareto_weight: Option<f64>,
    pub state: Option<StateVector>,
}

/// Prepares the circuit state for `params` on `table`.
pub fn prepare_state(table: &CostTable, params: &CircuitParams) -> Result<StateVector> {
    let circuit = QmooCircuit::new(table, params.layers)?;
    let mut state = StateVector::uniform(*table.register());
    circuit.run(params, &mut state)?;
    Ok(state)
}

/// A circuit bound to one cost table.
#[derive(Debug, Clone)]
pub struct QmooCircuit<'a> {
    table: &'a CostTable,
    layers: usize,
}

impl<'a> QmooCircuit<'a> {
    pub fn new(table: &'a CostTable, layers: usize) -> Result<Self> {
        if layers == 0 {
            return Err(QmooError::domain("circuit needs at least one layer"));
        }
        Ok(Self { table, layers })
    }

    pub fn table(&self) -> &CostTable {
        self.table
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn n_params(&self) -> usize {
        n_params(self.layers, self.table.k(), self.table.register().local_dim())
    }

    /// Applies the circuit to `state`, which should hold the initial state.
    pub fn run(&self, params: &CircuitParams, state: &mut StateVector) -> Result<()> {
        let k = self.table.k();
        let reg = self.table.register();
        if params.objectives != k || params.layers != self.layers || params.d != reg.local_dim() {
            return Err(QmooError::domain(format!(
                "parameters for L = {}, K = {}, d = {} do not fit a circuit with L = {}, K = {k}, d = {}",
                params.layers,
                params.objectives,
                params.d,
                self.layers,
                reg.local_dim()
            )));
        }
        if state.register() != reg {
            return Err(QmooError::domain("state register does not match the cost table"));
        }
        let mut buffer = Vec::new();
        for l in 0..self.layers {
            for obj in 0..k {
                let b = l * k + obj;
                state.apply_scaled_phase(params.gammas[b], self.table.column(obj));
                let gate = mixer_matrix(reg.local_dim(), params.beta1[b], params.beta2[b])?;
                state.apply_gate_all_qudits(gate.entries(), &mut buffer);
            }
        }
        Ok(())
    }

    pub fn prepare(&self, params: &CircuitParams) -> Result<StateVector> {
        let mut state = StateVector::uniform(*self.table.register());
        self.run(params, &mut state)?;
        Ok(state)
    }
}

/// Scores packed parameter vectors by the hypervolume of the extracted solutions.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    circuit: QmooCircuit<'a>,
    policy: ShotPolicy,
    n_select: usize,
    pareto_set: Option<Vec<usize>>,
    keep_state: bool,
}

impl<'a> Evaluator<'a> {
    pub fn new(table: &'a CostTable, layers: usize, policy: ShotPolicy, n_select: usize) -> Result<Self> {
        if n_select == 0 {
            return Err(QmooError::domain("n_select must be at least 1"));
        }
        Ok(Self {
            circuit: QmooCircuit::new(table, layers)?,
            policy,
            n_select,
            pareto_set: None,
            keep_state: false,
        })
    }

    /// Basis indices of the exact Pareto set, used for the weight diagnostic.
    pub fn with_pareto_set(mut self, indices: Vec<usize>) -> Self {
        self.pareto_set = Some(indices);
        self
    }

    pub fn keep_state(mut self, keep: bool) -> Self {
        self.keep_state = keep;
        self
    }

    pub fn circuit(&self) -> &QmooCircuit<'a> {
        &self.circuit
    }

    pub fn policy(&self) -> ShotPolicy {
        self.policy
    }

    pub fn n_params(&self) -> usize {
        self.circuit.n_params()
    }

    pub fn unpack(&self, values: &[f64]) -> Result<CircuitParams> {
        let table = self.circuit.table;
        CircuitParams::unpack(
            values,
            self.circuit.layers,
            table.k(),
            table.register().local_dim(),
        )
    }

    /// Selects up to `n_select` states from `state` under the shot policy.
    pub fn select<R: RngCore + ?Sized>(&self, state: &StateVector, rng: &mut R) -> Result<Vec<usize>> {
        Ok(match self.policy {
            ShotPolicy::Exact => top_k_by_weight(&state.probabilities(), self.n_select),
            ShotPolicy::Finite(shots) => state.sample(shots, rng)?.top_k(self.n_select),
        })
    }

    pub fn evaluate<R: RngCore + ?Sized>(&self, params: &CircuitParams, rng: &mut R) -> Result<EvaluationResult> {
        let state = self.circuit.prepare(params)?;
        let chosen = self.select(&state, rng)?;
        let table = self.circuit.table;
        let solutions: Vec<(usize, Vec<f64>)> = chosen
            .into_iter()
            .map(|i| (i, table.objective_vector(i)))
            .collect();
        let points: Vec<Vec<f64>> = solutions.iter().map(|(_, v)| v.clone()).collect();
        let hv = hypervolume(&points, &unit_reference(table.k()))?;
        let pareto_weight = self.pareto_set.as_ref().map(|s| state.pareto_weight(s));
        Ok(EvaluationResult {
            hv,
            solutions,
            pareto_weight,
            state: self.keep_state.then_some(state),
        })
    }

    pub fn evaluate_packed<R: RngCore + ?Sized>(&self, values: &[f64], rng: &mut R) -> Result<EvaluationResult> {
        self.evaluate(&self.unpack(values)?, rng)
    }

    /// Probability mass of the prepared state on the Pareto set, if known.
    pub fn pareto_weight_of(&self, values: &[f64]) -> Result<Option<f64>> {
        match &self.pareto_set {
            None => Ok(None),
            Some(set) => {
                let state = self.circuit.prepare(&self.unpack(values)?)?;
                Ok(Some(state.pareto_weight(set)))
            }
        }
    }
}

/// One-shot convenience wrapper around [`Evaluator`].
pub fn evaluate_params<R: RngCore + ?Sized>(
    table: &CostTable,
    params: &CircuitParams,
    policy: ShotPolicy,
    n_select: usize,
    rng: &mut R,
) -> Result<EvaluationResult> {
    Evaluator::new(table, params.layers, policy, n_select)?.evaluate(params, rng)
}
