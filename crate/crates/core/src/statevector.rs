//! Dense qudit state vectors.
//!
//! Basis states `|x_1, ..., x_N>` are indexed big-endian: `x_1` is the most
//! significant digit, so `index = sum_n x_n * d^(N - n)`. Qudit positions in
//! this API are zero-based, position 0 being `x_1`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{QmooError, Result};
use crate::operators::QuditMatrix;
use crate::rng::unit_f64;

/// Default upper bound on `d^N`.
pub const DEFAULT_DIM_CAP: usize = 1 << 24;

const NORM_TOL: f64 = 1e-9;
const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuditRegister {
    d: usize,
    n: usize,
    dim: usize,
}

impl QuditRegister {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        Self::with_cap(d, n, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(d: usize, n: usize, cap: usize) -> Result<Self> {
        if d < 2 {
            return Err(QmooError::domain(format!("local dimension {d} < 2")));
        }
        if n < 1 {
            return Err(QmooError::domain("register needs at least one qudit"));
        }
        let dim = u32::try_from(n)
            .ok()
            .and_then(|n| d.checked_pow(n))
            .filter(|&dim| dim <= cap)
            .ok_or_else(|| {
                QmooError::Resource(format!("d^N = {d}^{n} exceeds the cap of {cap}"))
            })?;
        Ok(Self { d, n, dim })
    }

    #[inline]
    pub fn local_dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn qudits(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Distance between consecutive values of the digit at `position`.
    #[inline]
    fn stride(&self, position: usize) -> usize {
        self.d.pow((self.n - 1 - position) as u32)
    }

    pub fn encode(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.n {
            return Err(QmooError::domain(format!(
                "digit vector has length {}, register has {} qudits",
                digits.len(),
                self.n
            )));
        }
        digits.iter().try_fold(0usize, |acc, &x| {
            if x >= self.d {
                Err(QmooError::domain(format!(
                    "digit {x} out of range for d = {}",
                    self.d
                )))
            } else {
                Ok(acc * self.d + x)
            }
        })
    }

    pub fn decode(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.dim {
            return Err(QmooError::domain(format!(
                "basis index {index} out of range for dimension {}",
                self.dim
            )));
        }
        let mut digits = vec![0; self.n];
        self.decode_into(index, &mut digits);
        Ok(digits)
    }

    /// Unchecked decode into a caller-provided buffer of length `N`.
    pub(crate) fn decode_into(&self, mut index: usize, digits: &mut [usize]) {
        for slot in digits.iter_mut().rev() {
            *slot = index % self.d;
            index /= self.d;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    register: QuditRegister,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn uniform(register: QuditRegister) -> Self {
        let a = 1.0 / (register.dim() as f64).sqrt();
        Self {
            register,
            amplitudes: vec![Complex64::new(a, 0.0); register.dim()],
        }
    }

    pub fn basis(register: QuditRegister, index: usize) -> Result<Self> {
        if index >= register.dim() {
            return Err(QmooError::domain(format!("basis index {index} out of range")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); register.dim()];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            register,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes, rejecting vectors whose norm is off by more than 1e-9.
    pub fn from_amplitudes(register: QuditRegister, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != register.dim() {
            return Err(QmooError::domain(format!(
                "{} amplitudes for dimension {}",
                amplitudes.len(),
                register.dim()
            )));
        }
        let state = Self {
            register,
            amplitudes,
        };
        let dev = (state.norm_sqr() - 1.0).abs();
        if dev > NORM_TOL {
            return Err(QmooError::domain(format!(
                "amplitudes are not normalized (|norm^2 - 1| = {dev:e})"
            )));
        }
        Ok(state)
    }

    /// Resets to the uniform superposition without reallocating.
    pub fn reset_uniform(&mut self) {
        let a = 1.0 / (self.register.dim() as f64).sqrt();
        self.amplitudes.fill(Complex64::new(a, 0.0));
    }

    #[inline]
    pub fn register(&self) -> &QuditRegister {
        &self.register
    }

    #[inline]
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Multiplies amplitude `i` by `exp(-i * phases[i])`.
    pub fn apply_diagonal_phase(&mut self, phases: &[f64]) -> Result<()> {
        if phases.len() != self.amplitudes.len() {
            return Err(QmooError::domain(format!(
                "{} phases for dimension {}",
                phases.len(),
                self.amplitudes.len()
            )));
        }
        if let Some(bad) = phases.iter().find(|p| !p.is_finite()) {
            return Err(QmooError::domain(format!("non-finite phase {bad}")));
        }
        self.apply_scaled_phase(1.0, phases);
        Ok(())
    }

    /// Multiplies amplitude `i` by `exp(-i * scale * values[i])`; lengths must agree.
    pub(crate) fn apply_scaled_phase(&mut self, scale: f64, values: &[f64]) {
        debug_assert_eq!(values.len(), self.amplitudes.len());
        if scale == 0.0 {
            return;
        }
        for (a, &v) in self.amplitudes.iter_mut().zip(values) {
            let (s, c) = (scale * v).sin_cos();
            *a *= Complex64::new(c, -s);
        }
    }

    /// Applies a single-qudit unitary to the qudit at zero-based `position`.
    pub fn apply_local_unitary(&mut self, gate: &QuditMatrix, position: usize) -> Result<()> {
        let d = self.register.local_dim();
        if gate.dim() != d {
            return Err(QmooError::domain(format!(
                "gate acts on dimension {}, register has d = {d}",
                gate.dim()
            )));
        }
        if position >= self.register.qudits() {
            return Err(QmooError::domain(format!(
                "qudit position {position} out of range for N = {}",
                self.register.qudits()
            )));
        }
        let dev = gate.unitarity_deviation();
        if dev > UNITARY_TOL {
            return Err(QmooError::domain(format!(
                "gate is not unitary (max |U^dag U - I| = {dev:e})"
            )));
        }
        let mut scratch = Vec::new();
        self.apply_gate_unchecked(gate.entries(), position, &mut scratch);
        Ok(())
    }

    /// Strided gate kernel. `gate` is a row-major d x d matrix already known to
    /// be unitary; `scratch` is reused across calls to avoid allocation.
    pub(crate) fn apply_gate_unchecked(
        &mut self,
        gate: &[Complex64],
        position: usize,
        scratch: &mut Vec<Complex64>,
    ) {
        let d = self.register.local_dim();
        let stride = self.register.stride(position);
        let block = d * stride;
        if stride == 1 {
            let mut v = [Complex64::new(0.0, 0.0); 16];
            if d <= v.len() {
                for chunk in self.amplitudes.chunks_exact_mut(d) {
                    v[..d].copy_from_slice(chunk);
                    for (r, out) in chunk.iter_mut().enumerate() {
                        let row = &gate[r * d..(r + 1) * d];
                        *out = row.iter().zip(&v[..d]).map(|(u, x)| u * x).sum();
                    }
                }
                return;
            }
        }
        scratch.resize(block, Complex64::new(0.0, 0.0));
        for chunk in self.amplitudes.chunks_exact_mut(block) {
            scratch.copy_from_slice(chunk);
            for (r, out) in chunk.chunks_exact_mut(stride).enumerate() {
                let row = &gate[r * d..(r + 1) * d];
                let u0 = row[0];
                for (o, &x) in out.iter_mut().zip(&scratch[..stride]) {
                    *o = u0 * x;
                }
                for (c, &u) in row.iter().enumerate().skip(1) {
                    let src = &scratch[c * stride..(c + 1) * stride];
                    for (o, &x) in out.iter_mut().zip(src) {
                        *o += u * x;
                    }
                }
            }
        }
    }

    /// Applies the same single-qudit unitary to every qudit.
    ///
    /// Each pass applies `gate` to the leading digit and writes the result with
    /// that digit moved to the least significant position; after `N` passes the
    /// digit order is restored. `buffer` is swapped with the amplitudes.
    pub(crate) fn apply_gate_all_qudits(&mut self, gate: &[Complex64], buffer: &mut Vec<Complex64>) {
        let d = self.register.local_dim();
        buffer.resize(self.amplitudes.len(), Complex64::new(0.0, 0.0));
        for _ in 0..self.register.qudits() {
            match d {
                2 => rotate_pass::<2>(gate, &self.amplitudes, buffer),
                3 => rotate_pass::<3>(gate, &self.amplitudes, buffer),
                4 => rotate_pass::<4>(gate, &self.amplitudes, buffer),
                5 => rotate_pass::<5>(gate, &self.amplitudes, buffer),
                _ => rotate_pass_dyn(d, gate, &self.amplitudes, buffer),
            }
            std::mem::swap(&mut self.amplitudes, buffer);
        }
    }

    /// Draws `n_shots` computational-basis measurements.
    pub fn sample<R: RngCore + ?Sized>(&self, n_shots: u64, rng: &mut R) -> Result<ShotCounts> {
        if n_shots == 0 {
            return Err(QmooError::domain("n_shots must be at least 1"));
        }
        let mut cdf = Vec::with_capacity(self.amplitudes.len());
        let mut acc = 0.0;
        let mut last_nonzero = 0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p > 0.0 {
                last_nonzero = i;
            }
            acc += p;
            cdf.push(acc);
        }
        let mut counts = BTreeMap::new();
        for _ in 0..n_shots {
            let u = unit_f64(rng) * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(last_nonzero);
            *counts.entry(idx).or_insert(0u64) += 1;
        }
        Ok(ShotCounts {
            counts,
            total: n_shots,
        })
    }

    /// The `k` basis states of largest probability, ties broken by ascending index.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let probs = self.probabilities();
        top_k_by_weight(&probs, k)
    }

    /// Total probability placed on `indices`. Out-of-range indices are ignored.
    pub fn pareto_weight(&self, indices: &[usize]) -> f64 {
        indices
            .iter()
            .filter_map(|&i| self.amplitudes.get(i))
            .map(|a| a.norm_sqr())
            .sum()
    }
}

/// `output[t * D + r] = sum_c gate[r][c] * input[c * S + t]` with `S = len / D`.
fn rotate_pass<const D: usize>(gate: &[Complex64], input: &[Complex64], output: &mut [Complex64]) {
    let s = input.len() / D;
    let mut u = [[Complex64::new(0.0, 0.0); D]; D];
    for (r, row) in u.iter_mut().enumerate() {
        row.copy_from_slice(&gate[r * D..(r + 1) * D]);
    }
    let lanes: [&[Complex64]; D] = std::array::from_fn(|c| &input[c * s..(c + 1) * s]);
    for (t, out) in output.chunks_exact_mut(D).enumerate() {
        let x: [Complex64; D] = std::array::from_fn(|c| lanes[c][t]);
        for (o, row) in out.iter_mut().zip(&u) {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..D {
                acc += row[c] * x[c];
            }
            *o = acc;
        }
    }
}

fn rotate_pass_dyn(d: usize, gate: &[Complex64], input: &[Complex64], output: &mut [Complex64]) {
    let s = input.len() / d;
    for (t, out) in output.chunks_exact_mut(d).enumerate() {
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..d).map(|c| gate[r * d + c] * input[c * s + t]).sum();
        }
    }
}

/// Orders by descending weight, then ascending index.
fn by_weight_then_index(w: &[f64]) -> impl Fn(&usize, &usize) -> std::cmp::Ordering + '_ {
    move |&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b))
}

pub(crate) fn top_k_by_weight(weights: &[f64], k: usize) -> Vec<usize> {
    let k = k.min(weights.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = by_weight_then_index(weights);
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(&cmp);
    idx
}

/// Measurement outcomes keyed by basis index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    counts: BTreeMap<usize, u64>,
    total: u64,
}

impl ShotCounts {
    pub fn from_counts(counts: BTreeMap<usize, u64>) -> Self {
        let total = counts.values().sum();
        Self { counts, total }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Most frequent outcomes, ties broken by ascending index.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut entries: Vec<(usize, u64)> = self.iter().collect();
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        entries.into_iter().take(k).map(|(i, _)| i).collect()
    }
}
