//! Random benchmark instances over the integer domain `{0, ..., d-1}^N`.
//!
//! Five classes are supported:
//!
//! | class | K | objectives |
//! |-------|---|------------|
//! | I     | 2 | two anti-correlated linear costs |
//! | II    | 2 | AFM and FM all-to-all spin models |
//! | III   | 2 | AFM spin model, weighted distance to a random point |
//! | IV    | 3 | AFM, FM, weighted distance |
//! | V     | 5 | AFM chain, FM chain, distance, FM/AFM split chain, AFM/FM split chain |
//!
//! Instances are drawn from a single [`StreamRng`] seeded with the instance
//! seed. Objectives are drawn in order; within a quadratic objective the
//! couplings come first (upper triangle, row-major, only the structurally
//! nonzero entries), then the field vector `g`, then the point `x0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QmooError, Result};
use crate::rng::{stream, uniform, StreamRng};
use crate::statevector::QuditRegister;

/// Default upper bound on `d^N` for exhaustive cost tables.
pub const DEFAULT_TABLE_CAP: usize = 1 << 22;

/// Coupling ranges for antiferromagnetic (positive) and ferromagnetic
/// (negative) interactions.
pub const AFM_RANGE: (f64, f64) = (0.5, 1.0);
pub const FM_RANGE: (f64, f64) = (-1.0, -0.5);
/// Range of the diagonal weights of the distance objective in classes III and IV.
pub const DISTANCE_WEIGHT_RANGE: (f64, f64) = (0.5, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProblemClass {
    I,
    II,
    III,
    IV,
    V,
}

impl ProblemClass {
    pub const ALL: [ProblemClass; 5] = [Self::I, Self::II, Self::III, Self::IV, Self::V];

    pub fn objectives(self) -> usize {
        match self {
            Self::I | Self::II | Self::III => 2,
            Self::IV => 3,
            Self::V => 5,
        }
    }

    pub fn min_qudits(self) -> usize {
        match self {
            Self::V => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for ProblemClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::I => "I",
            Self::II => "II",
            Self::III => "III",
            Self::IV => "IV",
            Self::V => "V",
        };
        f.write_str(s)
    }
}

impl FromStr for ProblemClass {
    type Err = QmooError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Self::I),
            "II" | "2" => Ok(Self::II),
            "III" | "3" => Ok(Self::III),
            "IV" | "4" => Ok(Self::IV),
            "V" | "5" => Ok(Self::V),
            other => Err(QmooError::domain(format!("unknown problem class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearObjective {
    pub c: Vec<f64>,
}

/// `x^T J x + h^T x` with `J` symmetric, stored dense row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticObjective {
    pub j: Vec<Vec<f64>>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    Linear(LinearObjective),
    Quadratic(QuadraticObjective),
}

impl Objective {
    pub fn arity(&self) -> usize {
        match self {
            Objective::Linear(l) => l.c.len(),
            Objective::Quadratic(q) => q.h.len(),
        }
    }

    /// Evaluates the raw polynomial cost with digits treated as integers.
    pub fn eval_raw(&self, x: &[usize]) -> Result<f64> {
        if x.len() != self.arity() {
            return Err(QmooError::domain(format!(
                "digit vector of length {} for an objective over {} variables",
                x.len(),
                self.arity()
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[usize]) -> f64 {
        match self {
            Objective::Linear(l) => l.c.iter().zip(x).map(|(c, &xi)| c * xi as f64).sum(),
            Objective::Quadratic(q) => {
                let mut acc = 0.0;
                for (row, &xi) in q.j.iter().zip(x) {
                    let xi = xi as f64;
                    let inner: f64 = row.iter().zip(x).map(|(jij, &xj)| jij * xj as f64).sum();
                    acc += xi * inner;
                }
                acc + q.h.iter().zip(x).map(|(h, &xi)| h * xi as f64).sum::<f64>()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub class: ProblemClass,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub afm_range: (f64, f64),
    pub fm_range: (f64, f64),
    pub objectives: Vec<Objective>,
}

impl ProblemInstance {
    pub fn k(&self) -> usize {
        self.objectives.len()
    }

    pub fn register(&self) -> Result<QuditRegister> {
        QuditRegister::new(self.d, self.n)
    }

    pub fn eval_raw(&self, x: &[usize]) -> Result<Vec<f64>> {
        self.objectives.iter().map(|o| o.eval_raw(x)).collect()
    }
}

struct Draw<'a> {
    rng: &'a mut StreamRng,
    d: usize,
    n: usize,
}

impl Draw<'_> {
    fn vector(&mut self, low: f64, high: f64) -> Vec<f64> {
        (0..self.n).map(|_| uniform(self.rng, low, high)).collect()
    }

    /// `h = g - d * (1^T J)^T` with `g_i ~ U(-1, 1)`.
    fn spin_field(&mut self, j: &[Vec<f64>]) -> Vec<f64> {
        let g = self.vector(-1.0, 1.0);
        let d = self.d as f64;
        (0..self.n)
            .map(|i| g[i] - d * j.iter().map(|row| row[i]).sum::<f64>())
            .collect()
    }

    /// All-to-all couplings with zero diagonal.
    fn dense_spin_model(&mut self, range: (f64, f64)) -> Objective {
        let mut j = vec![vec![0.0; self.n]; self.n];
        for a in 0..self.n {
            for b in a + 1..self.n {
                let v = uniform(self.rng, range.0, range.1);
                j[a][b] = v;
                j[b][a] = v;
            }
        }
        let h = self.spin_field(&j);
        Objective::Quadratic(QuadraticObjective { j, h })
    }

    /// Nearest-neighbour chain; `range_of(i)` picks the range for the coupling
    /// between variables `i` and `i + 1` (zero-based).
    fn chain_spin_model(&mut self, range_of: impl Fn(usize) -> (f64, f64)) -> Objective {
        let mut j = vec![vec![0.0; self.n]; self.n];
        for a in 0..self.n - 1 {
            let (lo, hi) = range_of(a);
            let v = uniform(self.rng, lo, hi);
            j[a][a + 1] = v;
            j[a + 1][a] = v;
        }
        let h = self.spin_field(&j);
        Objective::Quadratic(QuadraticObjective { j, h })
    }

    /// `sum_i w_i (x_i - x0_i)^2` up to a constant: `J = diag(w)`, `h = -2 J x0`.
    fn distance(&mut self, weights: Option<(f64, f64)>) -> Objective {
        let w = match weights {
            Some((lo, hi)) => self.vector(lo, hi),
            None => vec![1.0; self.n],
        };
        let x0 = self.vector(0.0, (self.d - 1) as f64);
        let mut j = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            j[i][i] = w[i];
        }
        let h = (0..self.n).map(|i| -2.0 * w[i] * x0[i]).collect();
        Objective::Quadratic(QuadraticObjective { j, h })
    }
}

/// Draws a seeded instance of `class` over `d`-level variables.
pub fn gen_instance(class: ProblemClass, d: usize, n: usize, seed: u64) -> Result<ProblemInstance> {
    if d < 2 {
        return Err(QmooError::domain(format!("local dimension {d} < 2")));
    }
    if n < class.min_qudits() {
        return Err(QmooError::domain(format!(
            "class {class} needs N >= {}, got {n}",
            class.min_qudits()
        )));
    }
    let mut rng = stream(seed);
    let mut draw = Draw {
        rng: &mut rng,
        d,
        n,
    };
    let objectives = match class {
        ProblemClass::I => {
            let c1 = draw.vector(-1.0, 1.0);
            let u = draw.vector(-1.0, 1.0);
            let c2 = c1.iter().zip(&u).map(|(a, b)| -0.5 * a + 0.5 * b).collect();
            vec![
                Objective::Linear(LinearObjective { c: c1 }),
                Objective::Linear(LinearObjective { c: c2 }),
            ]
        }
        ProblemClass::II => vec![
            draw.dense_spin_model(AFM_RANGE),
            draw.dense_spin_model(FM_RANGE),
        ],
        ProblemClass::III => vec![
            draw.dense_spin_model(AFM_RANGE),
            draw.distance(Some(DISTANCE_WEIGHT_RANGE)),
        ],
        ProblemClass::IV => vec![
            draw.dense_spin_model(AFM_RANGE),
            draw.dense_spin_model(FM_RANGE),
            draw.distance(Some(DISTANCE_WEIGHT_RANGE)),
        ],
        ProblemClass::V => {
            // Coupling i (one-based, between x_i and x_{i+1}) is in the first
            // segment iff i <= floor(N/2).
            let half = n / 2;
            let first = move |a: usize| a < half;
            vec![
                draw.chain_spin_model(|_| AFM_RANGE),
                draw.chain_spin_model(|_| FM_RANGE),
                draw.distance(None),
                draw.chain_spin_model(|a| if first(a) { FM_RANGE } else { AFM_RANGE }),
                draw.chain_spin_model(|a| if first(a) { AFM_RANGE } else { FM_RANGE }),
            ]
        }
    };
    Ok(ProblemInstance {
        class,
        d,
        n,
        seed,
        afm_range: AFM_RANGE,
        fm_range: FM_RANGE,
        objectives,
    })
}

/// Exhaustively enumerated, min-max normalized costs of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    register: QuditRegister,
    raw_min: Vec<f64>,
    raw_max: Vec<f64>,
    degenerate: Vec<bool>,
    /// `normalized[k][i]` is the normalized cost of objective `k` at basis index `i`.
    normalized: Vec<Vec<f64>>,
}

/// Maps `v` into `[0, 1]` given the column extremes; degenerate columns map to 0.
#[inline]
pub fn normalize_value(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((v - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

impl CostTable {
    pub fn build(instance: &ProblemInstance) -> Result<Self> {
        Self::build_with_cap(instance, DEFAULT_TABLE_CAP)
    }

    pub fn build_with_cap(instance: &ProblemInstance, cap: usize) -> Result<Self> {
        let register = QuditRegister::with_cap(instance.d, instance.n, cap)?;
        if let Some(o) = instance.objectives.iter().find(|o| o.arity() != instance.n) {
            return Err(QmooError::domain(format!(
                "objective over {} variables in an N = {} instance",
                o.arity(),
                instance.n
            )));
        }
        let raw: Vec<Vec<f64>> = instance
            .objectives
            .iter()
            .map(|obj| enumerate_costs(&register, obj))
            .collect();
        Ok(Self::from_raw(register, raw))
    }

    /// Builds a table from raw cost columns, one per objective.
    pub fn from_raw(register: QuditRegister, raw: Vec<Vec<f64>>) -> Self {
        assert!(raw.iter().all(|col| col.len() == register.dim()));
        let mut raw_min = Vec::with_capacity(raw.len());
        let mut raw_max = Vec::with_capacity(raw.len());
        let mut degenerate = Vec::with_capacity(raw.len());
        let normalized = raw
            .into_iter()
            .map(|col| {
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                raw_min.push(min);
                raw_max.push(max);
                degenerate.push(max <= min);
                col.into_iter()
                    .map(|v| normalize_value(v, min, max))
                    .collect()
            })
            .collect();
        Self {
            register,
            raw_min,
            raw_max,
            degenerate,
            normalized,
        }
    }

    #[inline]
    pub fn register(&self) -> &QuditRegister {
        &self.register
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.normalized.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.register.dim()
    }

    pub fn raw_min(&self) -> &[f64] {
        &self.raw_min
    }

    pub fn raw_max(&self) -> &[f64] {
        &self.raw_max
    }

    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    /// Normalized costs of objective `k` over all basis states.
    #[inline]
    pub fn column(&self, k: usize) -> &[f64] {
        &self.normalized[k]
    }

    /// Normalized objective vector of basis state `index`.
    pub fn objective_vector(&self, index: usize) -> Vec<f64> {
        self.normalized.iter().map(|col| col[index]).collect()
    }
}

fn enumerate_costs(register: &QuditRegister, obj: &Objective) -> Vec<f64> {
    let mut digits = vec![0usize; register.qudits()];
    (0..register.dim())
        .map(|i| {
            register.decode_into(i, &mut digits);
            obj.eval_unchecked(&digits)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(j: Vec<Vec<f64>>, h: Vec<f64>) -> Objective {
        Objective::Quadratic(QuadraticObjective { j, h })
    }

    #[test]
    fn eval_raw_examples() {
        let lin = Objective::Linear(LinearObjective { c: vec![1.0, -1.0] });
        assert_eq!(lin.eval_raw(&[2, 3]).unwrap(), -1.0);
        let q = quad(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]);
        assert_eq!(q.eval_raw(&[1, 2]).unwrap(), 5.0);
        let q = quad(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0]);
        assert_eq!(q.eval_raw(&[2, 3]).unwrap(), 12.0);
        assert!(q.eval_raw(&[1, 2, 3]).is_err());
    }

    #[test]
    fn class_sizes() {
        for class in ProblemClass::ALL {
            let inst = gen_instance(class, 3, 5, 1).unwrap();
            assert_eq!(inst.k(), class.objectives());
            assert!(inst.objectives.iter().all(|o| o.arity() == 5));
        }
        assert!(gen_instance(ProblemClass::V, 3, 3, 0).is_err());
        assert!(gen_instance(ProblemClass::II, 3, 1, 0).is_err());
        assert!(gen_instance(ProblemClass::I, 1, 4, 0).is_err());
    }

    #[test]
    fn regeneration_is_bit_identical() {
        for class in ProblemClass::ALL {
            let a = gen_instance(class, 5, 6, 17).unwrap();
            let b = gen_instance(class, 5, 6, 17).unwrap();
            assert_eq!(a, b);
            let c = gen_instance(class, 5, 6, 18).unwrap();
            assert_ne!(a, c);
        }
    }

    fn couplings(obj: &Objective) -> &Vec<Vec<f64>> {
        match obj {
            Objective::Quadratic(q) => &q.j,
            Objective::Linear(_) => panic!("expected quadratic objective"),
        }
    }

    #[test]
    fn class_two_signs_and_symmetry() {
        for seed in 0..20 {
            let inst = gen_instance(ProblemClass::II, 3, 6, seed).unwrap();
            let afm = couplings(&inst.objectives[0]);
            let fm = couplings(&inst.objectives[1]);
            for a in 0..6 {
                assert_eq!(afm[a][a], 0.0);
                for b in 0..6 {
                    assert_eq!(afm[a][b], afm[b][a]);
                    assert_eq!(fm[a][b], fm[b][a]);
                    if a != b {
                        assert!(afm[a][b] > 0.0);
                        assert!(fm[a][b] < 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn class_two_field_rule() {
        let inst = gen_instance(ProblemClass::II, 4, 5, 3).unwrap();
        let Objective::Quadratic(q) = &inst.objectives[0] else {
            panic!()
        };
        // g_i = h_i + d * column sum must lie in [-1, 1).
        for i in 0..5 {
            let col: f64 = q.j.iter().map(|row| row[i]).sum();
            let g = q.h[i] + 4.0 * col;
            assert!((-1.0..1.0).contains(&g), "g = {g}");
        }
    }

    #[test]
    fn class_three_distance_objective() {
        let inst = gen_instance(ProblemClass::III, 4, 5, 8).unwrap();
        let Objective::Quadratic(q) = &inst.objectives[1] else {
            panic!()
        };
        for i in 0..5 {
            for k in 0..5 {
                if i != k {
                    assert_eq!(q.j[i][k], 0.0);
                }
            }
            assert!((0.5..1.0).contains(&q.j[i][i]));
            let x0 = -q.h[i] / (2.0 * q.j[i][i]);
            assert!((0.0..=3.0).contains(&x0));
        }
    }

    #[test]
    fn class_five_chain_structure() {
        for n in [4, 5, 6, 9] {
            let inst = gen_instance(ProblemClass::V, 3, n, 2).unwrap();
            for k in [0, 1, 3, 4] {
                let j = couplings(&inst.objectives[k]);
                for a in 0..n {
                    for b in 0..n {
                        if a.abs_diff(b) != 1 {
                            assert_eq!(j[a][b], 0.0);
                        } else {
                            assert_eq!(j[a][b], j[b][a]);
                        }
                    }
                }
            }
            let split = couplings(&inst.objectives[3]);
            let mirror = couplings(&inst.objectives[4]);
            for a in 0..n - 1 {
                let in_first = a + 1 <= n / 2;
                assert_eq!(split[a][a + 1] < 0.0, in_first);
                assert_eq!(mirror[a][a + 1] > 0.0, in_first);
            }
            let Objective::Quadratic(dist) = &inst.objectives[2] else {
                panic!()
            };
            assert!((0..n).all(|i| dist.j[i][i] == 1.0));
        }
    }

    #[test]
    fn class_one_anticorrelation() {
        let n = 8;
        let mut mean_corr = 0.0;
        for seed in 0..1000 {
            let inst = gen_instance(ProblemClass::I, 2, n, seed).unwrap();
            let (Objective::Linear(a), Objective::Linear(b)) =
                (&inst.objectives[0], &inst.objectives[1])
            else {
                panic!()
            };
            let ma = a.c.iter().sum::<f64>() / n as f64;
            let mb = b.c.iter().sum::<f64>() / n as f64;
            let cov: f64 = a.c.iter().zip(&b.c).map(|(x, y)| (x - ma) * (y - mb)).sum();
            let va: f64 = a.c.iter().map(|x| (x - ma).powi(2)).sum();
            let vb: f64 = b.c.iter().map(|y| (y - mb).powi(2)).sum();
            mean_corr += cov / (va * vb).sqrt();
        }
        mean_corr /= 1000.0;
        // E[corr] is about -1/sqrt(2) for c2 = -c1/2 + u/2 with equal variances.
        assert!(mean_corr < -0.5, "mean correlation {mean_corr}");
    }

    #[test]
    fn cost_table_small_linear() {
        let inst = ProblemInstance {
            class: ProblemClass::I,
            d: 2,
            n: 2,
            seed: 0,
            afm_range: AFM_RANGE,
            fm_range: FM_RANGE,
            objectives: vec![Objective::Linear(LinearObjective { c: vec![1.0, 1.0] })],
        };
        let table = CostTable::build(&inst).unwrap();
        assert_eq!(table.column(0), &[0.0, 0.5, 0.5, 1.0]);
        assert_eq!(table.raw_min(), &[0.0]);
        assert_eq!(table.raw_max(), &[2.0]);
    }

    #[test]
    fn cost_table_matches_independent_evaluation() {
        for class in ProblemClass::ALL {
            let inst = gen_instance(class, 3, 5, 4).unwrap();
            let table = CostTable::build(&inst).unwrap();
            let reg = inst.register().unwrap();
            let raw: Vec<Vec<f64>> = (0..reg.dim())
                .map(|i| inst.eval_raw(&reg.decode(i).unwrap()).unwrap())
                .collect();
            for k in 0..inst.k() {
                let lo = raw.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min);
                let hi = raw.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
                let col = table.column(k);
                assert_eq!(col.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
                assert_eq!(col.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
                for (i, r) in raw.iter().enumerate() {
                    assert!((col[i] - (r[k] - lo) / (hi - lo)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn degenerate_column_is_zero() {
        let reg = QuditRegister::new(2, 2).unwrap();
        let table = CostTable::from_raw(reg, vec![vec![3.0; 4], vec![0.0, 1.0, 2.0, 3.0]]);
        assert_eq!(table.column(0), &[0.0; 4]);
        assert_eq!(table.degenerate(), &[true, false]);
    }

    #[test]
    fn normalization_is_idempotent() {
        let inst = gen_instance(ProblemClass::IV, 3, 4, 5).unwrap();
        let table = CostTable::build(&inst).unwrap();
        let again = CostTable::from_raw(
            *table.register(),
            (0..table.k()).map(|k| table.column(k).to_vec()).collect(),
        );
        for k in 0..table.k() {
            assert_eq!(table.column(k), again.column(k));
        }
    }

    #[test]
    fn table_cap_is_enforced() {
        let inst = gen_instance(ProblemClass::I, 5, 6, 0).unwrap();
        assert!(matches!(
            CostTable::build_with_cap(&inst, 1000),
            Err(QmooError::Resource(_))
        ));
    }

    #[test]
    fn class_two_optima_differ() {
        for seed in 0..10 {
            let inst = gen_instance(ProblemClass::II, 3, 6, seed).unwrap();
            let table = CostTable::build(&inst).unwrap();
            let argmin = |k: usize| {
                let col = table.column(k);
                (0..col.len())
                    .min_by(|&a, &b| col[a].total_cmp(&col[b]))
                    .unwrap()
            };
            let a = argmin(0);
            assert!(table.column(1)[a] > 0.0, "seed {seed}");
            assert_ne!(a, argmin(1));
        }
    }

    #[test]
    fn class_parsing() {
        assert_eq!("iv".parse::<ProblemClass>().unwrap(), ProblemClass::IV);
        assert_eq!("5".parse::<ProblemClass>().unwrap(), ProblemClass::V);
        assert!("VI".parse::<ProblemClass>().is_err());
        for c in ProblemClass::ALL {
            assert_eq!(c.to_string().parse::<ProblemClass>().unwrap(), c);
        }
    }
}
