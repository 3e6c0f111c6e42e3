use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{write_atomic, SolutionRecord};
use crate::benchmarks::{CostTable, ProblemInstance};
use crate::error::{QmooError, Result};
use crate::moo::{brute_force_pareto, hypervolume, unit_reference, ParetoFront};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub raw_min: Vec<f64>,
    pub raw_max: Vec<f64>,
    pub degenerate: Vec<bool>,
}

/// Self-describing instance file: every coefficient plus the normalization
/// constants of the exhaustive cost table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub k: usize,
    #[serde(flatten)]
    pub instance: ProblemInstance,
    pub normalization: Normalization,
}

impl InstanceFile {
    pub fn new(instance: ProblemInstance, table: &CostTable) -> Self {
        Self {
            k: instance.k(),
            instance,
            normalization: Normalization {
                raw_min: table.raw_min().to_vec(),
                raw_max: table.raw_max().to_vec(),
                degenerate: table.degenerate().to_vec(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| QmooError::io(path, e))?;
        let file: Self = serde_json::from_str(&text).map_err(|e| QmooError::format(path, e.to_string()))?;
        if file.k != file.instance.k() {
            return Err(QmooError::format(path, "objective count does not match header"));
        }
        Ok(file)
    }
}

/// Exact Pareto front of an instance, optionally with the whole objective space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFile {
    pub class: crate::benchmarks::ProblemClass,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub k: usize,
    pub front_hv: f64,
    pub front: Vec<SolutionRecord>,
    /// Normalized objective vector of every basis state, in index order.
    pub scatter: Option<Vec<Vec<f64>>>,
}

impl OracleFile {
    pub fn compute(instance: &ProblemInstance, table: &CostTable, scatter: bool) -> Result<Self> {
        let front = brute_force_pareto(table);
        let front_hv = hypervolume(&front.points, &unit_reference(table.k()))?;
        Ok(Self {
            class: instance.class,
            d: instance.d,
            n: instance.n,
            seed: instance.seed,
            k: table.k(),
            front_hv,
            front: solution_records(table, &front),
            scatter: scatter.then(|| (0..table.dim()).map(|i| table.objective_vector(i)).collect()),
        })
    }

    pub fn front_points(&self) -> Vec<Vec<f64>> {
        self.front.iter().map(|s| s.objectives.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("oracle serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| QmooError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| QmooError::format(path, e.to_string()))
    }
}

pub(crate) fn solution_records(table: &CostTable, front: &ParetoFront) -> Vec<SolutionRecord> {
    let register = table.register();
    front
        .source_indices
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .zip(&front.points)
        .map(|(&index, point)| SolutionRecord {
            index,
            digits: register.decode(index).expect("index inside register"),
            objectives: point.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{gen_instance, ProblemClass};
    use crate::moo::normalized_hv;

    #[test]
    fn instance_file_round_trip() {
        let inst = gen_instance(ProblemClass::II, 5, 3, 4).unwrap();
        let table = CostTable::build(&inst).unwrap();
        let file = InstanceFile::new(inst.clone(), &table);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        file.write(&path).unwrap();
        let back = InstanceFile::read(&path).unwrap();
        assert_eq!(back, file);
        assert_eq!(CostTable::build(&back.instance).unwrap(), table);
        assert_eq!(back.to_json(), fs::read_to_string(&path).unwrap());
    }

    #[test]
    fn oracle_front_is_consistent() {
        let inst = gen_instance(ProblemClass::I, 2, 8, 1).unwrap();
        let table = CostTable::build(&inst).unwrap();
        let oracle = OracleFile::compute(&inst, &table, true).unwrap();
        assert!(oracle.front_hv > 0.0);
        let pts = oracle.front_points();
        assert_eq!(normalized_hv(&pts, &pts, &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(oracle.scatter.as_ref().unwrap().len(), 256);
        for s in &oracle.front {
            assert_eq!(inst.register().unwrap().encode(&s.digits).unwrap(), s.index);
        }
    }
}
