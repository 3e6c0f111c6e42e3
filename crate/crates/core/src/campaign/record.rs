use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmarks::ProblemClass;
use crate::circuit::ShotPolicy;
use crate::error::{QmooError, Result};
use crate::moea::MoeaConfig;
use crate::optim::{OptimizerConfig, StopReason};

/// Algorithm that produced a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMethod {
    Powell,
    Cmaes,
    Nsga2,
}

impl std::fmt::Display for RunMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunMethod::Powell => "powell",
            RunMethod::Cmaes => "cmaes",
            RunMethod::Nsga2 => "nsga2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub class: ProblemClass,
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub instance_seed: u64,
    pub run_index: usize,
    pub campaign_seed: u64,
    pub method: RunMethod,
    /// Circuit depth; absent for the baseline.
    pub layers: Option<usize>,
    pub shots: Option<ShotPolicy>,
    pub n_select: Option<usize>,
    pub optimizer: Option<OptimizerConfig>,
    pub moea: Option<MoeaConfig>,
    /// Seed of the stream that drew the initial parameters or population.
    pub init_seed: u64,
    /// Base seed of the per-evaluation sampling streams.
    pub shot_seed: Option<u64>,
    pub front_size: usize,
    pub front_hv: f64,
    pub initial_params: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Objective calls made up to and including this iteration.
    pub evaluations: u64,
    pub hv: f64,
    pub normalized_hv: f64,
    pub best_normalized_hv: f64,
    pub pareto_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub index: usize,
    pub digits: Vec<usize>,
    pub objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub evaluations: u64,
    pub stop: Option<StopReason>,
    pub best_hv: f64,
    pub best_normalized_hv: f64,
    pub best_params: Option<Vec<f64>>,
    /// Solution set behind the best value: the extracted states for QMOO, the
    /// final non-dominated population for the baseline.
    pub solutions: Vec<SolutionRecord>,
}

/// One optimization trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub header: RunHeader,
    pub rows: Vec<TraceRow>,
    pub summary: RunSummary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(RunHeader),
    Row(TraceRow),
    Summary(RunSummary),
}

impl RunRecord {
    pub fn final_row(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Line-delimited JSON: a header line, one line per trace row, a summary line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &Line| {
            out.push_str(&serde_json::to_string(line).expect("record fields serialize"));
            out.push('\n');
        };
        push(&Line::Header(self.header.clone()));
        for row in &self.rows {
            push(&Line::Row(row.clone()));
        }
        push(&Line::Summary(self.summary.clone()));
        out
    }

    pub fn from_jsonl(text: &str, origin: &Path) -> Result<Self> {
        let mut header = None;
        let mut rows = Vec::new();
        let mut summary = None;
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(line)
                .map_err(|e| QmooError::format(origin, format!("line {}: {e}", no + 1)))?;
            match parsed {
                Line::Header(h) if header.is_none() => header = Some(h),
                Line::Row(r) if header.is_some() && summary.is_none() => rows.push(r),
                Line::Summary(s) if header.is_some() && summary.is_none() => summary = Some(s),
                _ => return Err(QmooError::format(origin, format!("line {}: out of order", no + 1))),
            }
        }
        match (header, summary) {
            (Some(header), Some(summary)) => Ok(RunRecord { header, rows, summary }),
            _ => Err(QmooError::format(origin, "missing header or summary")),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| QmooError::io(path, e))?;
        Self::from_jsonl(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_jsonl().as_bytes())
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| QmooError::io(parent, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| QmooError::domain(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut file = fs::File::create(&tmp).map_err(|e| QmooError::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| QmooError::io(&tmp, e))?;
    file.sync_all().map_err(|e| QmooError::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| QmooError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunRecord {
        RunRecord {
            header: RunHeader {
                class: ProblemClass::IV,
                d: 3,
                n: 4,
                k: 3,
                instance_seed: 2,
                run_index: 7,
                campaign_seed: 0,
                method: RunMethod::Powell,
                layers: Some(2),
                shots: Some(ShotPolicy::Exact),
                n_select: Some(20),
                optimizer: Some(OptimizerConfig::default()),
                moea: None,
                init_seed: 123,
                shot_seed: Some(u64::MAX),
                front_size: 4,
                front_hv: 0.1 + 0.2,
                initial_params: Some(vec![-3.0, 1.0 / 3.0, std::f64::consts::PI]),
            },
            rows: vec![TraceRow {
                iteration: 0,
                evaluations: 1,
                hv: 0.123456789012345,
                normalized_hv: 0.5,
                best_normalized_hv: 0.5,
                pareto_weight: None,
            }],
            summary: RunSummary {
                iterations: 0,
                evaluations: 1,
                stop: Some(StopReason::Converged),
                best_hv: 1e-300,
                best_normalized_hv: 0.5,
                best_params: None,
                solutions: vec![SolutionRecord {
                    index: 5,
                    digits: vec![0, 0, 1, 2],
                    objectives: vec![0.1, 0.7, 2.0 / 3.0],
                }],
            },
        }
    }

    #[test]
    fn jsonl_round_trip_is_lossless() {
        let r = sample();
        let text = r.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        let back = RunRecord::from_jsonl(&text, Path::new("x")).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn rejects_truncated_records() {
        let text = sample().to_jsonl();
        let head: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(RunRecord::from_jsonl(&head, Path::new("x")).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/run.jsonl");
        sample().write(&path).unwrap();
        sample().write(&path).unwrap();
        assert_eq!(RunRecord::read(&path).unwrap(), sample());
        let names: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }
}
