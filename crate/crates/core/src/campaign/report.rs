use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::record::{write_atomic, RunMethod, RunRecord};
use crate::benchmarks::ProblemClass;
use crate::circuit::ShotPolicy;
use crate::error::{QmooError, Result};

/// Nearest-rank quantile of ascending `sorted`: the element of 1-based rank
/// `ceil(p * n)`, clamped to `[1, n]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Records are aggregated per (class, size, method, depth, shots).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey {
    pub class: ProblemClass,
    pub d: usize,
    pub n: usize,
    pub method: RunMethod,
    pub layers: Option<usize>,
    pub shots: Option<ShotPolicy>,
}

impl GroupKey {
    pub fn of(record: &RunRecord) -> Self {
        let h = &record.header;
        Self {
            class: h.class,
            d: h.d,
            n: h.n,
            method: h.method,
            layers: h.layers,
            shots: h.shots,
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} d={} N={} {}", self.class, self.d, self.n, self.method)?;
        if let Some(l) = self.layers {
            write!(f, " L={l}")?;
        }
        if let Some(s) = self.shots {
            write!(f, " shots={s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceQuantiles {
    pub iteration: usize,
    pub runs: usize,
    pub q20: f64,
    pub median: f64,
    pub q80: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalSummary {
    pub runs: usize,
    pub q20: f64,
    pub median: f64,
    pub q80: f64,
    pub min: f64,
    pub max: f64,
    pub best_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TraceCsvRow {
    class: String,
    d: usize,
    n: usize,
    method: String,
    layers: String,
    shots: String,
    iteration: usize,
    runs: usize,
    q20: f64,
    median: f64,
    q80: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FinalCsvRow {
    class: String,
    d: usize,
    n: usize,
    method: String,
    layers: String,
    shots: String,
    instance_seed: u64,
    run_index: usize,
    iterations: usize,
    evaluations: u64,
    final_normalized_hv: f64,
    best_normalized_hv: f64,
    final_pareto_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SummaryCsvRow {
    class: String,
    d: usize,
    n: usize,
    method: String,
    layers: String,
    shots: String,
    runs: usize,
    q20: f64,
    median: f64,
    q80: f64,
    min: f64,
    max: f64,
    best_median: f64,
}

/// Per-group aggregates of normalized hypervolume.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub traces: BTreeMap<GroupKey, Vec<TraceQuantiles>>,
    pub finals: BTreeMap<GroupKey, FinalSummary>,
    finals_raw: BTreeMap<GroupKey, Vec<RunRecordDigest>>,
}

#[derive(Debug, Clone, PartialEq)]
struct RunRecordDigest {
    instance_seed: u64,
    run_index: usize,
    iterations: usize,
    evaluations: u64,
    final_normalized_hv: f64,
    best_normalized_hv: f64,
    final_pareto_weight: Option<f64>,
}

/// Value of the last row at or before `iteration`.
fn carried(record: &RunRecord, iteration: usize) -> Option<f64> {
    let pos = record.rows.partition_point(|r| r.iteration <= iteration);
    pos.checked_sub(1).map(|i| record.rows[i].normalized_hv)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

impl Report {
    /// Aggregates records; runs that stop early contribute their last value to
    /// every later iteration of their group.
    pub fn from_records(records: &[RunRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(QmooError::domain("no run records to report"));
        }
        let mut groups: BTreeMap<GroupKey, Vec<&RunRecord>> = BTreeMap::new();
        for r in records {
            if r.rows.is_empty() {
                return Err(QmooError::domain(format!(
                    "run {} of instance {} has no trace rows",
                    r.header.run_index, r.header.instance_seed
                )));
            }
            groups.entry(GroupKey::of(r)).or_default().push(r);
        }

        let mut report = Report::default();
        for (key, mut runs) in groups {
            runs.sort_by_key(|r| (r.header.instance_seed, r.header.run_index));
            let first = runs.iter().map(|r| r.rows[0].iteration).min().unwrap_or(0);
            let last = runs
                .iter()
                .map(|r| r.rows.last().map_or(0, |x| x.iteration))
                .max()
                .unwrap_or(0);
            let mut trace = Vec::with_capacity(last - first + 1);
            for it in first..=last {
                let values: Vec<f64> = runs.iter().filter_map(|r| carried(r, it)).collect();
                if values.is_empty() {
                    continue;
                }
                let v = sorted(values);
                trace.push(TraceQuantiles {
                    iteration: it,
                    runs: v.len(),
                    q20: nearest_rank(&v, 0.2),
                    median: nearest_rank(&v, 0.5),
                    q80: nearest_rank(&v, 0.8),
                });
            }
            report.traces.insert(key, trace);

            let digests: Vec<RunRecordDigest> = runs
                .iter()
                .map(|r| {
                    let row = r.rows.last().expect("non-empty");
                    RunRecordDigest {
                        instance_seed: r.header.instance_seed,
                        run_index: r.header.run_index,
                        iterations: row.iteration,
                        evaluations: row.evaluations,
                        final_normalized_hv: row.normalized_hv,
                        best_normalized_hv: row.best_normalized_hv,
                        final_pareto_weight: row.pareto_weight,
                    }
                })
                .collect();
            let finals = sorted(digests.iter().map(|g| g.final_normalized_hv).collect());
            let bests = sorted(digests.iter().map(|g| g.best_normalized_hv).collect());
            report.finals.insert(
                key,
                FinalSummary {
                    runs: finals.len(),
                    q20: nearest_rank(&finals, 0.2),
                    median: nearest_rank(&finals, 0.5),
                    q80: nearest_rank(&finals, 0.8),
                    min: finals[0],
                    max: finals[finals.len() - 1],
                    best_median: nearest_rank(&bests, 0.5),
                },
            );
            report.finals_raw.insert(key, digests);
        }
        Ok(report)
    }

    /// Median normalized HV of a group at `iteration`, if the group reaches it.
    pub fn median_at(&self, key: &GroupKey, iteration: usize) -> Option<f64> {
        self.traces
            .get(key)?
            .iter()
            .find(|t| t.iteration == iteration)
            .map(|t| t.median)
    }

    /// Writes `trace_quantiles.csv`, `final_values.csv` and `final_summary.csv`
    /// into `dir` and returns their paths.
    pub fn write_tables(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let label = |k: &GroupKey| {
            (
                k.class.to_string(),
                k.method.to_string(),
                k.layers.map_or(String::new(), |l| l.to_string()),
                k.shots.map_or(String::new(), |s| s.to_string()),
            )
        };
        let mut trace_rows = Vec::new();
        for (k, rows) in &self.traces {
            let (class, method, layers, shots) = label(k);
            for t in rows {
                trace_rows.push(TraceCsvRow {
                    class: class.clone(),
                    d: k.d,
                    n: k.n,
                    method: method.clone(),
                    layers: layers.clone(),
                    shots: shots.clone(),
                    iteration: t.iteration,
                    runs: t.runs,
                    q20: t.q20,
                    median: t.median,
                    q80: t.q80,
                });
            }
        }
        let mut final_rows = Vec::new();
        for (k, digests) in &self.finals_raw {
            let (class, method, layers, shots) = label(k);
            for g in digests {
                final_rows.push(FinalCsvRow {
                    class: class.clone(),
                    d: k.d,
                    n: k.n,
                    method: method.clone(),
                    layers: layers.clone(),
                    shots: shots.clone(),
                    instance_seed: g.instance_seed,
                    run_index: g.run_index,
                    iterations: g.iterations,
                    evaluations: g.evaluations,
                    final_normalized_hv: g.final_normalized_hv,
                    best_normalized_hv: g.best_normalized_hv,
                    final_pareto_weight: g.final_pareto_weight,
                });
            }
        }
        let mut summary_rows = Vec::new();
        for (k, s) in &self.finals {
            let (class, method, layers, shots) = label(k);
            summary_rows.push(SummaryCsvRow {
                class,
                d: k.d,
                n: k.n,
                method,
                layers,
                shots,
                runs: s.runs,
                q20: s.q20,
                median: s.median,
                q80: s.q80,
                min: s.min,
                max: s.max,
                best_median: s.best_median,
            });
        }
        let paths = vec![
            dir.join("trace_quantiles.csv"),
            dir.join("final_values.csv"),
            dir.join("final_summary.csv"),
        ];
        write_atomic(&paths[0], &to_csv(&trace_rows)?)?;
        write_atomic(&paths[1], &to_csv(&final_rows)?)?;
        write_atomic(&paths[2], &to_csv(&summary_rows)?)?;
        Ok(paths)
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| QmooError::domain(format!("cannot encode table row: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| QmooError::domain(format!("cannot finish table: {e}")))
}

/// Reads every record matching `pattern`, in path order.
pub fn read_records(pattern: &str) -> Result<Vec<RunRecord>> {
    let paths = glob::glob(pattern).map_err(|e| QmooError::domain(format!("bad glob {pattern:?}: {e}")))?;
    let mut files: Vec<PathBuf> = paths
        .filter_map(|p| p.ok())
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(QmooError::domain(format!("no run records match {pattern:?}")));
    }
    files.iter().map(|p| RunRecord::read(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::record::{RunHeader, RunSummary, TraceRow};

    fn record(seed: u64, run: usize, values: &[f64]) -> RunRecord {
        RunRecord {
            header: RunHeader {
                class: ProblemClass::I,
                d: 2,
                n: 4,
                k: 2,
                instance_seed: seed,
                run_index: run,
                campaign_seed: 0,
                method: RunMethod::Powell,
                layers: Some(1),
                shots: Some(ShotPolicy::Exact),
                n_select: Some(20),
                optimizer: None,
                moea: None,
                init_seed: 0,
                shot_seed: None,
                front_size: 1,
                front_hv: 1.0,
                initial_params: None,
            },
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &v)| TraceRow {
                    iteration: i,
                    evaluations: i as u64,
                    hv: v,
                    normalized_hv: v,
                    best_normalized_hv: v,
                    pareto_weight: None,
                })
                .collect(),
            summary: RunSummary {
                iterations: values.len() - 1,
                evaluations: 0,
                stop: None,
                best_hv: 0.0,
                best_normalized_hv: 0.0,
                best_params: None,
                solutions: vec![],
            },
        }
    }

    #[test]
    fn nearest_rank_examples() {
        let v = [0.2, 0.5, 0.9];
        assert_eq!(nearest_rank(&v, 0.5), 0.5);
        assert_eq!(nearest_rank(&v, 0.2), 0.2);
        assert_eq!(nearest_rank(&v, 0.8), 0.9);
        assert_eq!(nearest_rank(&[7.0], 0.0), 7.0);
        let ten: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank(&ten, 0.2), 2.0);
        assert_eq!(nearest_rank(&ten, 0.5), 5.0);
        assert_eq!(nearest_rank(&ten, 0.8), 8.0);
    }

    #[test]
    fn single_run_quantiles_equal_trace() {
        let r = record(0, 0, &[0.1, 0.4, 0.6]);
        let rep = Report::from_records(&[r.clone()]).unwrap();
        let t = &rep.traces[&GroupKey::of(&r)];
        for (q, v) in t.iter().zip([0.1, 0.4, 0.6]) {
            assert_eq!((q.q20, q.median, q.q80), (v, v, v));
        }
    }

    #[test]
    fn short_runs_carry_forward() {
        let recs = vec![record(0, 0, &[0.2]), record(0, 1, &[0.1, 0.5, 0.9]), record(0, 2, &[0.3, 0.4])];
        let rep = Report::from_records(&recs).unwrap();
        let key = GroupKey::of(&recs[0]);
        assert_eq!(rep.median_at(&key, 2), Some(0.4));
        assert_eq!(rep.finals[&key].median, 0.4);
        assert_eq!(rep.traces[&key].len(), 3);
        assert_eq!(rep.traces[&key][2].runs, 3);
    }

    #[test]
    fn constant_final_values() {
        let recs = vec![record(0, 0, &[0.2]), record(1, 0, &[0.5]), record(2, 0, &[0.9])];
        let rep = Report::from_records(&recs).unwrap();
        assert_eq!(rep.finals[&GroupKey::of(&recs[0])].median, 0.5);
    }

    #[test]
    fn tables_are_written() {
        let recs = vec![record(0, 0, &[0.2, 0.3]), record(1, 0, &[0.5])];
        let rep = Report::from_records(&recs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = rep.write_tables(dir.path()).unwrap();
        let trace = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(trace.lines().count(), 3);
        assert!(trace.starts_with("class,d,n,method,layers,shots,iteration,runs,q20,median,q80"));
        let finals = std::fs::read_to_string(&paths[1]).unwrap();
        assert_eq!(finals.lines().count(), 3);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(Report::from_records(&[]).is_err());
        assert!(read_records("/nonexistent/dir/*.jsonl").is_err());
    }
}
