//! Seeded experiment campaigns: per-run execution, persistence and reporting.

mod files;
mod record;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{error, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{gen_instance, CostTable, ProblemClass, ProblemInstance};
use crate::circuit::{Evaluator, ShotPolicy};
use crate::error::{QmooError, Result};
use crate::moea::{run_nsga2, MoeaConfig};
use crate::moo::ParetoFront;
use crate::optim::{cmaes_minimize, powell_minimize, random_init, Method, OptimizerConfig};
use crate::rng::{derive_seed, stream};

pub use files::{InstanceFile, Normalization, OracleFile};
pub use record::{write_atomic, RunHeader, RunMethod, RunRecord, RunSummary, SolutionRecord, TraceRow};
pub use report::{nearest_rank, read_records, FinalSummary, GroupKey, Report, TraceQuantiles};

const LABEL_INIT: u64 = 1;
const LABEL_SHOTS: u64 = 2;
const LABEL_OPTIMIZER: u64 = 3;
const LABEL_MOEA: u64 = 4;
/// Evaluation key of the re-evaluation used when the best point's solution set
/// was not retained.
const FINAL_EVALUATION: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub class: ProblemClass,
    pub d: usize,
    pub n: usize,
    pub instance_seeds: Vec<u64>,
    pub runs: usize,
    pub layers: usize,
    pub shots: Vec<ShotPolicy>,
    pub optimizer: OptimizerConfig,
    pub moea: MoeaConfig,
    pub n_select: usize,
    pub campaign_seed: u64,
}

impl CampaignConfig {
    pub fn new(class: ProblemClass, d: usize, n: usize) -> Self {
        Self {
            class,
            d,
            n,
            instance_seeds: (0..=10).collect(),
            runs: 50,
            layers: 1,
            shots: vec![ShotPolicy::Finite(1024)],
            optimizer: OptimizerConfig::default(),
            moea: MoeaConfig::default(),
            n_select: 20,
            campaign_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seeds = self.instance_seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.instance_seeds.len() {
            return Err(QmooError::domain("instance seeds must be distinct"));
        }
        if self.instance_seeds.is_empty() || self.runs == 0 {
            return Err(QmooError::domain("a campaign needs at least one instance and one run"));
        }
        let mut shots = self.shots.clone();
        shots.sort_unstable();
        shots.dedup();
        if shots.len() != self.shots.len() {
            return Err(QmooError::domain("shot policies must be distinct"));
        }
        if self.layers == 0 || self.n_select == 0 {
            return Err(QmooError::domain("layers and n_select must be positive"));
        }
        Ok(())
    }

    pub fn method(&self) -> RunMethod {
        match self.optimizer.method {
            Method::Powell => RunMethod::Powell,
            Method::Cmaes => RunMethod::Cmaes,
        }
    }
}

/// An instance with its exhaustive table and exact front.
#[derive(Debug, Clone)]
pub struct PreparedInstance {
    pub instance: ProblemInstance,
    pub table: CostTable,
    pub front: ParetoFront,
    pub front_hv: f64,
}

impl PreparedInstance {
    pub fn generate(class: ProblemClass, d: usize, n: usize, seed: u64) -> Result<Self> {
        Self::from_instance(gen_instance(class, d, n, seed)?)
    }

    pub fn from_instance(instance: ProblemInstance) -> Result<Self> {
        let table = CostTable::build(&instance)?;
        let front = crate::moo::brute_force_pareto(&table);
        let front_hv = crate::moo::hypervolume(&front.points, &crate::moo::unit_reference(table.k()))?;
        if !(front_hv > 0.0) {
            return Err(QmooError::DegenerateInstance(format!(
                "class {} d={} N={} seed {} has a front of zero hypervolume",
                instance.class, instance.d, instance.n, instance.seed
            )));
        }
        Ok(Self {
            instance,
            table,
            front,
            front_hv,
        })
    }
}

/// Identifies one run of a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunKey {
    pub instance_seed: u64,
    pub shots: Option<ShotPolicy>,
    pub run_index: usize,
}

fn shots_label(shots: ShotPolicy) -> u64 {
    match shots {
        ShotPolicy::Finite(n) => n,
        ShotPolicy::Exact => 0,
    }
}

type Solutions = Vec<(usize, Vec<f64>)>;

/// Runs one QMOO optimization and records its trajectory.
pub fn run_qmoo(cfg: &CampaignConfig, prepared: &PreparedInstance, shots: ShotPolicy, run_index: usize) -> Result<RunRecord> {
    let seed = prepared.instance.seed;
    let run_labels = [seed, run_index as u64];
    let init_seed = derive_seed(cfg.campaign_seed, &[run_labels[0], run_labels[1], LABEL_INIT]);
    let shot_seed = derive_seed(
        cfg.campaign_seed,
        &[run_labels[0], run_labels[1], LABEL_SHOTS, shots_label(shots)],
    );
    let optimizer = OptimizerConfig {
        seed: derive_seed(cfg.campaign_seed, &[run_labels[0], run_labels[1], LABEL_OPTIMIZER]),
        ..cfg.optimizer.clone()
    };

    let table = &prepared.table;
    let pareto_set = prepared.front.source_indices.clone().unwrap_or_default();
    let evaluator = Evaluator::new(table, cfg.layers, shots, cfg.n_select)?.with_pareto_set(pareto_set);
    let x0 = random_init(
        evaluator.n_params(),
        optimizer.init_low,
        optimizer.init_high,
        &mut stream(init_seed),
    );

    // The solution set of each new best evaluation, so the summary can report
    // what was actually measured at the best point.
    let mut improvements: Vec<(Vec<f64>, f64, Solutions)> = Vec::new();
    let mut failure: Option<QmooError> = None;
    let mut calls: u64 = 0;
    let mut objective = |x: &[f64]| -> f64 {
        let mut rng = stream(derive_seed(shot_seed, &[calls]));
        calls += 1;
        match evaluator.evaluate_packed(x, &mut rng) {
            Ok(res) => {
                let value = -res.hv;
                if improvements.last().is_none_or(|(_, best, _)| value < *best) {
                    improvements.push((x.to_vec(), value, res.solutions));
                }
                value
            }
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let result = match optimizer.method {
        Method::Powell => powell_minimize(&mut objective, &x0, &optimizer)?,
        Method::Cmaes => cmaes_minimize(&mut objective, &x0, &optimizer)?,
    };
    if let Some(e) = failure {
        return Err(e);
    }

    let front_hv = prepared.front_hv;
    let mut rows = Vec::with_capacity(result.trace.records.len());
    for rec in &result.trace.records {
        rows.push(TraceRow {
            iteration: rec.iteration,
            evaluations: rec.evaluations,
            hv: -rec.value,
            normalized_hv: -rec.value / front_hv,
            best_normalized_hv: -rec.best / front_hv,
            pareto_weight: evaluator.pareto_weight_of(&rec.params)?,
        });
    }

    let solutions = match improvements
        .iter()
        .rev()
        .find(|(x, v, _)| *x == result.x_best && *v == result.f_best)
    {
        Some((_, _, s)) => s.clone(),
        None => {
            let mut rng = stream(derive_seed(shot_seed, &[FINAL_EVALUATION]));
            evaluator.evaluate_packed(&result.x_best, &mut rng)?.solutions
        }
    };
    let register = table.register();
    let solutions = solutions
        .into_iter()
        .map(|(index, objectives)| SolutionRecord {
            index,
            digits: register.decode(index).expect("index inside register"),
            objectives,
        })
        .collect();

    Ok(RunRecord {
        header: RunHeader {
            class: cfg.class,
            d: cfg.d,
            n: cfg.n,
            k: table.k(),
            instance_seed: seed,
            run_index,
            campaign_seed: cfg.campaign_seed,
            method: cfg.method(),
            layers: Some(cfg.layers),
            shots: Some(shots),
            n_select: Some(cfg.n_select),
            optimizer: Some(optimizer),
            moea: None,
            init_seed,
            shot_seed: Some(shot_seed),
            front_size: prepared.front.len(),
            front_hv,
            initial_params: Some(x0),
        },
        rows,
        summary: RunSummary {
            iterations: result.iterations,
            evaluations: result.evaluations,
            stop: Some(result.stop),
            best_hv: -result.f_best,
            best_normalized_hv: -result.f_best / front_hv,
            best_params: Some(result.x_best),
            solutions,
        },
    })
}

/// Runs one NSGA-II baseline and records its trajectory.
pub fn run_baseline(cfg: &CampaignConfig, prepared: &PreparedInstance, run_index: usize) -> Result<RunRecord> {
    let seed = prepared.instance.seed;
    let init_seed = derive_seed(cfg.campaign_seed, &[seed, run_index as u64, LABEL_MOEA]);
    let moea = MoeaConfig {
        seed: init_seed,
        ..cfg.moea.clone()
    };
    let result = run_nsga2(&prepared.table, &moea, None)?;
    let front_hv = prepared.front_hv;
    let rows = result
        .trace
        .iter()
        .map(|t| TraceRow {
            iteration: t.iteration,
            evaluations: t.evaluations,
            hv: t.population_hv,
            normalized_hv: t.population_hv / front_hv,
            best_normalized_hv: t.archive_hv / front_hv,
            pareto_weight: None,
        })
        .collect::<Vec<_>>();
    let last = result.trace.last().expect("at least one iteration");
    Ok(RunRecord {
        header: RunHeader {
            class: cfg.class,
            d: cfg.d,
            n: cfg.n,
            k: prepared.table.k(),
            instance_seed: seed,
            run_index,
            campaign_seed: cfg.campaign_seed,
            method: RunMethod::Nsga2,
            layers: None,
            shots: None,
            n_select: None,
            optimizer: None,
            moea: Some(moea),
            init_seed,
            shot_seed: None,
            front_size: prepared.front.len(),
            front_hv,
            initial_params: None,
        },
        rows,
        summary: RunSummary {
            iterations: result.trace.len(),
            evaluations: result.evaluations,
            stop: None,
            best_hv: last.archive_hv,
            best_normalized_hv: last.archive_hv / front_hv,
            best_params: None,
            solutions: files::solution_records(&prepared.table, &result.front),
        },
    })
}

/// File name of a run inside the campaign directory.
pub fn record_file_name(cfg: &CampaignConfig, method: RunMethod, key: &RunKey) -> String {
    let mut name = format!("{}_d{}_n{}_{}", cfg.class, cfg.d, cfg.n, method);
    if method != RunMethod::Nsga2 {
        name.push_str(&format!("_L{}", cfg.layers));
    }
    if let Some(shots) = key.shots {
        name.push_str(&format!("_shots-{shots}"));
    }
    name.push_str(&format!("_inst{:03}_run{:03}.jsonl", key.instance_seed, key.run_index));
    name
}

#[derive(Debug, Default)]
pub struct CampaignOutcome {
    pub written: Vec<PathBuf>,
    pub failures: Vec<(RunKey, String)>,
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
}

/// Which algorithm a campaign drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CampaignKind {
    Qmoo,
    Baseline,
}

/// Runs every (instance, shot policy, run) combination and writes one record
/// per run into `out`, plus a `.timing.json` sidecar holding its wall time.
///
/// Failing runs are logged and reported in the outcome; the rest continue.
/// `threads` of `None` uses the global rayon pool.
pub fn run_campaign(cfg: &CampaignConfig, kind: CampaignKind, out: &Path, threads: Option<usize>) -> Result<CampaignOutcome> {
    cfg.validate()?;
    let job = || execute(cfg, kind, out);
    match threads {
        None => job(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| QmooError::domain(format!("cannot build thread pool: {e}")))?
            .install(job),
    }
}

fn execute(cfg: &CampaignConfig, kind: CampaignKind, out: &Path) -> Result<CampaignOutcome> {
    let config_text = serde_json::to_string_pretty(cfg).expect("config serializes") + "\n";
    write_atomic(&out.join("campaign.json"), config_text.as_bytes())?;

    let mut outcome = CampaignOutcome::default();
    let prepared: Vec<(u64, Result<PreparedInstance>)> = cfg
        .instance_seeds
        .par_iter()
        .map(|&s| (s, PreparedInstance::generate(cfg.class, cfg.d, cfg.n, s)))
        .collect();

    let method = match kind {
        CampaignKind::Qmoo => cfg.method(),
        CampaignKind::Baseline => RunMethod::Nsga2,
    };
    let shot_list: Vec<Option<ShotPolicy>> = match kind {
        CampaignKind::Qmoo => cfg.shots.iter().copied().map(Some).collect(),
        CampaignKind::Baseline => vec![None],
    };
    let mut jobs: Vec<(RunKey, &PreparedInstance)> = Vec::new();
    for (seed, inst) in &prepared {
        match inst {
            Ok(p) => {
                for &shots in &shot_list {
                    for run_index in 0..cfg.runs {
                        let key = RunKey {
                            instance_seed: *seed,
                            shots,
                            run_index,
                        };
                        jobs.push((key, p));
                    }
                }
            }
            Err(e) => {
                error!("instance seed {seed}: {e}");
                for &shots in &shot_list {
                    for run_index in 0..cfg.runs {
                        let key = RunKey {
                            instance_seed: *seed,
                            shots,
                            run_index,
                        };
                        outcome.failures.push((key, e.to_string()));
                    }
                }
            }
        }
    }

    let results: Vec<(RunKey, Result<PathBuf>)> = jobs
        .par_iter()
        .map(|(key, p)| {
            let started = Instant::now();
            let record = match key.shots {
                Some(shots) => run_qmoo(cfg, p, shots, key.run_index),
                None => run_baseline(cfg, p, key.run_index),
            };
            let written = record.and_then(|r| {
                let path = out.join(record_file_name(cfg, method, key));
                r.write(&path)?;
                let timing = Timing {
                    wall_seconds: started.elapsed().as_secs_f64(),
                };
                let timing_path = path.with_extension("timing.json");
                write_atomic(&timing_path, serde_json::to_string(&timing).expect("timing").as_bytes())?;
                Ok(path)
            });
            match &written {
                Ok(path) => info!("wrote {}", path.display()),
                Err(e) => error!("run {:?}: {e}", key),
            }
            (*key, written)
        })
        .collect();

    for (key, r) in results {
        match r {
            Ok(path) => outcome.written.push(path),
            Err(e) => outcome.failures.push((key, e.to_string())),
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(class: ProblemClass, d: usize, n: usize) -> CampaignConfig {
        CampaignConfig {
            instance_seeds: vec![0],
            runs: 2,
            shots: vec![ShotPolicy::Finite(64)],
            optimizer: OptimizerConfig {
                iteration_cap: 3,
                ..OptimizerConfig::default()
            },
            moea: MoeaConfig {
                iterations: 10,
                ..MoeaConfig::default()
            },
            ..CampaignConfig::new(class, d, n)
        }
    }

    #[test]
    fn validation() {
        let mut cfg = small(ProblemClass::I, 2, 3);
        assert!(cfg.validate().is_ok());
        cfg.instance_seeds = vec![1, 1];
        assert!(cfg.validate().is_err());
        let mut cfg = small(ProblemClass::I, 2, 3);
        cfg.shots = vec![ShotPolicy::Exact, ShotPolicy::Exact];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn qmoo_run_is_deterministic_and_bounded() {
        let cfg = small(ProblemClass::II, 3, 3);
        let p = PreparedInstance::generate(cfg.class, cfg.d, cfg.n, 0).unwrap();
        let a = run_qmoo(&cfg, &p, ShotPolicy::Finite(64), 1).unwrap();
        let b = run_qmoo(&cfg, &p, ShotPolicy::Finite(64), 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows[0].iteration, 0);
        for row in &a.rows {
            assert!((0.0..=1.0 + 1e-9).contains(&row.normalized_hv));
            let w = row.pareto_weight.unwrap();
            assert!((0.0..=1.0 + 1e-9).contains(&w));
        }
        for w in a.rows.windows(2) {
            assert!(w[1].iteration > w[0].iteration);
            assert!(w[1].best_normalized_hv >= w[0].best_normalized_hv);
        }
        assert_eq!(a.summary.evaluations, a.rows.last().unwrap().evaluations);
        let c = run_qmoo(&cfg, &p, ShotPolicy::Finite(64), 0).unwrap();
        assert_ne!(a.header.initial_params, c.header.initial_params);
    }

    #[test]
    fn best_solution_set_matches_best_value() {
        let cfg = small(ProblemClass::I, 2, 4);
        let p = PreparedInstance::generate(cfg.class, cfg.d, cfg.n, 0).unwrap();
        let r = run_qmoo(&cfg, &p, ShotPolicy::Exact, 0).unwrap();
        let points: Vec<Vec<f64>> = r.summary.solutions.iter().map(|s| s.objectives.clone()).collect();
        let hv = crate::moo::hypervolume(&points, &[1.0, 1.0]).unwrap();
        assert_eq!(hv, r.summary.best_hv);
    }

    #[test]
    fn shot_policies_share_initial_parameters() {
        let cfg = small(ProblemClass::I, 2, 4);
        let p = PreparedInstance::generate(cfg.class, cfg.d, cfg.n, 0).unwrap();
        let a = run_qmoo(&cfg, &p, ShotPolicy::Finite(64), 3).unwrap();
        let b = run_qmoo(&cfg, &p, ShotPolicy::Exact, 3).unwrap();
        assert_eq!(a.header.initial_params, b.header.initial_params);
        assert_ne!(a.header.shot_seed, b.header.shot_seed);
    }

    #[test]
    fn baseline_run_shape() {
        let cfg = small(ProblemClass::II, 2, 5);
        let p = PreparedInstance::generate(cfg.class, cfg.d, cfg.n, 0).unwrap();
        let r = run_baseline(&cfg, &p, 0).unwrap();
        assert_eq!(r.rows.len(), 10);
        assert_eq!(r.header.moea.as_ref().unwrap().population, 20);
        assert!(r.rows.iter().all(|t| t.pareto_weight.is_none()));
    }
}
