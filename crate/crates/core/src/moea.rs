//! NSGA-II over the integer search domain `{0, ..., d-1}^N`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::benchmarks::CostTable;
use crate::error::{QmooError, Result};
use crate::moo::{dominates_unchecked, hypervolume, unit_reference, weakly_dominates_unchecked, ParetoFront};
use crate::rng::{below, stream, unit_f64};

fn pick<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    below(rng, n as u64) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Vec<usize>,
    pub index: usize,
    pub objectives: Vec<f64>,
    pub rank: usize,
    pub crowding: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoeaConfig {
    pub population: usize,
    pub iterations: usize,
    pub crossover_rate: f64,
    /// Per-gene swap probability inside uniform crossover.
    pub gene_swap: f64,
    /// Per-gene random-reset probability; `None` means `1/N`.
    pub mutation_rate: Option<f64>,
    pub tournament: usize,
    pub seed: u64,
}

impl Default for MoeaConfig {
    fn default() -> Self {
        Self {
            population: 20,
            iterations: 200,
            crossover_rate: 0.9,
            gene_swap: 0.5,
            mutation_rate: None,
            tournament: 2,
            seed: 0,
        }
    }
}

impl MoeaConfig {
    fn validate(&self) -> Result<()> {
        if self.population < 2 || self.population % 2 != 0 {
            return Err(QmooError::domain(format!(
                "population {} must be even and at least 2",
                self.population
            )));
        }
        if self.iterations == 0 {
            return Err(QmooError::domain("iteration count must be positive"));
        }
        if self.tournament == 0 {
            return Err(QmooError::domain("tournament size must be positive"));
        }
        let probabilities = [Some(self.crossover_rate), Some(self.gene_swap), self.mutation_rate];
        if probabilities.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(QmooError::domain("rates must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoeaTraceRow {
    pub iteration: usize,
    /// HV of the non-dominated part of the current population.
    pub population_hv: f64,
    /// HV of every non-dominated vector evaluated so far.
    pub archive_hv: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoeaResult {
    /// Non-dominated members of the final population, one per distinct vector.
    pub front: ParetoFront,
    pub archive: ParetoFront,
    pub population: Vec<Individual>,
    pub trace: Vec<MoeaTraceRow>,
    pub evaluations: u64,
}

/// Splits `points` into successive non-dominated fronts of positions.
pub fn fast_non_dominated_sort(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates_unchecked(&points[i], &points[j]) {
                dominated_by_me[i].push(j);
                count[j] += 1;
            } else if dominates_unchecked(&points[j], &points[i]) {
                dominated_by_me[j].push(i);
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each point of one front.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let k = front[0].len();
    let mut distance = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..k {
        order.sort_by(|&a, &b| front[a][m].total_cmp(&front[b][m]).then(a.cmp(&b)));
        let lo = front[order[0]][m];
        let hi = front[order[n - 1]][m];
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = front[order[w + 1]][m] - front[order[w - 1]][m];
            distance[order[w]] += gap / range;
        }
    }
    distance
}

/// Non-dominated vectors seen so far, one representative basis index each.
#[derive(Debug, Default)]
struct Archive {
    indices: Vec<usize>,
    points: Vec<Vec<f64>>,
}

impl Archive {
    fn offer(&mut self, index: usize, point: &[f64]) {
        if self.points.iter().any(|p| weakly_dominates_unchecked(p, point)) {
            return;
        }
        let mut i = 0;
        while i < self.points.len() {
            if dominates_unchecked(point, &self.points[i]) {
                self.points.swap_remove(i);
                self.indices.swap_remove(i);
            } else {
                i += 1;
            }
        }
        self.points.push(point.to_vec());
        self.indices.push(index);
    }

    fn front(&self) -> ParetoFront {
        let mut order: Vec<usize> = (0..self.indices.len()).collect();
        order.sort_by_key(|&i| self.indices[i]);
        ParetoFront {
            points: order.iter().map(|&i| self.points[i].clone()).collect(),
            source_indices: Some(order.iter().map(|&i| self.indices[i]).collect()),
        }
    }
}

struct Problem<'a> {
    table: &'a CostTable,
    d: usize,
    n: usize,
    reference: Vec<f64>,
    evaluations: u64,
}

impl Problem<'_> {
    fn individual(&mut self, genome: Vec<usize>) -> Individual {
        let index = genome.iter().fold(0usize, |acc, &g| acc * self.d + g);
        self.evaluations += 1;
        Individual {
            objectives: self.table.objective_vector(index),
            genome,
            index,
            rank: 0,
            crowding: 0.0,
        }
    }
}

/// Assigns rank and crowding in place and returns the fronts.
fn rank_population(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let points: Vec<Vec<f64>> = pop.iter().map(|p| p.objectives.clone()).collect();
    let fronts = fast_non_dominated_sort(&points);
    for (rank, front) in fronts.iter().enumerate() {
        let members: Vec<Vec<f64>> = front.iter().map(|&i| points[i].clone()).collect();
        for (&i, c) in front.iter().zip(crowding_distance(&members)) {
            pop[i].rank = rank;
            pop[i].crowding = c;
        }
    }
    fronts
}

fn better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

fn tournament<'p, R: RngCore + ?Sized>(pop: &'p [Individual], size: usize, rng: &mut R) -> &'p Individual {
    let mut best = &pop[pick(rng, pop.len())];
    for _ in 1..size {
        let challenger = &pop[pick(rng, pop.len())];
        if better(challenger, best) {
            best = challenger;
        }
    }
    best
}

fn population_front(pop: &[Individual]) -> ParetoFront {
    let mut members: Vec<&Individual> = pop.iter().filter(|p| p.rank == 0).collect();
    members.sort_by_key(|p| p.index);
    members.dedup_by_key(|p| p.index);
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut indices = Vec::new();
    for p in members {
        if !points.contains(&p.objectives) {
            points.push(p.objectives.clone());
            indices.push(p.index);
        }
    }
    ParetoFront {
        points,
        source_indices: Some(indices),
    }
}

/// Runs the generational NSGA-II loop on the normalized cost table.
///
/// `initial` seeds the first population (it must hold exactly
/// `cfg.population` genomes); otherwise genomes are drawn uniformly. The trace
/// has one row per generation, recorded after environmental selection.
pub fn run_nsga2(table: &CostTable, cfg: &MoeaConfig, initial: Option<Vec<Vec<usize>>>) -> Result<MoeaResult> {
    cfg.validate()?;
    let register = table.register();
    let (d, n) = (register.local_dim(), register.qudits());
    let mutation = cfg.mutation_rate.unwrap_or(1.0 / n as f64);
    let mut rng = stream(cfg.seed);
    let mut problem = Problem {
        table,
        d,
        n,
        reference: unit_reference(table.k()),
        evaluations: 0,
    };

    let genomes = match initial {
        Some(g) => {
            if g.len() != cfg.population {
                return Err(QmooError::domain(format!(
                    "initial population has {} genomes, expected {}",
                    g.len(),
                    cfg.population
                )));
            }
            if g.iter().any(|x| x.len() != n || x.iter().any(|&v| v >= d)) {
                return Err(QmooError::domain("initial genome outside the search domain"));
            }
            g
        }
        None => (0..cfg.population)
            .map(|_| (0..n).map(|_| pick(&mut rng, d)).collect())
            .collect(),
    };
    let mut archive = Archive::default();
    let mut pop: Vec<Individual> = genomes.into_iter().map(|g| problem.individual(g)).collect();
    for p in &pop {
        archive.offer(p.index, &p.objectives);
    }
    rank_population(&mut pop);

    let mut trace = Vec::with_capacity(cfg.iterations);
    for iteration in 1..=cfg.iterations {
        let mut offspring = Vec::with_capacity(cfg.population);
        while offspring.len() < cfg.population {
            let mut a = tournament(&pop, cfg.tournament, &mut rng).genome.clone();
            let mut b = tournament(&pop, cfg.tournament, &mut rng).genome.clone();
            if unit_f64(&mut rng) < cfg.crossover_rate {
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    if unit_f64(&mut rng) < cfg.gene_swap {
                        std::mem::swap(x, y);
                    }
                }
            }
            for child in [&mut a, &mut b] {
                for gene in child.iter_mut() {
                    if unit_f64(&mut rng) < mutation {
                        *gene = pick(&mut rng, problem.d);
                    }
                }
            }
            offspring.push(problem.individual(a));
            offspring.push(problem.individual(b));
        }
        for child in &offspring {
            archive.offer(child.index, &child.objectives);
        }

        let mut merged = pop;
        merged.extend(offspring);
        let fronts = rank_population(&mut merged);
        let mut chosen: Vec<usize> = Vec::with_capacity(cfg.population);
        for front in fronts {
            if chosen.len() + front.len() <= cfg.population {
                chosen.extend(front);
            } else {
                let mut rest = front;
                rest.sort_by(|&x, &y| merged[y].crowding.total_cmp(&merged[x].crowding).then(x.cmp(&y)));
                rest.truncate(cfg.population - chosen.len());
                chosen.extend(rest);
            }
            if chosen.len() == cfg.population {
                break;
            }
        }
        chosen.sort_unstable();
        let mut slots: Vec<Option<Individual>> = merged.into_iter().map(Some).collect();
        pop = chosen.iter().map(|&i| slots[i].take().expect("selected once")).collect();
        rank_population(&mut pop);

        let front = population_front(&pop);
        trace.push(MoeaTraceRow {
            iteration,
            population_hv: hypervolume(&front.points, &problem.reference)?,
            archive_hv: hypervolume(&archive.points, &problem.reference)?,
            evaluations: problem.evaluations,
        });
    }
    debug_assert!(pop.iter().all(|p| p.genome.len() == problem.n));

    Ok(MoeaResult {
        front: population_front(&pop),
        archive: archive.front(),
        population: pop,
        trace,
        evaluations: problem.evaluations,
    })
}
