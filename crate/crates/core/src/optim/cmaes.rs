use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use super::{Counted, OptimResult, OptimizerConfig, StopReason, Trace};
use crate::error::{QmooError, Result};
use crate::rng::stream;

/// `(mu/mu_w, lambda)` CMA-ES with cumulative step-size adaptation and
/// rank-one plus rank-mu covariance updates.
///
/// `lambda` is `cfg.population`, `mu = lambda / 2` with log-rank weights, and
/// the initial step size is `0.3 * (init_high - init_low)`. Offspring are
/// evaluated in index order; ranking ties break by index.
pub fn cmaes_minimize(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimResult> {
    cfg.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(QmooError::domain("cannot optimize over zero parameters"));
    }
    if cfg.population < 4 {
        return Err(QmooError::domain(format!(
            "CMA-ES population {} is below 4",
            cfg.population
        )));
    }
    let lambda = cfg.population;
    let mu = lambda / 2;
    let nf = n as f64;

    let raw: Vec<f64> = (0..mu)
        .map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut rng = stream(cfg.seed);
    let mut fc = Counted::new(f, cfg.max_evaluations);
    let mut mean = DVector::from_column_slice(x0);
    let mut sigma = 0.3 * (cfg.init_high - cfg.init_low);
    let mut pc = DVector::<f64>::zeros(n);
    let mut ps = DVector::<f64>::zeros(n);
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut basis = DMatrix::<f64>::identity(n, n);
    let mut scales = DVector::<f64>::from_element(n, 1.0);
    let mut inv_sqrt_cov = DMatrix::<f64>::identity(n, n);

    let f0 = fc.call(x0);
    let mut x_best = x0.to_vec();
    let mut f_best = f0;
    let mut trace = Trace::default();
    trace.push(0, f0, x0, fc.calls);
    let mut stop = StopReason::IterationCap;
    let mut iterations = 0;

    for generation in 1..=cfg.iteration_cap {
        let mut offspring: Vec<DVector<f64>> = Vec::with_capacity(lambda);
        let mut fitness: Vec<f64> = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            if fc.exhausted() {
                break;
            }
            let z = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let y = &basis * scales.component_mul(&z);
            let x = &mean + sigma * y;
            fitness.push(fc.call(x.as_slice()));
            offspring.push(x);
        }
        if offspring.is_empty() {
            stop = StopReason::EvaluationBudget;
            break;
        }
        let mut order: Vec<usize> = (0..offspring.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
        let gen_best = order[0];
        if fitness[gen_best] < f_best {
            f_best = fitness[gen_best];
            x_best = offspring[gen_best].as_slice().to_vec();
        }
        iterations = generation;

        if offspring.len() == lambda {
            let old_mean = mean.clone();
            mean = DVector::zeros(n);
            for (w, &i) in weights.iter().zip(&order) {
                mean += *w * &offspring[i];
            }
            let shift = (&mean - &old_mean) / sigma;
            ps = (1.0 - cs) * &ps + (cs * (2.0 - cs) * mueff).sqrt() * (&inv_sqrt_cov * &shift);
            let ps_norm = ps.norm();
            let hsig = ps_norm / (1.0 - (1.0 - cs).powi(2 * generation as i32)).sqrt() / chi_n
                < 1.4 + 2.0 / (nf + 1.0);
            let hsig_f = if hsig { 1.0 } else { 0.0 };
            pc = (1.0 - cc) * &pc + hsig_f * (cc * (2.0 - cc) * mueff).sqrt() * &shift;

            let mut rank_mu = DMatrix::<f64>::zeros(n, n);
            for (w, &i) in weights.iter().zip(&order) {
                let step = (&offspring[i] - &old_mean) / sigma;
                rank_mu += *w * &step * step.transpose();
            }
            cov = (1.0 - c1 - cmu) * &cov
                + c1 * (&pc * pc.transpose() + (1.0 - hsig_f) * cc * (2.0 - cc) * &cov)
                + cmu * rank_mu;
            sigma *= ((cs / damps) * (ps_norm / chi_n - 1.0)).exp();

            cov = 0.5 * (&cov + cov.transpose());
            let eig = SymmetricEigen::new(cov.clone());
            let degenerate = !sigma.is_finite()
                || eig.eigenvalues.iter().any(|&l| !(l > 0.0) || !l.is_finite());
            if degenerate {
                warn!("CMA-ES covariance became degenerate at generation {generation}; resetting to identity");
                cov = DMatrix::identity(n, n);
                basis = DMatrix::identity(n, n);
                scales = DVector::from_element(n, 1.0);
                inv_sqrt_cov = DMatrix::identity(n, n);
                pc.fill(0.0);
                ps.fill(0.0);
                if !sigma.is_finite() || sigma <= 0.0 {
                    sigma = 0.3 * (cfg.init_high - cfg.init_low);
                }
            } else {
                scales = eig.eigenvalues.map(f64::sqrt);
                basis = eig.eigenvectors;
                let inv = DMatrix::from_diagonal(&scales.map(|s| 1.0 / s));
                inv_sqrt_cov = &basis * inv * basis.transpose();
            }
        }

        trace.push(
            generation,
            fitness[gen_best],
            offspring[gen_best].as_slice(),
            fc.calls,
        );
        if fc.exhausted() {
            stop = StopReason::EvaluationBudget;
            break;
        }
    }

    Ok(OptimResult {
        x_best,
        f_best,
        trace,
        evaluations: fc.calls,
        iterations,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn sphere_converges() {
        let cfg = OptimizerConfig {
            seed: 3,
            ..OptimizerConfig::default()
        };
        let r = cmaes_minimize(&mut |x| sphere(x), &[1.0, -2.0, 0.5, 3.0], &cfg).unwrap();
        assert!(r.f_best < 1e-8, "f_best = {}", r.f_best);
        assert_eq!(r.iterations, 200);
        assert_eq!(r.evaluations, 1 + 200 * 10);
    }

    #[test]
    fn deterministic_trace() {
        let cfg = OptimizerConfig {
            seed: 11,
            iteration_cap: 30,
            ..OptimizerConfig::default()
        };
        let a = cmaes_minimize(&mut |x| sphere(x), &[0.5; 5], &cfg).unwrap();
        let b = cmaes_minimize(&mut |x| sphere(x), &[0.5; 5], &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn noisy_objective_keeps_best_record() {
        let mut state = 1u64;
        let mut f = |x: &[f64]| {
            state = crate::rng::splitmix64(state);
            sphere(x) + 0.01 * (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let cfg = OptimizerConfig {
            iteration_cap: 60,
            ..OptimizerConfig::default()
        };
        let r = cmaes_minimize(&mut f, &[1.0, 1.0, 1.0], &cfg).unwrap();
        for w in r.trace.records.windows(2) {
            assert!(w[1].best <= w[0].best);
        }
        let min_value = r
            .trace
            .records
            .iter()
            .map(|t| t.value)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.trace.records.last().unwrap().best, min_value);
        assert_eq!(r.f_best, min_value);
    }

    #[test]
    fn budget_and_population_checks() {
        let cfg = OptimizerConfig {
            max_evaluations: Some(25),
            ..OptimizerConfig::default()
        };
        let mut calls = 0;
        let r = cmaes_minimize(
            &mut |x| {
                calls += 1;
                sphere(x)
            },
            &[1.0, 1.0],
            &cfg,
        )
        .unwrap();
        assert_eq!(calls, 25);
        assert_eq!(r.evaluations, 25);
        assert_eq!(r.stop, StopReason::EvaluationBudget);

        let small = OptimizerConfig {
            population: 3,
            ..OptimizerConfig::default()
        };
        assert!(cmaes_minimize(&mut |x| sphere(x), &[1.0], &small).is_err());
    }

    #[test]
    fn recovers_from_degenerate_objective() {
        // A flat objective drives the step size up; the run must still finish.
        let cfg = OptimizerConfig {
            iteration_cap: 100,
            ..OptimizerConfig::default()
        };
        let r = cmaes_minimize(&mut |_| 1.0, &[0.0; 3], &cfg).unwrap();
        assert_eq!(r.iterations, 100);
        assert_eq!(r.f_best, 1.0);
    }
}
