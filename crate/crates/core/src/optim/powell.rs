use std::f64::consts::PI;

use super::line_search::brent_bounded_from;
use super::{Counted, OptimResult, OptimizerConfig, StopReason, Trace};
use crate::error::{QmooError, Result};

/// Upper bound on objective calls in a single line search.
const LINE_SEARCH_EVALS: u64 = 500;

/// Powell's conjugate-direction method.
///
/// The direction set starts as the coordinate axes. Each sweep line-minimizes
/// along every direction over a step range of width `2 pi` (directions are
/// unit vectors); when the extrapolation test passes, the direction of largest
/// decrease is replaced by the normalized net displacement of the sweep.
pub fn powell_minimize(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimResult> {
    cfg.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(QmooError::domain("cannot optimize over zero parameters"));
    }
    let mut fc = Counted::new(f, cfg.max_evaluations);
    let mut x = x0.to_vec();
    let mut fx = fc.call(&x);
    let mut trace = Trace::default();
    trace.push(0, fx, &x, fc.calls);

    let mut directions: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut stop = StopReason::IterationCap;
    let mut iterations = 0;

    for iteration in 1..=cfg.iteration_cap {
        let f_start = fx;
        let x_start = x.clone();
        let mut largest_drop = 0.0;
        let mut largest_index = 0;
        for (i, dir) in directions.iter().enumerate() {
            let before = fx;
            line_minimize(&mut fc, &mut x, &mut fx, dir, cfg.line_tol);
            if before - fx > largest_drop {
                largest_drop = before - fx;
                largest_index = i;
            }
        }

        let converged = 2.0 * (f_start - fx) <= cfg.ftol * (f_start.abs() + fx.abs()) + 1e-20;
        if !converged && !fc.exhausted() {
            let displacement: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
            let norm = displacement.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                let extrapolated: Vec<f64> = x.iter().zip(&displacement).map(|(a, d)| a + d).collect();
                let f_ext = fc.call(&extrapolated);
                if f_ext < f_start {
                    let t = 2.0 * (f_start - 2.0 * fx + f_ext) * (f_start - fx - largest_drop).powi(2)
                        - largest_drop * (f_start - f_ext).powi(2);
                    if t < 0.0 {
                        let unit: Vec<f64> = displacement.iter().map(|v| v / norm).collect();
                        line_minimize(&mut fc, &mut x, &mut fx, &unit, cfg.line_tol);
                        directions[largest_index] = directions[n - 1].clone();
                        directions[n - 1] = unit;
                    }
                }
            }
        }

        iterations = iteration;
        trace.push(iteration, fx, &x, fc.calls);
        if fc.exhausted() {
            stop = StopReason::EvaluationBudget;
            break;
        }
        if converged {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(OptimResult {
        x_best: x,
        f_best: fx,
        trace,
        evaluations: fc.calls,
        iterations,
        stop,
    })
}

/// Moves `x` along `dir` to the best step found in `[-pi, pi]`, starting the
/// search from the current point.
fn line_minimize(fc: &mut Counted<'_>, x: &mut [f64], fx: &mut f64, dir: &[f64], tol: f64) {
    if fc.exhausted() {
        return;
    }
    let budget = fc.remaining().min(LINE_SEARCH_EVALS);
    let base = x.to_vec();
    let mut probe = base.clone();
    let found = brent_bounded_from(
        &mut |alpha| {
            for ((p, b), d) in probe.iter_mut().zip(&base).zip(dir) {
                *p = b + alpha * d;
            }
            fc.call(&probe)
        },
        -PI,
        PI,
        0.0,
        *fx,
        tol,
        budget,
    );
    if found.value < *fx {
        for ((xi, b), d) in x.iter_mut().zip(&base).zip(dir) {
            *xi = b + found.x * d;
        }
        *fx = found.value;
    }
}
