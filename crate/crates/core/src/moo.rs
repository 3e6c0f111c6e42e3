//! Pareto dominance, non-dominated filtering and the exact hypervolume.
//!
//! All objectives are minimized. The hypervolume of a point set is the
//! Lebesgue measure of the region weakly dominated by at least one point and
//! bounded above by the reference point.

use serde::{Deserialize, Serialize};

use crate::benchmarks::CostTable;
use crate::error::{QmooError, Result};

/// The all-ones reference point used throughout.
pub fn unit_reference(k: usize) -> Vec<f64> {
    vec![1.0; k]
}

pub fn weakly_dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    check_same_len(a, b)?;
    Ok(a.iter().zip(b).all(|(x, y)| x <= y))
}

/// `a <= b` componentwise with at least one strict inequality.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    check_same_len(a, b)?;
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn weakly_dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        Err(QmooError::domain(format!(
            "objective vectors of different lengths {} and {}",
            a.len(),
            b.len()
        )))
    } else {
        Ok(())
    }
}

fn check_dims(points: &[Vec<f64>], k: usize) -> Result<()> {
    match points.iter().find(|p| p.len() != k) {
        Some(p) => Err(QmooError::domain(format!(
            "point of dimension {} where {k} was expected",
            p.len()
        ))),
        None => Ok(()),
    }
}

/// A mutually non-dominated point set, optionally tagged with basis indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub points: Vec<Vec<f64>>,
    pub source_indices: Option<Vec<usize>>,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Keeps the points not strictly dominated by any other, in input order.
/// Exact duplicates collapse onto their first occurrence.
pub fn non_dominated_filter(points: &[Vec<f64>]) -> ParetoFront {
    let keep = non_dominated_positions(points);
    ParetoFront {
        points: keep.into_iter().map(|i| points[i].clone()).collect(),
        source_indices: None,
    }
}

fn non_dominated_positions(points: &[Vec<f64>]) -> Vec<usize> {
    let mut keep = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if j != i && dominates_unchecked(q, p) {
                continue 'outer;
            }
        }
        if keep.iter().any(|&k: &usize| points[k] == *p) {
            continue;
        }
        keep.push(i);
    }
    keep
}

/// Exact hypervolume of `points` with respect to `reference`.
///
/// Points are clipped into the reference box first; a point that fails to be
/// strictly better than the reference in every coordinate bounds a box of zero
/// measure and is dropped.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    let k = reference.len();
    if k == 0 {
        return Err(QmooError::domain("reference point has no coordinates"));
    }
    check_dims(points, k)?;
    if reference.iter().any(|r| !r.is_finite()) || points.iter().flatten().any(|v| v.is_nan()) {
        return Err(QmooError::domain("hypervolume needs finite coordinates"));
    }
    let inside: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(v, r)| v < r))
        .cloned()
        .collect();
    let front = nondominated_sorted(inside);
    Ok(wfg(front, reference))
}

/// Removes dominated points and duplicates; returns points sorted by
/// descending last coordinate, which the slicing recursion relies on.
fn nondominated_sorted(mut points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    // Lexicographic ascending order puts every dominator before the points it dominates.
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    points.dedup();
    let mut front: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if !front.iter().any(|q| dominates_unchecked(q, &p)) {
            front.push(p);
        }
    }
    let last = front.first().map_or(0, |p| p.len() - 1);
    front.sort_by(|a, b| b[last].total_cmp(&a[last]));
    front
}

/// Box volume between `p` and `reference`.
fn box_volume(p: &[f64], reference: &[f64]) -> f64 {
    p.iter().zip(reference).map(|(v, r)| r - v).product()
}

/// Two-dimensional sweep over points strictly inside the reference box.
fn hv2(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut volume = 0.0;
    let mut ceiling = reference[1];
    for (x, y) in pts {
        if y < ceiling {
            volume += (reference[0] - x) * (ceiling - y);
            ceiling = y;
        }
    }
    volume
}

/// WFG recursion on a non-dominated set sorted by descending last coordinate.
///
/// The exclusive contribution of point `i` relative to the points after it
/// (which are no worse in the last coordinate) factors into its last-axis
/// extent times a `K-1` dimensional exclusive volume.
fn wfg(points: Vec<Vec<f64>>, reference: &[f64]) -> f64 {
    let k = reference.len();
    match (points.len(), k) {
        (0, _) => 0.0,
        (1, _) => box_volume(&points[0], reference),
        (_, 1) => reference[0] - points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        (_, 2) => hv2(&points, reference),
        _ => {
            let head = &reference[..k - 1];
            let mut total = 0.0;
            for (i, p) in points.iter().enumerate() {
                let height = reference[k - 1] - p[k - 1];
                let proj = &p[..k - 1];
                let limited: Vec<Vec<f64>> = points[i + 1..]
                    .iter()
                    .map(|q| q[..k - 1].iter().zip(proj).map(|(a, b)| a.max(*b)).collect())
                    .collect();
                let shadow = wfg(nondominated_sorted(limited), head);
                total += height * (box_volume(proj, head) - shadow);
            }
            total
        }
    }
}

/// `HV(points) / HV(front)`.
pub fn normalized_hv(points: &[Vec<f64>], front: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    let best = hypervolume(front, reference)?;
    if best <= 0.0 {
        return Err(QmooError::DegenerateInstance(
            "reference front has zero hypervolume".into(),
        ));
    }
    Ok(hypervolume(points, reference)? / best)
}

/// Every basis state whose normalized objective vector is not strictly
/// dominated, in ascending basis-index order. Distinct states with identical
/// vectors are all kept.
pub fn brute_force_pareto(table: &CostTable) -> ParetoFront {
    let dim = table.dim();
    let k = table.k();
    let vectors: Vec<Vec<f64>> = (0..dim).map(|i| table.objective_vector(i)).collect();
    let sums: Vec<f64> = vectors.iter().map(|v| v.iter().sum()).collect();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| sums[a].total_cmp(&sums[b]).then(a.cmp(&b)));

    let mut front: Vec<usize> = Vec::new();
    for i in order {
        let v = &vectors[i];
        if front.iter().any(|&j| dominates_unchecked(&vectors[j], v)) {
            continue;
        }
        // Rounding in the sums can put a dominator after the point it dominates.
        front.retain(|&j| !dominates_unchecked(v, &vectors[j]));
        front.push(i);
    }
    front.sort_unstable();
    debug_assert!(front.iter().all(|&i| vectors[i].len() == k));
    ParetoFront {
        points: front.iter().map(|&i| vectors[i].clone()).collect(),
        source_indices: Some(front),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{gen_instance, ProblemClass};
    use crate::statevector::QuditRegister;

    const R2: [f64; 2] = [1.0, 1.0];

    #[test]
    fn weak_dominance_examples() {
        assert!(weakly_dominates(&[0.2, 0.3], &[0.2, 0.5]).unwrap());
        assert!(!weakly_dominates(&[0.2, 0.6], &[0.3, 0.5]).unwrap());
        assert!(weakly_dominates(&[0.4, 0.4], &[0.4, 0.4]).unwrap());
        assert!(weakly_dominates(&[0.4], &[0.4, 0.4]).is_err());
        assert!(!dominates(&[0.4, 0.4], &[0.4, 0.4]).unwrap());
        assert!(dominates(&[0.3, 0.4], &[0.4, 0.4]).unwrap());
    }

    #[test]
    fn filter_examples() {
        let pts = vec![vec![0.1, 0.9], vec![0.9, 0.1], vec![0.5, 0.5]];
        assert_eq!(non_dominated_filter(&pts).points, pts);
        let pts = vec![vec![0.1, 0.1], vec![0.2, 0.2]];
        assert_eq!(non_dominated_filter(&pts).points, vec![vec![0.1, 0.1]]);
        let pts = vec![vec![0.3, 0.3], vec![0.3, 0.3], vec![0.1, 0.8], vec![0.9, 0.9]];
        let once = non_dominated_filter(&pts);
        assert_eq!(once.points, vec![vec![0.3, 0.3], vec![0.1, 0.8]]);
        assert_eq!(non_dominated_filter(&once.points), once);
    }

    #[test]
    fn hypervolume_examples() {
        assert_eq!(hypervolume(&[vec![0.5, 0.5]], &R2).unwrap(), 0.25);
        let hv = hypervolume(&[vec![0.2, 0.6], vec![0.6, 0.2]], &R2).unwrap();
        assert!((hv - 0.48).abs() < 1e-15);
        assert_eq!(hypervolume(&[], &R2).unwrap(), 0.0);
        assert_eq!(
            hypervolume(&[vec![0.5, 0.5], vec![0.6, 0.6]], &R2).unwrap(),
            0.25
        );
        assert!(hypervolume(&[vec![0.5]], &R2).is_err());
    }

    #[test]
    fn boundary_and_outside_points_contribute_nothing() {
        let hv = hypervolume(&[vec![1.0, 0.0], vec![0.0, 1.5], vec![0.5, 0.5]], &R2).unwrap();
        assert_eq!(hv, 0.25);
        let pts3 = vec![vec![0.5, 0.5, 1.0], vec![0.2, 0.2, 0.2]];
        let hv3 = hypervolume(&pts3, &[1.0, 1.0, 1.0]).unwrap();
        assert!((hv3 - 0.512).abs() < 1e-15);
    }

    #[test]
    fn three_dimensional_inclusion_exclusion() {
        let a = vec![0.2, 0.5, 0.4];
        let b = vec![0.5, 0.2, 0.6];
        let r = [1.0; 3];
        let both = vec![0.5, 0.5, 0.6];
        let expected = box_volume(&a, &r) + box_volume(&b, &r) - box_volume(&both, &r);
        let hv = hypervolume(&[a, b], &r).unwrap();
        assert!((hv - expected).abs() < 1e-15);
    }

    #[test]
    fn normalized_hv_examples() {
        let front = vec![vec![0.2, 0.6], vec![0.6, 0.2]];
        assert!((normalized_hv(&front, &front, &R2).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(normalized_hv(&[], &front, &R2).unwrap(), 0.0);
        let part = normalized_hv(&front[..1], &front, &R2).unwrap();
        assert!(part > 0.0 && part <= 1.0);
        assert!(matches!(
            normalized_hv(&front, &[vec![1.0, 1.0]], &R2),
            Err(QmooError::DegenerateInstance(_))
        ));
    }

    #[test]
    fn oracle_single_objective_degenerate() {
        let reg = QuditRegister::new(2, 3).unwrap();
        let col = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let table = CostTable::from_raw(reg, vec![col.clone(), col]);
        let front = brute_force_pareto(&table);
        assert_eq!(front.source_indices, Some(vec![1, 3]));
    }

    #[test]
    fn oracle_perfect_anticorrelation() {
        let reg = QuditRegister::new(3, 2).unwrap();
        let a: Vec<f64> = (0..9).map(|i| ((i * 7) % 9) as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 8.0 - v).collect();
        let table = CostTable::from_raw(reg, vec![a, b]);
        let front = brute_force_pareto(&table);
        assert_eq!(front.len(), 9);
        assert_eq!(front.source_indices, Some((0..9).collect()));
    }

    #[test]
    fn oracle_matches_all_pairs_check() {
        for class in [ProblemClass::I, ProblemClass::II, ProblemClass::IV] {
            let inst = gen_instance(class, 2, 8, 21).unwrap();
            let table = CostTable::build(&inst).unwrap();
            let vecs: Vec<Vec<f64>> = (0..256).map(|i| table.objective_vector(i)).collect();
            let expected: Vec<usize> = (0..256)
                .filter(|&i| !(0..256).any(|j| j != i && dominates_unchecked(&vecs[j], &vecs[i])))
                .collect();
            let front = brute_force_pareto(&table);
            assert_eq!(front.source_indices, Some(expected));
        }
    }
}
