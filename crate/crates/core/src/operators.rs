//! Single-qudit generators and the mixer unitary.
//!
//! `L_x`, `L_z` and `L_z^2` are the spin-(d-1)/2 angular momentum operators in
//! the basis `|0>, ..., |d-1>`, with `L_z |x> = (2x - d + 1)/2 |x>`. The mixer
//! `exp(-i (b1 L_x + b2 L_z^2))` is computed from the eigendecomposition of its
//! real symmetric generator.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{QmooError, Result};

/// A dense `d x d` complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuditMatrix {
    d: usize,
    entries: Vec<Complex64>,
}

impl QuditMatrix {
    pub fn new(d: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != d * d {
            return Err(QmooError::domain(format!(
                "{} entries for a {d}x{d} matrix",
                entries.len()
            )));
        }
        Ok(Self { d, entries })
    }

    pub fn from_real(d: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), d * d);
        Self {
            d,
            entries: entries.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.entries[i * d + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    fn zeros(d: usize) -> Self {
        Self {
            d,
            entries: vec![Complex64::new(0.0, 0.0); d * d],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.d + col]
    }

    pub fn adjoint(&self) -> Self {
        let d = self.d;
        let mut m = Self::zeros(d);
        for r in 0..d {
            for c in 0..d {
                m.entries[c * d + r] = self.get(r, c).conj();
            }
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.d, other.d);
        let d = self.d;
        let mut m = Self::zeros(d);
        for r in 0..d {
            for k in 0..d {
                let a = self.get(r, k);
                for c in 0..d {
                    m.entries[r * d + c] += a * other.get(k, c);
                }
            }
        }
        m
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.d, other.d);
        Self {
            d: self.d,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// `max |U^dag U - I|` elementwise.
    pub fn unitarity_deviation(&self) -> f64 {
        self.adjoint()
            .matmul(self)
            .max_abs_diff(&Self::identity(self.d))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.d).map(|i| self.get(i, i)).sum()
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(QmooError::domain(format!("local dimension {d} < 2")))
    } else {
        Ok(())
    }
}

fn lz_eigenvalue(d: usize, x: usize) -> f64 {
    (2.0 * x as f64 - d as f64 + 1.0) / 2.0
}

/// Real entries of `L_x`, row-major.
fn lx_real(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for x in 0..d - 1 {
        let v = 0.5 * (((x + 1) * (d - 1 - x)) as f64).sqrt();
        m[(x + 1) * d + x] = v;
        m[x * d + x + 1] = v;
    }
    m
}

/// `L_x`: tridiagonal with `<x+1|L_x|x> = sqrt((x+1)(d-1-x)) / 2`.
pub fn angular_momentum_x(d: usize) -> Result<QuditMatrix> {
    check_dim(d)?;
    Ok(QuditMatrix::from_real(d, &lx_real(d)))
}

pub fn angular_momentum_z(d: usize) -> Result<QuditMatrix> {
    check_dim(d)?;
    let mut m = vec![0.0; d * d];
    for x in 0..d {
        m[x * d + x] = lz_eigenvalue(d, x);
    }
    Ok(QuditMatrix::from_real(d, &m))
}

/// The squeezing (one-axis twisting) generator `L_z^2`.
pub fn squeezing(d: usize) -> Result<QuditMatrix> {
    check_dim(d)?;
    let mut m = vec![0.0; d * d];
    for x in 0..d {
        m[x * d + x] = lz_eigenvalue(d, x).powi(2);
    }
    Ok(QuditMatrix::from_real(d, &m))
}

/// `exp(-i (beta1 L_x + beta2 L_z^2))`. At `d = 2` the squeezing term is a
/// global phase and `beta2` is ignored.
pub fn mixer_matrix(d: usize, beta1: f64, beta2: f64) -> Result<QuditMatrix> {
    check_dim(d)?;
    if !beta1.is_finite() || !beta2.is_finite() {
        return Err(QmooError::domain("mixer angles must be finite"));
    }
    let beta2 = if d == 2 { 0.0 } else { beta2 };
    let mut generator: Vec<f64> = lx_real(d).into_iter().map(|v| beta1 * v).collect();
    for x in 0..d {
        generator[x * d + x] += beta2 * lz_eigenvalue(d, x).powi(2);
    }
    Ok(exp_minus_i_symmetric(d, &generator))
}

/// `exp(-i H)` for a real symmetric `H` given row-major.
pub(crate) fn exp_minus_i_symmetric(d: usize, h: &[f64]) -> QuditMatrix {
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, h));
    let v = &eig.eigenvectors;
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&l| Complex64::new(l.cos(), -l.sin()))
        .collect();
    let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
    for r in 0..d {
        for c in 0..d {
            entries[r * d + c] = (0..d).map(|k| phases[k] * (v[(r, k)] * v[(c, k)])).sum();
        }
    }
    QuditMatrix { d, entries }
}
