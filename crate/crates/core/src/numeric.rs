//! Small numerical helpers shared by the estimation modules: compensated
//! summation and a few symmetric-matrix routines on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in it {
        acc.add(v);
    }
    acc.value()
}

/// Compensated accumulator for symmetric d×d matrices built from rank-one
/// updates `c·v·vᵀ`. Only the upper triangle is accumulated; the result is
/// mirrored, so it is exactly symmetric.
#[derive(Debug, Clone)]
pub struct SymAccumulator {
    d: usize,
    cells: Vec<CompensatedSum>,
}

impl SymAccumulator {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            cells: vec![CompensatedSum::new(); d * (d + 1) / 2],
        }
    }

    #[inline]
    pub fn add_outer(&mut self, c: f64, v: &[f64]) {
        debug_assert_eq!(v.len(), self.d);
        let mut k = 0;
        for i in 0..self.d {
            let ci = c * v[i];
            for j in i..self.d {
                self.cells[k].add(ci * v[j]);
                k += 1;
            }
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.d, self.d);
        let mut k = 0;
        for i in 0..self.d {
            for j in i..self.d {
                let v = self.cells[k].value();
                m[(i, j)] = v;
                m[(j, i)] = v;
                k += 1;
            }
        }
        m
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Forces exact symmetry by averaging with the transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Ratio of the largest to the smallest absolute eigenvalue.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for v in eig.eigenvalues.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Inverse of a symmetric definite (positive or negative) matrix via
/// Cholesky on the positive-definite version.
pub fn inverse_definite(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let neg = m.trace() < 0.0;
    let pd = if neg { -m } else { m.clone() };
    match pd.clone().cholesky() {
        Some(ch) => {
            let inv = ch.inverse();
            Ok(symmetrize(&if neg { -inv } else { inv }))
        }
        None => {
            if d == 0 {
                return Ok(DMatrix::zeros(0, 0));
            }
            Err(Error::SingularHessian {
                condition: condition_estimate(m),
            })
        }
    }
}

/// Solves `m x = b` for symmetric definite `m`.
pub fn solve_definite(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let neg = m.trace() < 0.0;
    let pd = if neg { -m } else { m.clone() };
    match pd.cholesky() {
        Some(ch) => {
            let x = ch.solve(b);
            Ok(if neg { -x } else { x })
        }
        None => Err(Error::SingularHessian {
            condition: condition_estimate(m),
        }),
    }
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = m.nrows();
    let mut root = DMatrix::zeros(d, d);
    for k in 0..d {
        let lam = eig.eigenvalues[k].max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        root += lam * v * v.transpose();
    }
    symmetrize(&root)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
