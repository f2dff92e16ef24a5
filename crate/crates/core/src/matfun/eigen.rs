//! Complex eigendecomposition built on the complex Schur form.

use alloc::vec::Vec;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use super::{ensure_finite, ensure_square, CMat};
use crate::error::{Error, Result};

/// Guard on the eigenvector condition number used by the matrix functions.
pub const CONDITION_LIMIT: f64 = 1e8;

const RESIDUAL_TOL: f64 = 1e-10;

/// `A = V diag(values) V^-1`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<Complex64>,
    pub vectors: CMat,
    pub inverse: CMat,
    /// 2-norm condition number of `vectors`.
    pub condition_estimate: f64,
}

impl EigenDecomposition {
    /// `V diag(f(values)) V^-1`.
    pub fn apply(&self, f: impl Fn(Complex64) -> Complex64) -> CMat {
        let fv: Vec<Complex64> = self.values.iter().map(|&l| f(l)).collect();
        self.apply_values(&fv)
    }

    pub(crate) fn apply_values(&self, fv: &[Complex64]) -> CMat {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= fv[j];
        }
        scaled * &self.inverse
    }

    /// `||V diag(values) V^-1 - A||_F / ||A||_F` (absolute when `A = 0`).
    pub fn reconstruction_residual(&self, a: &CMat) -> f64 {
        let back = self.apply_values(&self.values);
        let scale = a.norm();
        let r = (back - a).norm();
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }
}

/// Eigendecomposition of a complex square matrix.
///
/// Fails with [`Error::IllConditioned`] when the decomposition does not
/// reproduce the input (defective or nearly defective input).
pub fn eig(a: &CMat) -> Result<EigenDecomposition> {
    let n = ensure_square(a, "matrix")?;
    ensure_finite(a, "matrix")?;
    if n == 1 {
        let one = CMat::identity(1, 1);
        return Ok(EigenDecomposition {
            values: alloc::vec![a[(0, 0)]],
            vectors: one.clone(),
            inverse: one,
            condition_estimate: 1.0,
        });
    }

    let (u, t) = schur(a)?;
    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let y = triangular_eigenvectors(&t);
    let vectors = u * y;
    let inverse = vectors
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
    let sv = vectors.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition_estimate = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let dec = EigenDecomposition {
        values,
        vectors,
        inverse,
        condition_estimate,
    };
    if !(dec.reconstruction_residual(a) <= RESIDUAL_TOL) {
        return Err(Error::IllConditioned {
            condition: condition_estimate,
        });
    }
    Ok(dec)
}

/// Eigendecomposition of a real matrix, carried out over the complex field.
pub fn eig_real(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    eig(&a.map(|x| Complex64::new(x, 0.0)))
}

/// Complex Schur form `A = U T U^H`.
pub(crate) fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    let s = Schur::try_new(a.clone(), f64::EPSILON, 10_000).ok_or(Error::NumericalBreakdown {
        stage: "Schur iteration",
        step: None,
    })?;
    let (u, mut t) = s.unpack();
    let n = t.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok((u, t))
}

// Columns are eigenvectors of the upper triangular `t`, unit 2-norm.
fn triangular_eigenvectors(t: &CMat) -> CMat {
    let n = t.nrows();
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = Complex64::new(1.0, 0.0);
        let lk = t[(k, k)];
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                s += t[(i, j)] * y[(j, k)];
            }
            let mut denom = t[(i, i)] - lk;
            if denom.norm() < small {
                denom = Complex64::new(small, 0.0);
            }
            y[(i, k)] = -s / denom;
        }
        let mut col = y.column_mut(k);
        let nrm = col.norm();
        col /= Complex64::new(nrm, 0.0);
    }
    y
}

/// Eigenvalues of a complex matrix. Closed form for `n <= 2`.
pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    let n = ensure_square(a, "matrix")?;
    ensure_finite(a, "matrix")?;
    match n {
        1 => Ok(alloc::vec![a[(0, 0)]]),
        2 => {
            let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
            let half_tr = (p + s) * 0.5;
            let det = p * s - q * r;
            let half_diff = (p - s) * 0.5;
            let disc = (half_diff * half_diff + q * r).sqrt();
            let l1 = if (half_tr + disc).norm() >= (half_tr - disc).norm() {
                half_tr + disc
            } else {
                half_tr - disc
            };
            let l2 = if l1.norm() > 0.0 { det / l1 } else { half_tr - disc };
            Ok(alloc::vec![l1, l2])
        }
        _ => {
            let (_, t) = schur(a)?;
            Ok((0..n).map(|i| t[(i, i)]).collect())
        }
    }
}
