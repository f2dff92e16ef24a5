//! Dense matrix functions over real and complex scalars.
//!
//! `nalgebra::DMatrix` is the numeric carrier throughout. Functions that
//! only make sense for diagonalizable input (square root, logarithm,
//! spectral functions of `v_bar`) go through an eigendecomposition guarded
//! by [`CONDITION_LIMIT`]. The exponential uses scaling and squaring and
//! does not need diagonalizability.

mod eigen;
mod expm;

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use eigen::{eig, eig_real, eigenvalues, EigenDecomposition, CONDITION_LIMIT};
pub use expm::mat_exp;

#[allow(unused_imports)]
pub(crate) use eigen::schur;

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Relative band below zero inside which eigenvalues count as roundoff.
pub const PSD_BAND: f64 = 1e-10;

/// Scalar field of the kernel: `f64` or `Complex64`.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Into<Complex64> {
    fn to_c(self) -> Complex64 {
        self.into()
    }

    /// Narrow a complex value back into the field. Real fields keep the
    /// real part.
    fn from_c(c: Complex64) -> Self;

    /// `cosh(sqrt(x) t)`; even in `sqrt(x)`, so no branch choice is involved.
    fn cosh_sqrt(self, t: f64) -> Self;

    /// `sinh(sqrt(x) t) / sqrt(x)`, continuous through `x = 0` where it is `t`.
    fn sinhc_sqrt(self, t: f64) -> Self;

    /// Spectral decomposition of a matrix known to be (complex) symmetric.
    fn spectral(a: &DMatrix<Self>) -> Result<Spectral<Self>>;
}

impl Scalar for f64 {
    fn from_c(c: Complex64) -> Self {
        c.re
    }

    fn cosh_sqrt(self, t: f64) -> Self {
        if self >= 0.0 {
            (self.sqrt() * t).cosh()
        } else {
            ((-self).sqrt() * t).cos()
        }
    }

    fn sinhc_sqrt(self, t: f64) -> Self {
        let r = self.abs().sqrt();
        let x = r * t;
        let x2 = if self >= 0.0 { x * x } else { -x * x };
        if x < 1e-4 {
            return t * (1.0 + x2 / 6.0 + x2 * x2 / 120.0);
        }
        if self >= 0.0 {
            x.sinh() / r
        } else {
            x.sin() / r
        }
    }

    fn spectral(a: &DMatrix<f64>) -> Result<Spectral<f64>> {
        ensure_square(a, "symmetric matrix")?;
        ensure_finite(a, "symmetric matrix")?;
        let eig = SymmetricEigen::new(symmetrize(a));
        let inverse = eig.eigenvectors.transpose();
        Ok(Spectral {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
            inverse,
            condition: 1.0,
        })
    }
}

impl Scalar for Complex64 {
    fn from_c(c: Complex64) -> Self {
        c
    }

    fn cosh_sqrt(self, t: f64) -> Self {
        (self.sqrt() * t).cosh()
    }

    fn sinhc_sqrt(self, t: f64) -> Self {
        let r = self.sqrt();
        let x = r * t;
        if x.norm() < 1e-4 {
            let x2 = x * x;
            return (Complex64::new(1.0, 0.0) + x2 / 6.0 + x2 * x2 / 120.0) * t;
        }
        x.sinh() / r
    }

    fn spectral(a: &CMat) -> Result<Spectral<Complex64>> {
        let dec = eig(a)?;
        if dec.condition_estimate > CONDITION_LIMIT {
            return Err(Error::IllConditioned {
                condition: dec.condition_estimate,
            });
        }
        Ok(Spectral {
            values: dec.values,
            vectors: dec.vectors,
            inverse: dec.inverse,
            condition: dec.condition_estimate,
        })
    }
}

/// Diagonalization `V diag(values) V^-1` reused across many evaluations of
/// spectral functions of the same matrix.
#[derive(Debug, Clone)]
pub struct Spectral<T: Scalar> {
    pub values: Vec<T>,
    pub vectors: DMatrix<T>,
    pub inverse: DMatrix<T>,
    pub condition: f64,
}

impl<T: Scalar> Spectral<T> {
    pub fn apply(&self, f: impl Fn(T) -> T) -> DMatrix<T> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        scaled * &self.inverse
    }

    /// Smallest real part over the spectrum.
    pub fn min_real(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.to_c().re)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest modulus over the spectrum.
    pub fn spectral_radius(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.to_c().norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn ensure_square<T: Scalar>(a: &DMatrix<T>, what: &'static str) -> Result<usize> {
    if a.nrows() == 0 || a.nrows() != a.ncols() {
        return Err(Error::Shape {
            what,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

pub(crate) fn ensure_finite<T: Scalar>(a: &DMatrix<T>, what: &'static str) -> Result<()> {
    if a.iter().all(|x| x.to_c().re.is_finite() && x.to_c().im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

pub(crate) fn ensure_dim<T: Scalar>(a: &DMatrix<T>, what: &'static str, n: usize) -> Result<()> {
    let got = ensure_square(a, what)?;
    if got != n {
        return Err(Error::DimensionMismatch {
            what,
            expected: n,
            got,
        });
    }
    Ok(())
}

/// `max |A_ij - A_ji|`.
pub fn symmetry_residual<T: Scalar>(a: &DMatrix<T>) -> f64 {
    let n = a.nrows();
    let mut r = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            r = f64::max(r, (a[(i, j)] - a[(j, i)]).modulus());
        }
    }
    r
}

/// Symmetric (transpose, not adjoint) within `1e-12 (1 + max|A_ij|)`.
pub fn is_symmetric<T: Scalar>(a: &DMatrix<T>) -> bool {
    let scale = a.iter().map(|x| x.modulus()).fold(0.0, f64::max);
    symmetry_residual(a) <= 1e-12 * (1.0 + scale)
}

pub(crate) fn ensure_symmetric<T: Scalar>(a: &DMatrix<T>, what: &'static str) -> Result<()> {
    if is_symmetric(a) {
        Ok(())
    } else {
        Err(Error::NotSymmetric {
            what,
            residual: symmetry_residual(a),
        })
    }
}

/// `(A + A^T) / 2`.
pub fn symmetrize<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    (a + a.transpose()) * T::from_real(0.5)
}

pub fn norm1<T: Scalar>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn lift<T: Scalar>(a: &RMat) -> DMatrix<T> {
    a.map(T::from_real)
}

/// `Tr[A B]` without forming the product.
pub fn trace_product<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let mut acc = T::zero();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Solution of `A X = B` with the 1-norm condition number of `A`.
#[derive(Debug, Clone)]
pub struct Solved<T: Scalar> {
    pub x: DMatrix<T>,
    pub condition: f64,
}

/// Inverse is singular past this 1-norm condition number.
const SINGULAR_CONDITION: f64 = 1e14;

pub fn solve<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, what: &'static str) -> Result<Solved<T>> {
    ensure_square(a, what)?;
    let lu = a.clone().lu();
    let inv = lu.try_inverse().ok_or(Error::Singular { what, t: None })?;
    let condition = norm1(a) * norm1(&inv);
    if !(condition < SINGULAR_CONDITION) {
        return Err(Error::Singular { what, t: None });
    }
    let x = lu.solve(b).ok_or(Error::Singular { what, t: None })?;
    Ok(Solved { x, condition })
}

pub fn inverse<T: Scalar>(a: &DMatrix<T>, what: &'static str) -> Result<DMatrix<T>> {
    let n = ensure_square(a, what)?;
    Ok(solve(a, &DMatrix::identity(n, n), what)?.x)
}

/// Square root of a symmetric positive semidefinite matrix.
///
/// Eigenvalues in `[-1e-10 ||A||, 0)` are clipped to zero; anything further
/// below zero is rejected.
pub fn mat_sqrt_psd(a: &RMat) -> Result<RMat> {
    ensure_square(a, "matrix")?;
    ensure_finite(a, "matrix")?;
    ensure_symmetric(a, "matrix")?;
    let sp = f64::spectral(a)?;
    let scale = sp.spectral_radius();
    let min = sp.min_real();
    if min < -PSD_BAND * scale {
        return Err(Error::NotPositiveSemidefinite {
            what: "matrix",
            min_eigenvalue: min,
        });
    }
    Ok(symmetrize(&sp.apply(|l| l.max(0.0).sqrt())))
}

/// `(cosh A, sinh A)` from `e^A` and `e^-A`.
pub fn mat_cosh_sinh<T: Scalar>(a: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let ep = mat_exp(a)?;
    let em = mat_exp(&(-a))?;
    let half = T::from_real(0.5);
    Ok(((&ep + &em) * half, (ep - em) * half))
}

/// `tanh A = cosh(A)^-1 sinh(A)`, evaluated as `(I + e^-2A)^-1 (I - e^-2A)`
/// so that large arguments with spectrum in the right half plane do not
/// overflow.
pub fn mat_tanh<T: Scalar>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = ensure_square(a, "tanh argument")?;
    let e = mat_exp(&(a * T::from_real(-2.0)))?;
    let id = DMatrix::<T>::identity(n, n);
    Ok(solve(&(&id + &e), &(&id - &e), "tanh denominator")?.x)
}

/// Principal matrix logarithm, or the branch selected by `tracker` when one
/// is supplied.
pub fn mat_log<T: Scalar>(a: &DMatrix<T>, tracker: Option<&mut BranchTracker>) -> Result<CMat> {
    let ac: CMat = a.map(|x| x.to_c());
    let dec = eig(&ac)?;
    if dec.condition_estimate > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            condition: dec.condition_estimate,
        });
    }
    ensure_nonsingular(&dec.values, "logarithm argument")?;
    let logs = match tracker {
        Some(tr) => tr.unwrap_logs(&dec.values),
        None => dec.values.iter().map(|l| l.ln()).collect(),
    };
    Ok(dec.apply_values(&logs))
}

/// `Tr log A = log det A` as the sum of logarithms of the eigenvalues.
///
/// With a tracker, each eigenvalue's argument is continued from the previous
/// call instead of being reduced to `(-pi, pi]`.
pub fn trace_log_det<T: Scalar>(
    a: &DMatrix<T>,
    tracker: Option<&mut BranchTracker>,
) -> Result<Complex64> {
    let ac: CMat = a.map(|x| x.to_c());
    let values = eigenvalues(&ac)?;
    ensure_nonsingular(&values, "determinant argument")?;
    let logs = match tracker {
        Some(tr) => tr.unwrap_logs(&values),
        None => values.iter().map(|l| l.ln()).collect(),
    };
    Ok(logs.iter().sum())
}

fn ensure_nonsingular(values: &[Complex64], what: &'static str) -> Result<()> {
    let max = values.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let min = values.iter().map(|l| l.norm()).fold(f64::INFINITY, f64::min);
    if !(min > 1e-15 * max) || !max.is_finite() {
        return Err(Error::Singular { what, t: None });
    }
    Ok(())
}

/// Phase accumulator keeping the logarithm of each eigenvalue path
/// continuous along an ordered sequence of evaluations (a time or frequency
/// grid).
///
/// Each argument is continued along its last step (linear extrapolation), so
/// a path that turns faster than the grid resolves shows up as a step above
/// `pi`.
#[derive(Debug, Clone, Default)]
pub struct BranchTracker {
    /// Eigenvalue, unwrapped argument, and last argument step.
    prev: Vec<(Complex64, f64, Option<f64>)>,
    max_jump: f64,
    last_jump: f64,
}

impl BranchTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Logarithms of `values` whose imaginary parts are the continuation of
    /// the previous call's. Eigenvalues are matched to their nearest
    /// predecessor.
    pub fn unwrap_logs(&mut self, values: &[Complex64]) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(values.len());
        let mut next = Vec::with_capacity(values.len());
        let matchable = self.prev.len() == values.len();
        let mut used = alloc::vec![false; self.prev.len()];
        self.last_jump = 0.0;
        for &l in values {
            let principal = l.ln();
            let mut arg = principal.im;
            let mut step = None;
            if matchable {
                let best = (0..self.prev.len())
                    .filter(|&j| !used[j])
                    .min_by(|&i, &j| {
                        let di = (self.prev[i].0 - l).norm();
                        let dj = (self.prev[j].0 - l).norm();
                        di.partial_cmp(&dj).unwrap_or(core::cmp::Ordering::Equal)
                    });
                if let Some(j) = best {
                    used[j] = true;
                    let (_, prev_arg, prev_step) = self.prev[j];
                    let predicted = prev_arg + prev_step.unwrap_or(0.0);
                    let k = ((predicted - arg) / (2.0 * PI)).round();
                    arg += 2.0 * PI * k;
                    let jump = arg - prev_arg;
                    step = Some(jump);
                    self.last_jump = self.last_jump.max(jump.abs());
                }
            }
            next.push((l, arg, step));
            out.push(Complex64::new(principal.re, arg));
        }
        self.max_jump = self.max_jump.max(self.last_jump);
        self.prev = next;
        out
    }

    /// Largest change of a tracked argument between consecutive calls.
    pub fn max_jump(&self) -> f64 {
        self.max_jump
    }

    /// Largest argument change in the most recent call.
    pub fn last_jump(&self) -> f64 {
        self.last_jump
    }

    /// Forget the eigenvalue paths but keep the recorded jumps; the next
    /// call starts again from principal arguments.
    pub fn restart(&mut self) {
        self.prev.clear();
        self.last_jump = 0.0;
    }

    pub fn reset(&mut self) {
        self.prev.clear();
        self.max_jump = 0.0;
        self.last_jump = 0.0;
    }
}
