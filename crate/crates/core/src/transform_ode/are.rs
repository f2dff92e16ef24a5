use alloc::format;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matfun::{eigenvalues, lift, schur, solve, symmetrize, CMat, Scalar};
use crate::riccati::{riccati_rhs, AreSolver, RiccatiProblem};
use crate::transform_cm::ClosedForm;

/// Eigenvalues with real part within this band of zero (relative to the
/// Hamiltonian's norm) make the stable subspace ambiguous.
const IMAGINARY_AXIS_BAND: f64 = 1e-12;

/// Stabilizing solution of `psi M + M^T psi - 2 psi Q^T Q psi + v = 0`.
pub fn solve_are<T: Scalar>(prob: &RiccatiProblem<T>, solver: AreSolver) -> Result<DMatrix<T>> {
    match solver {
        AreSolver::ClosedForm => are_closed_form(prob),
        AreSolver::Schur => are_schur(prob),
    }
}

/// `psi' = Q^-1 sqrt(v_bar) Q^-T / 2 + (Q^T Q)^-1 M / 2`, valid under the
/// commutation condition with `v_bar` PSD.
pub fn are_closed_form<T: Scalar>(prob: &RiccatiProblem<T>) -> Result<DMatrix<T>> {
    let cf = ClosedForm::new(prob.clone()).map_err(|e| Error::PreconditionFailed {
        reason: format!("{e}"),
    })?;
    let s = cf.sqrt_v_bar().map_err(|e| Error::PreconditionFailed {
        reason: format!("{e}"),
    })?;
    let q_inv: DMatrix<T> = lift(prob.q_inv());
    let a: DMatrix<T> = lift(prob.qtq_inv());
    let half = T::from_real(0.5);
    let psi = (&q_inv * s * q_inv.transpose() + a * &prob.m) * half;
    Ok(symmetrize(&psi))
}

/// Stable invariant subspace of `[[M, -2 Q^T Q], [-v, -M^T]]` from an
/// ordered complex Schur form; `psi' = U21 U11^-1`.
pub fn are_schur<T: Scalar>(prob: &RiccatiProblem<T>) -> Result<DMatrix<T>> {
    let d = prob.dim();
    let m: CMat = prob.m.map(|x| x.to_c());
    let v: CMat = prob.v.map(|x| x.to_c());
    let qtq: CMat = lift(prob.qtq());
    let mut h = CMat::zeros(2 * d, 2 * d);
    h.view_mut((0, 0), (d, d)).copy_from(&m);
    h.view_mut((0, d), (d, d)).copy_from(&(qtq * Complex64::from(-2.0)));
    h.view_mut((d, 0), (d, d)).copy_from(&(-v));
    h.view_mut((d, d), (d, d)).copy_from(&(-m.transpose()));

    let (mut u, mut t) = schur(&h)?;
    let band = IMAGINARY_AXIS_BAND * h.norm().max(f64::MIN_POSITIVE);
    if (0..2 * d).any(|i| t[(i, i)].re.abs() <= band) {
        return Err(Error::NoStabilizingSolution {
            reason: "Hamiltonian has eigenvalues on the imaginary axis",
        });
    }
    order_stable_first(&mut t, &mut u);
    let stable = (0..2 * d).filter(|&i| t[(i, i)].re < 0.0).count();
    if stable != d {
        return Err(Error::NoStabilizingSolution {
            reason: "stable subspace has the wrong dimension",
        });
    }
    let u11 = u.view((0, 0), (d, d)).into_owned();
    let u21 = u.view((d, 0), (d, d)).into_owned();
    // psi U11 = U21  <=>  U11^T psi^T = U21^T
    let sol = solve(&u11.transpose(), &u21.transpose(), "U11").map_err(|_| {
        Error::NoStabilizingSolution {
            reason: "stable subspace is not the graph of a matrix",
        }
    })?;
    let psi: DMatrix<T> = sol.x.transpose().map(T::from_c);
    Ok(symmetrize(&psi))
}

/// Bubble the eigenvalues with negative real part to the top of the
/// triangular factor with unitary swaps, updating `u` so that `u t u^H`
/// is unchanged.
fn order_stable_first(t: &mut CMat, u: &mut CMat) {
    let n = t.nrows();
    loop {
        let mut swapped = false;
        for k in 0..n - 1 {
            if t[(k, k)].re >= 0.0 && t[(k + 1, k + 1)].re < 0.0 {
                swap_adjacent(t, u, k);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
}

fn swap_adjacent(t: &mut CMat, u: &mut CMat, k: usize) {
    let n = t.nrows();
    let a = t[(k, k)];
    let b = t[(k + 1, k + 1)];
    // Eigenvector of the 2x2 block for `b` is (t_{k,k+1}, b - a).
    let x0 = t[(k, k + 1)];
    let x1 = b - a;
    let r = libm::sqrt(x0.norm_sqr() + x1.norm_sqr());
    if r == 0.0 {
        return;
    }
    let (c0, c1) = (x0 / r, x1 / r);
    // G = [[c0, -conj(c1)], [c1, conj(c0)]]; t <- G^H t G, u <- u G.
    for j in 0..n {
        let (p, q) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = c0.conj() * p + c1.conj() * q;
        t[(k + 1, j)] = -c1 * p + c0 * q;
    }
    for i in 0..n {
        let (p, q) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = p * c0 + q * c1;
        t[(i, k + 1)] = -p * c1.conj() + q * c0.conj();
    }
    for i in 0..n {
        let (p, q) = (u[(i, k)], u[(i, k + 1)]);
        u[(i, k)] = p * c0 + q * c1;
        u[(i, k + 1)] = -p * c1.conj() + q * c0.conj();
    }
    t[(k + 1, k)] = Complex64::new(0.0, 0.0);
}

/// `||psi M + M^T psi - 2 psi Q^T Q psi + v||_F`.
pub fn are_residual<T: Scalar>(prob: &RiccatiProblem<T>, psi: &DMatrix<T>) -> f64 {
    riccati_rhs(psi, prob).norm()
}

/// `M - 2 Q^T Q psi'`.
pub fn closed_loop<T: Scalar>(prob: &RiccatiProblem<T>, psi: &DMatrix<T>) -> DMatrix<T> {
    let qtq: DMatrix<T> = lift(prob.qtq());
    &prob.m - qtq * psi * T::from_real(2.0)
}

/// Largest real part of the closed-loop spectrum.
pub fn closed_loop_abscissa<T: Scalar>(prob: &RiccatiProblem<T>, psi: &DMatrix<T>) -> Result<f64> {
    let cl = closed_loop(prob, psi).map(|x| x.to_c());
    Ok(eigenvalues(&cl)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

