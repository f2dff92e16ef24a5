use alloc::format;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matfun::{inverse, lift, mat_exp, solve, trace_product, Scalar};
use crate::riccati::{Diagnostics, Method, MethodConfig, RiccatiProblem, TransformResult, Warning};

use super::are::{closed_loop, closed_loop_abscissa, solve_are};

/// Richardson error estimates above this raise an accuracy warning.
pub const ACCURACY_TARGET: f64 = 1e-6;

/// Transform as the stabilizing ARE solution plus an explicit correction:
///
/// ```text
/// psi(t) = psi' + e^{L^T t} [(w - psi')^-1 + 2 int_0^t e^{L s} Q^T Q e^{L^T s} ds]^-1 e^{L t}
/// phi(t) = Tr[b int_0^t psi(s) ds]
/// ```
///
/// with `L = M - 2 Q^T Q psi'`. Both integrals use composite Simpson on
/// `quadrature_points` nodes per unit time (rounded up to a multiple of 8);
/// a second pass on every other node gives the Richardson error estimate.
pub fn variation_of_constants_transform<T: Scalar>(
    prob: &RiccatiProblem<T>,
    t: f64,
    config: &MethodConfig,
) -> Result<TransformResult<T>> {
    config.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidConfig("t must be finite and nonnegative"));
    }
    let psi_inf = solve_are(prob, config.are_solver)?;
    let abscissa = closed_loop_abscissa(prob, &psi_inf)?;
    if !(abscissa < 0.0) {
        return Err(Error::PreconditionFailed {
            reason: format!("closed loop is not stable (abscissa {abscissa:e})"),
        });
    }
    let gap = &prob.w - &psi_inf;
    let gap_inv = inverse(&gap, "w - psi'").map_err(|e| match e {
        Error::Singular { what, .. } => Error::Singular { what, t: None },
        other => other,
    })?;
    let mut diag = Diagnostics::default();
    if t == 0.0 {
        diag.step_size = Some(0.0);
        diag.steps = Some(0);
        diag.quadrature_error = Some(0.0);
        return TransformResult::assemble(T::zero(), prob.w.clone(), &prob.s0, Method::VariationOfConstants, diag);
    }

    let n = nodes(t, config.quadrature_points);
    let h = t / n as f64;
    let lc = closed_loop(prob, &psi_inf);
    let step = mat_exp(&(&lc * T::from_real(h)))?;
    let qtq: DMatrix<T> = lift(prob.qtq());
    let b: DMatrix<T> = lift(&prob.drift_matrix());
    let two = T::from_real(2.0);

    let correction = |e: &DMatrix<T>, integral: &DMatrix<T>| -> Result<DMatrix<T>> {
        let inner = &gap_inv + integral * two;
        let x = solve(&inner, e, "variation of constants kernel")?.x;
        Ok(&psi_inf + e.transpose() * x)
    };

    // f_j = e^{L s_j} K e^{L^T s_j}; Simpson panels close at even nodes.
    let d = prob.dim();
    let mut e = DMatrix::<T>::identity(d, d);
    let mut f_prev2 = qtq.clone();
    let mut f_prev1 = qtq.clone();
    let mut fine = DMatrix::<T>::zeros(d, d);
    let mut coarse = DMatrix::<T>::zeros(d, d);
    let mut coarse_mid = qtq.clone();
    let mut coarse_start = qtq.clone();
    let mut phi_fine = Simpson::new(2.0 * h);
    let mut phi_coarse = Simpson::new(4.0 * h);
    phi_fine.push(trace_product(&b, &prob.w));
    phi_coarse.push(trace_product(&b, &prob.w));
    let mut psi_fine = prob.w.clone();
    let mut psi_coarse = prob.w.clone();

    for j in 1..=n {
        e = &e * &step;
        let f = &e * &qtq * e.transpose();
        if j % 2 == 0 {
            fine += (&f_prev2 + &f_prev1 * T::from_real(4.0) + &f) * T::from_real(h / 3.0);
            psi_fine = correction(&e, &fine)?;
            phi_fine.push(trace_product(&b, &psi_fine));
            if j % 4 == 2 {
                coarse_mid = f.clone();
            } else {
                coarse += (&coarse_start + &coarse_mid * T::from_real(4.0) + &f) * T::from_real(2.0 * h / 3.0);
                coarse_start = f.clone();
                psi_coarse = correction(&e, &coarse)?;
                phi_coarse.push(trace_product(&b, &psi_coarse));
            }
            f_prev2 = f;
        } else {
            f_prev1 = f;
        }
    }

    let phi = phi_fine.total();
    let fine_result = TransformResult::assemble(phi, psi_fine, &prob.s0, Method::VariationOfConstants, Diagnostics::default())?;
    let coarse_value = {
        let s0: DMatrix<T> = lift(&prob.s0);
        (-phi_coarse.total() - trace_product(&psi_coarse, &s0)).exp()
    };
    let estimate = (fine_result.value - coarse_value).modulus() / 15.0;
    diag.steps = Some(n);
    diag.step_size = Some(h);
    diag.quadrature_error = Some(estimate);
    if !(estimate <= ACCURACY_TARGET) {
        diag.warn(Warning::Accuracy { estimate });
    }
    Ok(TransformResult {
        diagnostics: diag,
        ..fine_result
    })
}

/// Node count: `points_per_unit * t` rounded up to a multiple of 8, at least 8.
pub fn nodes(t: f64, points_per_unit: usize) -> usize {
    let raw = libm::ceil(points_per_unit as f64 * t) as usize;
    raw.div_ceil(8).max(1) * 8
}

/// Streaming composite Simpson over equally spaced samples (odd count).
struct Simpson<T: Scalar> {
    h: f64,
    count: usize,
    ends: T,
    odd: T,
    even: T,
    last: T,
}

impl<T: Scalar> Simpson<T> {
    fn new(h: f64) -> Self {
        Self {
            h,
            count: 0,
            ends: T::zero(),
            odd: T::zero(),
            even: T::zero(),
            last: T::zero(),
        }
    }

    fn push(&mut self, y: T) {
        if self.count == 0 {
            self.ends = y;
        } else if self.count % 2 == 1 {
            self.odd += y;
        } else {
            self.even += y;
        }
        self.last = y;
        self.count += 1;
    }

    /// Requires an odd number of samples; the last one is an endpoint.
    fn total(&self) -> T {
        debug_assert!(self.count % 2 == 1);
        let interior_even = self.even - self.last;
        (self.ends + self.last + self.odd * T::from_real(4.0) + interior_even * T::from_real(2.0))
            * T::from_real(self.h / 3.0)
    }
}

