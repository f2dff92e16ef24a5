use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matfun::{lift, trace_product, Scalar};
use crate::riccati::{rhs_with, Diagnostics, Method, MethodConfig, RiccatiProblem, TransformResult};

/// Classical fourth-order Runge-Kutta on the joint state `(psi, phi)`.
///
/// Steps of `config.rk4_step`; the last one is shortened to land on `t`.
pub fn rk4_transform<T: Scalar>(
    prob: &RiccatiProblem<T>,
    t: f64,
    config: &MethodConfig,
) -> Result<TransformResult<T>> {
    config.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidConfig("t must be finite and nonnegative"));
    }
    let h = config.rk4_step;
    let full = libm::floor(t / h) as usize;
    let rest = t - full as f64 * h;
    // Treat a remainder at roundoff level as an exact multiple.
    let (steps, last) = if rest > 1e-12 * h.max(t) {
        (full + 1, rest)
    } else {
        (full, h)
    };

    let qtq: DMatrix<T> = lift(prob.qtq());
    let b: DMatrix<T> = lift(&prob.drift_matrix());
    let f = |psi: &DMatrix<T>| {
        let dpsi = rhs_with(psi, &prob.m, &qtq, &prob.v);
        let dphi = trace_product(&b, psi);
        (dpsi, dphi)
    };

    let mut psi = prob.w.clone();
    let mut phi = T::zero();
    for step in 0..steps {
        let dt = if step + 1 == steps { last } else { h };
        let half = T::from_real(dt / 2.0);
        let full = T::from_real(dt);
        let (k1, l1) = f(&psi);
        let (k2, l2) = f(&(&psi + &k1 * half));
        let (k3, l3) = f(&(&psi + &k2 * half));
        let (k4, l4) = f(&(&psi + &k3 * full));
        let sixth = T::from_real(dt / 6.0);
        let two = T::from_real(2.0);
        psi += (k1 + (k2 + k3) * two + k4) * sixth;
        phi += (l1 + (l2 + l3) * two + l4) * sixth;
        let finite = |x: T| x.to_c().re.is_finite() && x.to_c().im.is_finite();
        if !finite(phi) || !psi.iter().all(|&x| finite(x)) {
            return Err(Error::NumericalBreakdown {
                stage: "rk4",
                step: Some(step),
            });
        }
    }
    let diag = Diagnostics {
        steps: Some(steps),
        step_size: Some(h),
        ..Diagnostics::default()
    };
    TransformResult::assemble(phi, psi, &prob.s0, Method::RungeKutta4, diag)
}
