use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matfun::{lift, mat_exp, solve, trace_log_det, BranchTracker, Scalar};
use crate::model::Gindikin;
use crate::riccati::{Diagnostics, Method, RiccatiProblem, TransformResult};

/// The four `d x d` blocks of `exp(t [[M, 2 Q^T Q], [v, -M^T]])`.
#[derive(Debug, Clone)]
pub struct FlowBlocks<T: Scalar> {
    pub p11: DMatrix<T>,
    pub p12: DMatrix<T>,
    pub p21: DMatrix<T>,
    pub p22: DMatrix<T>,
}

pub fn flow_blocks<T: Scalar>(prob: &RiccatiProblem<T>, t: f64) -> Result<FlowBlocks<T>> {
    let d = prob.dim();
    let qtq: DMatrix<T> = lift(prob.qtq());
    let mut h = DMatrix::<T>::zeros(2 * d, 2 * d);
    h.view_mut((0, 0), (d, d)).copy_from(&prob.m);
    h.view_mut((0, d), (d, d)).copy_from(&(qtq * T::from_real(2.0)));
    h.view_mut((d, 0), (d, d)).copy_from(&prob.v);
    h.view_mut((d, d), (d, d)).copy_from(&(-prob.m.transpose()));
    let e = mat_exp(&(h * T::from_real(t)))?;
    Ok(FlowBlocks {
        p11: e.view((0, 0), (d, d)).into_owned(),
        p12: e.view((0, d), (d, d)).into_owned(),
        p21: e.view((d, 0), (d, d)).into_owned(),
        p22: e.view((d, d), (d, d)).into_owned(),
    })
}

/// Transform through the linear Hamiltonian flow:
/// `psi = (w P12 + P22)^-1 (w P11 + P21)` and
/// `phi = (alpha/2) (log det(w P12 + P22) + t Tr M)`.
pub fn linearization_transform<T: Scalar>(
    prob: &RiccatiProblem<T>,
    t: f64,
    tracker: Option<&mut BranchTracker>,
) -> Result<TransformResult<T>> {
    let alpha = match prob.gindikin {
        Gindikin::Scalar(alpha) => alpha,
        Gindikin::Matrix(_) => {
            return Err(Error::PreconditionFailed {
                reason: "linearization needs a scalar drift".into(),
            })
        }
    };
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidConfig("t must be finite and nonnegative"));
    }
    let blocks = flow_blocks(prob, t)?;
    let den = &prob.w * &blocks.p12 + &blocks.p22;
    let num = &prob.w * &blocks.p11 + &blocks.p21;
    let sol = solve(&den, &num, "w P12 + P22").map_err(|e| match e {
        Error::Singular { what, .. } => Error::Singular { what, t: Some(t) },
        other => other,
    })?;
    let mut diag = Diagnostics {
        condition: Some(sol.condition),
        ..Diagnostics::default()
    };
    if let Some(w) = prob.hypothesis_warning() {
        diag.warn(w);
    }
    let ld = trace_log_det(&den, tracker)?;
    let phi = (ld + prob.m.trace().to_c() * t) * (alpha / 2.0);
    let is_real = T::from_c(num_complex::Complex64::new(0.0, 1.0)).to_c().im == 0.0;
    if is_real && ld.im.abs() > 1e-8 {
        return Err(Error::Singular {
            what: "w P12 + P22 (past the explosion time)",
            t: Some(t),
        });
    }
    TransformResult::assemble(T::from_c(phi), sol.x, &prob.s0, Method::Linearization, diag)
}
