//! Riccati system shared by every transform method.
//!
//! `psi' = psi M + M^T psi - 2 psi Q^T Q psi + v`, `psi(0) = w`, and
//! `phi' = Tr[b psi]`, `phi(0) = 0`, where `b = alpha Q^T Q` in the scalar
//! case. The transform is `exp(-phi(t) - Tr[psi(t) S0])`.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matfun::{ensure_dim, ensure_finite, ensure_symmetric, lift, symmetrize, trace_product, RMat, Scalar};
use crate::model::{Gindikin, LaplaceQuery, WishartModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    CameronMartin,
    Linearization,
    VariationOfConstants,
    RungeKutta4,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Linearization,
        Method::CameronMartin,
        Method::VariationOfConstants,
        Method::RungeKutta4,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::CameronMartin => "cm",
            Method::Linearization => "lin",
            Method::VariationOfConstants => "vc",
            Method::RungeKutta4 => "rk4",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "cm" | "cameron_martin" => Some(Method::CameronMartin),
            "lin" | "linearization" => Some(Method::Linearization),
            "vc" | "variation_of_constants" => Some(Method::VariationOfConstants),
            "rk4" | "runge_kutta" => Some(Method::RungeKutta4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreSolver {
    Schur,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    pub rk4_step: f64,
    /// Simpson nodes per unit time for variation of constants.
    pub quadrature_points: usize,
    pub are_solver: AreSolver,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            method: Method::CameronMartin,
            rk4_step: 1e-3,
            quadrature_points: 2000,
            are_solver: AreSolver::Schur,
        }
    }
}

impl MethodConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rk4_step > 0.0) || !self.rk4_step.is_finite() {
            return Err(Error::InvalidConfig("rk4_step must be positive"));
        }
        if self.quadrature_points == 0 || self.quadrature_points % 2 != 0 {
            return Err(Error::InvalidConfig("quadrature_points must be positive and even"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warning {
    /// Scalar drift below the closed form's hypothesis `alpha >= d + 1`.
    ClosedFormHypothesis { alpha: f64, bound: f64 },
    /// `v_bar` has a negative eigenvalue; cosh/sinh were continued to the
    /// negative axis as cos/sin.
    OutsideRealDomain { min_eigenvalue: f64 },
    /// A value expected to be real carried this imaginary part.
    ImaginaryPart { residual: f64 },
    /// Quadrature error estimate above the accuracy target.
    Accuracy { estimate: f64 },
    /// The matrix drift does not commute with `v_bar` or `w_bar`; the
    /// closed-form drift term is then not exact.
    NonCommutingDrift { residual: f64 },
    /// `sqrt(v_bar)` is singular but commutes with the drift; the log term
    /// was taken without the similarity.
    StructuralSingularity,
    /// Largest phase step of a tracked logarithm.
    BranchJump { jump: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// 1-norm condition number of the matrix inverted last.
    pub condition: Option<f64>,
    pub steps: Option<usize>,
    pub step_size: Option<f64>,
    pub quadrature_error: Option<f64>,
    pub warnings: Vec<Warning>,
}

impl Diagnostics {
    pub fn warn(&mut self, w: Warning) {
        self.warnings.push(w);
    }
}

/// `exp(-phi - Tr[psi S0])` together with its exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformResult<T: Scalar = f64> {
    pub phi: T,
    pub psi: DMatrix<T>,
    pub value: T,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl<T: Scalar> TransformResult<T> {
    pub(crate) fn assemble(
        phi: T,
        psi: DMatrix<T>,
        s0: &RMat,
        method: Method,
        diagnostics: Diagnostics,
    ) -> Result<Self> {
        let s0: DMatrix<T> = lift(s0);
        let value = (-phi - trace_product(&psi, &s0)).exp();
        ensure_finite(&psi, "psi").map_err(|_| Error::NumericalBreakdown {
            stage: "psi",
            step: None,
        })?;
        let finite = |x: T| x.to_c().re.is_finite() && x.to_c().im.is_finite();
        if !finite(phi) {
            return Err(Error::NumericalBreakdown {
                stage: "phi",
                step: None,
            });
        }
        if !finite(value) {
            return Err(Error::NumericalBreakdown {
                stage: "transform value",
                step: None,
            });
        }
        Ok(Self {
            phi,
            psi,
            value,
            method,
            diagnostics,
        })
    }
}

/// Coefficients of the Riccati system over the scalar field `T`.
///
/// `m` may differ from the model's drift (pricing substitutes `M - omega Q^T R^T`);
/// `q` and the drift constant stay real.
#[derive(Debug, Clone)]
pub struct RiccatiProblem<T: Scalar = f64> {
    pub m: DMatrix<T>,
    pub w: DMatrix<T>,
    pub v: DMatrix<T>,
    pub q: RMat,
    pub s0: RMat,
    pub gindikin: Gindikin,
    qtq: RMat,
    qtq_inv: RMat,
    q_inv: RMat,
}

impl RiccatiProblem<f64> {
    pub fn from_query(model: &WishartModel, query: &LaplaceQuery) -> Result<Self> {
        Self::new(model, model.m().clone(), query.w.clone(), query.v.clone())
    }
}

impl<T: Scalar> RiccatiProblem<T> {
    pub fn new(model: &WishartModel, m: DMatrix<T>, w: DMatrix<T>, v: DMatrix<T>) -> Result<Self> {
        let d = model.dim();
        ensure_dim(&m, "M", d)?;
        ensure_dim(&w, "w", d)?;
        ensure_dim(&v, "v", d)?;
        ensure_finite(&m, "M")?;
        ensure_finite(&w, "w")?;
        ensure_finite(&v, "v")?;
        ensure_symmetric(&w, "w")?;
        ensure_symmetric(&v, "v")?;
        Ok(Self {
            m,
            w,
            v,
            q: model.q().clone(),
            s0: model.s0().clone(),
            gindikin: model.gindikin().clone(),
            qtq: model.qtq().clone(),
            qtq_inv: model.qtq_inv().clone(),
            q_inv: model.q_inv().clone(),
        })
    }

    /// Real model lifted into `T` with the given weights.
    pub fn lifted(model: &WishartModel, w: DMatrix<T>, v: DMatrix<T>) -> Result<Self> {
        Self::new(model, lift(model.m()), w, v)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn qtq(&self) -> &RMat {
        &self.qtq
    }

    pub fn qtq_inv(&self) -> &RMat {
        &self.qtq_inv
    }

    pub fn q_inv(&self) -> &RMat {
        &self.q_inv
    }

    /// `b`, or `alpha Q^T Q` for a scalar drift.
    pub fn drift_matrix(&self) -> RMat {
        match &self.gindikin {
            Gindikin::Scalar(alpha) => &self.qtq * *alpha,
            Gindikin::Matrix(b) => b.clone(),
        }
    }

    pub(crate) fn hypothesis_warning(&self) -> Option<Warning> {
        match self.gindikin {
            Gindikin::Scalar(alpha) => {
                let bound = self.dim() as f64 + 1.0;
                (alpha < bound).then_some(Warning::ClosedFormHypothesis { alpha, bound })
            }
            Gindikin::Matrix(_) => None,
        }
    }

    /// Same problem with `w` replaced.
    pub fn with_w(&self, w: DMatrix<T>) -> Self {
        Self { w, ..self.clone() }
    }
}

/// `psi M + M^T psi - 2 psi Q^T Q psi + v`, symmetrized.
pub fn riccati_rhs<T: Scalar>(psi: &DMatrix<T>, prob: &RiccatiProblem<T>) -> DMatrix<T> {
    let qtq: DMatrix<T> = lift(prob.qtq());
    rhs_with(psi, &prob.m, &qtq, &prob.v)
}

pub(crate) fn rhs_with<T: Scalar>(
    psi: &DMatrix<T>,
    m: &DMatrix<T>,
    qtq: &DMatrix<T>,
    v: &DMatrix<T>,
) -> DMatrix<T> {
    let pm = psi * m;
    let quad = psi * qtq * psi;
    let out = &pm + pm.transpose() - quad * T::from_real(2.0) + v;
    symmetrize(&out)
}

/// `dphi/dt = Tr[b psi]`.
pub fn phi_rate<T: Scalar>(psi: &DMatrix<T>, prob: &RiccatiProblem<T>) -> T {
    let b: DMatrix<T> = lift(&prob.drift_matrix());
    trace_product(&b, psi)
}
