//! Wishart model parameters, transform queries and their validity checks.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matfun::{
    ensure_dim, ensure_finite, ensure_square, ensure_symmetric, inverse, Scalar, RMat,
};

/// Relative tolerance of the commutation condition `M^T A = A M`, `A = (Q^T Q)^-1`.
pub const COMMUTATION_TOL: f64 = 1e-10;

/// Constant part of the drift: `alpha Q^T Q` or a general symmetric `b`.
#[derive(Debug, Clone, PartialEq)]
pub enum Gindikin {
    Scalar(f64),
    Matrix(RMat),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelWarning {
    /// Some eigenvalue of `M` has a nonnegative real part.
    UnstableDrift { max_real_part: f64 },
    /// `d - 1 <= alpha < d + 1`: the process exists but the closed form's
    /// hypothesis is not met.
    AlphaBelowClosedFormBound { alpha: f64, bound: f64 },
}

/// A validated Wishart model `dS = sqrt(S) dB Q + Q^T dB^T sqrt(S) + (M S + S M^T + drift) dt`.
#[derive(Debug, Clone)]
pub struct WishartModel {
    s0: RMat,
    m: RMat,
    q: RMat,
    gindikin: Gindikin,
    qtq: RMat,
    qtq_inv: RMat,
    q_inv: RMat,
    warnings: Vec<ModelWarning>,
}

impl WishartModel {
    pub fn new(s0: RMat, m: RMat, q: RMat, gindikin: Gindikin) -> Result<Self> {
        let d = ensure_square(&s0, "S0")?;
        ensure_dim(&m, "M", d)?;
        ensure_dim(&q, "Q", d)?;
        for (a, what) in [(&s0, "S0"), (&m, "M"), (&q, "Q")] {
            ensure_finite(a, what)?;
        }
        ensure_symmetric(&s0, "S0")?;
        let min = min_eigenvalue(&s0);
        if min < -1e-12 * s0.norm() {
            return Err(Error::NotPositiveSemidefinite {
                what: "S0",
                min_eigenvalue: min,
            });
        }

        let sv = q.singular_values();
        let (smin, smax) = (sv.min(), sv.max());
        if !(smin >= 1e-12 * smax) || smax == 0.0 {
            return Err(Error::Singular { what: "Q", t: None });
        }
        let qtq = q.transpose() * &q;
        let qtq_inv = symmetric_part(&inverse(&qtq, "Q^T Q")?);
        let q_inv = inverse(&q, "Q")?;

        let mut warnings = Vec::new();
        let df = d as f64;
        match &gindikin {
            Gindikin::Scalar(alpha) => {
                if !alpha.is_finite() || *alpha < df - 1.0 {
                    return Err(Error::Gindikin {
                        reason: format!("alpha = {alpha} is below d - 1 = {}", df - 1.0),
                    });
                }
                if *alpha < df + 1.0 {
                    warnings.push(ModelWarning::AlphaBelowClosedFormBound {
                        alpha: *alpha,
                        bound: df + 1.0,
                    });
                }
            }
            Gindikin::Matrix(b) => {
                ensure_dim(b, "b", d)?;
                ensure_finite(b, "b")?;
                ensure_symmetric(b, "b")?;
                let gap = b - &qtq * (df - 1.0);
                let min = min_eigenvalue(&gap);
                if min < -1e-12 * (1.0 + b.norm()) {
                    return Err(Error::Gindikin {
                        reason: format!(
                            "b - (d - 1) Q^T Q has eigenvalue {min:e} < 0"
                        ),
                    });
                }
            }
        }

        let max_real = crate::matfun::eigenvalues(&m.map(Into::into))?
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if max_real >= 0.0 {
            warnings.push(ModelWarning::UnstableDrift {
                max_real_part: max_real,
            });
        }

        Ok(Self {
            s0,
            m,
            q,
            gindikin,
            qtq,
            qtq_inv,
            q_inv,
            warnings,
        })
    }

    pub fn dim(&self) -> usize {
        self.s0.nrows()
    }

    pub fn s0(&self) -> &RMat {
        &self.s0
    }

    pub fn m(&self) -> &RMat {
        &self.m
    }

    pub fn q(&self) -> &RMat {
        &self.q
    }

    pub fn gindikin(&self) -> &Gindikin {
        &self.gindikin
    }

    /// `Q^T Q`.
    pub fn qtq(&self) -> &RMat {
        &self.qtq
    }

    /// `(Q^T Q)^-1`.
    pub fn qtq_inv(&self) -> &RMat {
        &self.qtq_inv
    }

    pub fn q_inv(&self) -> &RMat {
        &self.q_inv
    }

    /// Constant drift term: `alpha Q^T Q` or `b`.
    pub fn drift_constant(&self) -> RMat {
        match &self.gindikin {
            Gindikin::Scalar(alpha) => &self.qtq * *alpha,
            Gindikin::Matrix(b) => b.clone(),
        }
    }

    pub fn warnings(&self) -> &[ModelWarning] {
        &self.warnings
    }

    /// Same parameters with a different initial state.
    pub fn with_s0(&self, s0: RMat) -> Result<Self> {
        Self::new(s0, self.m.clone(), self.q.clone(), self.gindikin.clone())
    }

    /// Same parameters with the drift constant replaced.
    pub fn with_gindikin(&self, gindikin: Gindikin) -> Result<Self> {
        Self::new(self.s0.clone(), self.m.clone(), self.q.clone(), gindikin)
    }
}

/// Arguments `(w, v, t)` of `E[exp(-Tr[w S_t + int_0^t v S_s ds])]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceQuery<T: Scalar = f64> {
    pub w: DMatrix<T>,
    pub v: DMatrix<T>,
    pub t: f64,
}

impl<T: Scalar> LaplaceQuery<T> {
    pub fn new(w: DMatrix<T>, v: DMatrix<T>, t: f64) -> Result<Self> {
        let d = ensure_square(&w, "w")?;
        ensure_dim(&v, "v", d)?;
        ensure_finite(&w, "w")?;
        ensure_finite(&v, "v")?;
        ensure_symmetric(&w, "w")?;
        ensure_symmetric(&v, "v")?;
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidConfig("t must be finite and nonnegative"));
        }
        Ok(Self { w, v, t })
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn at(&self, t: f64) -> Result<Self> {
        Self::new(self.w.clone(), self.v.clone(), t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Commutation {
    pub holds: bool,
    pub residual: f64,
}

/// `||M^T A - A M||_F / ||A M||_F` for a given `A = (Q^T Q)^-1`.
pub fn commutation_residual<T: Scalar>(m: &DMatrix<T>, qtq_inv: &RMat) -> f64 {
    let a: DMatrix<T> = qtq_inv.map(T::from_real);
    let am = &a * m;
    let ma = m.transpose() * &a;
    let scale = am.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (ma - am).norm() / scale
}

pub fn check_commutation(model: &WishartModel) -> Commutation {
    let residual = commutation_residual(model.m(), model.qtq_inv());
    Commutation {
        holds: residual <= COMMUTATION_TOL,
        residual,
    }
}

/// Upper-triangular `Q` with `Q^T Q = A^-1`, so that `(M, Q)` satisfies the
/// commutation condition whenever `A M = M^T A`.
pub fn build_q_from_a(a: &RMat, m: &RMat) -> Result<RMat> {
    let d = ensure_square(a, "A")?;
    ensure_dim(m, "M", d)?;
    ensure_finite(a, "A")?;
    ensure_finite(m, "M")?;
    ensure_symmetric(a, "A")?;
    if Cholesky::new(a.clone()).is_none() {
        return Err(Error::NotPositiveDefinite { what: "A" });
    }
    let am = a * m;
    let scale = am.norm();
    let residual = if scale == 0.0 {
        0.0
    } else {
        (&am - m.transpose() * a).norm() / scale
    };
    if residual > COMMUTATION_TOL {
        return Err(Error::CommutationUnsatisfiable { residual });
    }
    let a_inv = symmetric_part(&inverse(a, "A")?);
    let chol = Cholesky::new(a_inv).ok_or(Error::NotPositiveDefinite { what: "A^-1" })?;
    Ok(chol.l().transpose())
}

/// Sufficient conditions for the real closed form to apply at a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainReport {
    pub commutation: Commutation,
    /// Smallest eigenvalue of `v_bar = Q (2v + M^T A M) Q^T`.
    pub v_bar_min_eigenvalue: f64,
    pub v_bar_psd: bool,
    /// Largest real part of the spectrum of `M - 2 Q^T Q psi'`, whose
    /// spectrum is `-sqrt(eig(v_bar))` under the commutation condition.
    pub closed_loop_max_real: f64,
    pub closed_loop_stable: bool,
}

impl DomainReport {
    pub fn in_domain(&self) -> bool {
        self.commutation.holds && self.v_bar_psd
    }
}

/// Advisory check; never blocks an evaluation.
pub fn check_convergence_domain(model: &WishartModel, query: &LaplaceQuery) -> DomainReport {
    let commutation = check_commutation(model);
    let v_bar = v_bar(model.m(), model.q(), model.qtq_inv(), &query.v);
    let min = min_eigenvalue(&symmetric_part(&v_bar));
    let psd = min >= -crate::matfun::PSD_BAND * v_bar.norm();
    let closed_loop_max_real = if min >= 0.0 { -libm::sqrt(min) } else { f64::INFINITY };
    DomainReport {
        commutation,
        v_bar_min_eigenvalue: min,
        v_bar_psd: psd,
        closed_loop_max_real,
        closed_loop_stable: closed_loop_max_real < 0.0,
    }
}

/// `Q (2v + M^T A M) Q^T`.
pub(crate) fn v_bar<T: Scalar>(m: &DMatrix<T>, q: &RMat, qtq_inv: &RMat, v: &DMatrix<T>) -> DMatrix<T> {
    let q: DMatrix<T> = q.map(T::from_real);
    let a: DMatrix<T> = qtq_inv.map(T::from_real);
    let inner = v * T::from_real(2.0) + m.transpose() * a * m;
    &q * inner * q.transpose()
}

/// `Q (2w - A M) Q^T`.
pub(crate) fn w_bar<T: Scalar>(m: &DMatrix<T>, q: &RMat, qtq_inv: &RMat, w: &DMatrix<T>) -> DMatrix<T> {
    let q: DMatrix<T> = q.map(T::from_real);
    let a: DMatrix<T> = qtq_inv.map(T::from_real);
    let inner = w * T::from_real(2.0) - a * m;
    &q * inner * q.transpose()
}

fn symmetric_part(a: &RMat) -> RMat {
    crate::matfun::symmetrize(a)
}

pub(crate) fn min_eigenvalue(a: &RMat) -> f64 {
    SymmetricEigen::new(symmetric_part(a)).eigenvalues.min()
}
