//! Closed-form joint Laplace transform under the commutation condition
//! `M^T (Q^T Q)^-1 = (Q^T Q)^-1 M`.
//!
//! With `A = (Q^T Q)^-1`, `v_bar = Q (2v + M^T A M) Q^T`, `w_bar = Q (2w - A M) Q^T`
//! and `s = sqrt(v_bar)`,
//!
//! ```text
//! k   = -(s cosh(st) + w_bar sinh(st))^-1 (s sinh(st) + w_bar cosh(st))
//! psi = A M / 2 - Q^-1 s k Q^-T / 2
//! phi = -(alpha/2) log det(e^{-Mt} (cosh(st) + sinh(st) k))
//! ```
//!
//! Everything is evaluated through the entire functions `C = cosh(st)` and
//! `Sn = sinh(st)/s` of `v_bar`, which need no square root. With
//! `D = C + w_bar Sn` and `N = v_bar Sn + w_bar C` one has `s k = -D^-1 N` and
//! `det(cosh(st) + sinh(st) k) = 1 / det D`, so
//! `phi = (alpha/2) (t Tr M + log det D)`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matfun::{
    eigenvalues, lift, mat_log, norm1, solve, symmetrize, trace_log_det, trace_product, BranchTracker, CMat,
    RMat, Scalar, Spectral, PSD_BAND,
};
use crate::model::{commutation_residual, v_bar, w_bar, Gindikin, LaplaceQuery, WishartModel, COMMUTATION_TOL};
use crate::riccati::{Diagnostics, Method, RiccatiProblem, TransformResult, Warning};

/// Above this condition number of `D` the horizon is split into steps.
const SPLIT_CONDITION: f64 = 1e8;
const MAX_SPLIT_STEPS: usize = 1 << 20;

/// Matrices of the closed form at one horizon.
#[derive(Debug, Clone)]
pub struct CmIntermediates<T: Scalar> {
    pub v_bar: DMatrix<T>,
    pub w_bar: DMatrix<T>,
    pub sqrt_v_bar: DMatrix<T>,
    pub k: DMatrix<T>,
    /// Condition number of `s cosh(st) + w_bar sinh(st)`.
    pub condition: f64,
}

/// Closed-form evaluator for one `(model, w, v)`; the spectral decomposition
/// of `v_bar` is shared by every horizon.
#[derive(Debug, Clone)]
pub struct ClosedForm<T: Scalar = f64> {
    prob: RiccatiProblem<T>,
    v_bar: DMatrix<T>,
    w_bar: DMatrix<T>,
    spectral: Spectral<T>,
    half_am: DMatrix<T>,
    q_inv: DMatrix<T>,
    trace_m: T,
    base: Diagnostics,
}

impl<T: Scalar> ClosedForm<T> {
    pub fn new(prob: RiccatiProblem<T>) -> Result<Self> {
        let residual = commutation_residual(&prob.m, prob.qtq_inv());
        if residual > COMMUTATION_TOL {
            return Err(Error::CommutationViolated { residual });
        }
        let v_bar = v_bar(&prob.m, &prob.q, prob.qtq_inv(), &prob.v);
        let w_bar = w_bar(&prob.m, &prob.q, prob.qtq_inv(), &prob.w);
        let spectral = T::spectral(&v_bar)?;
        let a: DMatrix<T> = lift(prob.qtq_inv());
        let half_am = &a * &prob.m * T::from_real(0.5);
        let q_inv = lift(prob.q_inv());
        let trace_m = prob.m.trace();

        let mut base = Diagnostics::default();
        if let Some(w) = prob.hypothesis_warning() {
            base.warn(w);
        }
        let min = spectral.min_real();
        let has_complex = spectral.values.iter().any(|l| l.to_c().im.abs() > 0.0);
        if !has_complex && min < -PSD_BAND * spectral.spectral_radius() {
            base.warn(Warning::OutsideRealDomain { min_eigenvalue: min });
        }
        if let Gindikin::Matrix(b) = &prob.gindikin {
            let bt: DMatrix<T> = lift(&(prob.q_inv().transpose() * b * prob.q_inv()));
            let comm = |x: &DMatrix<T>| (&bt * x - x * &bt).norm() / (bt.norm() * x.norm()).max(f64::MIN_POSITIVE);
            let r = comm(&v_bar).max(comm(&w_bar));
            if r > 1e-10 {
                base.warn(Warning::NonCommutingDrift { residual: r });
            }
        }

        Ok(Self {
            prob,
            v_bar,
            w_bar,
            spectral,
            half_am,
            q_inv,
            trace_m,
            base,
        })
    }

    pub fn problem(&self) -> &RiccatiProblem<T> {
        &self.prob
    }

    pub fn v_bar(&self) -> &DMatrix<T> {
        &self.v_bar
    }

    pub fn w_bar(&self) -> &DMatrix<T> {
        &self.w_bar
    }

    /// `(D, N)` at horizon `t`.
    fn blocks(&self, t: f64) -> (DMatrix<T>, DMatrix<T>) {
        let c = self.spectral.apply(|l| l.cosh_sqrt(t));
        let sn = self.spectral.apply(|l| l.sinhc_sqrt(t));
        let d = &c + &self.w_bar * &sn;
        let n = &self.v_bar * &sn + &self.w_bar * &c;
        (d, n)
    }

    /// Principal square root of `v_bar`. Real fields require `v_bar` PSD.
    pub fn sqrt_v_bar(&self) -> Result<DMatrix<T>> {
        let radius = self.spectral.spectral_radius();
        let min = self.spectral.min_real();
        if is_real::<T>() && min < -PSD_BAND * radius {
            return Err(Error::NotPositiveSemidefinite {
                what: "v_bar",
                min_eigenvalue: min,
            });
        }
        Ok(self
            .spectral
            .apply(|l| T::from_c(clip(l.to_c(), radius).sqrt())))
    }

    /// Principal square root of `v_bar` over the complex field.
    fn sqrt_v_bar_complex(&self) -> CMat {
        let radius = self.spectral.spectral_radius();
        let roots = self.spectral.values.iter().map(|l| clip(l.to_c(), radius).sqrt());
        let mut scaled = self.spectral.vectors.map(|x| x.to_c());
        for (mut col, r) in scaled.column_iter_mut().zip(roots) {
            col *= r;
        }
        scaled * self.spectral.inverse.map(|x| x.to_c())
    }

    pub fn intermediates(&self, t: f64) -> Result<CmIntermediates<T>> {
        let s = self.sqrt_v_bar()?;
        let (d, n) = self.blocks(t);
        let ds = &d * &s;
        let sol = solve(&ds, &n, "s cosh(st) + w_bar sinh(st)").map_err(|e| at_time(e, t))?;
        Ok(CmIntermediates {
            v_bar: self.v_bar.clone(),
            w_bar: self.w_bar.clone(),
            sqrt_v_bar: s,
            k: -sol.x,
            condition: sol.condition,
        })
    }

    /// Transform at `t`. A tracker continues the logarithm's branch from its
    /// previous call; pass the same tracker along an increasing grid. Without
    /// one, complex problems take the branch continuous in time.
    pub fn evaluate(&self, t: f64, tracker: Option<&mut BranchTracker>) -> Result<TransformResult<T>> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidConfig("t must be finite and nonnegative"));
        }
        let mut diag = self.base.clone();
        if t == 0.0 {
            diag.condition = Some(1.0);
            return TransformResult::assemble(
                T::zero(),
                self.prob.w.clone(),
                &self.prob.s0,
                Method::CameronMartin,
                diag,
            );
        }
        let (d, n) = self.blocks(t);
        let (psi, phi) = match solve(&d, &n, "k denominator") {
            Ok(sol) if sol.condition <= SPLIT_CONDITION && all_finite(&sol.x) => {
                diag.condition = Some(sol.condition);
                let psi = self.psi_from(&sol.x);
                let phi = match (tracker, &self.prob.gindikin) {
                    (None, Gindikin::Scalar(alpha)) if !is_real::<T>() => {
                        let ld = trace_log_det(&d, None).map_err(|e| at_time(e, t))?;
                        let ld = self.continue_in_time(ld, t)?;
                        (ld + self.trace_m.to_c() * t) * (alpha / 2.0)
                    }
                    (tracker, _) => self.step_phi(&d, t, tracker, &mut diag)?,
                };
                (psi, phi)
            }
            _ => {
                // The split result carries the branch continuous in time;
                // a frequency tracker restarts from it.
                if let Some(tr) = tracker {
                    tr.restart();
                }
                self.evaluate_split(t, &mut diag)?
            }
        };
        let phi = narrow::<T>(phi, &mut diag);
        TransformResult::assemble(phi, psi, &self.prob.s0, Method::CameronMartin, diag)
    }

    fn psi_from(&self, x: &DMatrix<T>) -> DMatrix<T> {
        &self.half_am + &self.q_inv * x * self.q_inv.transpose() * T::from_real(0.5)
    }

    /// Shift the principal `log det D(t)` by the multiple of `2 pi i` that
    /// makes it continuous in time from `log det D(0) = 0`. The phase of
    /// `det D` is unwrapped on a grid refined until no step turns by more
    /// than `pi/4`.
    fn continue_in_time(&self, principal: Complex64, t: f64) -> Result<Complex64> {
        let rate = libm::sqrt(self.spectral.spectral_radius()) + norm1(&self.w_bar);
        let dim = self.prob.dim() as f64;
        let mut n = (libm::ceil(2.0 * t * rate * dim) as usize).max(8);
        'refine: loop {
            let mut theta = 0.0;
            let mut prev = 0.0;
            for i in 1..=n {
                let det = self.blocks(t * i as f64 / n as f64).0.determinant().to_c();
                if det == Complex64::new(0.0, 0.0) || !det.re.is_finite() || !det.im.is_finite() {
                    return Err(Error::Singular {
                        what: "k denominator",
                        t: Some(t * i as f64 / n as f64),
                    });
                }
                let arg = det.arg();
                let mut step = arg - prev;
                if step > core::f64::consts::PI {
                    step -= 2.0 * core::f64::consts::PI;
                } else if step < -core::f64::consts::PI {
                    step += 2.0 * core::f64::consts::PI;
                }
                if step.abs() > core::f64::consts::FRAC_PI_4 {
                    if n >= MAX_SPLIT_STEPS {
                        return Err(Error::NumericalBreakdown {
                            stage: "phase continuation of log det D",
                            step: Some(i),
                        });
                    }
                    n *= 2;
                    continue 'refine;
                }
                theta += step;
                prev = arg;
            }
            let turns = libm::round((theta - principal.im) / (2.0 * core::f64::consts::PI));
            return Ok(principal + Complex64::new(0.0, 2.0 * core::f64::consts::PI * turns));
        }
    }

    /// `phi` over a horizon `h` whose denominator is `d`.
    fn step_phi(
        &self,
        d: &DMatrix<T>,
        h: f64,
        tracker: Option<&mut BranchTracker>,
        diag: &mut Diagnostics,
    ) -> Result<Complex64> {
        match &self.prob.gindikin {
            Gindikin::Scalar(alpha) => {
                let ld = trace_log_det(d, tracker).map_err(|e| at_time(e, h))?;
                if is_real::<T>() && ld.im.abs() > 1e-8 {
                    // det D starts at 1 and only changes sign through a pole.
                    return Err(Error::Singular {
                        what: "k denominator (past the explosion time)",
                        t: Some(h),
                    });
                }
                Ok((ld + self.trace_m.to_c() * h) * (alpha / 2.0))
            }
            Gindikin::Matrix(b) => self.matrix_drift_phi(b, d, h, tracker, diag),
        }
    }

    /// Long or high-frequency horizons: `cosh(st)` and `sinh(st)` spread
    /// over many orders of magnitude and `D` becomes too ill-conditioned to
    /// invert. The flow is composed from `n` short steps instead, each
    /// restarting the closed form at the previous `psi`, with the `phi`
    /// increments summed. Steps are refined until every step's `D` is
    /// well-conditioned with eigenvalues in the right half-plane, so the
    /// principal logarithm is the one continuous in time.
    fn evaluate_split(&self, t: f64, diag: &mut Diagnostics) -> Result<(DMatrix<T>, Complex64)> {
        let rate = libm::sqrt(self.spectral.spectral_radius()) + norm1(&self.w_bar);
        let mut n = (libm::ceil(2.0 * t * rate) as usize).max(2);
        loop {
            match self.split_pass(t, n, diag)? {
                Some(out) => return Ok(out),
                None if n < MAX_SPLIT_STEPS => n *= 2,
                None => {
                    return Err(Error::NumericalBreakdown {
                        stage: "closed form time splitting",
                        step: Some(n),
                    })
                }
            }
        }
    }

    /// One pass with `n` equal steps; `None` asks for a finer split.
    fn split_pass(&self, t: f64, n: usize, diag: &mut Diagnostics) -> Result<Option<(DMatrix<T>, Complex64)>> {
        let h = t / n as f64;
        let c = self.spectral.apply(|l| l.cosh_sqrt(h));
        let sn = self.spectral.apply(|l| l.sinhc_sqrt(h));
        let vsn = &self.v_bar * &sn;
        let mut w = self.prob.w.clone();
        let mut phi = Complex64::new(0.0, 0.0);
        let mut worst = 1.0f64;
        let mut local = diag.clone();
        for i in 0..n {
            let wb = w_bar(&self.prob.m, &self.prob.q, self.prob.qtq_inv(), &w);
            let d = &c + &wb * &sn;
            let num = &vsn + &wb * &c;
            let at = h * (i + 1) as f64;
            let sol = solve(&d, &num, "k denominator").map_err(|e| at_time(e, at))?;
            if !(sol.condition <= SPLIT_CONDITION) || !all_finite(&sol.x) {
                return Ok(None);
            }
            worst = worst.max(sol.condition);
            let values = eigenvalues(&d.map(|x| x.to_c()))?;
            if is_real::<T>() && values.iter().any(|l| l.im == 0.0 && l.re <= 0.0) {
                return Err(Error::Singular {
                    what: "k denominator (past the explosion time)",
                    t: Some(at),
                });
            }
            if values.iter().any(|l| l.re <= 0.0) {
                return Ok(None);
            }
            phi += self.step_phi(&d, h, None, &mut local)?;
            w = symmetrize(&self.psi_from(&sol.x));
        }
        local.condition = Some(worst);
        local.steps = Some(n);
        local.step_size = Some(h);
        local.warnings.dedup();
        *diag = local;
        Ok(Some((w, phi)))
    }

    /// `Tr[b A M / 2] t + Tr[b~ log(s^-1 D s)] / 2` with `b~ = Q^-T b Q^-1`.
    fn matrix_drift_phi(
        &self,
        b: &RMat,
        d: &DMatrix<T>,
        t: f64,
        tracker: Option<&mut BranchTracker>,
        diag: &mut Diagnostics,
    ) -> Result<Complex64> {
        let linear = trace_product(&lift::<T>(b), &self.half_am).to_c() * t;
        let bt: CMat = lift(&(self.prob.q_inv().transpose() * b * self.prob.q_inv()));
        let log_d = mat_log(d, tracker).map_err(|e| at_time(e, t))?;
        let s = self.sqrt_v_bar_complex();
        let similar = match solve(&s, &(&log_d * &s), "sqrt(v_bar)") {
            Ok(sol) => sol.x,
            Err(_) => {
                let comm = (&bt * &s - &s * &bt).norm();
                if comm <= 1e-10 * (bt.norm() * s.norm()).max(f64::MIN_POSITIVE) {
                    diag.warn(Warning::StructuralSingularity);
                    log_d
                } else {
                    return Err(Error::Singular {
                        what: "sqrt(v_bar)",
                        t: Some(t),
                    });
                }
            }
        };
        Ok(linear + trace_product(&bt, &similar) * 0.5)
    }

    /// Values along an ordered grid with one branch tracker. Each point
    /// carries its own error so a blow-up at one horizon does not hide the
    /// rest.
    pub fn evaluate_grid(&self, ts: &[f64]) -> Vec<Result<TransformResult<T>>> {
        let mut tracker = BranchTracker::new();
        ts.iter()
            .map(|&t| {
                let r = self.evaluate(t, Some(&mut tracker));
                r.map(|mut r| {
                    if tracker.max_jump() > 0.0 {
                        r.diagnostics.warn(Warning::BranchJump {
                            jump: tracker.max_jump(),
                        });
                    }
                    r
                })
            })
            .collect()
    }
}

fn all_finite<T: Scalar>(x: &DMatrix<T>) -> bool {
    x.iter().all(|v| {
        let c = v.to_c();
        c.re.is_finite() && c.im.is_finite()
    })
}

fn is_real<T: Scalar>() -> bool {
    T::from_c(Complex64::new(0.0, 1.0)).to_c().im == 0.0
}

/// Negative real eigenvalues inside the roundoff band are set to zero.
fn clip(l: Complex64, radius: f64) -> Complex64 {
    if l.im == 0.0 && l.re < 0.0 && l.re >= -PSD_BAND * radius {
        Complex64::new(0.0, 0.0)
    } else {
        l
    }
}

/// Keep the real part on real fields, recording any imaginary residue.
fn narrow<T: Scalar>(x: Complex64, diag: &mut Diagnostics) -> T {
    if is_real::<T>() && x.im.abs() > 1e-10 * (1.0 + x.re.abs()) {
        diag.warn(Warning::ImaginaryPart { residual: x.im });
    }
    T::from_c(x)
}

fn at_time(e: Error, t: f64) -> Error {
    match e {
        Error::Singular { what, .. } => Error::Singular { what, t: Some(t) },
        other => other,
    }
}

/// Closed-form intermediates for a real query.
pub fn cm_intermediates(model: &WishartModel, query: &LaplaceQuery) -> Result<CmIntermediates<f64>> {
    ClosedForm::new(RiccatiProblem::from_query(model, query)?)?.intermediates(query.t)
}

/// Closed-form transform for a scalar-drift model.
pub fn cm_transform(model: &WishartModel, query: &LaplaceQuery) -> Result<TransformResult> {
    if !matches!(model.gindikin(), Gindikin::Scalar(_)) {
        return Err(Error::PreconditionFailed {
            reason: "cm_transform needs a scalar drift; use cm_transform_general".into(),
        });
    }
    ClosedForm::new(RiccatiProblem::from_query(model, query)?)?.evaluate(query.t, None)
}

/// Closed-form transform for a matrix-drift model. A scalar drift is
/// treated as `b = alpha Q^T Q`.
pub fn cm_transform_general(model: &WishartModel, query: &LaplaceQuery) -> Result<TransformResult> {
    let mut prob = RiccatiProblem::from_query(model, query)?;
    if let Gindikin::Scalar(alpha) = prob.gindikin {
        prob.gindikin = Gindikin::Matrix(prob.qtq() * alpha);
    }
    ClosedForm::new(prob)?.evaluate(query.t, None)
}

/// Closed-form transform over an increasing time grid with branch tracking.
pub fn cm_transform_grid(
    model: &WishartModel,
    w: &RMat,
    v: &RMat,
    ts: &[f64],
) -> Result<Vec<Result<TransformResult>>> {
    let prob = RiccatiProblem::new(model, model.m().clone(), w.clone(), v.clone())?;
    Ok(ClosedForm::new(prob)?.evaluate_grid(ts))
}

/// `E[exp(-Tr[u S_t])]` for a driftless (`M = 0`) process with constant
/// drift `b`:
///
/// `exp(-Tr[b~ log(I + 2t Q u Q^T)] / 2 - Tr[(I + 2t u Q^T Q)^-1 u S0])`,
/// `b~ = Q^-T b Q^-1`.
pub fn marginal_transform_generalized<T: Scalar>(
    model: &WishartModel,
    u: &DMatrix<T>,
    t: f64,
) -> Result<T> {
    let d = model.dim();
    crate::matfun::ensure_dim(u, "u", d)?;
    crate::matfun::ensure_finite(u, "u")?;
    if norm1(model.m()) != 0.0 {
        return Err(Error::PreconditionFailed {
            reason: "the marginal transform needs M = 0".into(),
        });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidConfig("t must be finite and nonnegative"));
    }
    let id = DMatrix::<T>::identity(d, d);
    let q: DMatrix<T> = lift(model.q());
    let qtq: DMatrix<T> = lift(model.qtq());
    let two_t = T::from_real(2.0 * t);
    let lhs = &id + u * &qtq * two_t;
    let psi = solve(&lhs, u, "I + 2t u Q^T Q")
        .map_err(|e| at_time(e, t))?
        .x;
    let s0: DMatrix<T> = lift(model.s0());
    let state = trace_product(&psi, &s0);
    let inner = &id + &q * u * q.transpose() * two_t;
    let log_term = match model.gindikin() {
        Gindikin::Scalar(alpha) => {
            trace_log_det(&inner, None).map_err(|e| at_time(e, t))? * *alpha
        }
        Gindikin::Matrix(b) => {
            let bt: CMat = lift(&(model.q_inv().transpose() * b * model.q_inv()));
            let l = mat_log(&inner, None).map_err(|e| at_time(e, t))?;
            trace_product(&bt, &l)
        }
    };
    let mut diag = Diagnostics::default();
    let phi: T = narrow(log_term * 0.5, &mut diag);
    let value = (-phi - state).exp();
    let v = value.to_c();
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::NumericalBreakdown {
            stage: "marginal transform",
            step: None,
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests;
