//! Log-price transforms for Wishart volatility models, zero-coupon bonds
//! under a Wishart short rate, and Fourier pricing of European options.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matfun::{ensure_dim, ensure_finite, ensure_symmetric, lift, BranchTracker, CMat, RMat, PSD_BAND};
use crate::model::{commutation_residual, min_eigenvalue, WishartModel, COMMUTATION_TOL};
use crate::riccati::{RiccatiProblem, TransformResult, Warning};
use crate::transform_cm::ClosedForm;

/// Single asset whose variance is `Tr[S]`:
///
/// ```text
/// dX/X = Tr[sqrt(S) (dW R^T + dB sqrt(I - R R^T))]
/// ```
///
/// with `W` the Brownian motion driving `S` and `B` independent of it.
#[derive(Debug, Clone)]
pub struct SvModel {
    core: WishartModel,
    r: RMat,
    spot: f64,
    rate: f64,
}

impl SvModel {
    pub fn new(core: WishartModel, r: RMat, spot: f64, rate: f64) -> Result<Self> {
        ensure_dim(&r, "R", core.dim())?;
        ensure_finite(&r, "R")?;
        if !(spot > 0.0) || !spot.is_finite() {
            return Err(Error::InvalidConfig("spot must be positive and finite"));
        }
        if !rate.is_finite() {
            return Err(Error::InvalidConfig("rate must be finite"));
        }
        let d = core.dim();
        let slack = RMat::identity(d, d) - &r * r.transpose();
        let min = min_eigenvalue(&slack);
        if min < -PSD_BAND {
            return Err(Error::NotPositiveSemidefinite {
                what: "I - R R^T",
                min_eigenvalue: min,
            });
        }
        Ok(Self { core, r, spot, rate })
    }

    pub fn core(&self) -> &WishartModel {
        &self.core
    }

    pub fn r(&self) -> &RMat {
        &self.r
    }

    pub fn spot(&self) -> f64 {
        self.spot
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Residuals of `M^T A = A M` and `R Q A = A Q^T R^T`, `A = (Q^T Q)^-1`.
    /// Together they make the substituted drift commute for every `omega`.
    pub fn commutation_residuals(&self) -> (f64, f64) {
        let a = self.core.qtq_inv();
        let cross = self.core.q().transpose() * self.r.transpose();
        (
            commutation_residual(self.core.m(), a),
            commutation_residual(&cross, a),
        )
    }

    fn check(&self) -> Result<()> {
        let (drift, corr) = self.commutation_residuals();
        if drift > COMMUTATION_TOL || corr > COMMUTATION_TOL {
            return Err(Error::PreconditionFailed {
                reason: format!(
                    "substituted commutation fails: drift residual {drift:e}, correlation residual {corr:e}"
                ),
            });
        }
        Ok(())
    }

    /// Riccati problem for `E[exp(-omega Y_T)]`: drift `M - omega Q^T R^T`,
    /// `v = -(omega^2 + omega)/2 I`, `w = 0`.
    pub fn substituted_problem(&self, omega: Complex64) -> Result<RiccatiProblem<Complex64>> {
        let d = self.core.dim();
        let q: CMat = lift(self.core.q());
        let r: CMat = lift(&self.r);
        let m = lift::<Complex64>(self.core.m()) - q.transpose() * r.transpose() * omega;
        let v = CMat::identity(d, d) * (-(omega * omega + omega) / 2.0);
        RiccatiProblem::new(&self.core, m, CMat::zeros(d, d), v)
    }
}

/// Vector of assets sharing the Wishart covariance `S`:
///
/// ```text
/// dX = Diag(X) sqrt(S) (dW rho + sqrt(1 - rho^T rho) dB)
/// ```
#[derive(Debug, Clone)]
pub struct ScModel {
    core: WishartModel,
    rho: DVector<f64>,
    spots: DVector<f64>,
    rate: f64,
}

impl ScModel {
    pub fn new(core: WishartModel, rho: DVector<f64>, spots: DVector<f64>, rate: f64) -> Result<Self> {
        let d = core.dim();
        if rho.len() != d {
            return Err(Error::DimensionMismatch {
                what: "rho",
                expected: d,
                got: rho.len(),
            });
        }
        if spots.len() != d {
            return Err(Error::DimensionMismatch {
                what: "spots",
                expected: d,
                got: spots.len(),
            });
        }
        if rho.iter().any(|x| !x.is_finite()) || rho.norm_squared() > 1.0 + PSD_BAND {
            return Err(Error::InvalidConfig("rho must be finite with rho^T rho <= 1"));
        }
        if spots.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidConfig("spots must be positive and finite"));
        }
        if !rate.is_finite() {
            return Err(Error::InvalidConfig("rate must be finite"));
        }
        Ok(Self { core, rho, spots, rate })
    }

    pub fn core(&self) -> &WishartModel {
        &self.core
    }

    pub fn rho(&self) -> &DVector<f64> {
        &self.rho
    }

    pub fn spots(&self) -> &DVector<f64> {
        &self.spots
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Residuals of `M^T A = A M` and `omega rho^T Q^-T = Q^-1 rho omega^T`.
    pub fn commutation_residuals(&self, omega: &DVector<Complex64>) -> (f64, f64) {
        let a = self.core.qtq_inv();
        (
            commutation_residual(self.core.m(), a),
            commutation_residual(&self.cross(omega), a),
        )
    }

    /// `Q^T rho omega^T`.
    fn cross(&self, omega: &DVector<Complex64>) -> CMat {
        let q: CMat = lift(self.core.q());
        let rho: DVector<Complex64> = self.rho.map(Complex64::from);
        q.transpose() * rho * omega.transpose()
    }

    /// Riccati problem for `E[exp(-omega^T Y_T)]`: drift `M - Q^T rho omega^T`,
    /// `v = -(Diag(omega) + omega omega^T)/2`, `w = 0`.
    pub fn substituted_problem(&self, omega: &DVector<Complex64>) -> Result<RiccatiProblem<Complex64>> {
        let d = self.core.dim();
        if omega.len() != d {
            return Err(Error::DimensionMismatch {
                what: "omega",
                expected: d,
                got: omega.len(),
            });
        }
        let m = lift::<Complex64>(self.core.m()) - self.cross(omega);
        let v = (CMat::from_diagonal(omega) + omega * omega.transpose()) * Complex64::from(-0.5);
        RiccatiProblem::new(&self.core, m, CMat::zeros(d, d), v)
    }
}

/// Short rate `r_t = a + Tr[v S_t]`.
#[derive(Debug, Clone)]
pub struct ShortRateModel {
    core: WishartModel,
    a: f64,
    v: RMat,
}

impl ShortRateModel {
    pub fn new(core: WishartModel, a: f64, v: RMat) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidConfig("a must be finite and nonnegative"));
        }
        ensure_dim(&v, "v", core.dim())?;
        ensure_finite(&v, "v")?;
        ensure_symmetric(&v, "v")?;
        let min = min_eigenvalue(&v);
        if min < -PSD_BAND * v.norm().max(1.0) {
            return Err(Error::NotPositiveSemidefinite {
                what: "v",
                min_eigenvalue: min,
            });
        }
        Ok(Self { core, a, v })
    }

    pub fn core(&self) -> &WishartModel {
        &self.core
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn v(&self) -> &RMat {
        &self.v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrMadanConfig {
    /// Damping exponent of the modified call price.
    pub damping: f64,
    /// Upper end of the frequency grid `[0, omega_max]`.
    pub omega_max: f64,
    /// Grid size; a power of two.
    pub points: usize,
}

impl Default for CarrMadanConfig {
    fn default() -> Self {
        Self {
            damping: 1.5,
            omega_max: 200.0,
            points: 4096,
        }
    }
}

impl CarrMadanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0) || !self.damping.is_finite() {
            return Err(Error::DampingInvalid {
                damping: self.damping,
                reason: "must be positive".into(),
            });
        }
        if !(self.omega_max > 0.0) || !self.omega_max.is_finite() {
            return Err(Error::InvalidConfig("omega_max must be positive"));
        }
        if self.points < 2 || !self.points.is_power_of_two() {
            return Err(Error::InvalidConfig("points must be a power of two"));
        }
        Ok(())
    }
}

/// `E[exp(-omega Y_T)]`, `Y = log X`, `tau` years ahead. Complex `omega`
/// gives the characteristic function: `Psi(u) = value at omega = -i u`.
pub fn sv_log_price_transform(model: &SvModel, omega: Complex64, tau: f64) -> Result<TransformResult<Complex64>> {
    sv_tracked(model, omega, tau, None)
}

fn sv_tracked(
    model: &SvModel,
    omega: Complex64,
    tau: f64,
    tracker: Option<&mut BranchTracker>,
) -> Result<TransformResult<Complex64>> {
    model.check()?;
    let prob = model.substituted_problem(omega)?;
    let mut r = ClosedForm::new(prob)?.evaluate(tau, tracker)?;
    r.value *= (-omega * (libm::log(model.spot) + model.rate * tau)).exp();
    Ok(r)
}

/// SV transform along an ordered `omega` path with continuous logarithms.
/// A phase step above `pi` between neighbours is an error.
pub fn sv_transform_path(
    model: &SvModel,
    omegas: &[Complex64],
    tau: f64,
) -> Result<Vec<TransformResult<Complex64>>> {
    let mut tracker = BranchTracker::new();
    let mut out = Vec::with_capacity(omegas.len());
    for &omega in omegas {
        let r = sv_tracked(model, omega, tau, Some(&mut tracker))?;
        check_jump(&tracker, omega.im)?;
        out.push(r);
    }
    if tracker.max_jump() > 0.0 {
        let jump = tracker.max_jump();
        for r in &mut out {
            r.diagnostics.warn(Warning::BranchJump { jump });
        }
    }
    Ok(out)
}

fn check_jump(tracker: &BranchTracker, omega: f64) -> Result<()> {
    let jump = tracker.last_jump();
    if jump > core::f64::consts::PI {
        return Err(Error::BranchDiscontinuity { omega, jump });
    }
    Ok(())
}

/// `E[exp(-omega^T Y_T)]` for the vector of log-prices.
pub fn sc_log_price_transform(
    model: &ScModel,
    omega: &DVector<Complex64>,
    tau: f64,
) -> Result<TransformResult<Complex64>> {
    let prob = model.substituted_problem(omega)?;
    let (drift, corr) = model.commutation_residuals(omega);
    if drift > COMMUTATION_TOL || corr > COMMUTATION_TOL {
        return Err(Error::PreconditionFailed {
            reason: format!(
                "substituted commutation fails: drift residual {drift:e}, correlation residual {corr:e}"
            ),
        });
    }
    let mut r = ClosedForm::new(prob)?.evaluate(tau, None)?;
    let log_spots: DVector<Complex64> = model
        .spots
        .map(|x| Complex64::from(libm::log(x) + model.rate * tau));
    r.value *= (-omega.dot(&log_spots)).exp();
    Ok(r)
}

/// Zero-coupon bond price `E[exp(-int_0^tau r_s ds)]`.
pub fn zcb_price(model: &ShortRateModel, tau: f64) -> Result<f64> {
    let d = model.core.dim();
    let prob = RiccatiProblem::new(&model.core, model.core.m().clone(), RMat::zeros(d, d), model.v.clone())?;
    let r = ClosedForm::new(prob)?.evaluate(tau, None)?;
    Ok(r.value * libm::exp(-model.a * tau))
}

/// Bond prices over a maturity grid with a monotonicity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct BondCurve {
    pub maturities: Vec<f64>,
    pub prices: Vec<f64>,
    /// Continuously compounded yields; `None` at zero maturity.
    pub yields: Vec<Option<f64>>,
    /// Prices are non-increasing in maturity.
    pub decreasing: bool,
}

pub fn zcb_curve(model: &ShortRateModel, maturities: &[f64]) -> Result<BondCurve> {
    let d = model.core.dim();
    let prob = RiccatiProblem::new(&model.core, model.core.m().clone(), RMat::zeros(d, d), model.v.clone())?;
    let cf = ClosedForm::new(prob)?;
    let prices = maturities
        .iter()
        .map(|&tau| Ok(cf.evaluate(tau, None)?.value * libm::exp(-model.a * tau)))
        .collect::<Result<Vec<f64>>>()?;
    let yields = maturities
        .iter()
        .zip(&prices)
        .map(|(&tau, &p)| (tau > 0.0).then(|| -libm::log(p) / tau))
        .collect();
    let decreasing = maturities
        .windows(2)
        .zip(prices.windows(2))
        .all(|(t, p)| t[1] < t[0] || p[1] <= p[0]);
    Ok(BondCurve {
        maturities: maturities.to_vec(),
        prices,
        yields,
        decreasing,
    })
}

/// Fourier price with the largest logarithm phase step seen on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierPrice {
    pub price: f64,
    pub max_phase_step: f64,
}

/// European call by damped Fourier inversion of the log-price transform.
pub fn carr_madan_call(model: &SvModel, strike: f64, maturity: f64, config: &CarrMadanConfig) -> Result<f64> {
    config.validate()?;
    Ok(fourier_price(model, strike, maturity, config.damping, config)?.price)
}

/// European put from the same inversion with damping `-(1 + damping)`.
pub fn carr_madan_put(model: &SvModel, strike: f64, maturity: f64, config: &CarrMadanConfig) -> Result<f64> {
    config.validate()?;
    Ok(fourier_price(model, strike, maturity, -1.0 - config.damping, config)?.price)
}

/// `e^{-a k}/pi int_0^inf Re(e^{-i w k} C_a(w)) dw` with
/// `C_a(w) = e^{-rT} Psi(w - (a+1)i) / (a^2 + a - w^2 + i(2a+1)w)`, by the
/// trapezoid rule. Damping `a > 0` prices the call, `a < -1` the put.
pub fn fourier_price(
    model: &SvModel,
    strike: f64,
    maturity: f64,
    damping: f64,
    config: &CarrMadanConfig,
) -> Result<FourierPrice> {
    if !(strike > 0.0) || !strike.is_finite() {
        return Err(Error::InvalidConfig("strike must be positive and finite"));
    }
    if !(maturity >= 0.0) || !maturity.is_finite() {
        return Err(Error::InvalidConfig("maturity must be finite and nonnegative"));
    }
    if !damping.is_finite() || (-1.0..=0.0).contains(&damping) {
        return Err(Error::DampingInvalid {
            damping,
            reason: "must be positive (call) or below -1 (put)".into(),
        });
    }
    model.check()?;
    moment(model, damping + 1.0, maturity).map_err(|reason| Error::DampingInvalid { damping, reason })?;

    let k = libm::log(strike);
    let discount = libm::exp(-model.rate * maturity);
    let n = config.points;
    let dw = config.omega_max / (n - 1) as f64;
    let mut tracker = BranchTracker::new();
    let mut terms = Vec::with_capacity(n);
    for j in 0..n {
        let w = j as f64 * dw;
        let omega = Complex64::new(-(damping + 1.0), -w);
        let psi = sv_tracked(model, omega, maturity, Some(&mut tracker))?.value;
        check_jump(&tracker, w)?;
        let denom = Complex64::new(damping * damping + damping - w * w, (2.0 * damping + 1.0) * w);
        let c_hat = psi * discount / denom;
        let term = (Complex64::new(0.0, -w * k).exp() * c_hat).re;
        let weight = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        terms.push(weight * term);
    }
    let integral = pairwise_sum(&terms) * dw;
    Ok(FourierPrice {
        price: libm::exp(-damping * k) / core::f64::consts::PI * integral,
        max_phase_step: tracker.max_jump(),
    })
}

/// `E[X_T^p]`, followed along `[0, T]` so that a moment explosion before
/// `T` is caught even when the transform oscillates back to a finite value.
pub fn moment(model: &SvModel, order: f64, maturity: f64) -> core::result::Result<f64, alloc::string::String> {
    model.check().map_err(|e| format!("{e}"))?;
    let omega = -order;
    let d = model.core.dim();
    let m = model.core.m() - model.core.q().transpose() * model.r.transpose() * omega;
    let v = RMat::identity(d, d) * (-(omega * omega + omega) / 2.0);
    let prob = RiccatiProblem::new(&model.core, m, RMat::zeros(d, d), v).map_err(|e| format!("{e}"))?;
    let cf = ClosedForm::new(prob).map_err(|e| format!("{e}"))?;
    // D(t) oscillates at the square roots of the negative eigenvalues of
    // v_bar; eight samples per period resolve every sign change.
    let freq = libm::sqrt((-min_eigenvalue(cf.v_bar())).max(0.0));
    let n = (libm::ceil(maturity * freq * 4.0 / core::f64::consts::PI) as usize).clamp(1, 100_000);
    let grid: Vec<f64> = (1..=n).map(|j| maturity * j as f64 / n as f64).collect();
    let mut last = None;
    for r in cf.evaluate_grid(&grid) {
        let r = r.map_err(|e| format!("moment of order {order} explodes before maturity: {e}"))?;
        last = Some(r);
    }
    let value = match last {
        Some(r) => r.value * libm::exp(-omega * (libm::log(model.spot) + model.rate * maturity)),
        None => libm::pow(model.spot, order),
    };
    if !(value > 0.0) || !value.is_finite() {
        return Err(format!("moment of order {order} evaluates to {value}"));
    }
    Ok(value)
}

pub(crate) fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let (a, b) = x.split_at(x.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Black-Scholes call on a forward with total variance `var`.
pub fn black_scholes_call(spot: f64, strike: f64, rate: f64, maturity: f64, var: f64) -> f64 {
    let df = libm::exp(-rate * maturity);
    if var <= 0.0 {
        return (spot - strike * df).max(0.0);
    }
    let sd = libm::sqrt(var);
    let d1 = (libm::log(spot / strike) + rate * maturity + var / 2.0) / sd;
    let d2 = d1 - sd;
    spot * normal_cdf(d1) - strike * df * normal_cdf(d2)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}
