use super::*;
use crate::matfun::symmetry_residual;
use crate::presets::{self, reference_model, reference_query};
use crate::riccati::MethodConfig;
use crate::testutil::{commuting_model, config, psd, rel_err};
use crate::transform_ode::rk4_transform;
use nalgebra::dmatrix;
use proptest::prelude::*;

fn cm(t: f64) -> TransformResult {
    cm_transform(&reference_model(), &reference_query(t)).unwrap()
}

fn rk4_value(model: &WishartModel, query: &LaplaceQuery, h: f64) -> TransformResult {
    let prob = RiccatiProblem::from_query(model, query).unwrap();
    let cfg = MethodConfig {
        rk4_step: h,
        ..MethodConfig::default()
    };
    rk4_transform(&prob, query.t, &cfg).unwrap()
}

#[test]
fn initial_value_is_terminal_weight_only() {
    let r = cm(0.0);
    let expected = (-(presets::reference_w() * presets::reference_s0()).trace()).exp();
    assert_eq!(r.psi, presets::reference_w());
    assert_eq!(r.phi, 0.0);
    assert!((r.value - expected).abs() < 1e-16);
    assert!((r.value - 0.998291461216988).abs() < 5e-16);
}

#[test]
fn published_short_horizon_points() {
    assert!((cm(0.5).value - 0.992740622447456).abs() < 5e-15);
    assert!((cm(1.0).value - 0.985698139368470).abs() < 5e-15);
}

#[test]
fn published_long_horizon_points() {
    assert!(rel_err(cm(5.0).value, 0.884120166104796) < 1e-12);
    assert!(rel_err(cm(10.0).value, 0.691634000576684) < 1e-12);
}

#[test]
fn zero_weights_give_one() {
    let model = reference_model();
    for t in [0.0, 0.7, 3.0, 50.0] {
        let q = LaplaceQuery::new(RMat::zeros(2, 2), RMat::zeros(2, 2), t).unwrap();
        let r = cm_transform(&model, &q).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14, "t={t}: {}", r.value);
    }
}

#[test]
fn agrees_with_fine_rk4() {
    let model = reference_model();
    let q = reference_query(2.0);
    let a = cm_transform(&model, &q).unwrap().value;
    let b = rk4_value(&model, &q, 1e-4).value;
    assert!(rel_err(a, b) < 1e-8);
}

#[test]
fn intermediates_at_zero() {
    let i = cm_intermediates(&reference_model(), &reference_query(0.0)).unwrap();
    let s_inv = i.sqrt_v_bar.clone().try_inverse().unwrap();
    let expected = -(s_inv * &i.w_bar);
    assert!((&i.k - expected).norm() < 1e-12 * i.k.norm());
    assert!(symmetry_residual(&i.v_bar) < 1e-10);
    assert!(symmetry_residual(&i.w_bar) < 1e-10);
}

#[test]
fn intermediates_reproduce_the_transform() {
    let model = reference_model();
    let i = cm_intermediates(&model, &reference_query(1.0)).unwrap();
    let q_inv = model.q_inv();
    let psi = model.qtq_inv() * model.m() / 2.0 - q_inv * &i.sqrt_v_bar * &i.k * q_inv.transpose() / 2.0;
    let sp = f64::spectral(&i.v_bar).unwrap();
    let ch = sp.apply(|l| l.cosh_sqrt(1.0));
    let sh = &i.sqrt_v_bar * sp.apply(|l| l.sinhc_sqrt(1.0));
    let e = crate::matfun::mat_exp(&(-model.m())).unwrap();
    let det = (e * (ch + sh * &i.k)).determinant();
    let phi = -1.5 * det.ln();
    let value = (-phi - (psi * model.s0()).trace()).exp();
    assert!((value - 0.985698139368470).abs() < 5e-15);
}

#[test]
fn k_tends_to_minus_identity() {
    // The slowest rate of sqrt(v_bar) on the reference model is about 0.044,
    // so tanh saturates only for t in the hundreds.
    let i = cm_intermediates(&reference_model(), &reference_query(800.0)).unwrap();
    assert!((&i.k + RMat::identity(2, 2)).norm() < 1e-8);
}

#[test]
fn indefinite_v_bar_is_flagged_not_fatal() {
    let model = reference_model();
    let q = LaplaceQuery::new(RMat::zeros(2, 2), RMat::identity(2, 2) * -0.05, 1.0).unwrap();
    let r = cm_transform(&model, &q).unwrap();
    assert!(r
        .diagnostics
        .warnings
        .iter()
        .any(|w| matches!(w, Warning::OutsideRealDomain { .. })));
    let oracle = rk4_value(&model, &q, 1e-3).value;
    assert!(rel_err(r.value, oracle) < 1e-10);
    assert!(matches!(
        cm_intermediates(&model, &q),
        Err(Error::NotPositiveSemidefinite { .. })
    ));
}

#[test]
fn commutation_is_required() {
    let model = WishartModel::new(
        RMat::identity(2, 2),
        presets::reference_m(),
        RMat::identity(2, 2),
        Gindikin::Scalar(3.0),
    )
    .unwrap();
    assert!(matches!(
        cm_transform(&model, &reference_query(1.0)),
        Err(Error::CommutationViolated { .. })
    ));
}

#[test]
fn blow_up_reports_time() {
    // Scalar CIR with negative terminal weight explodes in finite time.
    let model = WishartModel::new(dmatrix![1.0], dmatrix![-0.1], dmatrix![1.0], Gindikin::Scalar(2.0)).unwrap();
    let q = LaplaceQuery::new(dmatrix![-1.0], dmatrix![0.0], 0.0).unwrap();
    let cf = ClosedForm::new(RiccatiProblem::from_query(&model, &q).unwrap()).unwrap();
    // psi' = -0.2 psi - 2 psi^2 from psi(0) = -1 reaches -inf before t = 1.
    let err = (1..400).map(|k| cf.evaluate(k as f64 * 0.01, None)).find(|r| r.is_err());
    match err {
        Some(Err(Error::Singular { t: Some(_), .. })) | Some(Err(Error::NumericalBreakdown { .. })) => {}
        other => panic!("expected a blow-up, got {other:?}"),
    }
}

#[test]
fn grid_evaluation_matches_pointwise() {
    let ts: alloc::vec::Vec<f64> = (0..=30).map(|k| k as f64 * 0.1).collect();
    let grid = cm_transform_grid(&reference_model(), &presets::reference_w(), &presets::reference_v(), &ts).unwrap();
    for (t, r) in ts.iter().zip(grid) {
        assert_eq!(r.unwrap().value.to_bits(), cm(*t).value.to_bits());
    }
}

#[test]
fn alpha_below_closed_form_bound_is_tagged() {
    let model = reference_model().with_gindikin(Gindikin::Scalar(1.5)).unwrap();
    let r = cm_transform(&model, &reference_query(1.0)).unwrap();
    assert!(r
        .diagnostics
        .warnings
        .iter()
        .any(|w| matches!(w, Warning::ClosedFormHypothesis { .. })));
    let oracle = rk4_value(&model, &reference_query(1.0), 1e-3).value;
    assert!(rel_err(r.value, oracle) < 1e-10);
}

#[test]
fn matrix_drift_reduces_to_scalar() {
    let model = reference_model();
    let b_model = model
        .with_gindikin(Gindikin::Matrix(model.qtq() * presets::REFERENCE_ALPHA))
        .unwrap();
    for t in [0.5, 1.0, 2.0] {
        let a = cm_transform(&model, &reference_query(t)).unwrap();
        let b = cm_transform_general(&b_model, &reference_query(t)).unwrap();
        assert!(rel_err(b.value, a.value) < 1e-12, "t={t}");
        assert_eq!(b.psi, a.psi);
        assert!(b.diagnostics.warnings.is_empty());
    }
}

#[test]
fn matrix_drift_trivial_cases() {
    let model = reference_model();
    let b = dmatrix![0.05, 0.01; 0.01, 0.03];
    let b_model = model.with_gindikin(Gindikin::Matrix(b)).unwrap();
    let r = cm_transform_general(&b_model, &reference_query(0.0)).unwrap();
    assert!((r.value - 0.998291461216988).abs() < 5e-16);
    let zero = LaplaceQuery::new(RMat::zeros(2, 2), RMat::zeros(2, 2), 2.0).unwrap();
    let r = cm_transform_general(&b_model, &zero).unwrap();
    assert!((r.value - 1.0).abs() < 1e-14);
}

#[test]
fn matrix_drift_commuting_with_v_bar_is_exact() {
    // b~ = Q^-T b Q^-1 = c0 I + c1 v_bar commutes with v_bar; with w = A M / 2
    // w_bar vanishes, so the closed form is exact.
    let model = reference_model();
    let w = model.qtq_inv() * model.m() / 2.0;
    let w = (&w + w.transpose()) / 2.0;
    let v = presets::reference_v();
    let vb = model.q() * (v.clone() * 2.0 + model.m().transpose() * model.qtq_inv() * model.m()) * model.q().transpose();
    let bt = RMat::identity(2, 2) * 2.0 + vb * 5.0;
    let b = model.q().transpose() * bt * model.q();
    let b_model = model.with_gindikin(Gindikin::Matrix(b)).unwrap();
    let q = LaplaceQuery::new(w, v, 1.5).unwrap();
    let r = cm_transform_general(&b_model, &q).unwrap();
    let oracle = rk4_value(&b_model, &q, 1e-3).value;
    assert!(rel_err(r.value, oracle) < 1e-10, "{} vs {}", r.value, oracle);
}

#[test]
fn matrix_drift_generic_is_flagged() {
    let model = reference_model();
    let b = dmatrix![0.05, 0.01; 0.01, 0.03];
    let b_model = model.with_gindikin(Gindikin::Matrix(b)).unwrap();
    let r = cm_transform_general(&b_model, &reference_query(1.0)).unwrap();
    assert!(r
        .diagnostics
        .warnings
        .iter()
        .any(|w| matches!(w, Warning::NonCommutingDrift { .. })));
}

fn driftless(q: RMat, s0: RMat, g: Gindikin) -> WishartModel {
    let d = q.nrows();
    WishartModel::new(s0, RMat::zeros(d, d), q, g).unwrap()
}

#[test]
fn marginal_trivial_cases() {
    let model = driftless(presets::reference_q(), presets::reference_s0(), Gindikin::Scalar(3.0));
    let one: f64 = marginal_transform_generalized(&model, &RMat::zeros(2, 2), 2.0).unwrap();
    assert!((one - 1.0).abs() < 1e-15);
    let u = dmatrix![0.4, 0.1; 0.1, 0.2];
    let at0: f64 = marginal_transform_generalized(&model, &u, 0.0).unwrap();
    assert!((at0 - (-(&u * presets::reference_s0()).trace()).exp()).abs() < 1e-15);
}

#[test]
fn marginal_scalar_squared_bessel() {
    for (alpha, u, s0, t) in [(3.0, 0.7, 0.4, 1.3), (1.0, 2.0, 1.5, 0.25), (5.5, 0.05, 3.0, 10.0)] {
        let model = driftless(dmatrix![1.0], dmatrix![s0], Gindikin::Matrix(dmatrix![alpha]));
        let got: f64 = marginal_transform_generalized(&model, &dmatrix![u], t).unwrap();
        let want = (1.0 + 2.0 * t * u).powf(-alpha / 2.0) * (-u * s0 / (1.0 + 2.0 * t * u)).exp();
        assert!(rel_err(got, want) < 1e-12);
    }
}

#[test]
fn marginal_matrix_drift_matches_rk4() {
    let q = dmatrix![0.8, 0.3; 0.0, 0.5];
    let b = dmatrix![1.2, 0.2; 0.2, 0.9];
    let model = driftless(q, dmatrix![0.5, 0.1; 0.1, 0.3], Gindikin::Matrix(b));
    let u = dmatrix![0.6, -0.1; -0.1, 0.4];
    let got: f64 = marginal_transform_generalized(&model, &u, 1.7).unwrap();
    let query = LaplaceQuery::new(u, RMat::zeros(2, 2), 1.7).unwrap();
    let oracle = rk4_value(&model, &query, 1e-3).value;
    assert!(rel_err(got, oracle) < 1e-10, "{got} vs {oracle}");
}

#[test]
fn marginal_boundary_is_singular() {
    let model = driftless(dmatrix![1.0], dmatrix![1.0], Gindikin::Scalar(2.0));
    assert!(matches!(
        marginal_transform_generalized(&model, &dmatrix![-0.5], 1.0),
        Err(Error::Singular { .. })
    ));
}

proptest! {
    #![proptest_config(config(0x5eed_0003))]

    #[test]
    fn starts_from_terminal_weight(model in commuting_model(2), w in psd(2, 1.0), v in psd(2, 1.0)) {
        let q = LaplaceQuery::new(w.clone(), v, 0.0).unwrap();
        let r = cm_transform(&model, &q).unwrap();
        prop_assert!((&r.psi - &w).norm() <= 1e-12);
        prop_assert!(r.phi.abs() <= 1e-12);
    }

    #[test]
    fn phi_rate_matches_finite_difference(
        model in commuting_model(2),
        w in psd(2, 1.0),
        v in psd(2, 1.0),
        t in 0.1f64..3.0,
    ) {
        let cf = ClosedForm::new(RiccatiProblem::new(&model, model.m().clone(), w, v).unwrap()).unwrap();
        let h = 1e-5;
        let up = cf.evaluate(t + h, None).unwrap();
        let dn = cf.evaluate(t - h, None).unwrap();
        let mid = cf.evaluate(t, None).unwrap();
        let fd = (up.phi - dn.phi) / (2.0 * h);
        let rate = crate::riccati::phi_rate(&mid.psi, cf.problem());
        prop_assert!((fd - rate).abs() <= 1e-6 * (1.0 + rate.abs()), "fd {} rate {}", fd, rate);
    }

    #[test]
    fn psi_is_symmetric(model in commuting_model(3), w in psd(3, 1.0), v in psd(3, 1.0), t in 0.0f64..5.0) {
        let r = cm_transform(&model, &LaplaceQuery::new(w, v, t).unwrap()).unwrap();
        prop_assert!(symmetry_residual(&r.psi) <= 1e-10 * (1.0 + r.psi.norm()));
    }

    #[test]
    fn value_matches_exponential_affine_form(model in commuting_model(2), w in psd(2, 1.0), v in psd(2, 1.0), t in 0.0f64..3.0) {
        let r = cm_transform(&model, &LaplaceQuery::new(w, v, t).unwrap()).unwrap();
        let recon = (-r.phi - (&r.psi * model.s0()).trace()).exp();
        prop_assert!(rel_err(r.value, recon) <= 1e-12);
        prop_assert!(r.value > 0.0 && r.value <= 1.0 + 1e-15);
    }

    #[test]
    fn decreasing_in_horizon_without_terminal_weight(model in commuting_model(2), v in psd(2, 1.0)) {
        prop_assume!(v.norm() > 1e-3);
        let q = LaplaceQuery::new(RMat::zeros(2, 2), v, 0.0).unwrap();
        let cf = ClosedForm::new(RiccatiProblem::from_query(&model, &q).unwrap()).unwrap();
        let mut prev = 1.0 + 1e-15;
        for k in 1..=30 {
            let val = cf.evaluate(k as f64 * 0.1, None).unwrap().value;
            prop_assert!(val < prev);
            prev = val;
        }
    }

    #[test]
    fn agrees_with_rk4_on_random_models(model in commuting_model(2), w in psd(2, 0.5), v in psd(2, 0.5), t in 0.1f64..2.0) {
        let q = LaplaceQuery::new(w, v, t).unwrap();
        let a = cm_transform(&model, &q).unwrap().value;
        let b = rk4_value(&model, &q, 1e-3).value;
        prop_assert!(rel_err(a, b) <= 1e-9, "{} vs {}", a, b);
    }
}
