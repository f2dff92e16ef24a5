use super::*;
use crate::error::Error;
use crate::matfun::{symmetry_residual, RMat};
use crate::model::{Gindikin, LaplaceQuery, WishartModel};
use crate::presets::{self, reference_model, reference_query};
use crate::riccati::{riccati_rhs, AreSolver, Method, MethodConfig, RiccatiProblem};
use crate::testutil::{commuting_model, config, psd, rel_err};
use crate::transform_cm::cm_transform;
use nalgebra::dmatrix;
use proptest::prelude::*;

fn reference_problem() -> RiccatiProblem {
    RiccatiProblem::from_query(&reference_model(), &reference_query(0.0)).unwrap()
}

/// Reference model with time running `c` times faster.
fn rescaled(c: f64) -> (WishartModel, LaplaceQuery) {
    let model = WishartModel::new(
        presets::reference_s0(),
        presets::reference_m() * c,
        presets::reference_q() * c.sqrt(),
        Gindikin::Scalar(presets::REFERENCE_ALPHA),
    )
    .unwrap();
    let q = LaplaceQuery::new(presets::reference_w(), presets::reference_v() * c, 0.0).unwrap();
    (model, q)
}

fn rk4(prob: &RiccatiProblem, t: f64, h: f64) -> f64 {
    let cfg = MethodConfig {
        rk4_step: h,
        ..MethodConfig::default()
    };
    rk4_transform(prob, t, &cfg).unwrap().value
}

fn vc(prob: &RiccatiProblem, t: f64, points: usize) -> crate::riccati::TransformResult {
    let cfg = MethodConfig {
        quadrature_points: points,
        ..MethodConfig::default()
    };
    variation_of_constants_transform(prob, t, &cfg).unwrap()
}

#[test]
fn linearization_published_point() {
    let r = linearization_transform(&reference_problem(), 0.3, None).unwrap();
    assert!((r.value - 0.995143124879428).abs() < 5e-15);
}

#[test]
fn linearization_at_zero() {
    let prob = reference_problem();
    let b = flow_blocks(&prob, 0.0).unwrap();
    let id = RMat::identity(2, 2);
    assert_eq!(b.p11, id);
    assert_eq!(b.p22, id);
    assert_eq!(b.p12, RMat::zeros(2, 2));
    assert_eq!(b.p21, RMat::zeros(2, 2));
    let r = linearization_transform(&prob, 0.0, None).unwrap();
    assert_eq!(r.psi, presets::reference_w());
    assert_eq!(r.phi, 0.0);
}

#[test]
fn linearization_agrees_with_closed_form() {
    let prob = reference_problem();
    for k in 1..=30 {
        let t = k as f64 * 0.1;
        let lin = linearization_transform(&prob, t, None).unwrap();
        let cm = cm_transform(&reference_model(), &reference_query(t)).unwrap();
        assert!(rel_err(lin.value, cm.value) <= 1e-12, "t={t}");
        assert!(symmetry_residual(&lin.psi) <= 1e-9);
    }
}

#[test]
fn linearization_rejects_matrix_drift() {
    let model = reference_model()
        .with_gindikin(Gindikin::Matrix(reference_model().qtq() * 3.0))
        .unwrap();
    let prob = RiccatiProblem::from_query(&model, &reference_query(1.0)).unwrap();
    assert!(matches!(
        linearization_transform(&prob, 1.0, None),
        Err(Error::PreconditionFailed { .. })
    ));
}

#[test]
fn are_zero_cost_gives_zero() {
    let model = reference_model();
    let prob = RiccatiProblem::new(&model, model.m().clone(), RMat::zeros(2, 2), RMat::zeros(2, 2)).unwrap();
    let psi = solve_are(&prob, AreSolver::Schur).unwrap();
    assert!(psi.norm() < 1e-14);
}

#[test]
fn are_solvers_agree_on_reference() {
    let prob = reference_problem();
    let schur = solve_are(&prob, AreSolver::Schur).unwrap();
    let closed = solve_are(&prob, AreSolver::ClosedForm).unwrap();
    assert!((&schur - &closed).norm() <= 1e-9);
    for psi in [&schur, &closed] {
        assert!(riccati_rhs(psi, &prob).norm() <= 1e-9 * (1.0 + prob.v.norm()));
        assert!(closed_loop_abscissa(&prob, psi).unwrap() < 0.0);
        assert!(symmetry_residual(psi) == 0.0);
    }
    let expected = dmatrix![1.21180809, 0.32958184; 0.32958184, 1.46805056];
    assert!((&closed - expected).norm() < 1e-7);
}

#[test]
fn are_scalar_quadratic() {
    // 2 m p - 2 q^2 p^2 + v = 0 with m = -1, q = 1: stabilizing root
    // p = (-1 + sqrt(1 + 2v)) / 2.
    for (v, want) in [(3.0, (-1.0 + 7.0f64.sqrt()) / 2.0), (1.5, 0.5)] {
        let model = WishartModel::new(dmatrix![1.0], dmatrix![-1.0], dmatrix![1.0], Gindikin::Scalar(2.0)).unwrap();
        let prob = RiccatiProblem::new(&model, dmatrix![-1.0], dmatrix![0.0], dmatrix![v]).unwrap();
        for solver in [AreSolver::Schur, AreSolver::ClosedForm] {
            let p = solve_are(&prob, solver).unwrap();
            assert!((p[(0, 0)] - want).abs() < 1e-14, "{solver:?}: {}", p[(0, 0)]);
        }
    }
}

#[test]
fn are_closed_form_requires_commutation() {
    let model = WishartModel::new(RMat::identity(2, 2), presets::reference_m(), RMat::identity(2, 2), Gindikin::Scalar(3.0)).unwrap();
    let prob = RiccatiProblem::from_query(&model, &reference_query(1.0)).unwrap();
    assert!(matches!(
        solve_are(&prob, AreSolver::ClosedForm),
        Err(Error::PreconditionFailed { .. })
    ));
    // The Schur path does not need it.
    let psi = solve_are(&prob, AreSolver::Schur).unwrap();
    assert!(riccati_rhs(&psi, &prob).norm() < 1e-12);
    assert!(closed_loop_abscissa(&prob, &psi).unwrap() < 0.0);
}

#[test]
fn are_imaginary_axis_has_no_stabilizing_solution() {
    // m = 0, v = 0: Hamiltonian eigenvalues are both 0.
    let model = WishartModel::new(dmatrix![1.0], dmatrix![0.0], dmatrix![1.0], Gindikin::Scalar(2.0)).unwrap();
    let prob = RiccatiProblem::new(&model, dmatrix![0.0], dmatrix![0.0], dmatrix![0.0]).unwrap();
    assert!(matches!(
        solve_are(&prob, AreSolver::Schur),
        Err(Error::NoStabilizingSolution { .. })
    ));
}

#[test]
fn rhs_vanishes_at_are_solution() {
    let prob = reference_problem();
    let psi = solve_are(&prob, AreSolver::ClosedForm).unwrap();
    assert!(riccati_rhs(&psi, &prob).norm() < 1e-10);
}

#[test]
fn psi_approaches_are_solution_for_fast_mean_reversion() {
    // At c = 100 the direct closed form is far too ill-conditioned; the
    // evaluator composes short steps instead.
    for c in [10.0, 100.0] {
        let (model, q) = rescaled(c);
        let prob = RiccatiProblem::from_query(&model, &q).unwrap();
        let psi_inf = solve_are(&prob, AreSolver::Schur).unwrap();
        let r = cm_transform(&model, &q.at(50.0).unwrap()).unwrap();
        assert!((r.psi - psi_inf).norm() <= 1e-8, "c={c}");
    }
}

#[test]
fn vc_at_zero_is_exact() {
    let r = vc(&reference_problem(), 0.0, 2000);
    assert_eq!(r.psi, presets::reference_w());
    assert_eq!(r.phi, 0.0);
}

#[test]
fn vc_agrees_with_closed_form() {
    let prob = reference_problem();
    for t in [0.3, 1.0, 3.0] {
        let r = vc(&prob, t, 2000);
        let cm = cm_transform(&reference_model(), &reference_query(t)).unwrap().value;
        assert!((r.value - cm).abs() < 1e-10, "t={t}: {} vs {cm}", r.value);
        assert!(r.diagnostics.quadrature_error.unwrap() < 1e-10);
        assert!(r.diagnostics.warnings.is_empty());
    }
}

#[test]
fn vc_node_count() {
    assert_eq!(quadrature_nodes(0.3, 2000), 600);
    assert_eq!(quadrature_nodes(0.1, 1), 8);
    assert_eq!(quadrature_nodes(3.0, 5), 16);
}

#[test]
fn vc_simpson_order() {
    let (model, q) = rescaled(20.0);
    let prob = RiccatiProblem::from_query(&model, &q).unwrap();
    let t = 4.0;
    let exact = cm_transform(&model, &q.at(t).unwrap()).unwrap().value;
    let errs: Vec<f64> = [4, 8, 16].iter().map(|&p| (vc(&prob, t, p).value - exact).abs()).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((11.0..=21.0).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn vc_coarse_grid_warns() {
    let model = WishartModel::new(dmatrix![0.1], dmatrix![-10.0], dmatrix![1.0], Gindikin::Scalar(2.0)).unwrap();
    let prob = RiccatiProblem::new(&model, dmatrix![-10.0], dmatrix![0.0], dmatrix![20.0]).unwrap();
    let r = vc(&prob, 1.0, 2);
    assert!(r.diagnostics.quadrature_error.unwrap() > crate::transform_ode::ACCURACY_TARGET);
    assert!(r
        .diagnostics
        .warnings
        .iter()
        .any(|w| matches!(w, crate::riccati::Warning::Accuracy { .. })));
}

#[test]
fn vc_singular_gap() {
    let prob = reference_problem();
    let psi_inf = solve_are(&prob, AreSolver::Schur).unwrap();
    let prob = prob.with_w(psi_inf);
    assert!(matches!(
        variation_of_constants_transform(&prob, 1.0, &MethodConfig::default()),
        Err(Error::Singular { .. })
    ));
}

#[test]
fn rk4_at_zero() {
    let prob = reference_problem();
    let r = rk4_transform(&prob, 0.0, &MethodConfig::default()).unwrap();
    assert_eq!(r.psi, presets::reference_w());
    assert!((r.value - 0.998291461216988).abs() < 5e-16);
    assert_eq!(r.diagnostics.steps, Some(0));
}

#[test]
fn rk4_fine_step_matches_closed_form() {
    let cm = cm_transform(&reference_model(), &reference_query(1.0)).unwrap().value;
    assert!(rel_err(rk4(&reference_problem(), 1.0, 1e-4), cm) <= 1e-10);
}

#[test]
fn rk4_shortens_last_step() {
    let prob = reference_problem();
    let cfg = MethodConfig {
        rk4_step: 0.3,
        ..MethodConfig::default()
    };
    let r = rk4_transform(&prob, 1.0, &cfg).unwrap();
    assert_eq!(r.diagnostics.steps, Some(4));
    let cm = cm_transform(&reference_model(), &reference_query(1.0)).unwrap().value;
    assert!(rel_err(r.value, cm) < 1e-9);
}

#[test]
fn rk4_fourth_order() {
    let (model, q) = rescaled(50.0);
    let prob = RiccatiProblem::from_query(&model, &q).unwrap();
    let t = 3.0;
    let exact = cm_transform(&model, &q.at(t).unwrap()).unwrap().value;
    let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|&h| (rk4(&prob, t, h) - exact).abs()).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((16.0 * 0.7..=16.0 * 1.3).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn rk4_breakdown_reports_step() {
    let model = WishartModel::new(dmatrix![1.0], dmatrix![-0.1], dmatrix![1.0], Gindikin::Scalar(2.0)).unwrap();
    let prob = RiccatiProblem::new(&model, dmatrix![-0.1], dmatrix![-1.0], dmatrix![0.0]).unwrap();
    let cfg = MethodConfig {
        rk4_step: 0.01,
        ..MethodConfig::default()
    };
    assert!(matches!(
        rk4_transform(&prob, 5.0, &cfg),
        Err(Error::NumericalBreakdown { step: Some(_), .. })
    ));
}

#[test]
fn dispatcher_routes_every_method() {
    let model = reference_model();
    let q = reference_query(0.5);
    for m in Method::ALL {
        let r = transform(&model, &q, &MethodConfig::with_method(m)).unwrap();
        assert_eq!(r.method, m);
        assert!((r.value - 0.992740622447456).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(config(0x5eed_0004))]

    #[test]
    fn linearization_matches_closed_form_on_random_models(
        model in commuting_model(3),
        w in psd(3, 1.0),
        v in psd(3, 1.0),
        t in 0.0f64..3.0,
    ) {
        let q = LaplaceQuery::new(w, v, t).unwrap();
        let prob = RiccatiProblem::from_query(&model, &q).unwrap();
        let lin = linearization_transform(&prob, t, None).unwrap();
        let cm = cm_transform(&model, &q).unwrap();
        prop_assert!(rel_err(lin.value, cm.value) <= 1e-10);
        prop_assert!(symmetry_residual(&lin.psi) <= 1e-9 * (1.0 + lin.psi.norm()));
    }

    #[test]
    fn are_residual_and_stability(model in commuting_model(3), v in psd(3, 1.0)) {
        let q = LaplaceQuery::new(RMat::zeros(3, 3), v, 0.0).unwrap();
        let prob = RiccatiProblem::from_query(&model, &q).unwrap();
        let schur = solve_are(&prob, AreSolver::Schur).unwrap();
        let closed = solve_are(&prob, AreSolver::ClosedForm).unwrap();
        let tol = 1e-9 * (1.0 + prob.v.norm());
        prop_assert!(riccati_rhs(&schur, &prob).norm() <= tol);
        prop_assert!(riccati_rhs(&closed, &prob).norm() <= tol);
        prop_assert!(closed_loop_abscissa(&prob, &schur).unwrap() < 0.0);
        prop_assert!(closed_loop_abscissa(&prob, &closed).unwrap() < 0.0);
        prop_assert!((&schur - &closed).norm() <= 1e-8 * (1.0 + schur.norm()));
    }
}
