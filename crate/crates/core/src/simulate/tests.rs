use super::*;
use crate::model::Gindikin;
use crate::presets::{self, reference_model, reference_query};
use crate::testutil::{config, psd, symmetric};
use crate::transform_cm::cm_transform;
use nalgebra::dmatrix;
use proptest::prelude::*;

fn quick(paths: usize, step: f64, seed: u64) -> McConfig {
    McConfig {
        paths,
        step,
        seed,
        ..McConfig::default()
    }
}

/// RK4 for `dE/dt = M E + E M^T + b`.
fn moment_ode(model: &WishartModel, t: f64) -> RMat {
    let m = model.m();
    let b = model.drift_constant();
    let f = |e: &RMat| m * e + e * m.transpose() + &b;
    let n = 1000;
    let h = t / n as f64;
    let mut e = model.s0().clone();
    for _ in 0..n {
        let k1 = f(&e);
        let k2 = f(&(&e + &k1 * (h / 2.0)));
        let k3 = f(&(&e + &k2 * (h / 2.0)));
        let k4 = f(&(&e + &k3 * h));
        e += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    e
}

#[test]
fn jacobi_diagonalizes() {
    let a0 = [4.0, 1.0, -2.0, 1.0, 3.0, 0.5, -2.0, 0.5, -1.0];
    let mut a = a0;
    let mut v = [0.0; 9];
    jacobi_eigen(&mut a, &mut v, 3);
    let vm = RMat::from_row_slice(3, 3, &v);
    let lm = RMat::from_diagonal(&nalgebra::dvector![a[0], a[4], a[8]]);
    let back = &vm * lm * vm.transpose();
    assert!((back - RMat::from_row_slice(3, 3, &a0)).norm() < 1e-13);
    assert!((vm.transpose() * &vm - RMat::identity(3, 3)).norm() < 1e-14);
}

#[test]
fn zero_weights_give_exactly_one() {
    let q = LaplaceQuery::new(RMat::zeros(2, 2), RMat::zeros(2, 2), 1.0).unwrap();
    let r = mc_laplace(&reference_model(), &q, &quick(200, 1e-2, 3)).unwrap();
    assert_eq!(r.estimate, 1.0);
    assert_eq!(r.stderr, 0.0);
}

#[test]
fn zero_horizon_is_exact() {
    let q = reference_query(0.0);
    let r = mc_laplace(&reference_model(), &q, &quick(200, 1e-2, 3)).unwrap();
    let want = libm::exp(-(presets::reference_w() * presets::reference_s0()).trace());
    assert!((r.estimate - want).abs() <= 1e-15);
    assert_eq!(r.stderr, 0.0);
}

#[test]
fn same_seed_is_bit_identical() {
    let q = reference_query(0.5);
    let a = mc_laplace(&reference_model(), &q, &quick(300, 1e-2, 42)).unwrap();
    let b = mc_laplace(&reference_model(), &q, &quick(300, 1e-2, 42)).unwrap();
    let c = mc_laplace(&reference_model(), &q, &quick(300, 1e-2, 43)).unwrap();
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    assert_ne!(a.estimate, c.estimate);
}

#[test]
fn per_path_samples_match_the_ensemble() {
    let model = reference_model();
    let q = reference_query(0.5);
    let cfg = quick(100, 1e-2, 7);
    let samples: Vec<f64> = (0..100).map(|p| laplace_sample(&model, &q, &cfg, p).unwrap().0).collect();
    let whole = mc_laplace(&model, &q, &cfg).unwrap();
    assert_eq!(summarize(&samples, 0, 50).estimate.to_bits(), whole.estimate.to_bits());
    let path = simulate_path(&model, 0.5, &cfg, 17).unwrap();
    let expo = (q.w.clone() * &path.terminal).trace() + (q.v.clone() * &path.integral).trace();
    assert!((libm::exp(-expo) - samples[17]).abs() < 1e-15);
}

#[test]
fn deterministic_limit_follows_the_moment_flow() {
    // Q -> 0 with alpha Q^T Q fixed: the noise vanishes.
    let q = RMat::identity(2, 2) * 1e-3;
    let model = WishartModel::new(presets::reference_s0(), presets::reference_m(), q, Gindikin::Scalar(1e4)).unwrap();
    let want = moment_ode(&model, 1.0);
    let path = simulate_path(&model, 1.0, &quick(100, 1e-3, 1), 0).unwrap();
    assert!((path.terminal - &want).amax() <= 1e-3);
    let s = simulate_paths(&model, 1.0, &quick(100, 1e-3, 1)).unwrap();
    assert!((s.mean_terminal - want).amax() <= 1e-3);
    assert_eq!(s.clip_fraction, 0.0);
}

#[test]
fn scalar_mean_matches_closed_form() {
    let (m, q, alpha, s0, t) = (-0.5, 0.3, 3.0, 0.05, 1.0);
    let model = WishartModel::new(dmatrix![s0], dmatrix![m], dmatrix![q], Gindikin::Scalar(alpha)).unwrap();
    let g = libm::exp(2.0 * m * t);
    let want = g * s0 + alpha * q * q * (g - 1.0) / (2.0 * m);
    let s = simulate_paths(&model, t, &quick(20_000, 2e-3, 11)).unwrap();
    let (mean, se) = (s.mean_terminal[(0, 0)], s.stderr_terminal[(0, 0)]);
    assert!((mean - want).abs() <= 3.0 * se, "{mean} vs {want} (se {se})");
}

#[test]
fn matrix_mean_matches_moment_ode() {
    let model = reference_model();
    let want = moment_ode(&model, 1.0);
    let s = simulate_paths(&model, 1.0, &quick(20_000, 1e-2, 5)).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let (m, se) = (s.mean_terminal[(i, j)], s.stderr_terminal[(i, j)]);
            assert!((m - want[(i, j)]).abs() <= 3.0 * se, "({i},{j}): {m} vs {} (se {se})", want[(i, j)]);
        }
    }
}

#[test]
fn laplace_matches_reference_value() {
    let r = mc_laplace(&reference_model(), &reference_query(1.0), &quick(20_000, 1e-2, 2024)).unwrap();
    assert!((r.estimate - 0.985698139368470).abs() <= 3.0 * r.stderr, "{r:?}");
}

#[test]
fn bias_shrinks_with_the_step() {
    let model = WishartModel::new(dmatrix![0.5], dmatrix![-2.0], dmatrix![0.5], Gindikin::Scalar(2.0)).unwrap();
    let q = LaplaceQuery::new(dmatrix![1.0], dmatrix![1.0], 1.0).unwrap();
    let exact = cm_transform(&model, &q).unwrap().value;
    let mean_err = |h: f64| -> f64 {
        (0..5)
            .map(|seed| (mc_laplace(&model, &q, &quick(5_000, h, seed)).unwrap().estimate - exact).abs())
            .sum::<f64>()
            / 5.0
    };
    let (coarse, fine) = (mean_err(0.2), mean_err(0.1));
    assert!(coarse >= fine, "{coarse} vs {fine}");
}

#[test]
fn clipping_is_reported_near_the_boundary() {
    let model = WishartModel::new(RMat::identity(2, 2) * 0.01, RMat::zeros(2, 2), RMat::identity(2, 2), Gindikin::Scalar(1.0)).unwrap();
    let s = simulate_paths(&model, 1.0, &quick(100, 1e-2, 9)).unwrap();
    assert!(s.clip_fraction > 0.0);
}

#[test]
fn config_validation() {
    assert!(McConfig::default().validate().is_ok());
    assert!(quick(99, 1e-3, 0).validate().is_err());
    assert!(quick(100, 0.0, 0).validate().is_err());
    assert_eq!(step_count(1.0, 1e-3), 1000);
    assert_eq!(step_count(0.3, 0.1), 3);
    assert_eq!(step_count(0.25, 0.1), 3);
}

proptest! {
    #![proptest_config(config(0x5eed_0006))]

    #[test]
    fn jacobi_reconstructs(a in symmetric(5, 3.0)) {
        let d = a.nrows();
        let mut flat: Vec<f64> = (0..d * d).map(|e| a[(e / d, e % d)]).collect();
        let mut v = vec![0.0; d * d];
        jacobi_eigen(&mut flat, &mut v, d);
        let vm = RMat::from_row_slice(d, d, &v);
        let lm = RMat::from_diagonal(&nalgebra::DVector::from_fn(d, |i, _| flat[i * d + i]));
        prop_assert!((&vm * lm * vm.transpose() - &a).norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn estimates_lie_in_unit_interval(w in psd(2, 1.0), v in psd(2, 1.0), t in 0.0f64..2.0, seed in any::<u64>()) {
        let q = LaplaceQuery::new(w, v, t).unwrap();
        let r = mc_laplace(&reference_model(), &q, &quick(100, 0.1, seed)).unwrap();
        prop_assert!(r.estimate > 0.0 && r.estimate <= 1.0);
    }
}
