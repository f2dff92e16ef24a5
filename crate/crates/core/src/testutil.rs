use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

pub fn config(seed: u64) -> Config {
    Config {
        cases: 200,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    }
}

pub fn matrix(n: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-scale..scale, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
}

pub fn sized_matrix(max: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max).prop_flat_map(move |n| matrix(n, scale))
}

pub fn symmetric(max: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    sized_matrix(max, scale).prop_map(|a| (&a + a.transpose()) * 0.5)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn psd(n: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(n, 1.0).prop_map(move |a| &a * a.transpose() * (scale / n as f64))
}

/// Random model satisfying the commutation condition with a stable drift.
///
/// `A = L L^T + c I`, `M = A^-1 P - kappa I` with `P` symmetric, so that
/// `A M = P - kappa A` is symmetric; `Q` is the Cholesky construction.
pub fn commuting_model(n: usize) -> impl Strategy<Value = crate::model::WishartModel> {
    (
        matrix(n, 1.0),
        0.2f64..1.5,
        matrix(n, 0.5),
        0.05f64..0.8,
        psd(n, 1.0),
        0.0f64..3.0,
    )
        .prop_map(move |(l, c, p, kappa, s0, extra)| {
            let a = &l * l.transpose() + DMatrix::identity(n, n) * c;
            let p = (&p + p.transpose()) * 0.5;
            let a_inv = a.clone().try_inverse().unwrap();
            let shift = a_inv.norm() * p.norm() + kappa;
            let m = &a_inv * p - DMatrix::identity(n, n) * shift;
            let q = crate::model::build_q_from_a(&a, &m).unwrap();
            crate::model::WishartModel::new(
                s0,
                m,
                q,
                crate::model::Gindikin::Scalar(n as f64 + 1.0 + extra),
            )
            .unwrap()
        })
}
