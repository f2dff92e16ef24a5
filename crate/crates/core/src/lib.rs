//! Joint Laplace transform of a Wishart process and its time integral.
//!
//! The crate is `no_std` with `alloc`. Matrices are `nalgebra::DMatrix`
//! over `f64` or `Complex64`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod matfun;
pub mod model;
pub mod presets;
pub mod pricing;
pub mod riccati;
pub mod simulate;
pub mod transform_cm;
pub mod transform_ode;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use model::{Gindikin, LaplaceQuery, WishartModel};
pub use riccati::{AreSolver, Diagnostics, Method, MethodConfig, RiccatiProblem, TransformResult, Warning};
