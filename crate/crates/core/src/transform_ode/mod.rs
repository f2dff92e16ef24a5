//! Alternative evaluations of the transform: linear Hamiltonian flow,
//! variation of constants around the algebraic Riccati solution, and
//! fourth-order Runge-Kutta, plus the algebraic Riccati solvers.

mod are;
mod linearization;
mod rk4;
mod vc;

pub use are::{are_closed_form, are_residual, are_schur, closed_loop, closed_loop_abscissa, solve_are};
pub use linearization::{flow_blocks, linearization_transform, FlowBlocks};
pub use rk4::rk4_transform;
pub use vc::{nodes as quadrature_nodes, variation_of_constants_transform, ACCURACY_TARGET};

use crate::error::Result;
use crate::matfun::{BranchTracker, Scalar};
use crate::model::{LaplaceQuery, WishartModel};
use crate::riccati::{Method, MethodConfig, RiccatiProblem, TransformResult};
use crate::transform_cm::ClosedForm;

/// Evaluate `prob` at `t` with the method selected in `config`.
pub fn transform_with<T: Scalar>(
    prob: &RiccatiProblem<T>,
    t: f64,
    config: &MethodConfig,
    tracker: Option<&mut BranchTracker>,
) -> Result<TransformResult<T>> {
    match config.method {
        Method::CameronMartin => ClosedForm::new(prob.clone())?.evaluate(t, tracker),
        Method::Linearization => linearization_transform(prob, t, tracker),
        Method::VariationOfConstants => variation_of_constants_transform(prob, t, config),
        Method::RungeKutta4 => rk4_transform(prob, t, config),
    }
}

/// Evaluate a real query with the method selected in `config`.
pub fn transform(model: &WishartModel, query: &LaplaceQuery, config: &MethodConfig) -> Result<TransformResult> {
    let prob = RiccatiProblem::from_query(model, query)?;
    transform_with(&prob, query.t, config, None)
}

#[cfg(test)]
mod tests;
