use thiserror::Error;

use crate::factor::Stage1Factor;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("evaluation of {quantity} produced a non-finite value")]
    EvaluationFailure { quantity: &'static str },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stage-1 factorization broke down after {pivoted} pivots: {reason}")]
    FactorBreakdown {
        pivoted: usize,
        reason: String,
        partial: Box<Stage1Factor>,
    },
    #[error("line search failed after {backtracks} backtracks (merit {merit0:e}, N = {n_k:e}, R = {r_k:e})")]
    LineSearchFailure {
        backtracks: usize,
        merit0: f64,
        n_k: f64,
        r_k: f64,
    },
    #[error("QP solver hit the iteration cap ({iterations}) with residual {residual:e}")]
    QpIterationLimit { iterations: usize, residual: f64 },
    #[error("QP Hessian is not positive definite on the free subspace (convexification bug)")]
    QpIndefinite,
    #[error("Jacobi eigensolver did not converge in {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },
}
