//! Regularized primal-dual SQP augmented with directions of negative curvature.
//!
//! The solver handles problems of the form
//!
//! ```text
//! minimize f(x)  subject to  c(x) = 0,  x >= 0
//! ```
//!
//! Each outer iteration factorizes the KKT matrix of the estimated free
//! variables with an inertia-controlling pivot rule. The leftover Schur
//! complement both convexifies the QP Hessian and yields a direction of
//! negative curvature. The QP step and the curvature step are combined in a
//! curvilinear backtracking search on a primal-dual augmented Lagrangian, so
//! iterates move off first-order saddle points instead of stalling there.
//!
//! ```
//! use ncsqp::driver::{solve, SolverConfig, Status};
//! use ncsqp::model::builtin;
//!
//! let problem = builtin("cosine-saddle").unwrap();
//! let start = problem.default_start();
//! let out = solve(problem.as_ref(), &start, &SolverConfig::default()).unwrap();
//! assert_eq!(out.status, Status::SecondOrderOptimal);
//! assert!((problem.objective(&out.iterate.x) + 1.0).abs() < 1e-6);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod classify;
pub mod cli;
pub mod curvature;
pub mod driver;
mod error;
pub mod factor;
mod linalg;
pub mod merit;
pub mod model;
pub mod oracle;
pub mod qpstep;
pub mod workset;

pub use error::{Error, Result};
