//! Compiled-in test problems with first-order saddle points.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{Iterate, NlpProblem};

/// `f = x₁x₂` subject to `x₁ + x₂ = 2`, `x >= 0`.
///
/// `(1, 1)` with `y = 1` is a KKT point but a saddle on the constraint line;
/// the second-order points are the vertices `(2, 0)` and `(0, 2)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SaddleLine;

impl NlpProblem for SaddleLine {
    fn name(&self) -> &str {
        "saddle-line"
    }
    fn num_vars(&self) -> usize {
        2
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        x[0] * x[1]
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[1], x[0]])
    }
    fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x[0] + x[1] - 2.0)
    }
    fn jacobian(&self, _: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 2, &[1.0, 1.0])
    }
    fn hessian(&self, _: &DVector<f64>, _: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }
    fn default_start(&self) -> Iterate {
        Iterate::from_slices(&[1.0, 1.0], &[1.0])
    }
}

/// `f = cos(x₁) + (x₂ − 1)²`, unconstrained apart from `x >= 0`.
///
/// `(2π, 1)` is a stationary saddle; `(π, 1)` and `(3π, 1)` are minimizers
/// with `f = −1`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CosineSaddle;

impl NlpProblem for CosineSaddle {
    fn name(&self) -> &str {
        "cosine-saddle"
    }
    fn num_vars(&self) -> usize {
        2
    }
    fn num_constraints(&self) -> usize {
        0
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        x[0].cos() + (x[1] - 1.0).powi(2)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![-x[0].sin(), 2.0 * (x[1] - 1.0)])
    }
    fn constraints(&self, _: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn jacobian(&self, _: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(0, 2)
    }
    fn hessian(&self, x: &DVector<f64>, _: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-x[0].cos(), 0.0, 0.0, 2.0])
    }
    fn default_start(&self) -> Iterate {
        Iterate::from_slices(&[2.0 * PI, 1.0], &[])
    }
}

/// Strictly convex QP `½xᵀQx − bᵀx` subject to `x₁ + x₂ + x₃ = 1`, `x >= 0`.
///
/// The solution is `x = (0.6, 0.4, 0)`, `y = −0.2`, `f = −1.4`, with the bound
/// on `x₃` strongly active.
#[derive(Clone, Debug)]
pub struct ConvexQp {
    q: DMatrix<f64>,
    b: DVector<f64>,
}

impl Default for ConvexQp {
    fn default() -> Self {
        Self {
            q: DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]),
            b: DVector::from_vec(vec![3.0, 2.0, -1.0]),
        }
    }
}

impl NlpProblem for ConvexQp {
    fn name(&self) -> &str {
        "convex-qp"
    }
    fn num_vars(&self) -> usize {
        3
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) - self.b.dot(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x - &self.b
    }
    fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x.sum() - 1.0)
    }
    fn jacobian(&self, _: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 3, 1.0)
    }
    fn hessian(&self, _: &DVector<f64>, _: &DVector<f64>) -> DMatrix<f64> {
        self.q.clone()
    }
    fn default_start(&self) -> Iterate {
        Iterate::from_slices(&[1.0 / 3.0; 3], &[0.0])
    }
}

/// Names and one-line descriptions of the compiled-in problems.
pub fn builtin_catalog() -> &'static [(&'static str, &'static str)] {
    &[
        ("saddle-line", "x1*x2 s.t. x1+x2=2, x>=0; KKT saddle at (1,1), minima at the vertices"),
        ("cosine-saddle", "cos(x1)+(x2-1)^2, x>=0; saddle at (2pi,1), minima at (pi,1) and (3pi,1)"),
        ("convex-qp", "strictly convex 3-variable QP with one equality; solution (0.6,0.4,0)"),
    ]
}

/// Looks up a compiled-in problem by name.
pub fn builtin(name: &str) -> Option<Box<dyn NlpProblem>> {
    match name {
        "saddle-line" => Some(Box::new(SaddleLine)),
        "cosine-saddle" => Some(Box::new(CosineSaddle)),
        "convex-qp" => Some(Box::new(ConvexQp::default())),
        _ => None,
    }
}
