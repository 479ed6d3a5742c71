//! Problem definitions: `min f(x)` subject to `c(x) = 0`, `x >= 0`, with exact
//! first and second derivatives.

mod builtin;
mod polynomial;

pub use builtin::{builtin, builtin_catalog, ConvexQp, CosineSaddle, SaddleLine};
pub use polynomial::{Monomial, Polynomial, PolynomialProblem};

use nalgebra::{DMatrix, DVector};

use crate::linalg::all_finite;
use crate::{Error, Result};

/// A smooth nonlinear program with nonnegativity bounds on every variable.
///
/// Implementations must be immutable after construction; evaluation is
/// reentrant so one problem may be shared between concurrent solves.
pub trait NlpProblem: Send + Sync {
    fn name(&self) -> &str;
    fn num_vars(&self) -> usize;
    fn num_constraints(&self) -> usize;

    fn objective(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn constraints(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `m × n` constraint Jacobian.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// `∇²f(x) + Σ yᵢ ∇²cᵢ(x)`. The solver calls it with `−y`; see
    /// [`lagrangian_hessian`].
    fn hessian(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64>;

    fn default_start(&self) -> Iterate;
}

/// Primal-dual point `v = (x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl Iterate {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        Self { x, y }
    }

    pub fn from_slices(x: &[f64], y: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(x), DVector::from_column_slice(y))
    }

    /// Stacked vector `(x, y)`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.x.len();
        DVector::from_fn(n + self.y.len(), |i, _| {
            if i < n {
                self.x[i]
            } else {
                self.y[i - n]
            }
        })
    }

    pub fn from_stacked(v: &DVector<f64>, n: usize) -> Self {
        Self::new(v.rows(0, n).into_owned(), v.rows(n, v.len() - n).into_owned())
    }
}

/// All problem quantities at one primal-dual point.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub f: f64,
    pub c: DVector<f64>,
    pub g: DVector<f64>,
    pub j: DMatrix<f64>,
    /// Hessian of `f − yᵀc`, the Lagrangian whose gradient `g − Jᵀy` the
    /// solver drives to zero.
    pub h: DMatrix<f64>,
}

/// `∇²f(x) − Σ yᵢ∇²cᵢ(x)`, i.e. [`NlpProblem::hessian`] at `−y`.
pub fn lagrangian_hessian(problem: &dyn NlpProblem, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    problem.hessian(x, &-y)
}

fn check_dims(problem: &dyn NlpProblem, iterate: &Iterate) -> Result<()> {
    if iterate.x.len() != problem.num_vars() {
        return Err(Error::DimensionMismatch {
            context: "primal iterate",
            expected: problem.num_vars(),
            found: iterate.x.len(),
        });
    }
    if iterate.y.len() != problem.num_constraints() {
        return Err(Error::DimensionMismatch {
            context: "dual iterate",
            expected: problem.num_constraints(),
            found: iterate.y.len(),
        });
    }
    Ok(())
}

/// Evaluates `f`, `c`, `g`, `J` and the Hessian of `f − yᵀc` at `iterate`.
pub fn evaluate(problem: &dyn NlpProblem, iterate: &Iterate) -> Result<Evaluation> {
    check_dims(problem, iterate)?;
    let x = &iterate.x;
    let f = problem.objective(x);
    if !f.is_finite() {
        return Err(Error::EvaluationFailure { quantity: "objective" });
    }
    let c = problem.constraints(x);
    if !all_finite(c.iter()) {
        return Err(Error::EvaluationFailure { quantity: "constraints" });
    }
    let g = problem.gradient(x);
    if !all_finite(g.iter()) {
        return Err(Error::EvaluationFailure { quantity: "gradient" });
    }
    let j = problem.jacobian(x);
    if !all_finite(j.iter()) {
        return Err(Error::EvaluationFailure { quantity: "jacobian" });
    }
    let h = lagrangian_hessian(problem, x, &iterate.y);
    if !all_finite(h.iter()) {
        return Err(Error::EvaluationFailure { quantity: "hessian" });
    }
    let (n, m) = (problem.num_vars(), problem.num_constraints());
    if c.len() != m || g.len() != n {
        return Err(Error::DimensionMismatch {
            context: "evaluator output",
            expected: if c.len() != m { m } else { n },
            found: if c.len() != m { c.len() } else { g.len() },
        });
    }
    if j.shape() != (m, n) || h.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "derivative matrix shape",
            expected: n,
            found: if h.shape() != (n, n) { h.nrows() } else { j.ncols() },
        });
    }
    Ok(Evaluation { f, c, g, j, h })
}

/// Largest relative discrepancy per derivative block against central
/// differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeReport {
    pub gradient: f64,
    pub jacobian: f64,
    pub hessian: f64,
}

impl DerivativeReport {
    pub fn max_error(&self) -> f64 {
        self.gradient.max(self.jacobian).max(self.hessian)
    }
}

fn relative_error(exact: f64, approx: f64) -> f64 {
    (exact - approx).abs() / exact.abs().max(1.0)
}

/// Compares `g`, `J` and the Lagrangian Hessian with central differences of
/// `f`, `c` and `g − Jᵀy`.
pub fn check_derivatives(
    problem: &dyn NlpProblem,
    iterate: &Iterate,
    step: f64,
) -> Result<DerivativeReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step {step} must be positive")));
    }
    let eval = evaluate(problem, iterate)?;
    let n = problem.num_vars();
    let y = &iterate.y;
    let lagrangian_grad = |x: &DVector<f64>| problem.gradient(x) - problem.jacobian(x).transpose() * y;

    let mut report = DerivativeReport {
        gradient: 0.0,
        jacobian: 0.0,
        hessian: 0.0,
    };
    for k in 0..n {
        let mut xp = iterate.x.clone();
        let mut xm = iterate.x.clone();
        xp[k] += step;
        xm[k] -= step;

        let df = (problem.objective(&xp) - problem.objective(&xm)) / (2.0 * step);
        report.gradient = report.gradient.max(relative_error(eval.g[k], df));

        let dc = (problem.constraints(&xp) - problem.constraints(&xm)) / (2.0 * step);
        for i in 0..dc.len() {
            report.jacobian = report.jacobian.max(relative_error(eval.j[(i, k)], dc[i]));
        }

        let dg = (lagrangian_grad(&xp) - lagrangian_grad(&xm)) / (2.0 * step);
        for i in 0..n {
            report.hessian = report.hessian.max(relative_error(eval.h[(i, k)], dg[i]));
        }
    }
    for v in [report.gradient, report.jacobian, report.hessian] {
        if !v.is_finite() {
            return Err(Error::EvaluationFailure { quantity: "finite difference" });
        }
    }
    Ok(report)
}
