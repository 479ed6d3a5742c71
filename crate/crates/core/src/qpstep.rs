//! Convex bound-constrained QP for the primal-dual step `Δv = (p, q)`:
//!
//! ```text
//! minimize ∇Mᵀ Δv + ½ Δvᵀ H_M Δv   subject to  x + p >= 0
//! ```
//!
//! Solved by a primal active-set method that adds or drops one bound per
//! iteration, so complementarity `min(x + p, z) = 0` holds exactly on return.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub const DEFAULT_QP_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct QpStep {
    /// Primal step.
    pub p: DVector<f64>,
    /// Dual step.
    pub q: DVector<f64>,
    /// Bound multipliers, zero off the final active set.
    pub z: DVector<f64>,
    pub kkt_residual: f64,
    /// `∇Mᵀ Δv + ½ Δvᵀ H_M Δv`.
    pub objective: f64,
    pub iterations: usize,
}

impl QpStep {
    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            p: DVector::zeros(n),
            q: DVector::zeros(m),
            z: DVector::zeros(n),
            kkt_residual: 0.0,
            objective: 0.0,
            iterations: 0,
        }
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.p.len();
        DVector::from_fn(n + self.q.len(), |i, _| if i < n { self.p[i] } else { self.q[i - n] })
    }

    pub fn is_zero(&self) -> bool {
        self.p.iter().chain(self.q.iter()).all(|&v| v == 0.0)
    }
}

/// Independent residual check of a QP solution: stationarity of
/// `(z, 0) = H Δv + g`, primal feasibility, dual feasibility and
/// complementarity, as an infinity norm.
pub fn optimality_residual(h: &DMatrix<f64>, grad: &DVector<f64>, x: &DVector<f64>, step: &QpStep) -> f64 {
    let n = x.len();
    let dv = step.stacked();
    let r = h * &dv + grad;
    let mut worst = 0.0f64;
    for i in 0..r.len() {
        let zi = if i < n { step.z[i] } else { 0.0 };
        worst = worst.max((r[i] - zi).abs());
    }
    for i in 0..n {
        let slack = x[i] + step.p[i];
        worst = worst.max((-slack).max(0.0));
        worst = worst.max((-step.z[i]).max(0.0));
        worst = worst.max(slack.min(step.z[i]).abs());
    }
    worst
}

/// Minimizes the QP from the feasible point that puts every bound in
/// `initial_active` exactly at zero.
pub fn solve_qp(
    h: &DMatrix<f64>,
    grad: &DVector<f64>,
    x: &DVector<f64>,
    initial_active: &[usize],
    tol: f64,
) -> Result<QpStep> {
    let total = h.nrows();
    let n = x.len();
    if h.ncols() != total || grad.len() != total || n > total {
        return Err(Error::DimensionMismatch {
            context: "QP data",
            expected: total,
            found: grad.len(),
        });
    }
    if x.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("QP base point violates x >= 0".into()));
    }

    let mut s = DVector::zeros(total);
    let mut active = vec![false; n];
    for &i in initial_active {
        active[i] = true;
        s[i] = -x[i];
    }
    let scale = 1.0 + grad.amax();
    let max_iter = 100 * total.max(1);

    for iter in 0..max_iter {
        let free: Vec<usize> = (0..total).filter(|&i| i >= n || !active[i]).collect();
        let q_grad = h * &s + grad;
        let hff = DMatrix::from_fn(free.len(), free.len(), |r, c| h[(free[r], free[c])]);
        let rhs = DVector::from_fn(free.len(), |r, _| -q_grad[free[r]]);
        let chol = hff.cholesky().ok_or(Error::QpIndefinite)?;
        let d = chol.solve(&rhs);

        // Ratio test against the free primal bounds.
        let mut t = 1.0;
        let mut blocking = None;
        for (r, &i) in free.iter().enumerate() {
            if i < n && d[r] < 0.0 {
                let ti = (x[i] + s[i]).max(0.0) / -d[r];
                if ti < t {
                    t = ti;
                    blocking = Some(i);
                }
            }
        }
        for (r, &i) in free.iter().enumerate() {
            s[i] += t * d[r];
        }
        if let Some(i) = blocking {
            active[i] = true;
            s[i] = -x[i];
            continue;
        }

        // Subspace minimizer reached: check bound multipliers.
        let q_grad = h * &s + grad;
        let worst = (0..n)
            .filter(|&i| active[i])
            .min_by(|&a, &b| q_grad[a].total_cmp(&q_grad[b]));
        match worst {
            Some(i) if q_grad[i] < -tol * scale => {
                active[i] = false;
            }
            _ => {
                let z = DVector::from_fn(n, |i, _| if active[i] { q_grad[i].max(0.0) } else { 0.0 });
                let mut step = QpStep {
                    p: s.rows(0, n).into_owned(),
                    q: s.rows(n, total - n).into_owned(),
                    z,
                    kkt_residual: 0.0,
                    objective: grad.dot(&s) + 0.5 * s.dot(&(h * &s)),
                    iterations: iter + 1,
                };
                step.kkt_residual = optimality_residual(h, grad, x, &step);
                return Ok(step);
            }
        }
    }
    let q_grad = h * &s + grad;
    Err(Error::QpIterationLimit {
        iterations: max_iter,
        residual: q_grad.amax(),
    })
}
