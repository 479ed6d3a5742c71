//! Independent reference computations used to check the solver's building
//! blocks: a cyclic Jacobi eigensolver, null-space bases from a one-sided
//! Jacobi SVD, eigenvalue-based inertia and exhaustive QP enumeration.
//!
//! Nothing here shares code paths with the factorization, curvature or QP
//! modules.

use nalgebra::{DMatrix, DVector};

use crate::factor::Inertia;
use crate::linalg::max_abs;
use crate::{Error, Result};

pub const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct EigenReport {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenReport {
    pub fn lambda_min(&self) -> f64 {
        if self.eigenvalues.is_empty() {
            f64::INFINITY
        } else {
            self.eigenvalues[0]
        }
    }

    /// Counts with zero tolerance `1e-10·max(1, max|λ|)`.
    pub fn inertia(&self) -> Inertia {
        let scale = self.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = 1e-10 * scale.max(1.0);
        let mut out = Inertia::default();
        for &v in self.eigenvalues.iter() {
            if v > tol {
                out.positive += 1;
            } else if v < -tol {
                out.negative += 1;
            } else {
                out.zero += 1;
            }
        }
        out
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn eigen(a: &DMatrix<f64>) -> Result<EigenReport> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    let off = |m: &DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if off(&m) <= 1e-14 * scale * n as f64 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off(&m) > 1e-14 * scale * n as f64 {
        return Err(Error::EigenNoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenReport { eigenvalues, eigenvectors })
}

pub fn lambda_min(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigen(a)?.lambda_min())
}

pub fn inertia_by_eigen(a: &DMatrix<f64>) -> Result<Inertia> {
    Ok(eigen(a)?.inertia())
}

/// Positive definiteness by smallest eigenvalue, relative to the matrix scale.
pub fn is_positive_definite(a: &DMatrix<f64>) -> Result<bool> {
    if a.is_empty() {
        return Ok(true);
    }
    Ok(lambda_min(a)? > 1e-12 * max_abs(a).max(1.0))
}

/// Orthonormal basis of `{z : J z = 0}` via one-sided Jacobi on the columns of
/// `J`. Singular values at or below `1e-10·σ_max` count as zero.
pub fn nullspace_basis(j: &DMatrix<f64>) -> DMatrix<f64> {
    let n = j.ncols();
    if j.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let mut a = j.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..a.nrows() {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..n).map(|k| a.column(k).norm()).collect();
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n).filter(|&k| sigma[k] <= 1e-10 * sigma_max).collect();
    DMatrix::from_fn(n, keep.len(), |r, c| v[(r, keep[c])])
}

/// Exhaustive solution of
///
/// ```text
/// minimize gᵀd + ½dᵀHd  subject to  x + d[..n] >= 0
/// ```
///
/// over every subset of active bounds. Returns the best KKT point (primal
/// feasible, bound multipliers nonnegative) and its objective value.
pub fn brute_force_qp(h: &DMatrix<f64>, g: &DVector<f64>, x: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let total = h.nrows();
    let n = x.len();
    assert!(n <= 20, "enumeration is exponential in n");
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1u32 << n) {
        let active: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let free: Vec<usize> = (0..total).filter(|i| !active.contains(i)).collect();
        let mut d = DVector::zeros(total);
        for &i in &active {
            d[i] = -x[i];
        }
        // H_ff d_f = -(g_f + H_fa d_a)
        let hff = DMatrix::from_fn(free.len(), free.len(), |r, c| h[(free[r], free[c])]);
        let rhs = DVector::from_fn(free.len(), |r, _| {
            let i = free[r];
            -(g[i] + active.iter().map(|&a| h[(i, a)] * d[a]).sum::<f64>())
        });
        let df = if free.is_empty() {
            DVector::zeros(0)
        } else {
            let Some(df) = hff.lu().solve(&rhs) else { continue };
            df
        };
        for (r, &i) in free.iter().enumerate() {
            d[i] = df[r];
        }
        let feasible = (0..n).all(|i| x[i] + d[i] >= -1e-12);
        let grad = h * &d + g;
        let dual_ok = active.iter().all(|&i| grad[i] >= -1e-10);
        if !(feasible && dual_ok) {
            continue;
        }
        let obj = g.dot(&d) + 0.5 * d.dot(&(h * &d));
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((d, obj));
        }
    }
    best
}
