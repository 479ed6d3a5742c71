//! Directions of negative curvature taken from the stage-1 Schur complement.
//!
//! With `ρ = max|S_ij|` attained at `(q, r)`, the Schur-block vector is
//! `√ρ·h` with `h = e_q` when `q = r` and `h = (e_q − sgn(S_qr)e_r)/√2`
//! otherwise. Solving `Lᵀd = (0, √ρ·h)` lifts it to the whole KKT system so
//! that `dᵀ(P K_F Pᵀ)d = ρ·hᵀSh`, and the primal part of `d` is a direction of
//! negative curvature for `H_F + (1/μ)J_FᵀJ_F`.

use nalgebra::DVector;

use crate::factor::{solve_unit_upper_transposed, Stage1Factor};
use crate::linalg::max_abs;
use crate::workset::{Part, WorkingSet};
use crate::Result;

/// `ρ` at or below `RHO_TOLERANCE·(1 + ‖H_F‖max)` means no direction.
pub const RHO_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_U_MAX: f64 = 1e3;

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureDirection {
    /// Primal direction in `ℝⁿ`, zero on the working set.
    pub u_hat: DVector<f64>,
    /// `−(1/μ)J û`.
    pub w_hat: DVector<f64>,
    /// `ûᵀ(H + (1/μ)JᵀJ)û` over the free variables.
    pub curvature_b: f64,
    /// `curvature_b / ‖û‖²`, or 0 when no direction exists.
    pub rayleigh: f64,
    pub rho: f64,
    pub pivot: Option<(usize, usize)>,
    pub exists: bool,
}

impl CurvatureDirection {
    pub fn none(n: usize, m: usize) -> Self {
        Self {
            u_hat: DVector::zeros(n),
            w_hat: DVector::zeros(m),
            curvature_b: 0.0,
            rayleigh: 0.0,
            rho: 0.0,
            pivot: None,
            exists: false,
        }
    }

    /// Stacked `(û, ŵ)`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.u_hat.len();
        DVector::from_fn(n + self.w_hat.len(), |i, _| {
            if i < n {
                self.u_hat[i]
            } else {
                self.w_hat[i - n]
            }
        })
    }
}

/// Location and value of the largest-magnitude entry of `S` (lower triangle,
/// first occurrence).
fn largest_entry(s: &nalgebra::DMatrix<f64>) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for j in 0..s.ncols() {
        for i in j..s.nrows() {
            let v = s[(i, j)].abs();
            if best.is_none_or(|(_, _, b)| v > b) {
                best = Some((j, i, v));
            }
        }
    }
    best
}

pub fn extract_direction(factor: &Stage1Factor, workset: &WorkingSet) -> Result<CurvatureDirection> {
    let kkt = factor.kkt();
    let (nf, m) = (kkt.num_primal(), kkt.num_dual());
    let n = workset.dim();
    let none = CurvatureDirection::none(n, m);

    let s = factor.schur();
    let Some((q, r, rho)) = largest_entry(s) else {
        return Ok(none);
    };
    if rho <= RHO_TOLERANCE * (1.0 + max_abs(kkt.hessian())) {
        return Ok(none);
    }

    let ns = s.nrows();
    let mut h = DVector::zeros(ns);
    if q == r {
        h[q] = 1.0;
    } else {
        let sgn = if s[(q, r)] >= 0.0 { 1.0 } else { -1.0 };
        h[q] = std::f64::consts::FRAC_1_SQRT_2;
        h[r] = -sgn * std::f64::consts::FRAC_1_SQRT_2;
    }
    if h.dot(&(s * &h)) >= 0.0 {
        return Ok(none);
    }

    let np = factor.num_pivoted();
    let mut t = DVector::zeros(np + ns);
    t.rows_mut(np, ns).copy_from(&(h * rho.sqrt()));
    let d = solve_unit_upper_transposed(factor.l(), &t);

    let mut u_free = DVector::zeros(nf);
    for (k, &row) in factor.perm().iter().enumerate() {
        if row < nf {
            u_free[row] = d[k];
        }
    }

    let j_u = kkt.jacobian() * &u_free;
    let curvature_b = u_free.dot(&(kkt.hessian() * &u_free)) + j_u.norm_squared() / kkt.mu();
    if !(curvature_b < 0.0) {
        return Ok(none);
    }
    let u_hat = workset.extend(&u_free, Part::Free)?;
    let w_hat = -j_u / kkt.mu();
    Ok(CurvatureDirection {
        rayleigh: curvature_b / u_free.norm_squared(),
        u_hat,
        w_hat,
        curvature_b,
        rho,
        pivot: Some((factor.schur_rows()[q], factor.schur_rows()[r])),
        exists: true,
    })
}

/// Flips `(û, ŵ)` if needed so that it is not an ascent direction for the
/// merit function.
pub fn orient(direction: CurvatureDirection, grad_merit: &DVector<f64>) -> CurvatureDirection {
    if !direction.exists || grad_merit.dot(&direction.stacked()) <= 0.0 {
        return direction;
    }
    CurvatureDirection {
        u_hat: -direction.u_hat,
        w_hat: -direction.w_hat,
        ..direction
    }
}

/// The curvature step actually taken: `(u, w) = β(û, ŵ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledStep {
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    pub beta: f64,
    pub u_max: f64,
}

impl ScaledStep {
    pub fn zero(n: usize, m: usize, u_max: f64) -> Self {
        Self {
            u: DVector::zeros(n),
            w: DVector::zeros(m),
            beta: 0.0,
            u_max,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.beta == 0.0 || self.u.iter().all(|&v| v == 0.0)
    }
}

/// Largest `β` with `x + p + βû >= 0` and `‖βû‖ <= max(u_max, 2‖p‖)`.
pub fn scale(direction: &CurvatureDirection, x: &DVector<f64>, p: &DVector<f64>, u_max: f64) -> ScaledStep {
    let (n, m) = (direction.u_hat.len(), direction.w_hat.len());
    let norm = direction.u_hat.norm();
    if !direction.exists || norm == 0.0 {
        return ScaledStep::zero(n, m, u_max);
    }
    let mut beta = u_max.max(2.0 * p.norm()) / norm;
    for i in 0..n {
        let ui = direction.u_hat[i];
        if ui < 0.0 {
            let room = (x[i] + p[i]).max(0.0);
            beta = beta.min(room / -ui);
        }
    }
    if beta == 0.0 {
        return ScaledStep::zero(n, m, u_max);
    }
    ScaledStep {
        u: &direction.u_hat * beta,
        w: &direction.w_hat * beta,
        beta,
        u_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{stage1_factorize, KktSystem};
    use crate::oracle;
    use crate::workset::estimate;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn mat(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    fn all_free(n: usize) -> WorkingSet {
        estimate(&DVector::from_element(n, 1.0), 0.1, 0.1)
    }

    fn kkt_quadratic_form(f: &Stage1Factor, dir: &CurvatureDirection, ws: &WorkingSet) -> f64 {
        let kkt = f.kkt();
        let u = ws.restrict_vector(&dir.u_hat, Part::Free).unwrap();
        let d = kkt.jacobian() * &u / kkt.mu();
        let mut full = DVector::zeros(kkt.dim());
        full.rows_mut(0, u.len()).copy_from(&u);
        full.rows_mut(u.len(), d.len()).copy_from(&d);
        full.dot(&(kkt.assemble() * &full))
    }

    #[test]
    fn scalar_schur_direction() {
        let kkt = KktSystem::new(mat(2, 2, &[0.0, 1.0, 1.0, 0.0]), mat(1, 2, &[1.0, 1.0]), 1.0).unwrap();
        let f = stage1_factorize(&kkt).unwrap();
        let ws = all_free(2);
        let dir = extract_direction(&f, &ws).unwrap();
        assert!(dir.exists);
        assert_abs_diff_eq!(dir.rho, 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(kkt_quadratic_form(&f, &dir, &ws), -9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dir.curvature_b, -9.0, epsilon = 1e-12);
        // λ_min(H + JᵀJ) = −1 bounds the Rayleigh quotient from below.
        assert!(dir.rayleigh >= -1.0 - 1e-12 && dir.rayleigh < 0.0);
        assert!((&dir.w_hat + kkt.jacobian() * &dir.u_hat / kkt.mu()).amax() == 0.0);
    }

    #[test]
    fn off_diagonal_pivot_direction() {
        let s = mat(2, 2, &[-1.0, 2.0, 2.0, -1.0]);
        let kkt = KktSystem::new(s.clone(), DMatrix::zeros(0, 2), 1.0).unwrap();
        let f = stage1_factorize(&kkt).unwrap();
        let dir = extract_direction(&f, &all_free(2)).unwrap();
        assert_eq!(dir.pivot, Some((0, 1)));
        assert_abs_diff_eq!(dir.rho, 2.0);
        // u = √2 · (e₁ − e₂)/√2, so uᵀSu = 2 · hᵀSh = 2 · (−3).
        assert_abs_diff_eq!(dir.u_hat[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dir.u_hat[1], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dir.curvature_b, -6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dir.rayleigh, -3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(oracle::lambda_min(&s).unwrap(), -3.0, epsilon = 1e-13);
    }

    #[test]
    fn empty_schur_gives_no_direction() {
        let kkt = KktSystem::new(mat(2, 2, &[2.0, 0.0, 0.0, 3.0]), mat(1, 2, &[1.0, 0.0]), 0.5).unwrap();
        let f = stage1_factorize(&kkt).unwrap();
        let dir = extract_direction(&f, &all_free(2)).unwrap();
        assert!(!dir.exists);
        assert_eq!(dir.u_hat, DVector::zeros(2));
        assert_eq!(dir.w_hat, DVector::zeros(1));
    }

    #[test]
    fn direction_vanishes_on_active_set() {
        // x₀ active; free block is the indefinite 2×2 on (x₁, x₂).
        let x = DVector::from_vec(vec![0.0, 1.0, 1.0]);
        let ws = estimate(&x, 0.1, 0.1);
        let h = mat(3, 3, &[5.0, 1.0, 1.0, 1.0, -1.0, 2.0, 1.0, 2.0, -1.0]);
        let h_f = ws.restrict_symmetric(&h, Part::Free).unwrap();
        let kkt = KktSystem::new(h_f, DMatrix::zeros(0, 2), 1.0).unwrap();
        let dir = extract_direction(&stage1_factorize(&kkt).unwrap(), &ws).unwrap();
        assert!(dir.exists);
        assert_eq!(dir.u_hat[0], 0.0);
    }

    fn direction_with(u: &[f64], w: &[f64]) -> CurvatureDirection {
        CurvatureDirection {
            u_hat: DVector::from_column_slice(u),
            w_hat: DVector::from_column_slice(w),
            curvature_b: -1.0,
            rayleigh: -0.5,
            rho: 1.0,
            pivot: Some((0, 0)),
            exists: true,
        }
    }

    #[test]
    fn orientation_rule() {
        let d = direction_with(&[1.0, 0.0], &[0.5]);
        let g = DVector::from_vec(vec![0.1, 0.0, 0.4]);
        let flipped = orient(d.clone(), &g);
        assert_abs_diff_eq!(g.dot(&flipped.stacked()), -0.3, epsilon = 1e-15);
        assert_eq!(flipped.curvature_b, d.curvature_b);

        let g = -g;
        assert_eq!(orient(d.clone(), &g), d);

        let g = DVector::from_vec(vec![0.5, 1.0, -1.0]);
        assert_eq!(orient(d.clone(), &g), d);
    }

    #[test]
    fn scaling_examples() {
        let zero = DVector::zeros(2);
        let d = direction_with(&[-1.0, 0.0], &[]);
        let p = DVector::from_vec(vec![0.3, 0.0]);
        let x = DVector::from_vec(vec![0.2, 0.2]);
        // x + p = (0.5, 0.2); feasibility limits β to 0.5.
        let s = scale(&d, &x, &p, 10.0);
        assert_abs_diff_eq!(s.beta, 0.5);
        assert_eq!(s.u.as_slice(), &[-0.5, 0.0]);

        let s = scale(&d, &DVector::from_vec(vec![0.0, 1.0]), &zero, 10.0);
        assert_eq!(s.beta, 0.0);
        assert!(s.is_zero());

        let d = direction_with(&[1.0, 1.0], &[]);
        let p = DVector::from_vec(vec![0.1, 0.0]);
        let x = DVector::from_vec(vec![4.9, 5.0]);
        let s = scale(&d, &x, &p, 1.0);
        assert_abs_diff_eq!(s.beta, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn scaling_respects_twice_qp_step() {
        let d = direction_with(&[0.0, 2.0], &[1.0]);
        let p = DVector::from_vec(vec![3.0, 4.0]);
        let s = scale(&d, &DVector::from_element(2, 1.0), &p, 1.0);
        assert_abs_diff_eq!(s.u.norm(), 10.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.w[0], 5.0, epsilon = 1e-14);
    }
}
