//! Primal-dual augmented Lagrangian merit function
//!
//! ```text
//! M(x, y; yᴱ, μ) = f − cᵀyᴱ + ‖c‖²/(2μ) + ν‖c + μ(y − yᴱ)‖²/(2μ)
//! ```
//!
//! together with the curvilinear backtracking search along
//! `v + α(u, w) + α²Δv` and the penalty update.

use nalgebra::{DMatrix, DVector};

use crate::curvature::ScaledStep;
use crate::model::{Evaluation, Iterate};
use crate::qpstep::QpStep;
use crate::{Error, Result};

pub const DEFAULT_NU: f64 = 1.0;
pub const DEFAULT_ETA_S: f64 = 0.25;
pub const DEFAULT_ALPHA_MIN: f64 = 1e-2;
pub const DEFAULT_MAX_BACKTRACKS: usize = 50;

/// Slack allowed on the bounds along the search path before a trial point is
/// rejected; smaller violations are rounding and get clamped to zero.
const BOUND_SLACK: f64 = 1e-14;

/// One member of the merit family: fixed `yᴱ`, `μ` and `ν`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeritFunction {
    pub y_e: DVector<f64>,
    pub mu: f64,
    pub nu: f64,
}

impl MeritFunction {
    pub fn new(y_e: DVector<f64>, mu: f64, nu: f64) -> Self {
        Self { y_e, mu, nu }
    }

    /// `π = yᴱ − c/μ`.
    pub fn pi(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.y_e - c / self.mu
    }

    pub fn value(&self, eval: &Evaluation, iterate: &Iterate) -> f64 {
        let shifted = &eval.c + (&iterate.y - &self.y_e) * self.mu;
        eval.f - eval.c.dot(&self.y_e)
            + eval.c.norm_squared() / (2.0 * self.mu)
            + self.nu * shifted.norm_squared() / (2.0 * self.mu)
    }

    /// `(g − Jᵀ(π + ν(π − y)), νμ(y − π))`.
    pub fn gradient(&self, eval: &Evaluation, iterate: &Iterate) -> DVector<f64> {
        let n = eval.g.len();
        let pi = self.pi(&eval.c);
        let weights = &pi + (&pi - &iterate.y) * self.nu;
        let gx = &eval.g - eval.j.transpose() * weights;
        let gy = (&iterate.y - &pi) * (self.nu * self.mu);
        let mut out = DVector::zeros(n + gy.len());
        out.rows_mut(0, n).copy_from(&gx);
        out.rows_mut(n, gy.len()).copy_from(&gy);
        out
    }

    /// Multipliers at which the Lagrangian Hessian reproduces the exact
    /// `xx` block of the merit Hessian: `π + ν(π − y)`.
    pub fn hessian_multipliers(&self, eval: &Evaluation, iterate: &Iterate) -> DVector<f64> {
        let pi = self.pi(&eval.c);
        &pi + (&pi - &iterate.y) * self.nu
    }

    /// `[[H + (1+ν)/μ·JᵀJ, νJᵀ], [νJ, νμI]]` for a given Lagrangian Hessian.
    pub fn hessian(&self, j: &DMatrix<f64>, h_used: &DMatrix<f64>) -> DMatrix<f64> {
        let (m, n) = j.shape();
        let mut out = DMatrix::zeros(n + m, n + m);
        let jtj = j.transpose() * j;
        out.view_mut((0, 0), (n, n))
            .copy_from(&(h_used + jtj * ((1.0 + self.nu) / self.mu)));
        out.view_mut((0, n), (n, m)).copy_from(&(j.transpose() * self.nu));
        out.view_mut((n, 0), (m, n)).copy_from(&(j * self.nu));
        for i in 0..m {
            out[(n + i, n + i)] = self.nu * self.mu;
        }
        out
    }

    /// `Πᵀ M Π` for the stacked direction, computed blockwise.
    pub fn curvature(&self, j: &DMatrix<f64>, h_used: &DMatrix<f64>, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let ju = j * u;
        u.dot(&(h_used * u))
            + (1.0 + self.nu) / self.mu * ju.norm_squared()
            + 2.0 * self.nu * ju.dot(w)
            + self.nu * self.mu * w.norm_squared()
    }
}

/// Penalty bookkeeping carried between outer iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct MeritState {
    pub nu: f64,
    pub y_e: DVector<f64>,
    /// Current penalty parameter `μ_k`.
    pub mu: f64,
    /// Regularization penalty `μᴿ <= μ`.
    pub mu_r: f64,
    pub eta_s: f64,
    pub alpha_min: f64,
}

impl MeritState {
    pub fn new(y_e: DVector<f64>, mu: f64, mu_r: f64) -> Result<Self> {
        let state = Self {
            nu: DEFAULT_NU,
            y_e,
            mu,
            mu_r,
            eta_s: DEFAULT_ETA_S,
            alpha_min: DEFAULT_ALPHA_MIN,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.nu > 0.0
            && self.mu_r > 0.0
            && self.mu_r <= self.mu
            && self.eta_s > 0.0
            && self.eta_s < 0.5
            && self.alpha_min > 0.0
            && self.alpha_min <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid merit state {self:?}")))
        }
    }

    /// The merit function seen by the QP, the curvature step and the search.
    pub fn regularized(&self) -> MeritFunction {
        MeritFunction::new(self.y_e.clone(), self.mu_r, self.nu)
    }

    /// The merit function at the current penalty `μ_k`.
    pub fn penalized(&self) -> MeritFunction {
        MeritFunction::new(self.y_e.clone(), self.mu, self.nu)
    }

    /// Keeps `μ_k` if the accepted step achieved
    /// `M(v₊; μ_k) <= M(v; μ_k) + η_S ᾱ²(N + R)` with `ᾱ = min(α_min, α)`,
    /// otherwise returns `max(μ_k/2, μᴿ₊)`.
    pub fn updated_penalty(&self, merit_prev: f64, merit_next: f64, alpha: f64, n_k: f64, r_k: f64, mu_r_next: f64) -> f64 {
        let alpha_bar = self.alpha_min.min(alpha);
        let rhs = merit_prev + self.eta_s * alpha_bar * alpha_bar * (n_k + r_k);
        if merit_next <= rhs {
            self.mu
        } else {
            (0.5 * self.mu).max(mu_r_next)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub backtracks: usize,
    pub n_k: f64,
    pub r_k: f64,
    pub merit: f64,
    pub accepted: Iterate,
}

/// Point on the path `v + α(u, w) + α²Δv`, or `None` if it leaves the bounds.
pub fn path_point(v: &Iterate, step: &ScaledStep, dv: &QpStep, alpha: f64) -> Option<Iterate> {
    let a2 = alpha * alpha;
    let mut x = &v.x + &step.u * alpha + &dv.p * a2;
    for xi in x.iter_mut() {
        if *xi < 0.0 {
            if *xi < -BOUND_SLACK {
                return None;
            }
            *xi = 0.0;
        }
    }
    let y = &v.y + &step.w * alpha + &dv.q * a2;
    Some(Iterate::new(x, y))
}

/// Right-hand side of the sufficient-decrease test at step `alpha`.
pub fn sufficient_decrease_bound(merit0: f64, alpha: f64, eta_s: f64, n_k: f64, r_k: f64) -> f64 {
    merit0 + eta_s * alpha * alpha * (n_k + r_k)
}

/// Backtracks `α = 1, ½, ¼, …` until
/// `M(v + α(u, w) + α²Δv) <= M(v) + η_S α²(N + R)`.
///
/// `merit` evaluates the merit function at a trial point; evaluation errors
/// count as a rejected trial.
pub fn curvilinear_search<F>(
    v: &Iterate,
    step: &ScaledStep,
    dv: &QpStep,
    merit0: f64,
    n_k: f64,
    r_k: f64,
    eta_s: f64,
    max_backtracks: usize,
    mut merit: F,
) -> Result<LineSearchResult>
where
    F: FnMut(&Iterate) -> Result<f64>,
{
    let mut alpha = 1.0;
    for j in 0..=max_backtracks {
        if let Some(trial) = path_point(v, step, dv, alpha) {
            if let Ok(value) = merit(&trial) {
                if value <= sufficient_decrease_bound(merit0, alpha, eta_s, n_k, r_k) {
                    return Ok(LineSearchResult {
                        alpha,
                        backtracks: j,
                        n_k,
                        r_k,
                        merit: value,
                        accepted: trial,
                    });
                }
            }
        }
        alpha *= 0.5;
    }
    Err(Error::LineSearchFailure {
        backtracks: max_backtracks,
        merit0,
        n_k,
        r_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate, NlpProblem, SaddleLine};
    use approx::assert_abs_diff_eq;

    fn eval_at(problem: &dyn NlpProblem, it: &Iterate) -> Evaluation {
        evaluate(problem, it).unwrap()
    }

    #[test]
    fn feasible_point_with_matching_estimate() {
        let it = Iterate::from_slices(&[1.0, 1.0], &[1.0]);
        let e = eval_at(&SaddleLine, &it);
        let m = MeritFunction::new(DVector::from_element(1, 1.0), 1.0, 1.0);
        assert_eq!(m.value(&e, &it), 1.0);
        // g = Jᵀy at this KKT point.
        assert!(m.gradient(&e, &it).amax() < 1e-15);
    }

    #[test]
    fn infeasible_value() {
        // c = 2, y = yᴱ = 0, μ = ν = 1: f + 2 + 2.
        let it = Iterate::from_slices(&[3.0, 1.0], &[0.0]);
        let e = eval_at(&SaddleLine, &it);
        let m = MeritFunction::new(DVector::zeros(1), 1.0, 1.0);
        assert_abs_diff_eq!(m.value(&e, &it), 3.0 + 4.0);
    }

    #[test]
    fn unconstrained_gradient_is_objective_gradient() {
        let e = Evaluation {
            f: 0.0,
            c: DVector::zeros(0),
            g: DVector::from_vec(vec![1.0, -2.0]),
            j: DMatrix::zeros(0, 2),
            h: DMatrix::identity(2, 2),
        };
        let it = Iterate::from_slices(&[1.0, 1.0], &[]);
        let m = MeritFunction::new(DVector::zeros(0), 0.3, 1.0);
        assert_eq!(m.gradient(&e, &it), e.g);
        assert_eq!(m.hessian(&e.j, &e.h), e.h);
    }

    #[test]
    fn hessian_block_assembly() {
        let m = MeritFunction::new(DVector::zeros(1), 1.0, 1.0);
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let j = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, 3.0, 1.0, 3.0, 2.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(m.hessian(&j, &h), expected);
    }

    #[test]
    fn blockwise_curvature_matches_matrix() {
        let m = MeritFunction::new(DVector::zeros(1), 0.7, 2.0);
        let h = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, -2.0]);
        let j = DMatrix::from_row_slice(1, 2, &[1.0, -3.0]);
        let u = DVector::from_vec(vec![0.3, 1.1]);
        let w = DVector::from_vec(vec![-0.4]);
        let s = DVector::from_vec(vec![0.3, 1.1, -0.4]);
        assert_abs_diff_eq!(m.curvature(&j, &h, &u, &w), s.dot(&(m.hessian(&j, &h) * &s)), epsilon = 1e-13);
    }

    #[test]
    fn penalty_update_branches() {
        let mut s = MeritState::new(DVector::zeros(0), 1.0, 0.4).unwrap();
        assert_eq!(s.updated_penalty(1.0, 0.5, 1.0, -0.1, 0.0, 0.4), 1.0);
        assert_eq!(s.updated_penalty(1.0, 1.5, 1.0, -0.1, 0.0, 0.4), 0.5);
        s.mu = 0.6;
        assert_eq!(s.updated_penalty(1.0, 1.5, 1.0, -0.1, 0.0, 0.4), 0.4);
    }

    #[test]
    fn invalid_state_rejected() {
        assert!(MeritState::new(DVector::zeros(0), 0.1, 0.2).is_err());
        assert!(MeritState::new(DVector::zeros(0), 0.1, 0.0).is_err());
    }

    fn flat_steps(n: usize, u: f64, p: f64) -> (ScaledStep, QpStep) {
        let mut step = ScaledStep::zero(n, 0, 1.0);
        step.u = DVector::from_element(n, u);
        step.beta = if u == 0.0 { 0.0 } else { 1.0 };
        let dv = QpStep {
            p: DVector::from_element(n, p),
            q: DVector::zeros(0),
            z: DVector::zeros(n),
            kkt_residual: 0.0,
            objective: 0.0,
            iterations: 0,
        };
        (step, dv)
    }

    #[test]
    fn linear_decrease_accepts_unit_step() {
        let v = Iterate::from_slices(&[1.0], &[]);
        let (step, dv) = flat_steps(1, 0.0, 1.0);
        // M(t) = −t along x, N = −1, R = 0.
        let r = curvilinear_search(&v, &step, &dv, 0.0, -1.0, 0.0, 0.1, 50, |it| Ok(-(it.x[0] - 1.0))).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.backtracks, 0);
        assert!(r.merit <= sufficient_decrease_bound(0.0, 1.0, 0.1, -1.0, 0.0));
    }

    #[test]
    fn flat_merit_with_zero_model_accepts() {
        let v = Iterate::from_slices(&[1.0], &[]);
        let (step, dv) = flat_steps(1, 0.0, 1.0);
        let r = curvilinear_search(&v, &step, &dv, 2.0, 0.0, 0.0, 0.25, 50, |_| Ok(2.0)).unwrap();
        assert_eq!(r.alpha, 1.0);
    }

    #[test]
    fn one_backtrack() {
        let v = Iterate::from_slices(&[1.0], &[]);
        let (step, dv) = flat_steps(1, 1.0, 0.0);
        // Rejects the unit step, accepts everything shorter.
        let r = curvilinear_search(&v, &step, &dv, 0.0, 0.0, -1.0, 0.25, 50, |it| {
            Ok(if it.x[0] > 1.75 { 10.0 } else { -1.0 })
        })
        .unwrap();
        assert_eq!(r.backtracks, 1);
        assert_eq!(r.alpha, 0.5);
    }

    #[test]
    fn exhausted_backtracking_is_an_error() {
        let v = Iterate::from_slices(&[1.0], &[]);
        let (step, dv) = flat_steps(1, 0.0, 1.0);
        let err = curvilinear_search(&v, &step, &dv, 0.0, -1.0, 0.0, 0.25, 5, |_| Ok(1.0)).unwrap_err();
        assert!(matches!(err, Error::LineSearchFailure { backtracks: 5, .. }));
    }

    #[test]
    fn trial_points_leaving_bounds_are_rejected() {
        // x = 1, u = −4, p = 3: the path dips below zero near α = 2/3 but
        // both endpoints are feasible.
        let v = Iterate::from_slices(&[1.0], &[]);
        let (step, dv) = flat_steps(1, -4.0, 3.0);
        assert!(path_point(&v, &step, &dv, 0.5).is_none());
        assert!(path_point(&v, &step, &dv, 1.0).is_some());
    }
}
