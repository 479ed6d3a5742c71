//! Outer iteration of the regularized SQP method with negative curvature.
//!
//! Each iteration estimates the working set, factorizes the free KKT matrix,
//! extracts and orients a direction of negative curvature, classifies the
//! iterate, convexifies the Hessian, solves the QP, scales the curvature step
//! against the QP step and runs the curvilinear search.

use nalgebra::{DMatrix, DVector};

use crate::classify::{self, FilterState, IterateClass, Measures, MeritResiduals};
use crate::curvature::{self, CurvatureDirection, ScaledStep};
use crate::factor::{self, Convexification, KktSystem, Stage1Factor};
use crate::linalg::{inf_norm, max_abs, regularized_hessian};
use crate::merit::{self, MeritFunction, MeritState};
use crate::model::{evaluate, Evaluation, Iterate, NlpProblem};
use crate::qpstep;
use crate::workset::{self, Part, WorkingSet};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Tolerance on `‖min(x, g − Jᵀy)‖`.
    pub tol_first: f64,
    /// Tolerance on the negative part of the curvature ratio.
    pub tol_second: f64,
    /// Tolerance on `‖c(x)‖`.
    pub tol_constraint: f64,
    pub max_iterations: usize,
    pub u_max: f64,
    pub epsilon_a: f64,
    pub nu: f64,
    pub eta_s: f64,
    pub alpha_min: f64,
    /// Relative margin of the convexifying shift.
    pub margin: f64,
    /// Initial `μ` and `μᴿ`.
    pub mu0: f64,
    pub tau0: f64,
    pub max_backtracks: usize,
    pub qp_tolerance: f64,
    /// When false the solver is plain first-order regularized SQP.
    pub enable_curvature: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_first: 1e-8,
            tol_second: 1e-8,
            tol_constraint: 1e-8,
            max_iterations: 200,
            u_max: curvature::DEFAULT_U_MAX,
            epsilon_a: workset::DEFAULT_EPSILON_A,
            nu: merit::DEFAULT_NU,
            eta_s: merit::DEFAULT_ETA_S,
            alpha_min: merit::DEFAULT_ALPHA_MIN,
            margin: factor::DEFAULT_MARGIN,
            mu0: 0.1,
            tau0: classify::DEFAULT_TAU0,
            max_backtracks: merit::DEFAULT_MAX_BACKTRACKS,
            qp_tolerance: qpstep::DEFAULT_QP_TOLERANCE,
            enable_curvature: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_first", self.tol_first),
            ("tol_second", self.tol_second),
            ("tol_constraint", self.tol_constraint),
            ("u_max", self.u_max),
            ("epsilon_a", self.epsilon_a),
            ("nu", self.nu),
            ("mu0", self.mu0),
            ("tau0", self.tau0),
            ("qp_tolerance", self.qp_tolerance),
            ("margin", self.margin),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be positive and finite")));
            }
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.eta_s > 0.0 && self.eta_s < 0.5) {
            return Err(Error::InvalidArgument(format!("eta_s = {} must lie in (0, 1/2)", self.eta_s)));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha_min = {} must lie in (0, 1]", self.alpha_min)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    SecondOrderOptimal,
    /// Curvature disabled and the first-order test passed.
    FirstOrderOnly,
    IterationLimit,
    LineSearchFailure,
    QpFailure,
    FactorizationFailure,
    EvaluationFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::SecondOrderOptimal => "SecondOrderOptimal",
            Status::FirstOrderOnly => "FirstOrderOnly",
            Status::IterationLimit => "IterationLimit",
            Status::LineSearchFailure => "LineSearchFailure",
            Status::QpFailure => "QpFailure",
            Status::FactorizationFailure => "FactorizationFailure",
            Status::EvaluationFailure => "EvaluationFailure",
        }
    }

    fn from_error(err: &Error) -> Self {
        match err {
            Error::LineSearchFailure { .. } => Status::LineSearchFailure,
            Error::QpIterationLimit { .. } | Error::QpIndefinite => Status::QpFailure,
            Error::FactorBreakdown { .. } => Status::FactorizationFailure,
            _ => Status::EvaluationFailure,
        }
    }
}

/// Everything needed to re-check one accepted step independently.
#[derive(Clone, Debug, PartialEq)]
pub struct StepAudit {
    pub start: Iterate,
    pub accepted: Iterate,
    /// The merit function the search ran on.
    pub merit: MeritFunction,
    pub eta_s: f64,
    pub alpha: f64,
    pub n_k: f64,
    pub r_k: f64,
    pub dv_norm: f64,
    pub u_norm: f64,
    /// `∇Mᵀ(u, w)` at the start point.
    pub curvature_slope: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub class: IterateClass,
    pub eta: f64,
    pub omega: f64,
    pub phi_s: f64,
    pub phi_l: f64,
    pub mu: f64,
    pub mu_r: f64,
    pub tau: f64,
    pub alpha: f64,
    pub norm_p: f64,
    pub norm_u: f64,
    pub curv_ratio: f64,
    pub merit: f64,
    pub ws_size: usize,
    pub omega_first: f64,
    pub curvature_exists: bool,
    pub audit: Option<StepAudit>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub curv_ratio: f64,
    pub workset: WorkingSet,
    pub exists: bool,
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub status: Status,
    pub iterate: Iterate,
    pub history: Vec<IterationRecord>,
    pub certificate: Option<Certificate>,
    pub measures: Option<Measures>,
    pub mu: f64,
    pub mu_r: f64,
    /// Message of the error behind a failure status.
    pub failure: Option<String>,
}

/// Working set, factorization and curvature direction at one point.
struct Analysis {
    workset: WorkingSet,
    factor: Option<Stage1Factor>,
    direction: CurvatureDirection,
}

fn analyze(eval: &Evaluation, x: &DVector<f64>, mu_ws: f64, mu_kkt: f64, epsilon_a: f64, with_curvature: bool) -> Result<Analysis> {
    let (m, n) = eval.j.shape();
    let workset = workset::estimate(x, mu_ws, epsilon_a);
    if workset.free().is_empty() {
        return Ok(Analysis {
            workset,
            factor: None,
            direction: CurvatureDirection::none(n, m),
        });
    }
    let kkt = KktSystem::new(
        workset.restrict_symmetric(&eval.h, Part::Free)?,
        workset.restrict_columns(&eval.j, Part::Free)?,
        mu_kkt,
    )?;
    let factor = factor::stage1_factorize(&kkt)?;
    let direction = if with_curvature {
        curvature::extract_direction(&factor, &workset)?
    } else {
        CurvatureDirection::none(n, m)
    };
    Ok(Analysis {
        workset,
        factor: Some(factor),
        direction,
    })
}

/// Lagrangian Hessian with the convexifying shift on the Schur rows, plus a
/// shift on the working-set diagonal when needed so that `H̃ + (1/μ)JᵀJ` is
/// positive definite on all of `ℝⁿ`.
fn convexified_hessian(
    h: &DMatrix<f64>,
    j: &DMatrix<f64>,
    workset: &WorkingSet,
    conv: Option<&Convexification>,
    mu: f64,
    margin: f64,
) -> DMatrix<f64> {
    let mut h_tilde = h.clone();
    if let Some(c) = conv {
        for &r in &c.shifted_rows {
            let i = workset.free()[r];
            h_tilde[(i, i)] += c.delta;
        }
    }
    let is_pd = |m: &DMatrix<f64>| regularized_hessian(m, j, mu).cholesky().is_some();
    if is_pd(&h_tilde) {
        return h_tilde;
    }
    let n = h.nrows();
    let targets: Vec<usize> = if workset.active().is_empty() {
        (0..n).collect()
    } else {
        workset.active().to_vec()
    };
    let floor = f64::EPSILON.sqrt() * (1.0 + max_abs(h));
    let mut shift = ((1.0 + margin) * inf_norm(h)).max(floor);
    for attempt in 0..200 {
        let mut trial = h_tilde.clone();
        let rows: Vec<usize> = if attempt < 100 { targets.clone() } else { (0..n).collect() };
        for &i in &rows {
            trial[(i, i)] += shift;
        }
        if is_pd(&trial) {
            return trial;
        }
        shift *= 2.0;
    }
    h_tilde
}

pub fn second_order_certificate(problem: &dyn NlpProblem, iterate: &Iterate, mu: f64, epsilon_a: f64) -> Result<Certificate> {
    let eval = evaluate(problem, iterate)?;
    let a = analyze(&eval, &iterate.x, mu, mu, epsilon_a, true)?;
    Ok(Certificate {
        curv_ratio: if a.direction.exists { a.direction.rayleigh } else { 0.0 },
        workset: a.workset,
        exists: a.direction.exists,
    })
}

struct Solver<'a> {
    problem: &'a dyn NlpProblem,
    config: &'a SolverConfig,
    history: Vec<IterationRecord>,
}

enum Outcome {
    Finished(Status),
    Failed(Error),
}

impl<'a> Solver<'a> {
    fn record(&mut self, k: usize, class: IterateClass, meas: &Measures, filter: &FilterState, mu: f64, merit: f64, analysis: &Analysis) -> &mut IterationRecord {
        self.history.push(IterationRecord {
            k,
            class,
            eta: meas.eta,
            omega: meas.omega,
            phi_s: meas.phi_s,
            phi_l: meas.phi_l,
            mu,
            mu_r: filter.mu_r,
            tau: filter.tau,
            alpha: 0.0,
            norm_p: 0.0,
            norm_u: 0.0,
            curv_ratio: meas.curv_ratio,
            merit,
            ws_size: analysis.workset.active().len(),
            omega_first: meas.omega_first,
            curvature_exists: analysis.direction.exists,
            audit: None,
        });
        self.history.last_mut().expect("just pushed")
    }

    fn merit_at(&self, merit: &MeritFunction, point: &Iterate) -> Result<f64> {
        let eval = evaluate(self.problem, point)?;
        Ok(merit.value(&eval, point))
    }

    fn run(&mut self, v: &mut Iterate, mu: &mut f64, filter_out: &mut Option<FilterState>, final_measures: &mut Option<Measures>) -> Outcome {
        match self.iterate(v, mu, filter_out, final_measures) {
            Ok(status) => Outcome::Finished(status),
            Err(e) => Outcome::Failed(e),
        }
    }

    fn iterate(&mut self, v: &mut Iterate, mu: &mut f64, filter_out: &mut Option<FilterState>, final_measures: &mut Option<Measures>) -> Result<Status> {
        let cfg = self.config;
        let enable = cfg.enable_curvature;
        let mut filter: Option<FilterState> = None;

        for k in 0..=cfg.max_iterations {
            let eval = evaluate(self.problem, v)?;
            let mu_r_prev = filter.as_ref().map_or(cfg.mu0, |f| f.mu_r);
            let mut analysis = analyze(&eval, &v.x, *mu, mu_r_prev, cfg.epsilon_a, enable)?;
            let meas = classify::measures(&eval, v, &analysis.direction);
            *final_measures = Some(meas);

            let state = filter.get_or_insert_with(|| FilterState::initial(&meas, &v.y, cfg.mu0, cfg.tau0));
            let prev_merit = MeritFunction::new(state.y_e.clone(), state.mu_r, cfg.nu);
            let residuals = MeritResiduals::from_gradient(&v.x, &prev_merit.gradient(&eval, v));
            let class = classify::classify(&meas, state, residuals, meas.curv_ratio);
            let next = classify::update_state(class, state, v);
            *state = next.clone();
            *filter_out = Some(next.clone());
            *mu = mu.max(next.mu_r);

            let merit_fn = MeritFunction::new(next.y_e.clone(), next.mu_r, cfg.nu);
            let merit0 = merit_fn.value(&eval, v);

            let converged = meas.eta <= cfg.tol_constraint
                && meas.omega_first <= cfg.tol_first
                && meas.curv_ratio >= -cfg.tol_second;
            if converged {
                self.record(k, class, &meas, &next, *mu, merit0, &analysis);
                return Ok(if enable { Status::SecondOrderOptimal } else { Status::FirstOrderOnly });
            }
            if k == cfg.max_iterations {
                self.record(k, class, &meas, &next, *mu, merit0, &analysis);
                return Ok(Status::IterationLimit);
            }

            if next.mu_r != mu_r_prev {
                analysis = analyze(&eval, &v.x, *mu, next.mu_r, cfg.epsilon_a, enable)?;
            }

            let grad = merit_fn.gradient(&eval, v);
            let conv = analysis.factor.as_ref().map(|f| factor::convexify(f, cfg.margin));
            let h_tilde = convexified_hessian(&eval.h, &eval.j, &analysis.workset, conv.as_ref(), next.mu_r, cfg.margin);
            let h_merit = merit_fn.hessian(&eval.j, &h_tilde);
            let direction = curvature::orient(analysis.direction.clone(), &grad);

            let dv = qpstep::solve_qp(&h_merit, &grad, &v.x, analysis.workset.active(), cfg.qp_tolerance)?;
            let mut step = if enable {
                curvature::scale(&direction, &v.x, &dv.p, cfg.u_max)
            } else {
                ScaledStep::zero(v.x.len(), v.y.len(), cfg.u_max)
            };
            if step.is_zero() {
                step = ScaledStep::zero(v.x.len(), v.y.len(), cfg.u_max);
            }
            let n_k = dv.objective.min(0.0);
            let r_k = merit_fn.curvature(&eval.j, &eval.h, &step.u, &step.w).min(0.0);

            let rec = self.record(k, class, &meas, &next, *mu, merit0, &analysis);
            rec.norm_p = dv.p.norm();
            rec.norm_u = step.u.norm();

            if step.is_zero() && dv.is_zero() {
                continue;
            }

            let search = |s: &ScaledStep, r: f64, this: &Self| {
                merit::curvilinear_search(v, s, &dv, merit0, n_k, r, cfg.eta_s, cfg.max_backtracks, |t| {
                    this.merit_at(&merit_fn, t)
                })
            };
            let (ls, step, r_k) = match search(&step, r_k, self) {
                Ok(ls) => (ls, step, r_k),
                Err(err) if !step.is_zero() => {
                    let zero = ScaledStep::zero(v.x.len(), v.y.len(), cfg.u_max);
                    match search(&zero, 0.0, self) {
                        Ok(ls) => (ls, zero, 0.0),
                        Err(_) => return Err(err),
                    }
                }
                Err(err) => return Err(err),
            };

            let penalized = MeritFunction::new(next.y_e.clone(), *mu, cfg.nu);
            let merit_state = MeritState {
                nu: cfg.nu,
                y_e: next.y_e.clone(),
                mu: *mu,
                mu_r: next.mu_r,
                eta_s: cfg.eta_s,
                alpha_min: cfg.alpha_min,
            };
            let m_prev = penalized.value(&eval, v);
            let m_next = self.merit_at(&penalized, &ls.accepted)?;
            let mu_next = merit_state.updated_penalty(m_prev, m_next, ls.alpha, n_k, r_k, next.mu_r);

            let slope = grad.dot(&DVector::from_iterator(
                step.u.len() + step.w.len(),
                step.u.iter().chain(step.w.iter()).copied(),
            ));
            let rec = self.history.last_mut().expect("recorded above");
            rec.alpha = ls.alpha;
            rec.norm_u = step.u.norm();
            rec.audit = Some(StepAudit {
                start: v.clone(),
                accepted: ls.accepted.clone(),
                merit: merit_fn.clone(),
                eta_s: cfg.eta_s,
                alpha: ls.alpha,
                n_k,
                r_k,
                dv_norm: dv.stacked().norm(),
                u_norm: step.u.norm(),
                curvature_slope: slope,
            });

            debug_assert!(ls.accepted.x.iter().all(|&xi| xi >= 0.0));
            *v = ls.accepted;
            *mu = mu_next.max(next.mu_r);
        }
        Ok(Status::IterationLimit)
    }
}

/// Runs the method from `v0` until the second-order test passes or a limit is
/// hit. Solver failures are reported through [`Status`]; invalid input is an
/// error.
pub fn solve(problem: &dyn NlpProblem, v0: &Iterate, config: &SolverConfig) -> Result<SolveOutput> {
    config.validate()?;
    if v0.x.len() != problem.num_vars() || v0.y.len() != problem.num_constraints() {
        return Err(Error::DimensionMismatch {
            context: "starting point",
            expected: problem.num_vars() + problem.num_constraints(),
            found: v0.x.len() + v0.y.len(),
        });
    }
    if v0.x.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument("starting point must satisfy x >= 0".into()));
    }

    let mut solver = Solver {
        problem,
        config,
        history: Vec::new(),
    };
    let mut v = v0.clone();
    let mut mu = config.mu0;
    let mut filter = None;
    let mut measures = None;
    let (status, failure) = match solver.run(&mut v, &mut mu, &mut filter, &mut measures) {
        Outcome::Finished(s) => (s, None),
        Outcome::Failed(e) => (Status::from_error(&e), Some(e.to_string())),
    };
    let mu_r = filter.as_ref().map_or(config.mu0, |f| f.mu_r);
    let certificate = second_order_certificate(problem, &v, mu_r, config.epsilon_a).ok();
    Ok(SolveOutput {
        status,
        iterate: v,
        history: solver.history,
        certificate,
        measures,
        mu,
        mu_r,
        failure,
    })
}
