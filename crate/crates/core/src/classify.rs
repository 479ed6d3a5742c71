//! Optimality measures and the S/L/M/F iterate classification.
//!
//! The first-order stationarity measure is augmented with the curvature
//! ratio of the negative-curvature direction, so neither the filter tests nor
//! the M-iterate test can accept a point that still has usable negative
//! curvature.

use std::fmt;

use nalgebra::DVector;

use crate::curvature::CurvatureDirection;
use crate::model::{Evaluation, Iterate};

pub const FILTER_WEIGHT: f64 = 1e-5;
pub const DEFAULT_TAU0: f64 = 1e-2;
pub const Y_E_CAP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measures {
    /// `‖c(x)‖`.
    pub eta: f64,
    /// `‖min(x, g − Jᵀy)‖`.
    pub omega_first: f64,
    /// `ûᵀ(H + JᵀJ/μ)û / ‖û‖²`, zero without a direction.
    pub curv_ratio: f64,
    /// `max(omega_first, −curv_ratio)`.
    pub omega: f64,
    pub phi_s: f64,
    pub phi_l: f64,
}

pub fn first_order_residual(eval: &Evaluation, iterate: &Iterate) -> f64 {
    let reduced = &eval.g - eval.j.transpose() * &iterate.y;
    iterate
        .x
        .iter()
        .zip(reduced.iter())
        .map(|(&x, &r)| x.min(r).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Combines the measures with the filter weights.
pub fn combine(eta: f64, omega_first: f64, curv_ratio: f64) -> Measures {
    let omega = omega_first.max(-curv_ratio);
    Measures {
        eta,
        omega_first,
        curv_ratio,
        omega,
        phi_s: eta + FILTER_WEIGHT * omega,
        phi_l: FILTER_WEIGHT * eta + omega,
    }
}

pub fn measures(eval: &Evaluation, iterate: &Iterate, direction: &CurvatureDirection) -> Measures {
    let curv_ratio = if direction.exists { direction.rayleigh.min(0.0) } else { 0.0 };
    combine(eval.c.norm(), first_order_residual(eval, iterate), curv_ratio)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IterateClass {
    S,
    L,
    M,
    F,
}

impl fmt::Display for IterateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IterateClass::S => "S",
            IterateClass::L => "L",
            IterateClass::M => "M",
            IterateClass::F => "F",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub phi_s_max: f64,
    pub phi_l_max: f64,
    pub tau: f64,
    pub y_e: DVector<f64>,
    pub mu_r: f64,
}

impl FilterState {
    /// Thresholds start at `max(1, 2φ(v₀))`.
    pub fn initial(m0: &Measures, y0: &DVector<f64>, mu_r0: f64, tau0: f64) -> Self {
        Self {
            phi_s_max: (2.0 * m0.phi_s).max(1.0),
            phi_l_max: (2.0 * m0.phi_l).max(1.0),
            tau: tau0,
            y_e: capped(y0),
            mu_r: mu_r0,
        }
    }
}

fn capped(y: &DVector<f64>) -> DVector<f64> {
    let norm = y.norm();
    if norm > Y_E_CAP {
        y * (Y_E_CAP / norm)
    } else {
        y.clone()
    }
}

/// Merit-function residuals used by the M-iterate test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeritResiduals {
    /// `‖∇_y M‖`.
    pub dual: f64,
    /// `‖min(x, ∇_x M)‖`.
    pub primal: f64,
}

impl MeritResiduals {
    pub fn from_gradient(x: &DVector<f64>, grad: &DVector<f64>) -> Self {
        let n = x.len();
        let primal = (0..n).map(|i| x[i].min(grad[i]).powi(2)).sum::<f64>().sqrt();
        let dual = grad.rows(n, grad.len() - n).norm();
        Self { dual, primal }
    }
}

pub fn classify(measures: &Measures, state: &FilterState, residuals: MeritResiduals, curv_ratio: f64) -> IterateClass {
    if measures.phi_s <= 0.5 * state.phi_s_max {
        IterateClass::S
    } else if measures.phi_l <= 0.5 * state.phi_l_max {
        IterateClass::L
    } else if residuals.dual <= state.tau && residuals.primal <= state.tau && curv_ratio >= -state.tau {
        IterateClass::M
    } else {
        IterateClass::F
    }
}

pub fn update_state(class: IterateClass, state: &FilterState, iterate: &Iterate) -> FilterState {
    let mut next = state.clone();
    match class {
        IterateClass::S => {
            next.phi_s_max *= 0.5;
            next.y_e = capped(&iterate.y);
        }
        IterateClass::L => {
            next.phi_l_max *= 0.5;
            next.y_e = capped(&iterate.y);
        }
        IterateClass::M => {
            next.tau *= 0.5;
            next.mu_r *= 0.5;
            next.y_e = capped(&iterate.y);
        }
        IterateClass::F => {}
    }
    next
}
