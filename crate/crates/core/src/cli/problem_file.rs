//! JSON problem files.
//!
//! A file either names a built-in problem or defines a polynomial problem:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "name": "bilinear",
//!   "n": 2,
//!   "objective": [{"coef": 1.0, "exp": [1, 1]}],
//!   "constraints": [[{"coef": 1.0, "exp": [1, 0]}, {"coef": 1.0, "exp": [0, 1]}, {"coef": -2.0, "exp": [0, 0]}]],
//!   "start": {"x": [1.0, 1.0], "y": [1.0]},
//!   "config": {"max_iterations": 100}
//! }
//! ```
//!
//! `{"format_version": 1, "builtin": "saddle-line"}` selects a compiled-in
//! problem; `start` and `config` may still be given. Unknown fields are
//! rejected.

use nalgebra::DVector;
use serde::Deserialize;

use crate::driver::SolverConfig;
use crate::model::{builtin, Iterate, Monomial, NlpProblem, Polynomial, PolynomialProblem};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: f64,
    pub exp: Vec<u32>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StartPoint {
    pub x: Vec<f64>,
    #[serde(default)]
    pub y: Vec<f64>,
}

/// Optional solver settings; anything absent keeps its default.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub mu0: Option<f64>,
    pub nu: Option<f64>,
    pub tol1: Option<f64>,
    pub tol2: Option<f64>,
    pub tolc: Option<f64>,
    pub max_iterations: Option<usize>,
    pub u_max: Option<f64>,
    pub epsilon_a: Option<f64>,
    pub eta_s: Option<f64>,
    pub alpha_min: Option<f64>,
    pub margin: Option<f64>,
    pub tau0: Option<f64>,
    pub enable_curvature: Option<bool>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut cfg.mu0, self.mu0);
        set(&mut cfg.nu, self.nu);
        set(&mut cfg.tol_first, self.tol1);
        set(&mut cfg.tol_second, self.tol2);
        set(&mut cfg.tol_constraint, self.tolc);
        set(&mut cfg.u_max, self.u_max);
        set(&mut cfg.epsilon_a, self.epsilon_a);
        set(&mut cfg.eta_s, self.eta_s);
        set(&mut cfg.alpha_min, self.alpha_min);
        set(&mut cfg.margin, self.margin);
        set(&mut cfg.tau0, self.tau0);
        if let Some(k) = self.max_iterations {
            cfg.max_iterations = k;
        }
        if let Some(b) = self.enable_curvature {
            cfg.enable_curvature = b;
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    format_version: u32,
    builtin: Option<String>,
    name: Option<String>,
    n: Option<usize>,
    objective: Option<Vec<Term>>,
    #[serde(default)]
    constraints: Vec<Vec<Term>>,
    start: Option<StartPoint>,
    #[serde(default)]
    config: ConfigOverrides,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSource {
    Builtin(String),
    Polynomial {
        name: String,
        n: usize,
        objective: Vec<Term>,
        constraints: Vec<Vec<Term>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub source: ProblemSource,
    pub start: Option<StartPoint>,
    pub config: ConfigOverrides,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub fn parse_problem_file(text: &str) -> Result<ProblemSpec> {
    let raw: RawSpec = serde_json::from_str(text)
        .map_err(|e| invalid(format!("problem file line {} column {}: {e}", e.line(), e.column())))?;
    if raw.format_version != FORMAT_VERSION {
        return Err(invalid(format!(
            "field `format_version`: unsupported version {} (expected {FORMAT_VERSION})",
            raw.format_version
        )));
    }
    let source = match (raw.builtin, raw.objective) {
        (Some(name), None) => {
            if raw.n.is_some() || raw.name.is_some() || !raw.constraints.is_empty() {
                return Err(invalid("field `builtin`: cannot be combined with `name`, `n` or `constraints`"));
            }
            if builtin(&name).is_none() {
                return Err(invalid(format!("field `builtin`: unknown problem `{name}`")));
            }
            ProblemSource::Builtin(name)
        }
        (None, Some(objective)) => {
            let n = raw.n.ok_or_else(|| invalid("field `n`: required for polynomial problems"))?;
            check_terms("objective", &objective, n)?;
            for (i, c) in raw.constraints.iter().enumerate() {
                check_terms(&format!("constraints[{i}]"), c, n)?;
            }
            ProblemSource::Polynomial {
                name: raw.name.unwrap_or_else(|| "polynomial".into()),
                n,
                objective,
                constraints: raw.constraints,
            }
        }
        (Some(_), Some(_)) => return Err(invalid("fields `builtin` and `objective` are mutually exclusive")),
        (None, None) => return Err(invalid("one of the fields `builtin` or `objective` is required")),
    };
    if let Some(s) = &raw.start {
        if s.x.iter().chain(s.y.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("field `start`: values must be finite"));
        }
        if s.x.iter().any(|&v| v < 0.0) {
            return Err(invalid("field `start.x`: values must be nonnegative"));
        }
    }
    Ok(ProblemSpec {
        source,
        start: raw.start,
        config: raw.config,
    })
}

fn check_terms(field: &str, terms: &[Term], n: usize) -> Result<()> {
    for (k, t) in terms.iter().enumerate() {
        if t.exp.len() != n {
            return Err(invalid(format!(
                "field `{field}[{k}].exp`: length {} does not match n = {n}",
                t.exp.len()
            )));
        }
        if !t.coef.is_finite() {
            return Err(invalid(format!("field `{field}[{k}].coef`: not finite")));
        }
    }
    Ok(())
}

fn polynomial(n: usize, terms: &[Term]) -> Result<Polynomial> {
    Polynomial::new(n, terms.iter().map(|t| Monomial::new(t.coef, t.exp.clone())).collect())
}

impl ProblemSpec {
    /// Builds the problem and its starting point.
    pub fn instantiate(&self) -> Result<(Box<dyn NlpProblem>, Iterate)> {
        let problem: Box<dyn NlpProblem> = match &self.source {
            ProblemSource::Builtin(name) => builtin(name).ok_or_else(|| invalid(format!("unknown problem `{name}`")))?,
            ProblemSource::Polynomial {
                name,
                n,
                objective,
                constraints,
            } => {
                let start = match &self.start {
                    Some(s) => Iterate::new(DVector::from_vec(s.x.clone()), DVector::from_vec(s.y.clone())),
                    None => Iterate::new(DVector::zeros(*n), DVector::zeros(constraints.len())),
                };
                let cons = constraints.iter().map(|c| polynomial(*n, c)).collect::<Result<Vec<_>>>()?;
                Box::new(PolynomialProblem::new(name.clone(), polynomial(*n, objective)?, cons, start)?)
            }
        };
        let start = match &self.start {
            Some(s) => Iterate::new(DVector::from_vec(s.x.clone()), DVector::from_vec(s.y.clone())),
            None => problem.default_start(),
        };
        if start.x.len() != problem.num_vars() || start.y.len() != problem.num_constraints() {
            return Err(invalid(format!(
                "field `start`: expected {} primal and {} dual values",
                problem.num_vars(),
                problem.num_constraints()
            )));
        }
        Ok((problem, start))
    }
}
