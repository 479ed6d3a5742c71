//! Iteration log (CSV) and run report (JSON).

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::driver::{IterationRecord, SolveOutput};
use crate::model::NlpProblem;

pub const FORMAT_VERSION: u32 = 1;

/// Column order of the iteration log.
pub const LOG_COLUMNS: [&str; 15] = [
    "k", "class", "eta", "omega", "phi_S", "phi_L", "mu", "mu_R", "tau", "alpha", "norm_p", "norm_u", "curv_ratio",
    "merit", "ws_size",
];

/// Writes `# format_version: 1` followed by one CSV row per iteration.
pub fn write_log<W: Write>(mut out: W, history: &[IterationRecord]) -> std::io::Result<()> {
    writeln!(out, "# format_version: {FORMAT_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_COLUMNS)?;
    for r in history {
        let fields = [
            r.k.to_string(),
            r.class.to_string(),
            r.eta.to_string(),
            r.omega.to_string(),
            r.phi_s.to_string(),
            r.phi_l.to_string(),
            r.mu.to_string(),
            r.mu_r.to_string(),
            r.tau.to_string(),
            r.alpha.to_string(),
            r.norm_p.to_string(),
            r.norm_u.to_string(),
            r.curv_ratio.to_string(),
            r.merit.to_string(),
            r.ws_size.to_string(),
        ];
        w.write_record(&fields)?;
    }
    w.flush()
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub curv_ratio: f64,
    pub exists: bool,
    pub working_set: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub format_version: u32,
    pub problem: String,
    pub status: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f: f64,
    pub eta: f64,
    pub omega: f64,
    pub omega_first: f64,
    pub curv_ratio: f64,
    pub iterations: usize,
    pub class_counts: BTreeMap<String, usize>,
    pub mu: f64,
    pub mu_r: f64,
    pub certificate: Option<CertificateReport>,
    pub failure: Option<String>,
    pub wall_time_seconds: f64,
}

impl RunReport {
    pub fn new(problem: &dyn NlpProblem, out: &SolveOutput, wall_time_seconds: f64) -> Self {
        let mut class_counts = BTreeMap::new();
        for c in ["S", "L", "M", "F"] {
            class_counts.insert(c.to_string(), 0);
        }
        for r in &out.history {
            *class_counts.entry(r.class.to_string()).or_insert(0) += 1;
        }
        let last = out.history.last();
        Self {
            format_version: FORMAT_VERSION,
            problem: problem.name().to_string(),
            status: out.status.as_str().to_string(),
            x: out.iterate.x.iter().copied().collect(),
            y: out.iterate.y.iter().copied().collect(),
            f: problem.objective(&out.iterate.x),
            eta: last.map_or(f64::NAN, |r| r.eta),
            omega: last.map_or(f64::NAN, |r| r.omega),
            omega_first: last.map_or(f64::NAN, |r| r.omega_first),
            curv_ratio: last.map_or(0.0, |r| r.curv_ratio),
            iterations: out.history.len().saturating_sub(1),
            class_counts,
            mu: out.mu,
            mu_r: out.mu_r,
            certificate: out.certificate.as_ref().map(|c| CertificateReport {
                curv_ratio: c.curv_ratio,
                exists: c.exists,
                working_set: c.workset.active().to_vec(),
            }),
            failure: out.failure.clone(),
            wall_time_seconds,
        }
    }
}
