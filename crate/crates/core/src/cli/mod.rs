//! Batch command-line front end.
//!
//! ```text
//! ncsqp --list-problems
//! ncsqp solve <builtin-name | problem.json> [--mu0 X] [--nu X] [--tol1 X] [--tol2 X]
//!       [--tolc X] [--max-iter K] [--no-curvature] [--log out.csv] [--report out.json]
//!       [--check-derivatives]
//! ```
//!
//! Exit codes: 0 second-order optimal, 2 first-order only, 3 iteration limit,
//! 4 solver failure, 1 usage or input error.

mod output;
mod problem_file;

pub use output::{write_log, CertificateReport, RunReport, LOG_COLUMNS};
pub use problem_file::{parse_problem_file, ConfigOverrides, ProblemSource, ProblemSpec, StartPoint, Term};

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::driver::{solve, SolverConfig, Status};
use crate::model::{builtin, builtin_catalog, check_derivatives};

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FIRST_ORDER: i32 = 2;
pub const EXIT_ITERATION_LIMIT: i32 = 3;
pub const EXIT_FAILURE: i32 = 4;

const DERIVATIVE_STEP: f64 = 1e-5;
const DERIVATIVE_WARN: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "ncsqp", version, about = "Regularized SQP with directions of negative curvature")]
struct Cli {
    /// Print the built-in problems and exit.
    #[arg(long)]
    list_problems: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a built-in problem or a JSON problem file.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Built-in problem name or path to a problem file.
    problem: String,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    tol1: Option<f64>,
    #[arg(long)]
    tol2: Option<f64>,
    #[arg(long)]
    tolc: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Disable negative-curvature steps.
    #[arg(long)]
    no_curvature: bool,
    /// Write the iteration log as CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Write the final report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Compare derivatives against finite differences at the start point first.
    #[arg(long)]
    check_derivatives: bool,
}

impl SolveArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            mu0: self.mu0,
            nu: self.nu,
            tol1: self.tol1,
            tol2: self.tol2,
            tolc: self.tolc,
            max_iterations: self.max_iter,
            enable_curvature: self.no_curvature.then_some(false),
            ..ConfigOverrides::default()
        }
    }
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::SecondOrderOptimal => EXIT_OPTIMAL,
        Status::FirstOrderOnly => EXIT_FIRST_ORDER,
        Status::IterationLimit => EXIT_ITERATION_LIMIT,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OPTIMAL };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    if cli.list_problems {
        for (name, description) in builtin_catalog() {
            let _ = writeln!(out, "{name:<16}{description}");
        }
        return EXIT_OPTIMAL;
    }
    match cli.command {
        Some(Command::Solve(args)) => match solve_command(&args, out, err) {
            Ok(code) => code,
            Err(msg) => {
                let _ = writeln!(err, "error: {msg}");
                EXIT_USAGE
            }
        },
        None => {
            let _ = writeln!(err, "error: no command given; try `ncsqp solve --help` or `ncsqp --list-problems`");
            EXIT_USAGE
        }
    }
}

fn load_spec(selector: &str) -> Result<ProblemSpec, String> {
    if builtin(selector).is_some() {
        return Ok(ProblemSpec {
            source: ProblemSource::Builtin(selector.to_string()),
            start: None,
            config: ConfigOverrides::default(),
        });
    }
    let text = std::fs::read_to_string(selector)
        .map_err(|e| format!("`{selector}` is neither a built-in problem nor a readable file: {e}"))?;
    parse_problem_file(&text).map_err(|e| format!("{selector}: {e}"))
}

fn solve_command(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    let spec = load_spec(&args.problem)?;
    let (problem, start) = spec.instantiate().map_err(|e| e.to_string())?;
    let mut config = SolverConfig::default();
    spec.config.apply(&mut config);
    args.overrides().apply(&mut config);
    config.validate().map_err(|e| e.to_string())?;

    if args.check_derivatives {
        let report = check_derivatives(problem.as_ref(), &start, DERIVATIVE_STEP).map_err(|e| e.to_string())?;
        let _ = writeln!(
            out,
            "derivative check: gradient {:.3e}  jacobian {:.3e}  hessian {:.3e}",
            report.gradient, report.jacobian, report.hessian
        );
        if report.max_error() > DERIVATIVE_WARN {
            let _ = writeln!(err, "warning: derivative error {:.3e} exceeds {DERIVATIVE_WARN:e}", report.max_error());
        }
    }

    let clock = Instant::now();
    let result = solve(problem.as_ref(), &start, &config).map_err(|e| e.to_string())?;
    let elapsed = clock.elapsed().as_secs_f64();

    if let Some(path) = &args.log {
        let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        write_log(BufWriter::new(file), &result.history).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let report = RunReport::new(problem.as_ref(), &result, elapsed);
    if let Some(path) = &args.report {
        let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &report).map_err(|e| format!("{}: {e}", path.display()))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| format!("{}: {e}", path.display()))?;
    }

    let _ = writeln!(out, "problem     {}", report.problem);
    let _ = writeln!(out, "status      {}", report.status);
    let _ = writeln!(out, "iterations  {}", report.iterations);
    let _ = writeln!(out, "f           {:.12e}", report.f);
    let _ = writeln!(out, "x           {:?}", report.x);
    if !report.y.is_empty() {
        let _ = writeln!(out, "y           {:?}", report.y);
    }
    let _ = writeln!(out, "eta         {:.3e}", report.eta);
    let _ = writeln!(out, "omega       {:.3e}", report.omega);
    if let Some(c) = &report.certificate {
        let _ = writeln!(out, "curvature   {:.3e} (direction found: {})", c.curv_ratio, c.exists);
    }
    if let Some(msg) = &result.failure {
        let _ = writeln!(err, "solver failure: {msg}");
    }
    Ok(exit_code(result.status))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn list_problems() {
        let (code, out, _) = run_args(&["ncsqp", "--list-problems"]);
        assert_eq!(code, 0);
        for (name, _) in builtin_catalog() {
            assert!(out.contains(name));
        }
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&["ncsqp", "solve"]).0, 1);
        assert_eq!(run_args(&["ncsqp", "--bogus"]).0, 1);
        assert_eq!(run_args(&["ncsqp"]).0, 1);
        assert_eq!(run_args(&["ncsqp", "solve", "no-such-problem"]).0, 1);
        assert_eq!(run_args(&["ncsqp", "solve", "cosine-saddle", "--mu0", "-1"]).0, 1);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_args(&["ncsqp", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("solve"));
    }
}
