#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ncsqp::driver::{solve, SolveOutput, SolverConfig};
use ncsqp::model::{builtin, builtin_catalog, Iterate, Monomial, NlpProblem, Polynomial, PolynomialProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn symmetric(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    a = (&a + a.transpose()) * 0.5;
    a
}

pub fn uniform(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// One free KKT block: `H_F`, `J_F` and `μ`.
#[derive(Clone, Debug)]
pub struct KktInstance {
    pub h: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub mu: f64,
}

impl KktInstance {
    /// `H_F + (1/μ)J_FᵀJ_F`.
    pub fn b(&self) -> DMatrix<f64> {
        &self.h + self.j.transpose() * &self.j / self.mu
    }
}

/// The shared random family: `|F| <= 12`, `m <= 6`, `μ ∈ [1e-3, 1]`, with a
/// mix of dense, rank-deficient, semidefinite and sparse members.
pub fn kkt_family(count: usize, seed: u64) -> Vec<KktInstance> {
    let mut r = rng(seed);
    (0..count)
        .map(|k| {
            let nf = r.gen_range(1..=12);
            let m = r.gen_range(0..=6);
            let mu = log_uniform(&mut r, 1e-3, 1.0);
            let mut h = symmetric(&mut r, nf);
            let mut j = uniform(&mut r, m, nf);
            match k % 5 {
                1 if m >= 2 => {
                    let row = j.row(0).into_owned();
                    j.set_row(m - 1, &(row * 2.0));
                }
                2 => {
                    let a = uniform(&mut r, nf, nf);
                    h = &a * a.transpose();
                }
                3 => {
                    h = h.map(|v| if v.abs() < 0.6 { 0.0 } else { v });
                    j = j.map(|v| if v.abs() < 0.5 { 0.0 } else { v });
                }
                4 => {
                    h *= 100.0;
                }
                _ => {}
            }
            KktInstance { h, j, mu }
        })
        .collect()
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `(u, w)` stacked.
pub fn stack(u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(u.len() + w.len(), u.iter().chain(w.iter()).copied())
}

pub fn builtins() -> Vec<Box<dyn NlpProblem>> {
    builtin_catalog().iter().map(|(name, _)| builtin(name).unwrap()).collect()
}

/// Random point with `x ∈ [lo, hi]ⁿ` and `y ∈ [−2, 2]ᵐ`.
pub fn random_point(r: &mut impl Rng, problem: &dyn NlpProblem, lo: f64, hi: f64) -> Iterate {
    Iterate::new(
        DVector::from_fn(problem.num_vars(), |_, _| r.gen_range(lo..hi)),
        DVector::from_fn(problem.num_constraints(), |_, _| r.gen_range(-2.0..2.0)),
    )
}

/// Nonconvex quartic in `n` variables with `m` quadratic constraints,
/// bounded below on `x >= 0` by the `Σ xᵢ⁴` term.
pub fn random_polynomial_problem(r: &mut impl Rng, n: usize, m: usize) -> PolynomialProblem {
    let unit = |i: usize, p: u32| {
        let mut e = vec![0u32; n];
        e[i] = p;
        e
    };
    let mut terms = Vec::new();
    for i in 0..n {
        terms.push(Monomial::new(r.gen_range(0.5..1.5), unit(i, 4)));
        terms.push(Monomial::new(r.gen_range(-3.0..1.0), unit(i, 2)));
        terms.push(Monomial::new(r.gen_range(-1.0..1.0), unit(i, 1)));
        for k in (i + 1)..n {
            let mut e = unit(i, 1);
            e[k] = 1;
            terms.push(Monomial::new(r.gen_range(-1.0..1.0), e));
        }
    }
    let objective = Polynomial::new(n, terms).unwrap();
    let x0 = DVector::from_fn(n, |_, _| r.gen_range(0.2..2.0));
    let constraints: Vec<Polynomial> = (0..m)
        .map(|_| {
            let mut t: Vec<Monomial> = (0..n).map(|i| Monomial::new(r.gen_range(0.5..1.5), unit(i, 1))).collect();
            let i = r.gen_range(0..n);
            t.push(Monomial::new(r.gen_range(-0.3..0.3), unit(i, 2)));
            // Constant chosen so that the start is feasible.
            let p = Polynomial::new(n, t.clone()).unwrap();
            t.push(Monomial::new(-p.value(&x0), vec![0; n]));
            Polynomial::new(n, t).unwrap()
        })
        .collect();
    let start = Iterate::new(x0, DVector::zeros(m));
    PolynomialProblem::new("random-quartic", objective, constraints, start).unwrap()
}

/// A named solver run.
pub struct Run {
    pub label: String,
    pub problem: Box<dyn NlpProblem>,
    pub output: SolveOutput,
}

/// Built-ins from default and random starts, with and without curvature,
/// plus random polynomial problems.
pub fn solver_runs() -> Vec<Run> {
    let mut runs = Vec::new();
    let mut r = rng(7);
    for enable in [true, false] {
        let config = SolverConfig {
            enable_curvature: enable,
            ..SolverConfig::default()
        };
        for (name, _) in builtin_catalog() {
            let problem = builtin(name).unwrap();
            let mut starts = vec![problem.default_start()];
            for _ in 0..8 {
                starts.push(random_point(&mut r, problem.as_ref(), 0.0, 6.0));
            }
            for (s, start) in starts.into_iter().enumerate() {
                let output = solve(problem.as_ref(), &start, &config).unwrap();
                runs.push(Run {
                    label: format!("{name}#{s} curvature={enable}"),
                    problem: builtin(name).unwrap(),
                    output,
                });
            }
        }
    }
    for s in 0..24 {
        let n = r.gen_range(1..=4);
        let m = r.gen_range(0..n);
        let problem = random_polynomial_problem(&mut r, n, m);
        let output = solve(&problem, &problem.default_start(), &SolverConfig::default()).unwrap();
        runs.push(Run {
            label: format!("random-quartic#{s} n={n} m={m}"),
            problem: Box::new(problem),
            output,
        });
    }
    runs
}
