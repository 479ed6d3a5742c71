//! Polynomial problems assembled from monomial terms, with exact derivatives.

use nalgebra::{DMatrix, DVector};

use super::{Iterate, NlpProblem};
use crate::{Error, Result};

/// `coefficient · Π xᵢ^exponents[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

fn pow(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

impl Monomial {
    pub fn new(coefficient: f64, exponents: Vec<u32>) -> Self {
        Self { coefficient, exponents }
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.exponents
            .iter()
            .enumerate()
            .fold(self.coefficient, |acc, (i, &e)| acc * pow(x[i], e))
    }

    /// Product over all factors, with factor `i` replaced by `d(i, x_i, e_i)`
    /// for the indices listed in `diff`.
    fn product_with(&self, x: &DVector<f64>, diff: &[usize]) -> f64 {
        let mut acc = self.coefficient;
        for (i, &e) in self.exponents.iter().enumerate() {
            let order = diff.iter().filter(|&&k| k == i).count() as u32;
            let factor = match order {
                0 => pow(x[i], e),
                1 if e >= 1 => e as f64 * pow(x[i], e - 1),
                2 if e >= 2 => (e * (e - 1)) as f64 * pow(x[i], e - 2),
                _ => 0.0,
            };
            acc *= factor;
            if acc == 0.0 {
                break;
            }
        }
        acc
    }
}

/// A sum of monomials over a fixed number of variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    pub n: usize,
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(n: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.exponents.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "monomial exponent vector",
                    expected: n,
                    found: t.exponents.len(),
                });
            }
            if !t.coefficient.is_finite() {
                return Err(Error::InvalidArgument("monomial coefficient must be finite".into()));
            }
        }
        Ok(Self { n, terms })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.terms.iter().map(|t| t.value(x)).sum()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| self.terms.iter().map(|t| t.product_with(x, &[i])).sum())
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..=i {
                let v: f64 = self.terms.iter().map(|t| t.product_with(x, &[i, j])).sum();
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }
}

#[derive(Clone, Debug)]
pub struct PolynomialProblem {
    name: String,
    objective: Polynomial,
    constraints: Vec<Polynomial>,
    start: Iterate,
}

impl PolynomialProblem {
    pub fn new(
        name: impl Into<String>,
        objective: Polynomial,
        constraints: Vec<Polynomial>,
        start: Iterate,
    ) -> Result<Self> {
        let n = objective.n;
        if let Some(c) = constraints.iter().find(|c| c.n != n) {
            return Err(Error::DimensionMismatch {
                context: "constraint polynomial",
                expected: n,
                found: c.n,
            });
        }
        if start.x.len() != n || start.y.len() != constraints.len() {
            return Err(Error::DimensionMismatch {
                context: "start point",
                expected: n + constraints.len(),
                found: start.x.len() + start.y.len(),
            });
        }
        if start.x.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("start point must be finite and nonnegative".into()));
        }
        Ok(Self {
            name: name.into(),
            objective,
            constraints,
            start,
        })
    }
}

impl NlpProblem for PolynomialProblem {
    fn name(&self) -> &str {
        &self.name
    }
    fn num_vars(&self) -> usize {
        self.objective.n
    }
    fn num_constraints(&self) -> usize {
        self.constraints.len()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.objective.value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.objective.gradient(x)
    }
    fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|c| c.value(x)))
    }
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.num_vars();
        let mut j = DMatrix::zeros(self.constraints.len(), n);
        for (i, c) in self.constraints.iter().enumerate() {
            j.set_row(i, &c.gradient(x).transpose());
        }
        j
    }
    fn hessian(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        let mut h = self.objective.hessian(x);
        for (c, &yi) in self.constraints.iter().zip(y.iter()) {
            if yi != 0.0 {
                h += c.hessian(x) * yi;
            }
        }
        h
    }
    fn default_start(&self) -> Iterate {
        self.start.clone()
    }
}
