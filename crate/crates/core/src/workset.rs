//! Estimate of the variables sitting on their bounds.
//!
//! A single working set drives convexification, the QP seed and the
//! negative-curvature search: `i` is active when `x_i <= min(mu, epsilon_a)`.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{principal_submatrix, select_columns, select_entries};
use crate::{Error, Result};

pub const DEFAULT_EPSILON_A: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Active,
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkingSet {
    active: Vec<usize>,
    free: Vec<usize>,
    epsilon_a: f64,
}

/// Splits `0..x.len()` into active and free indices.
pub fn estimate(x: &DVector<f64>, mu: f64, epsilon_a: f64) -> WorkingSet {
    let threshold = mu.min(epsilon_a);
    let (active, free) = (0..x.len()).partition(|&i| x[i] <= threshold);
    WorkingSet { active, free, epsilon_a }
}

impl WorkingSet {
    pub fn dim(&self) -> usize {
        self.active.len() + self.free.len()
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn epsilon_a(&self) -> f64 {
        self.epsilon_a
    }

    pub fn indices(&self, part: Part) -> &[usize] {
        match part {
            Part::Active => &self.active,
            Part::Free => &self.free,
        }
    }

    fn check(&self, found: usize, context: &'static str) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }

    pub fn restrict_vector(&self, v: &DVector<f64>, part: Part) -> Result<DVector<f64>> {
        self.check(v.len(), "restricted vector")?;
        Ok(select_entries(v, self.indices(part)))
    }

    /// Principal submatrix of a symmetric `n × n` matrix.
    pub fn restrict_symmetric(&self, h: &DMatrix<f64>, part: Part) -> Result<DMatrix<f64>> {
        self.check(h.nrows(), "restricted matrix rows")?;
        self.check(h.ncols(), "restricted matrix columns")?;
        Ok(principal_submatrix(h, self.indices(part)))
    }

    /// Column selection of an `m × n` matrix.
    pub fn restrict_columns(&self, j: &DMatrix<f64>, part: Part) -> Result<DMatrix<f64>> {
        self.check(j.ncols(), "restricted matrix columns")?;
        Ok(select_columns(j, self.indices(part)))
    }

    /// Zero-padded extension of a restricted vector back to `n` entries.
    pub fn extend(&self, sub: &DVector<f64>, part: Part) -> Result<DVector<f64>> {
        let idx = self.indices(part);
        if sub.len() != idx.len() {
            return Err(Error::DimensionMismatch {
                context: "extended vector",
                expected: idx.len(),
                found: sub.len(),
            });
        }
        let mut out = DVector::zeros(self.dim());
        for (k, &i) in idx.iter().enumerate() {
            out[i] = sub[k];
        }
        Ok(out)
    }
}
