//! Inertia-controlling factorization of the free KKT matrix
//!
//! ```text
//! K_F = [ H_F   J_Fᵀ ]
//!       [ J_F  −μ I_m ]
//! ```
//!
//! Only the first stage of an inertia-controlling `LBLᵀ` factorization is
//! carried out: pivots are restricted to positive Hessian diagonals (H⁺),
//! negative diagonals of the dual block (D⁻), or 2×2 Hessian/dual blocks with
//! mixed eigenvalues (HD). When no such pivot remains, every dual row has been
//! eliminated and the leftover Schur complement `S` lives on Hessian rows. `S`
//! is the source of both the convexifying shift and the direction of negative
//! curvature.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{inf_norm, max_abs, symmetrize};
use crate::{Error, Result};

/// Relative size below which a Hessian diagonal is not an H⁺ pivot.
pub const PIVOT_THRESHOLD: f64 = 1e-12;
/// Default relative margin in `delta = (1 + margin)‖S‖∞`.
pub const DEFAULT_MARGIN: f64 = 0.5;

/// Free-variable KKT data.
#[derive(Clone, Debug, PartialEq)]
pub struct KktSystem {
    h: DMatrix<f64>,
    j: DMatrix<f64>,
    mu: f64,
}

impl KktSystem {
    pub fn new(h_f: DMatrix<f64>, j_f: DMatrix<f64>, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidArgument(format!("KKT regularization mu = {mu} must be positive")));
        }
        if h_f.nrows() != h_f.ncols() {
            return Err(Error::DimensionMismatch {
                context: "KKT Hessian block",
                expected: h_f.nrows(),
                found: h_f.ncols(),
            });
        }
        if j_f.ncols() != h_f.nrows() {
            return Err(Error::DimensionMismatch {
                context: "KKT Jacobian block",
                expected: h_f.nrows(),
                found: j_f.ncols(),
            });
        }
        Ok(Self { h: h_f, j: j_f, mu })
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Number of free primal rows `|F|`.
    pub fn num_primal(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_dual(&self) -> usize {
        self.j.nrows()
    }

    pub fn dim(&self) -> usize {
        self.num_primal() + self.num_dual()
    }

    /// The dense symmetric matrix `K_F`.
    pub fn assemble(&self) -> DMatrix<f64> {
        assemble_kkt(&self.h, &self.j, self.mu)
    }
}

pub(crate) fn assemble_kkt(h: &DMatrix<f64>, j: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    let (nf, m) = (h.nrows(), j.nrows());
    let mut k = DMatrix::zeros(nf + m, nf + m);
    k.view_mut((0, 0), (nf, nf)).copy_from(h);
    k.view_mut((nf, 0), (m, nf)).copy_from(j);
    k.view_mut((0, nf), (nf, m)).copy_from(&j.transpose());
    for i in 0..m {
        k[(nf + i, nf + i)] = -mu;
    }
    k
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PivotKind {
    /// Positive diagonal of the Hessian block.
    HPlus,
    /// Negative diagonal of the dual block.
    DMinus,
    /// 2×2 Hessian/dual block with one positive and one negative eigenvalue.
    HD,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PivotBlock {
    pub kind: PivotKind,
    /// Position of the block's first row in the permuted ordering.
    pub start: usize,
    /// Rows of `K_F` (original numbering) eliminated by this block.
    pub rows: Vec<usize>,
    pub block: DMatrix<f64>,
}

impl PivotBlock {
    pub fn size(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn new(positive: usize, negative: usize, zero: usize) -> Self {
        Self { positive, negative, zero }
    }
}

/// Result of stage one: `P K_F Pᵀ = L · blockdiag(B, S) · Lᵀ`.
#[derive(Clone, Debug)]
pub struct Stage1Factor {
    kkt: KktSystem,
    /// `perm[k]` is the row of `K_F` placed at position `k`.
    perm: Vec<usize>,
    l: DMatrix<f64>,
    blocks: Vec<PivotBlock>,
    schur: DMatrix<f64>,
    schur_rows: Vec<usize>,
    inertia: Inertia,
    threshold: f64,
}

impl Stage1Factor {
    pub fn kkt(&self) -> &KktSystem {
        &self.kkt
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Unit lower-triangular factor in permuted ordering; its trailing block
    /// (over the Schur rows) is the identity.
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn blocks(&self) -> &[PivotBlock] {
        &self.blocks
    }

    /// The unfactorized Schur complement `S`.
    pub fn schur(&self) -> &DMatrix<f64> {
        &self.schur
    }

    /// Hessian rows (indices into `F`) carried by `S`, in order.
    pub fn schur_rows(&self) -> &[usize] {
        &self.schur_rows
    }

    /// Inertia of the pivots eliminated so far.
    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn num_pivoted(&self) -> usize {
        self.perm.len() - self.schur_rows.len()
    }

    pub fn count(&self, kind: PivotKind) -> usize {
        self.blocks.iter().filter(|b| b.kind == kind).count()
    }

    /// `P K_F Pᵀ`.
    pub fn permuted_kkt(&self) -> DMatrix<f64> {
        let k = self.kkt.assemble();
        let p = &self.perm;
        DMatrix::from_fn(p.len(), p.len(), |i, j| k[(p[i], p[j])])
    }

    /// `L · blockdiag(B, S) · Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.perm.len();
        let mut mid = DMatrix::zeros(n, n);
        for b in &self.blocks {
            mid.view_mut((b.start, b.start), (b.size(), b.size())).copy_from(&b.block);
        }
        let np = self.num_pivoted();
        mid.view_mut((np, np), (self.schur_rows.len(), self.schur_rows.len()))
            .copy_from(&self.schur);
        &self.l * mid * self.l.transpose()
    }
}

fn block_inertia(kind: PivotKind) -> Inertia {
    match kind {
        PivotKind::HPlus => Inertia::new(1, 0, 0),
        PivotKind::DMinus => Inertia::new(0, 1, 0),
        PivotKind::HD => Inertia::new(1, 1, 0),
    }
}

/// Working state of the elimination in original row numbering.
struct Elimination {
    nf: usize,
    a: DMatrix<f64>,
    multipliers: DMatrix<f64>,
    remaining: Vec<bool>,
    order: Vec<usize>,
    blocks: Vec<(PivotKind, Vec<usize>, DMatrix<f64>)>,
}

impl Elimination {
    fn remaining_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.remaining.len()).filter(|&i| self.remaining[i])
    }

    fn eliminate_1x1(&mut self, p: usize, kind: PivotKind) {
        let piv = self.a[(p, p)];
        self.remaining[p] = false;
        let rows: Vec<usize> = self.remaining_rows().collect();
        for &i in &rows {
            self.multipliers[(i, p)] = self.a[(i, p)] / piv;
        }
        for &i in &rows {
            let li = self.multipliers[(i, p)];
            if li == 0.0 {
                continue;
            }
            for &j in &rows {
                self.a[(i, j)] -= li * self.a[(p, j)];
            }
        }
        self.order.push(p);
        self.blocks.push((kind, vec![p], DMatrix::from_element(1, 1, piv)));
    }

    fn eliminate_2x2(&mut self, p: usize, q: usize) {
        let block = DMatrix::from_row_slice(
            2,
            2,
            &[self.a[(p, p)], self.a[(p, q)], self.a[(q, p)], self.a[(q, q)]],
        );
        let det = block[(0, 0)] * block[(1, 1)] - block[(0, 1)] * block[(1, 0)];
        let inv = DMatrix::from_row_slice(
            2,
            2,
            &[block[(1, 1)] / det, -block[(0, 1)] / det, -block[(1, 0)] / det, block[(0, 0)] / det],
        );
        self.remaining[p] = false;
        self.remaining[q] = false;
        let rows: Vec<usize> = self.remaining_rows().collect();
        for &i in &rows {
            let (ap, aq) = (self.a[(i, p)], self.a[(i, q)]);
            self.multipliers[(i, p)] = ap * inv[(0, 0)] + aq * inv[(1, 0)];
            self.multipliers[(i, q)] = ap * inv[(0, 1)] + aq * inv[(1, 1)];
        }
        for &i in &rows {
            let (lp, lq) = (self.multipliers[(i, p)], self.multipliers[(i, q)]);
            for &j in &rows {
                self.a[(i, j)] -= lp * self.a[(p, j)] + lq * self.a[(q, j)];
            }
        }
        self.order.extend([p, q]);
        self.blocks.push((PivotKind::HD, vec![p, q], block));
    }

    /// Largest-magnitude eligible 1×1 pivot; D⁻ wins ties.
    fn choose_1x1(&self, threshold: f64) -> Option<(usize, PivotKind)> {
        let mut best: Option<(usize, PivotKind, f64)> = None;
        for i in self.remaining_rows() {
            let d = self.a[(i, i)];
            let candidate = if i >= self.nf {
                (d < 0.0).then_some(PivotKind::DMinus)
            } else {
                (d > threshold).then_some(PivotKind::HPlus)
            };
            let Some(kind) = candidate else { continue };
            let mag = d.abs();
            let better = match best {
                None => true,
                Some((_, bk, bm)) => mag > bm || (mag == bm && kind == PivotKind::DMinus && bk == PivotKind::HPlus),
            };
            if better {
                best = Some((i, kind, mag));
            }
        }
        best.map(|(i, k, _)| (i, k))
    }

    /// Hessian/dual pair with the largest coupling whose 2×2 block has a
    /// negative determinant.
    fn choose_2x2(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for h in self.remaining_rows().filter(|&i| i < self.nf) {
            for d in self.remaining_rows().filter(|&i| i >= self.nf) {
                let off = self.a[(h, d)];
                let det = self.a[(h, h)] * self.a[(d, d)] - off * off;
                if det < 0.0 && best.is_none_or(|(_, _, b)| off.abs() > b) {
                    best = Some((h, d, off.abs()));
                }
            }
        }
        best.map(|(h, d, _)| (h, d))
    }

    fn finish(mut self, kkt: KktSystem, threshold: f64) -> Stage1Factor {
        symmetrize(&mut self.a);
        let schur_rows: Vec<usize> = self.remaining_rows().collect();
        let mut perm = self.order.clone();
        perm.extend(&schur_rows);
        let n = perm.len();
        let np = self.order.len();

        let mut position = vec![0; n];
        for (k, &r) in perm.iter().enumerate() {
            position[r] = k;
        }
        let mut l = DMatrix::identity(n, n);
        for (col, &pc) in perm.iter().enumerate().take(np) {
            for (row, &pr) in perm.iter().enumerate().skip(col + 1) {
                l[(row, col)] = self.multipliers[(pr, pc)];
            }
        }

        let mut inertia = Inertia::default();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (kind, rows, block) in self.blocks {
            let bi = block_inertia(kind);
            inertia.positive += bi.positive;
            inertia.negative += bi.negative;
            let start = position[rows[0]];
            blocks.push(PivotBlock { kind, start, rows, block });
        }

        let schur = DMatrix::from_fn(schur_rows.len(), schur_rows.len(), |i, j| {
            self.a[(schur_rows[i], schur_rows[j])]
        });
        Stage1Factor {
            kkt,
            perm,
            l,
            blocks,
            schur,
            schur_rows,
            inertia,
            threshold,
        }
    }
}

fn start_elimination(kkt: &KktSystem) -> Elimination {
    let n = kkt.dim();
    Elimination {
        nf: kkt.num_primal(),
        a: kkt.assemble(),
        multipliers: DMatrix::zeros(n, n),
        remaining: vec![true; n],
        order: Vec::with_capacity(n),
        blocks: Vec::new(),
    }
}

/// Runs stage one with the restricted pivot rule until no H⁺, D⁻ or HD pivot
/// remains.
pub fn stage1_factorize(kkt: &KktSystem) -> Result<Stage1Factor> {
    let threshold = PIVOT_THRESHOLD * (1.0 + max_abs(&kkt.assemble()));
    let mut elim = start_elimination(kkt);
    loop {
        if let Some((p, kind)) = elim.choose_1x1(threshold) {
            elim.eliminate_1x1(p, kind);
        } else if let Some((h, d)) = elim.choose_2x2() {
            elim.eliminate_2x2(h, d);
        } else {
            break;
        }
        if !elim.a.iter().all(|v| v.is_finite()) {
            let pivoted = elim.order.len();
            return Err(Error::FactorBreakdown {
                pivoted,
                reason: "non-finite Schur complement entry".into(),
                partial: Box::new(elim.finish(kkt.clone(), threshold)),
            });
        }
    }
    let nf = kkt.num_primal();
    if elim.remaining_rows().any(|i| i >= nf) {
        let pivoted = elim.order.len();
        return Err(Error::FactorBreakdown {
            pivoted,
            reason: "dual rows left without an admissible pivot".into(),
            partial: Box::new(elim.finish(kkt.clone(), threshold)),
        });
    }
    Ok(elim.finish(kkt.clone(), threshold))
}

/// A diagonal shift on the unpivoted Hessian rows that gives the KKT matrix
/// the inertia `(|F|, m, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Convexification {
    pub delta: f64,
    /// Indices into `F` whose diagonal receives `delta`.
    pub shifted_rows: Vec<usize>,
    /// `H_F` with the shift applied.
    pub h_tilde: DMatrix<f64>,
}

/// Shifts the Schur rows by `delta = (1 + margin)‖S‖∞`, which exceeds the
/// spectral norm of `S` whenever `margin > 0`.
///
/// A nonempty but numerically zero `S` still gets a small positive shift so
/// the shifted matrix stays nonsingular.
pub fn convexify(factor: &Stage1Factor, margin: f64) -> Convexification {
    let rows = factor.schur_rows().to_vec();
    let mut h_tilde = factor.kkt().hessian().clone();
    if rows.is_empty() {
        return Convexification {
            delta: 0.0,
            shifted_rows: rows,
            h_tilde,
        };
    }
    let floor = f64::EPSILON.sqrt() * (1.0 + max_abs(&factor.kkt().assemble()));
    let delta = ((1.0 + margin) * inf_norm(factor.schur())).max(floor);
    for &i in &rows {
        h_tilde[(i, i)] += delta;
    }
    Convexification {
        delta,
        shifted_rows: rows,
        h_tilde,
    }
}

/// Inertia of a symmetric matrix from a Bunch–Kaufman `LDLᵀ` factorization.
///
/// Pivots whose column is below `1e-10·‖A‖max` are counted as zero
/// eigenvalues.
pub fn inertia(matrix: &DMatrix<f64>) -> Inertia {
    let n = matrix.nrows();
    let mut a = matrix.clone();
    symmetrize(&mut a);
    let tol = 1e-10 * max_abs(&a);
    let alpha = (1.0 + 17f64.sqrt()) / 8.0;
    let mut out = Inertia::default();
    let mut k = 0;
    while k < n {
        // Column maximum below the diagonal.
        let (mut r, mut lambda) = (k, 0.0);
        for i in (k + 1)..n {
            if a[(i, k)].abs() > lambda {
                lambda = a[(i, k)].abs();
                r = i;
            }
        }
        let akk = a[(k, k)].abs();
        if akk.max(lambda) <= tol {
            out.zero += 1;
            k += 1;
            continue;
        }
        let two_by_two = if akk >= alpha * lambda {
            false
        } else {
            let sigma = (k..n).filter(|&i| i != r).map(|i| a[(i, r)].abs()).fold(0.0, f64::max);
            if akk * sigma >= alpha * lambda * lambda {
                false
            } else if a[(r, r)].abs() >= alpha * sigma {
                swap_symmetric(&mut a, k, r);
                false
            } else {
                swap_symmetric(&mut a, k + 1, r);
                true
            }
        };
        if !two_by_two {
            let d = a[(k, k)];
            if d.abs() <= tol {
                out.zero += 1;
            } else if d > 0.0 {
                out.positive += 1;
            } else {
                out.negative += 1;
            }
            if d != 0.0 {
                for i in (k + 1)..n {
                    let li = a[(i, k)] / d;
                    for j in (k + 1)..n {
                        a[(i, j)] -= li * a[(k, j)];
                    }
                }
            }
            k += 1;
        } else {
            let (p, q) = (a[(k, k)], a[(k + 1, k + 1)]);
            let off = a[(k, k + 1)];
            let det = p * q - off * off;
            let (tr, disc) = (p + q, ((p - q) * (p - q) + 4.0 * off * off).sqrt());
            for ev in [0.5 * (tr - disc), 0.5 * (tr + disc)] {
                if ev.abs() <= tol {
                    out.zero += 1;
                } else if ev > 0.0 {
                    out.positive += 1;
                } else {
                    out.negative += 1;
                }
            }
            for i in (k + 2)..n {
                let (ai, bi) = (a[(i, k)], a[(i, k + 1)]);
                let l0 = (ai * q - bi * off) / det;
                let l1 = (bi * p - ai * off) / det;
                for j in (k + 2)..n {
                    a[(i, j)] -= l0 * a[(k, j)] + l1 * a[(k + 1, j)];
                }
            }
            k += 2;
        }
    }
    out
}

fn swap_symmetric(a: &mut DMatrix<f64>, i: usize, j: usize) {
    if i != j {
        a.swap_rows(i, j);
        a.swap_columns(i, j);
    }
}

/// Solves `Lᵀ d = t` for the unit lower-triangular factor.
pub(crate) fn solve_unit_upper_transposed(l: &DMatrix<f64>, t: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut d = t.clone();
    for i in (0..n).rev() {
        let mut s = d[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * d[k];
        }
        d[i] = s;
    }
    d
}
