//! Sparse inverse-covariance estimation with the CONCORD objective.
//!
//! Given a covariance estimate `S` (symmetric, strictly positive diagonal)
//! and a penalty weight `lambda`, the estimator minimizes
//!
//! ```text
//! Q(Omega) = -sum_k log w_kk  +  1/2 sum_i Omega_col_i' S Omega_col_i
//!            +  lambda sum_{k<l} |w_kl|
//! ```
//!
//! over symmetric matrices `Omega` with positive diagonal. `Q` is exactly an
//! instance of the quadratic-plus-log-barrier template: packing the distinct
//! entries of `Omega` into a vector turns the quadratic term into `x'E'E x`
//! for a suitable `E`, the diagonal entries become barrier coordinates, and
//! the off-diagonal entries carry the l1 penalty.
//!
//! Two interchangeable paths solve it:
//!
//! * [`ConcordPath::Direct`] sweeps the packed entries in place, keeping the
//!   running product `W = S * Omega` so each scalar update costs O(p). This
//!   is the production path.
//! * [`ConcordPath::Vectorized`] materializes `E` (p² × p(p+1)/2) and hands
//!   the problem to the generic solver. It exists to cross-validate the
//!   reduction and is capped at small `p`.
//!
//! Both paths take the same scalar steps in the same order, so their iterate
//! sequences agree sweep by sweep up to round-off.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::CcmError;
use crate::linalg;
use crate::model::{DesignMatrix, F2Problem, PenaltySet};
use crate::scalar_min::{min_quad_l1, min_quad_log, soft_threshold, QuadL1Spec, QuadLogSpec};
use crate::solver::{solve, CoordinateSweep, SolveOutcome, SolverConfig, UpdateOrder};
use crate::Real;

/// Largest dimension the vectorized cross-check path will materialize.
///
/// `E` is p² × p(p+1)/2, so memory and per-sweep cost grow like p⁴; past
/// this size the direct path is the only sensible choice.
pub const VECTORIZED_DIM_CAP: usize = 64;

/// Addressing for the packed upper triangle of a symmetric p×p matrix.
///
/// Entries are stored column by column, each diagonal entry last within its
/// column: `(k,l)` with `k <= l` lives at `l(l+1)/2 + k`. Sweeping positions
/// in natural order therefore visits every off-diagonal entry of a column
/// before its diagonal.
#[derive(Debug, Clone)]
pub struct TriangularIndex {
    p: usize,
    pairs: Vec<(usize, usize)>,
}

impl TriangularIndex {
    pub fn new(p: usize) -> Self {
        let mut pairs = Vec::with_capacity(p * (p + 1) / 2);
        for l in 0..p {
            for k in 0..=l {
                pairs.push((k, l));
            }
        }
        TriangularIndex { p, pairs }
    }

    /// Side length of the matrix being indexed.
    pub fn dimension(&self) -> usize {
        self.p
    }

    /// Number of packed positions, `p(p+1)/2`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Packed position of entry `(k, l)`; the order of the indices does not
    /// matter.
    pub fn position(&self, k: usize, l: usize) -> usize {
        let (k, l) = if k <= l { (k, l) } else { (l, k) };
        l * (l + 1) / 2 + k
    }

    /// The `(row, column)` pair (row <= column) stored at position `c`.
    pub fn pair(&self, c: usize) -> (usize, usize) {
        self.pairs[c]
    }

    pub fn is_diagonal(&self, c: usize) -> bool {
        let (k, l) = self.pairs[c];
        k == l
    }

    /// Expands a packed vector into the full symmetric matrix.
    pub fn expand<F: Real>(&self, tri: ArrayView1<F>) -> Array2<F> {
        debug_assert_eq!(tri.len(), self.len());
        let mut m = Array2::zeros((self.p, self.p));
        for (c, &(k, l)) in self.pairs.iter().enumerate() {
            m[(k, l)] = tri[c];
            m[(l, k)] = tri[c];
        }
        m
    }

    /// Packs the upper triangle of a symmetric matrix.
    pub fn pack<F: Real>(&self, m: &Array2<F>) -> Array1<F> {
        debug_assert_eq!(m.nrows(), self.p);
        Array1::from_iter(self.pairs.iter().map(|&(k, l)| m[(k, l)]))
    }
}

impl PartialEq for TriangularIndex {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
    }
}

fn max_abs<F: Real>(m: &Array2<F>) -> F {
    m.iter().fold(F::zero(), |acc, &v| acc.max(v.abs()))
}

/// A validated input to the CONCORD estimator: the covariance estimate and
/// the penalty weight.
///
/// Validation requires a square, finite, symmetric matrix with strictly
/// positive diagonal, and `lambda > 0`. Positive semidefiniteness is *not*
/// required here — the direct path never factors the matrix. (The vectorized
/// cross-check path and the level-set certificates do assume it.)
#[derive(Debug, Clone)]
pub struct CovarianceProblem<F> {
    sigma: Array2<F>,
    lambda: F,
}

impl<F: Real> CovarianceProblem<F> {
    pub fn new(sigma: Array2<F>, lambda: F) -> Result<Self, CcmError<F>> {
        let p = sigma.nrows();
        if p == 0 {
            return Err(CcmError::EmptyMatrix);
        }
        if sigma.ncols() != p {
            return Err(CcmError::DimensionMismatch { expected: p, found: sigma.ncols() });
        }
        for ((r, c), &v) in sigma.indexed_iter() {
            if !v.is_finite() {
                return Err(CcmError::NonFiniteEntry { row: r + 1, col: c + 1 });
            }
        }
        let mut asym = F::zero();
        for r in 0..p {
            for c in (r + 1)..p {
                asym = asym.max((sigma[(r, c)] - sigma[(c, r)]).abs());
            }
        }
        if asym > F::cast(1e-12) * max_abs(&sigma) {
            return Err(CcmError::NotSymmetric { max_asymmetry: asym });
        }
        for i in 0..p {
            if !(sigma[(i, i)] > F::zero()) {
                return Err(CcmError::NonpositiveDiagonal { index: i + 1 });
            }
        }
        if !(lambda > F::zero()) {
            return Err(CcmError::NonpositiveLambda);
        }
        Ok(CovarianceProblem { sigma, lambda })
    }

    /// Builds the covariance estimate from raw observations (rows) before
    /// validating: columns are centered by their means and the cross-product
    /// is scaled by `1/n_rows`.
    pub fn from_observations(data: &Array2<F>, lambda: F) -> Result<Self, CcmError<F>> {
        let n = data.nrows();
        let p = data.ncols();
        if n == 0 || p == 0 {
            return Err(CcmError::EmptyMatrix);
        }
        for ((r, c), &v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(CcmError::NonFiniteEntry { row: r + 1, col: c + 1 });
            }
        }
        let n_f = F::cast(n as f64);
        let means: Array1<F> = data.columns().into_iter().map(|col| col.sum() / n_f).collect();
        let mut sigma = Array2::zeros((p, p));
        for a in 0..p {
            for b in a..p {
                let mut acc = F::zero();
                for r in 0..n {
                    acc = acc + (data[(r, a)] - means[a]) * (data[(r, b)] - means[b]);
                }
                let v = acc / n_f;
                sigma[(a, b)] = v;
                sigma[(b, a)] = v;
            }
        }
        CovarianceProblem::new(sigma, lambda)
    }

    pub fn dimension(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &Array2<F> {
        &self.sigma
    }

    pub fn lambda(&self) -> F {
        self.lambda
    }
}

/// A symmetric estimate stored as its packed upper triangle, so symmetry is
/// structural rather than maintained.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcordEstimate<F> {
    index: TriangularIndex,
    tri: Array1<F>,
}

impl<F: Real> ConcordEstimate<F> {
    pub fn identity(p: usize) -> Self {
        let index = TriangularIndex::new(p);
        let tri = Array1::from_iter(
            index.pairs.iter().map(|&(k, l)| if k == l { F::one() } else { F::zero() }),
        );
        ConcordEstimate { index, tri }
    }

    /// Wraps a packed upper triangle of length `p * (p + 1) / 2`, the layout
    /// solver iterates use. Handy for reconstituting an estimate from a
    /// partial run's final point.
    pub fn from_packed(p: usize, tri: Array1<F>) -> Self {
        let index = TriangularIndex::new(p);
        assert_eq!(tri.len(), index.len(), "packed triangle has the wrong length");
        ConcordEstimate { index, tri }
    }

    /// Packs a full symmetric matrix. Rejects asymmetry beyond round-off
    /// (relative 1e-12) rather than silently averaging.
    pub fn from_matrix(m: &Array2<F>) -> Result<Self, CcmError<F>> {
        let p = m.nrows();
        if p == 0 {
            return Err(CcmError::EmptyMatrix);
        }
        if m.ncols() != p {
            return Err(CcmError::DimensionMismatch { expected: p, found: m.ncols() });
        }
        for ((r, c), &v) in m.indexed_iter() {
            if !v.is_finite() {
                return Err(CcmError::NonFiniteEntry { row: r + 1, col: c + 1 });
            }
        }
        let mut asym = F::zero();
        for r in 0..p {
            for c in (r + 1)..p {
                asym = asym.max((m[(r, c)] - m[(c, r)]).abs());
            }
        }
        if asym > F::cast(1e-12) * max_abs(m) {
            return Err(CcmError::NotSymmetric { max_asymmetry: asym });
        }
        let index = TriangularIndex::new(p);
        let tri = index.pack(m);
        Ok(ConcordEstimate { index, tri })
    }

    pub fn dimension(&self) -> usize {
        self.index.dimension()
    }

    /// Entry `(i, j)`, 0-based, either triangle.
    pub fn get(&self, i: usize, j: usize) -> F {
        self.tri[self.index.position(i, j)]
    }

    /// The packed entries in storage order.
    pub fn packed(&self) -> ArrayView1<'_, F> {
        self.tri.view()
    }

    pub fn to_matrix(&self) -> Array2<F> {
        self.index.expand(self.tri.view())
    }

    /// 1-based index pairs `(i, j)`, `i < j`, whose entries exceed the
    /// threshold in magnitude — the estimated sparsity pattern.
    pub fn edges(&self, threshold: F) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (c, &(k, l)) in self.index.pairs.iter().enumerate() {
            if k < l && self.tri[c].abs() > threshold {
                out.push((k + 1, l + 1));
            }
        }
        out
    }

    /// Whether the estimate admits a Cholesky factorization. The sweep keeps
    /// the diagonal positive but does not force positive definiteness of the
    /// whole matrix; callers that need a PD estimate should check.
    pub fn is_positive_definite(&self) -> bool {
        linalg::cholesky_is_pd(&self.to_matrix())
    }
}

/// The estimator's objective at a packed estimate: `+inf` when any diagonal
/// entry is nonpositive, the penalized pseudo-likelihood otherwise.
pub fn concord_objective<F: Real>(cp: &CovarianceProblem<F>, est: &ConcordEstimate<F>) -> F {
    let p = cp.dimension();
    let index = TriangularIndex::new(p);
    for i in 0..p {
        if !(est.get(i, i) > F::zero()) {
            return F::infinity();
        }
    }
    let omega = est.to_matrix();
    let w = cp.sigma().dot(&omega);
    let mut value = F::zero();
    for i in 0..p {
        value = value - est.get(i, i).ln();
    }
    let half = F::cast(0.5);
    let mut quad = F::zero();
    for c in 0..index.len() {
        let (k, l) = index.pair(c);
        if k == l {
            quad = quad + omega[(k, k)] * w[(k, k)];
        } else {
            quad = quad + omega[(k, l)] * (w[(k, l)] + w[(l, k)]);
        }
    }
    let mut penalty = F::zero();
    for c in 0..index.len() {
        let (k, l) = index.pair(c);
        if k < l {
            penalty = penalty + est.packed()[c].abs();
        }
    }
    value + half * quad + cp.lambda() * penalty
}

/// One column's share of the objective:
/// `-log w_ii + 1/2 col_i' S col_i + (lambda/2) sum_{j != i} |w_ji|`.
///
/// Summing over all columns recovers [`concord_objective`] (each off-diagonal
/// entry contributes half its penalty to each of its two columns).
pub fn column_objective<F: Real>(
    cp: &CovarianceProblem<F>,
    est: &ConcordEstimate<F>,
    i: usize,
) -> F {
    let p = cp.dimension();
    if !(est.get(i, i) > F::zero()) {
        return F::infinity();
    }
    let col = Array1::from_iter((0..p).map(|j| est.get(j, i)));
    let s_col = cp.sigma().dot(&col);
    let quad = F::cast(0.5) * col.dot(&s_col);
    let mut off = F::zero();
    for j in 0..p {
        if j != i {
            off = off + est.get(j, i).abs();
        }
    }
    -est.get(i, i).ln() + quad + cp.lambda() / F::cast(2.0) * off
}

/// The estimator rewritten as an explicit quadratic-plus-barrier problem,
/// together with the packed-index map relating `x` to `Omega`.
#[derive(Debug, Clone)]
pub struct VectorizedConcord<F> {
    pub problem: F2Problem<F>,
    pub index: TriangularIndex,
}

/// Materializes `E` with `x' E'E x = 1/2 sum_i Omega_col_i' S Omega_col_i`
/// and wraps it as a generic barrier problem.
///
/// `E` has one p-row block per matrix column: with `R` the symmetric square
/// root of `S/2`, the packed position for `(k, l)` places `R` column `k` in
/// block `l` and (off the diagonal) `R` column `l` in block `k`. Column norms
/// are then `S_kk/2` at diagonal positions and `(S_kk + S_ll)/2` at
/// off-diagonal ones, matching the scalar steps the direct path takes.
pub fn vectorize_to_f2<F: Real>(
    cp: &CovarianceProblem<F>,
) -> Result<VectorizedConcord<F>, CcmError<F>> {
    let p = cp.dimension();
    if p > VECTORIZED_DIM_CAP {
        return Err(CcmError::VectorizedTooLarge { p, cap: VECTORIZED_DIM_CAP });
    }
    let index = TriangularIndex::new(p);
    let n = index.len();
    let half_sigma = cp.sigma().mapv(|v| v * F::cast(0.5));
    let r = linalg::psd_sqrt(&half_sigma)?;
    let mut e = Array2::zeros((p * p, n));
    for c in 0..n {
        let (k, l) = index.pair(c);
        for row in 0..p {
            e[(l * p + row, c)] = e[(l * p + row, c)] + r[(row, k)];
        }
        if k < l {
            for row in 0..p {
                e[(k * p + row, c)] = e[(k * p + row, c)] + r[(row, l)];
            }
        }
    }
    let design = DesignMatrix::new(e)?;
    let penalized = PenaltySet::from_indices(
        n,
        (0..n).filter(|&c| !index.is_diagonal(c)),
    )?;
    let problem = F2Problem::new(design, penalized, cp.lambda())?;
    Ok(VectorizedConcord { problem, index })
}

/// Which implementation carries out the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcordPath {
    /// In-place sweeps over the packed triangle with a cached `S * Omega`
    /// product. O(p²) memory, O(p) per entry update.
    Direct,
    /// Materialize `E` and run the generic solver. Small `p` only; used to
    /// validate that both formulations take identical steps.
    Vectorized,
}

/// Sweep state for the direct path: the packed iterate plus the running
/// product `W = S * Omega`, refreshed periodically to shed drift.
#[derive(Debug, Clone)]
pub struct DirectState<F> {
    tri: Array1<F>,
    w: Array2<F>,
    updates_since_refresh: usize,
    refresh_period: usize,
}

/// The in-place coordinate sweep over the packed entries of `Omega`.
///
/// Each scalar subproblem is quadratic: restricted to one entry `u`, the
/// smooth part of the objective is `a u² + b u + const` with `a` fixed by
/// the covariance diagonal and `b` read off the cached product, so the
/// update is a closed-form soft-threshold or quadratic-log minimizer.
#[derive(Debug, Clone)]
pub struct DirectEngine<'a, F> {
    cp: &'a CovarianceProblem<F>,
    index: TriangularIndex,
}

impl<'a, F: Real> DirectEngine<'a, F> {
    pub fn new(cp: &'a CovarianceProblem<F>) -> Self {
        let index = TriangularIndex::new(cp.dimension());
        DirectEngine { cp, index }
    }

    pub fn index(&self) -> &TriangularIndex {
        &self.index
    }

    fn rebuild_product(&self, tri: &Array1<F>) -> Array2<F> {
        let omega = self.index.expand(tri.view());
        self.cp.sigma().dot(&omega)
    }

    /// Applies `Omega[k,l] += delta` (and its mirror) to the cached product.
    fn bump_product(&self, state: &mut DirectState<F>, k: usize, l: usize, delta: F) {
        let sigma = self.cp.sigma();
        let p = self.index.dimension();
        for row in 0..p {
            state.w[(row, l)] = state.w[(row, l)] + delta * sigma[(row, k)];
        }
        if k != l {
            for row in 0..p {
                state.w[(row, k)] = state.w[(row, k)] + delta * sigma[(row, l)];
            }
        }
        state.updates_since_refresh += 1;
        if state.updates_since_refresh >= state.refresh_period {
            state.w = self.rebuild_product(&state.tri);
            state.updates_since_refresh = 0;
        }
    }
}

impl<F: Real> CoordinateSweep<F> for DirectEngine<'_, F> {
    type State = DirectState<F>;

    fn dim(&self) -> usize {
        self.index.len()
    }

    fn init_state(&self, x0: ArrayView1<F>) -> Result<DirectState<F>, CcmError<F>> {
        if x0.len() != self.index.len() {
            return Err(CcmError::DimensionMismatch {
                expected: self.index.len(),
                found: x0.len(),
            });
        }
        let tri = x0.to_owned();
        let w = self.rebuild_product(&tri);
        Ok(DirectState {
            tri,
            w,
            updates_since_refresh: 0,
            // Two sweeps' worth of rank-one bumps between full rebuilds.
            refresh_period: self.index.len().saturating_mul(2).max(1),
        })
    }

    fn sweep_once(
        &self,
        state: &mut DirectState<F>,
        order: &UpdateOrder,
        _inner_tol: F,
        mut trace: Option<&mut Vec<(usize, F)>>,
    ) -> Result<(), CcmError<F>> {
        let sigma = self.cp.sigma();
        let lambda = self.cp.lambda();
        let two = F::cast(2.0);
        for slot in 0..self.index.len() {
            let c = order.index(slot);
            let (k, l) = self.index.pair(c);
            let current = state.tri[c];
            let new = if k == l {
                let a = sigma[(k, k)] / two;
                let b = state.w[(k, k)] - sigma[(k, k)] * current;
                min_quad_log(&QuadLogSpec { a, b })?
            } else {
                let a = (sigma[(k, k)] + sigma[(l, l)]) / two;
                let b = (state.w[(k, l)] + state.w[(l, k)]) - two * a * current;
                min_quad_l1(&QuadL1Spec { a, b, lambda })?
            };
            let delta = new - current;
            if delta != F::zero() {
                state.tri[c] = new;
                self.bump_product(state, k, l, delta);
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push((c, new));
            }
        }
        Ok(())
    }

    fn objective_value(&self, state: &DirectState<F>) -> F {
        let p = self.index.dimension();
        let half = F::cast(0.5);
        let mut barrier = F::zero();
        for i in 0..p {
            let d = state.tri[self.index.position(i, i)];
            if !(d > F::zero()) {
                return F::infinity();
            }
            barrier = barrier - d.ln();
        }
        let mut quad = F::zero();
        let mut penalty = F::zero();
        for c in 0..self.index.len() {
            let (k, l) = self.index.pair(c);
            if k == l {
                quad = quad + state.tri[c] * state.w[(k, k)];
            } else {
                quad = quad + state.tri[c] * (state.w[(k, l)] + state.w[(l, k)]);
                penalty = penalty + state.tri[c].abs();
            }
        }
        barrier + half * quad + self.cp.lambda() * penalty
    }

    fn kkt_inf_norm(&self, state: &DirectState<F>) -> Result<F, CcmError<F>> {
        let p = self.index.dimension();
        for i in 0..p {
            if !(state.tri[self.index.position(i, i)] > F::zero()) {
                return Err(CcmError::DomainViolation);
            }
        }
        let lambda = self.cp.lambda();
        let mut worst = F::zero();
        for c in 0..self.index.len() {
            let (k, l) = self.index.pair(c);
            let x = state.tri[c];
            let r = if k == l {
                state.w[(k, k)] - x.recip()
            } else {
                let d = state.w[(k, l)] + state.w[(l, k)];
                x - soft_threshold(x - d, lambda)
            };
            worst = worst.max(r.abs());
        }
        Ok(worst)
    }

    fn current_x<'s>(&self, state: &'s DirectState<F>) -> ArrayView1<'s, F> {
        state.tri.view()
    }
}

/// A finished estimation run: the estimate in matrix form plus the raw
/// solver outcome (diagnostics included).
#[derive(Debug, Clone)]
pub struct ConcordSolution<F> {
    pub estimate: ConcordEstimate<F>,
    pub outcome: SolveOutcome<F>,
}

/// Runs the cyclic solver on the estimator from `Omega = I`.
///
/// Budget exhaustion surfaces as [`CcmError::NotConverged`] carrying the
/// partial outcome, like every other solve.
pub fn concord_solve<F: Real>(
    cp: &CovarianceProblem<F>,
    config: &SolverConfig<F>,
    path: ConcordPath,
) -> Result<ConcordSolution<F>, CcmError<F>> {
    let p = cp.dimension();
    let start = ConcordEstimate::identity(p);
    let outcome = match path {
        ConcordPath::Direct => {
            let engine = DirectEngine::new(cp);
            solve(&engine, start.packed(), config)?
        }
        ConcordPath::Vectorized => {
            let v = vectorize_to_f2(cp)?;
            solve(&v.problem, start.packed(), config)?
        }
    };
    let estimate = ConcordEstimate::from_packed(p, outcome.x.clone());
    Ok(ConcordSolution { estimate, outcome })
}

/// Linear lower bounds certifying bounded level sets.
///
/// For each column `i`, constants `(a1, a2)` with
/// `column_objective(i) >= a1 * w_ii - a2` for every symmetric `Omega` with
/// positive diagonal; globally the weakest pair (smallest `a1`, largest
/// `a2`), which bounds every column at once. Meaningful when the covariance
/// estimate is positive semidefinite.
#[derive(Debug, Clone)]
pub struct LevelsetConstants<F> {
    pub a1: F,
    pub a2: F,
    /// Per-column `(a1, a2)` pairs, 0-based column order.
    pub per_column: Vec<(F, F)>,
}

/// Computes [`LevelsetConstants`] for a validated input.
///
/// Column `i` sees the quadratic form with matrix `S/2`, so its diagonal
/// coefficient is `A = S_ii/2` and the coupling bound is
/// `L = max_{j != i} |S_ji| / 2`; the effective penalty weight per column is
/// `lambda/2` (each off-diagonal entry splits its penalty between two
/// columns). Decoupled columns (`L = 0`) give `(A, A - 1 - log A)`; coupled
/// columns also admit the pair `(c2, (lambda/2)² A / (2L²) - 1 - log c2)`
/// with `c2 = (lambda/2) A / (2L)`, and the weaker of the two bounds is kept
/// so both hold unconditionally.
pub fn levelset_constants<F: Real>(cp: &CovarianceProblem<F>) -> LevelsetConstants<F> {
    let p = cp.dimension();
    let sigma = cp.sigma();
    let half = F::cast(0.5);
    let lam = cp.lambda() * half;
    let mut per_column = Vec::with_capacity(p);
    for i in 0..p {
        let a_kk = sigma[(i, i)] * half;
        let mut coupling = F::zero();
        for j in 0..p {
            if j != i {
                coupling = coupling.max(sigma[(j, i)].abs() * half);
            }
        }
        let decoupled = (a_kk, a_kk - F::one() - a_kk.ln());
        let pair = if coupling > F::zero() {
            let c2 = lam * a_kk / (F::cast(2.0) * coupling);
            let slope = decoupled.0.min(c2);
            let offset = decoupled
                .1
                .max(lam * lam * a_kk / (F::cast(2.0) * coupling * coupling) - F::one() - c2.ln());
            (slope, offset)
        } else {
            decoupled
        };
        per_column.push(pair);
    }
    let a1 = per_column.iter().map(|&(a, _)| a).fold(F::infinity(), F::min);
    let a2 = per_column.iter().map(|&(_, b)| b).fold(F::neg_infinity(), F::max);
    LevelsetConstants { a1, a2, per_column }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn lcg_stream(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        }
    }

    fn random_psd_sigma(p: usize, seed: u64) -> Array2<f64> {
        let mut next = lcg_stream(seed);
        let b = Array2::from_shape_fn((p, p), |_| next());
        let mut s = b.t().dot(&b) / p as f64;
        for i in 0..p {
            s[(i, i)] += 0.3;
        }
        s
    }

    fn random_symmetric_estimate(p: usize, seed: u64) -> ConcordEstimate<f64> {
        let mut next = lcg_stream(seed);
        let mut m = Array2::zeros((p, p));
        for r in 0..p {
            for c in 0..=r {
                let v = next();
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        for i in 0..p {
            m[(i, i)] = m[(i, i)].abs() + 0.5;
        }
        ConcordEstimate::from_matrix(&m).unwrap()
    }

    #[test]
    fn packed_positions_round_trip() {
        let idx = TriangularIndex::new(5);
        assert_eq!(idx.len(), 15);
        assert_eq!(idx.position(0, 0), 0);
        assert_eq!(idx.position(0, 1), 1);
        assert_eq!(idx.position(1, 1), 2);
        assert_eq!(idx.position(2, 2), 5);
        assert_eq!(idx.position(1, 0), 1); // order-insensitive
        for c in 0..idx.len() {
            let (k, l) = idx.pair(c);
            assert!(k <= l);
            assert_eq!(idx.position(k, l), c);
        }
        // Diagonal comes last within each column.
        assert!(idx.is_diagonal(idx.position(2, 2)));
        assert_eq!(idx.position(2, 2), idx.position(1, 2) + 1);
    }

    #[test]
    fn rejects_malformed_covariance_input() {
        let asym = array![[1.0, 0.2], [0.3, 1.0]];
        assert!(matches!(
            CovarianceProblem::new(asym, 0.5),
            Err(CcmError::NotSymmetric { .. })
        ));

        let bad_diag = array![[1.0, 0.0], [0.0, 0.0]];
        assert!(matches!(
            CovarianceProblem::new(bad_diag, 0.5),
            Err(CcmError::NonpositiveDiagonal { index: 2 })
        ));

        let eye = Array2::<f64>::eye(2);
        assert!(matches!(
            CovarianceProblem::new(eye.clone(), 0.0),
            Err(CcmError::NonpositiveLambda)
        ));

        let rect = Array2::<f64>::zeros((2, 3));
        assert!(matches!(
            CovarianceProblem::new(rect, 0.5),
            Err(CcmError::DimensionMismatch { .. })
        ));

        let mut nan = eye;
        nan[(0, 1)] = f64::NAN;
        assert!(matches!(
            CovarianceProblem::new(nan, 0.5),
            Err(CcmError::NonFiniteEntry { row: 1, col: 2 })
        ));

        assert!(matches!(
            CovarianceProblem::new(Array2::<f64>::zeros((0, 0)), 0.5),
            Err(CcmError::EmptyMatrix)
        ));
    }

    #[test]
    fn covariance_from_observations_centers_and_scales() {
        // Two observations of two variables; hand covariance with 1/n:
        // columns are (0, 2) and (1, 3): means (1, 2), centered (-1, 1) each,
        // so every covariance entry is 1.
        let data = array![[0.0, 1.0], [2.0, 3.0]];
        // All entries 1 makes the diagonal positive but the matrix singular —
        // still a valid input.
        let cp = CovarianceProblem::from_observations(&data, 0.5f64).unwrap();
        for v in cp.sigma().iter() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn objective_matches_hand_values() {
        // S = I2, Omega = I2: barrier 0, quadratic 1/2 * 2, no penalty.
        let cp = CovarianceProblem::new(Array2::eye(2), 1.0).unwrap();
        let est = ConcordEstimate::identity(2);
        assert_eq!(concord_objective(&cp, &est), 1.0);

        let singular = ConcordEstimate::from_matrix(&array![[0.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(concord_objective(&cp, &singular), f64::INFINITY);
    }

    #[test]
    fn column_shares_sum_to_the_objective() {
        let cp = CovarianceProblem::new(random_psd_sigma(4, 11), 0.7).unwrap();
        let est = random_symmetric_estimate(4, 12);
        let total = concord_objective(&cp, &est);
        let by_columns: f64 = (0..4).map(|i| column_objective(&cp, &est, i)).sum();
        assert!((total - by_columns).abs() <= 1e-12 * (1.0 + total.abs()));
    }

    #[test]
    fn objective_agrees_with_vectorized_form() {
        let cp = CovarianceProblem::new(random_psd_sigma(4, 21), 0.9).unwrap();
        let v = vectorize_to_f2(&cp).unwrap();
        for seed in [31, 32, 33] {
            let est = random_symmetric_estimate(4, seed);
            let direct = concord_objective(&cp, &est);
            let generic = v.problem.objective(est.packed());
            assert!(
                (direct - generic).abs() <= 1e-10 * (1.0 + direct.abs()),
                "direct {direct} vs vectorized {generic}"
            );
        }
    }

    #[test]
    fn vectorized_column_norms_track_the_covariance_diagonal() {
        let cp = CovarianceProblem::new(Array2::eye(2), 0.5).unwrap();
        let v = vectorize_to_f2(&cp).unwrap();
        assert_eq!(v.problem.dim(), 3);
        let norms: Vec<f64> =
            (0..3).map(|c| v.problem.design().column_norm_sq(c)).collect();
        assert!((norms[0] - 0.5).abs() < 1e-12); // (0,0)
        assert!((norms[1] - 1.0).abs() < 1e-12); // (0,1)
        assert!((norms[2] - 0.5).abs() < 1e-12); // (1,1)

        let cp = CovarianceProblem::new(random_psd_sigma(3, 41), 0.5).unwrap();
        let v = vectorize_to_f2(&cp).unwrap();
        for c in 0..v.index.len() {
            let (k, l) = v.index.pair(c);
            let want = if k == l {
                cp.sigma()[(k, k)] / 2.0
            } else {
                (cp.sigma()[(k, k)] + cp.sigma()[(l, l)]) / 2.0
            };
            assert!(
                (v.problem.design().column_norm_sq(c) - want).abs() < 1e-12,
                "position ({k},{l})"
            );
        }
    }

    #[test]
    fn vectorization_respects_the_size_cap() {
        let p = VECTORIZED_DIM_CAP + 1;
        let cp = CovarianceProblem::new(Array2::eye(p), 0.5).unwrap();
        assert!(matches!(
            vectorize_to_f2(&cp),
            Err(CcmError::VectorizedTooLarge { p: 65, cap: VECTORIZED_DIM_CAP })
        ));
    }

    #[test]
    fn identity_covariance_estimates_identity() {
        for lambda in [0.1f64, 1.0] {
            let cp = CovarianceProblem::new(Array2::eye(3), lambda).unwrap();
            let sol = concord_solve(&cp, &SolverConfig::default(), ConcordPath::Direct).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    if i == j {
                        assert!((sol.estimate.get(i, j) - 1.0).abs() <= 1e-9);
                    } else {
                        // Decoupled: the soft threshold zeroes these exactly.
                        assert_eq!(sol.estimate.get(i, j), 0.0);
                    }
                }
            }
            assert!(sol.outcome.converged);
        }
    }

    #[test]
    fn direct_and_vectorized_paths_trace_together() {
        let cp = CovarianceProblem::new(random_psd_sigma(4, 51), 0.3).unwrap();
        let engine = DirectEngine::new(&cp);
        let v = vectorize_to_f2(&cp).unwrap();

        let start = ConcordEstimate::identity(4);
        let mut direct_state = engine.init_state(start.packed()).unwrap();
        let mut vec_state = v.problem.init_state(start.packed()).unwrap();
        let order = UpdateOrder::Natural;
        for sweep in 0..8 {
            engine.sweep_once(&mut direct_state, &order, 1e-12, None).unwrap();
            v.problem.sweep_once(&mut vec_state, &order, 1e-12, None).unwrap();
            let a = engine.current_x(&direct_state);
            let b = v.problem.current_x(&vec_state);
            for c in 0..v.index.len() {
                assert!(
                    (a[c] - b[c]).abs() <= 1e-9,
                    "sweep {sweep}, position {c}: direct {} vs vectorized {}",
                    a[c],
                    b[c]
                );
            }
        }
    }

    #[test]
    fn estimate_stays_symmetric_with_positive_diagonal() {
        let cp = CovarianceProblem::new(random_psd_sigma(5, 61), 0.2).unwrap();
        let engine = DirectEngine::new(&cp);
        let mut state = engine.init_state(ConcordEstimate::identity(5).packed()).unwrap();
        for _ in 0..6 {
            engine.sweep_once(&mut state, &UpdateOrder::Natural, 1e-12, None).unwrap();
            let est = ConcordEstimate::from_packed(5, engine.current_x(&state).to_owned());
            let m = est.to_matrix();
            for r in 0..5 {
                assert!(m[(r, r)] > 0.0);
                for c in 0..5 {
                    // Structural: both triangles read the same storage.
                    assert_eq!(m[(r, c)], m[(c, r)]);
                }
            }
        }
    }

    #[test]
    fn cached_product_stays_coherent_across_refreshes() {
        let cp = CovarianceProblem::new(random_psd_sigma(5, 71), 0.15).unwrap();
        let engine = DirectEngine::new(&cp);
        let mut state = engine.init_state(ConcordEstimate::identity(5).packed()).unwrap();
        for _ in 0..50 {
            engine.sweep_once(&mut state, &UpdateOrder::Natural, 1e-12, None).unwrap();
        }
        let fresh = cp
            .sigma()
            .dot(&TriangularIndex::new(5).expand(engine.current_x(&state)));
        let drift = state
            .w
            .iter()
            .zip(fresh.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-12, "cached product drifted by {drift}");
    }

    #[test]
    fn converged_run_has_small_fixed_point_residual() {
        let cp = CovarianceProblem::new(random_psd_sigma(5, 81), 0.25).unwrap();
        let config = SolverConfig { epsilon: 1e-10, ..SolverConfig::default() };
        let sol = concord_solve(&cp, &config, ConcordPath::Direct).unwrap();
        let engine = DirectEngine::new(&cp);
        let kkt = engine.kkt_inf_norm_at(sol.outcome.x.view()).unwrap();
        assert!(kkt <= 1e-8, "residual {kkt}");

        // And the objective the solver reports matches a fresh evaluation.
        let fresh = concord_objective(&cp, &sol.estimate);
        assert!((fresh - sol.outcome.objective).abs() <= 1e-10 * (1.0 + fresh.abs()));
    }

    #[test]
    fn budget_exhaustion_carries_partial_progress() {
        let cp = CovarianceProblem::new(random_psd_sigma(4, 91), 0.05).unwrap();
        let config = SolverConfig { max_sweeps: 1, ..SolverConfig::default() };
        match concord_solve(&cp, &config, ConcordPath::Direct) {
            Err(CcmError::NotConverged(outcome)) => {
                assert_eq!(outcome.sweeps_used, 1);
                assert!(!outcome.converged);
            }
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn edge_list_and_definiteness_probe() {
        let est = ConcordEstimate::from_matrix(&array![[1.0, 0.5], [0.5, 1.0]]).unwrap();
        assert_eq!(est.edges(1e-8), vec![(1, 2)]);
        assert!(est.is_positive_definite());

        let indef = ConcordEstimate::from_matrix(&array![[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert_eq!(indef.edges(1e-8), vec![(1, 2)]);
        assert!(!indef.is_positive_definite());

        let eye = ConcordEstimate::identity(3);
        assert!(eye.edges(1e-8).is_empty());
        assert!(eye.is_positive_definite());

        assert!(matches!(
            ConcordEstimate::from_matrix(&array![[1.0, 0.2], [0.1, 1.0]]),
            Err(CcmError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn levelset_constants_for_identity_covariance() {
        let cp = CovarianceProblem::new(Array2::<f64>::eye(4), 1.0).unwrap();
        let lc = levelset_constants(&cp);
        assert!((lc.a1 - 0.5).abs() < 1e-15);
        assert!((lc.a2 - (std::f64::consts::LN_2 - 0.5)).abs() < 1e-15);
        for &(a, b) in &lc.per_column {
            assert_eq!(a, lc.a1);
            assert_eq!(b, lc.a2);
        }
    }

    #[test]
    fn levelset_bound_holds_on_sampled_estimates() {
        let cp = CovarianceProblem::new(random_psd_sigma(4, 101), 0.7).unwrap();
        let lc = levelset_constants(&cp);
        assert!(lc.a1 > 0.0);
        assert!(lc.a2 >= 0.0);
        let mut next = lcg_stream(202);
        for trial in 0..300 {
            let seed = 1000 + trial;
            let mut est = random_symmetric_estimate(4, seed);
            // Stretch some samples to exercise the bound away from the unit
            // scale.
            let scale = 1.0 + 9.0 * next().abs();
            est.tri.mapv_inplace(|v| v * scale);
            for i in 0..4 {
                let (a1, a2) = lc.per_column[i];
                let h = column_objective(&cp, &est, i);
                let bound = a1 * est.get(i, i) - a2;
                assert!(
                    h >= bound - 1e-12,
                    "column {i}: value {h} below bound {bound}"
                );
                // The global pair must be no stronger than the per-column one.
                assert!(h >= lc.a1 * est.get(i, i) - lc.a2 - 1e-12);
            }
        }
    }
}
