//! Problem templates: design matrix, smooth oracles, objectives.
//!
//! Both templates share the design matrix `E` and the split of coordinates
//! into a penalized set `S` (l1 term) and its complement (constrained to be
//! nonnegative under the smooth template, kept strictly positive by the log
//! barrier under the quadratic one). Objectives are extended-real: evaluating
//! outside the feasible set or the smooth part's domain returns `+inf`
//! instead of erroring, so feasibility questions stay one `is_finite()` away.

use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1};
use thiserror::Error;

use crate::error::CcmError;
use crate::solver::Iterate;
use crate::Real;

/// Dense `m x n` design matrix with cached squared column norms.
///
/// Construction checks shape and finiteness only; zero columns are legal to
/// *build* (so that [`F1Problem::validate`] can report them) but rejected by
/// validation and lethal to the quadratic template's closed forms.
#[derive(Debug, Clone)]
pub struct DesignMatrix<F> {
    entries: Array2<F>,
    column_norms_sq: Array1<F>,
}

impl<F: Real> DesignMatrix<F> {
    pub fn new(entries: Array2<F>) -> Result<Self, CcmError<F>> {
        let (m, n) = entries.dim();
        if m == 0 || n == 0 {
            return Err(CcmError::EmptyMatrix);
        }
        for ((r, c), v) in entries.indexed_iter() {
            if !v.is_finite() {
                return Err(CcmError::NonFiniteEntry { row: r + 1, col: c + 1 });
            }
        }
        let column_norms_sq =
            Array1::from_iter(entries.columns().into_iter().map(|c| c.dot(&c)));
        Ok(DesignMatrix { entries, column_norms_sq })
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Array2<F> {
        &self.entries
    }

    pub fn column(&self, i: usize) -> ArrayView1<'_, F> {
        self.entries.column(i)
    }

    /// `||E_col_i||^2`, cached at construction.
    pub fn column_norm_sq(&self, i: usize) -> F {
        self.column_norms_sq[i]
    }

    /// Writes `E x` into `out`.
    pub fn matvec_into(&self, x: ArrayView1<F>, out: &mut Array1<F>) {
        debug_assert_eq!(x.len(), self.ncols());
        debug_assert_eq!(out.len(), self.nrows());
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.entries.row(r).dot(&x);
        }
    }

    /// Indices (1-based) of exactly-zero columns.
    pub fn zero_columns(&self) -> Vec<usize> {
        self.column_norms_sq
            .iter()
            .enumerate()
            .filter(|(_, &sq)| sq == F::zero())
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// The set `S` of penalized coordinates, stored as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PenaltySet {
    mask: Vec<bool>,
}

impl PenaltySet {
    /// Every coordinate penalized (the lasso-style case).
    pub fn all(n: usize) -> Self {
        PenaltySet { mask: vec![true; n] }
    }

    /// No coordinate penalized (every coordinate constrained instead).
    pub fn none(n: usize) -> Self {
        PenaltySet { mask: vec![false; n] }
    }

    /// Penalize exactly the listed 0-based coordinates.
    pub fn from_indices<F: Real>(
        n: usize,
        indices: impl IntoIterator<Item = usize>,
    ) -> Result<Self, CcmError<F>> {
        let mut mask = vec![false; n];
        for i in indices {
            if i >= n {
                return Err(CcmError::DimensionMismatch { expected: n, found: i + 1 });
            }
            mask[i] = true;
        }
        Ok(PenaltySet { mask })
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// 0-based penalized indices, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}

/// How boundedness of the composite objective's level sets is certified.
///
/// The solver's convergence story needs the objective to have bounded level
/// sets. That holds either because the smooth part blows up toward the edge
/// of its domain (coercive case) or because it is nonnegative everywhere and
/// *every* coordinate carries the l1 penalty. Oracles declare which case they
/// provide; detection is not attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSetGuarantee {
    /// `g(t) -> +inf` as `t` approaches the boundary of its domain (or
    /// infinity, when the domain is all of `R^m`).
    Coercive,
    /// `g >= 0` on all of `R^m`; level sets are then bounded only when every
    /// coordinate is penalized.
    NonnegativeEverywhere,
}

/// Smooth convex function `g` evaluated at `t = E x`.
///
/// `value` is extended-real (`+inf` outside the effective domain); `gradient`
/// and `directional_second_derivative` are only queried where `value` is
/// finite. The directional second derivative `v' H v` must be strictly
/// positive on the domain for the coordinate search to be well posed.
pub trait SmoothOracle<F: Real> {
    fn value(&self, t: ArrayView1<F>) -> F;

    /// Writes the gradient of `g` at `t` into `out` (same length as `t`).
    fn gradient(&self, t: ArrayView1<F>, out: ArrayViewMut1<F>);

    /// `v' H(t) v` for the Hessian `H` of `g` at `t`.
    fn directional_second_derivative(&self, t: ArrayView1<F>, v: ArrayView1<F>) -> F;

    /// Cheap domain-membership test; the default re-evaluates `value`.
    fn in_domain(&self, t: ArrayView1<F>) -> bool {
        self.value(t).is_finite()
    }

    fn level_set_guarantee(&self) -> LevelSetGuarantee;
}

/// `g(t) = 1/2 ||t - c||^2`; the plain least-squares smooth part.
#[derive(Debug, Clone)]
pub struct LeastSquaresOracle<F> {
    center: Option<Array1<F>>,
}

impl<F: Real> LeastSquaresOracle<F> {
    /// `g(t) = 1/2 ||t||^2`.
    pub fn origin() -> Self {
        LeastSquaresOracle { center: None }
    }

    /// `g(t) = 1/2 ||t - c||^2`.
    pub fn shifted(c: Array1<F>) -> Self {
        LeastSquaresOracle { center: Some(c) }
    }
}

impl<F: Real> SmoothOracle<F> for LeastSquaresOracle<F> {
    fn value(&self, t: ArrayView1<F>) -> F {
        let half = F::cast(0.5);
        match &self.center {
            None => half * t.dot(&t),
            Some(c) => {
                half * t.iter().zip(c.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<F>()
            }
        }
    }

    fn gradient(&self, t: ArrayView1<F>, mut out: ArrayViewMut1<F>) {
        match &self.center {
            None => out.assign(&t),
            Some(c) => {
                for ((o, &a), &b) in out.iter_mut().zip(t.iter()).zip(c.iter()) {
                    *o = a - b;
                }
            }
        }
    }

    fn directional_second_derivative(&self, _t: ArrayView1<F>, v: ArrayView1<F>) -> F {
        v.dot(&v)
    }

    fn in_domain(&self, _t: ArrayView1<F>) -> bool {
        true
    }

    fn level_set_guarantee(&self) -> LevelSetGuarantee {
        LevelSetGuarantee::Coercive
    }
}

/// A violated modeling assumption, as reported by problem validation.
///
/// Column indices are 1-based (human-facing diagnostics).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("column {column} of the design matrix is the zero vector")]
    ZeroColumn { column: usize },
    #[error("penalty weight lambda must be strictly positive")]
    NonpositiveLambda,
    #[error("coordinate {column} is unpenalized but the smooth part only guarantees nonnegativity; bounded level sets need a coercive smooth part or a full penalty set")]
    UnpenalizedWithoutCoercivity { column: usize },
}

impl<F: Real> From<Violation> for CcmError<F> {
    fn from(v: Violation) -> Self {
        match v {
            Violation::ZeroColumn { column } => CcmError::ZeroColumn { column },
            Violation::NonpositiveLambda => CcmError::NonpositiveLambda,
            Violation::UnpenalizedWithoutCoercivity { .. } => CcmError::InvalidConfig {
                reason: "unpenalized coordinate without a coercive smooth part",
            },
        }
    }
}

/// Smooth-plus-l1 template:
/// `f(x) = g(E x) + lambda * sum_{i in S} |x_i|` over `x_i >= 0` for `i` not in `S`.
#[derive(Debug, Clone)]
pub struct F1Problem<F, G> {
    design: DesignMatrix<F>,
    penalized: PenaltySet,
    lambda: F,
    oracle: G,
}

impl<F: Real, G: SmoothOracle<F>> F1Problem<F, G> {
    /// Assembles the problem; only structural dimensions are checked here,
    /// run [`F1Problem::validate`] for the modeling assumptions.
    pub fn new(
        design: DesignMatrix<F>,
        penalized: PenaltySet,
        lambda: F,
        oracle: G,
    ) -> Result<Self, CcmError<F>> {
        if penalized.len() != design.ncols() {
            return Err(CcmError::DimensionMismatch {
                expected: design.ncols(),
                found: penalized.len(),
            });
        }
        Ok(F1Problem { design, penalized, lambda, oracle })
    }

    pub fn design(&self) -> &DesignMatrix<F> {
        &self.design
    }

    pub fn penalized(&self) -> &PenaltySet {
        &self.penalized
    }

    pub fn lambda(&self) -> F {
        self.lambda
    }

    pub fn oracle(&self) -> &G {
        &self.oracle
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    /// Checks every modeling assumption, collecting all violations instead of
    /// stopping at the first: no zero column, `lambda > 0`, and a level-set
    /// guarantee that actually covers the constrained coordinates.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut violations: Vec<Violation> = self
            .design
            .zero_columns()
            .into_iter()
            .map(|column| Violation::ZeroColumn { column })
            .collect();
        if !(self.lambda > F::zero()) {
            violations.push(Violation::NonpositiveLambda);
        }
        if self.oracle.level_set_guarantee() == LevelSetGuarantee::NonnegativeEverywhere {
            for i in 0..self.dim() {
                if !self.penalized.contains(i) {
                    violations.push(Violation::UnpenalizedWithoutCoercivity { column: i + 1 });
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// Whether `x` satisfies the orthant constraints (`x_i >= 0` off `S`).
    pub fn is_feasible(&self, x: ArrayView1<F>) -> bool {
        x.iter().enumerate().all(|(i, &xi)| self.penalized.contains(i) || xi >= F::zero())
    }

    /// Extended-real objective: `+inf` outside the feasible set or the
    /// smooth part's domain.
    pub fn objective(&self, x: ArrayView1<F>) -> F {
        if !self.is_feasible(x) {
            return F::infinity();
        }
        let mut t = Array1::zeros(self.design.nrows());
        self.design.matvec_into(x, &mut t);
        let smooth = self.oracle.value(t.view());
        if !smooth.is_finite() {
            return F::infinity();
        }
        smooth + self.lambda * self.penalty_sum(x)
    }

    /// Objective from a cached iterate (skips recomputing `E x`).
    pub(crate) fn objective_cached(&self, it: &Iterate<F>) -> F {
        if !self.is_feasible(it.x().view()) {
            return F::infinity();
        }
        let smooth = self.oracle.value(it.residual().view());
        if !smooth.is_finite() {
            return F::infinity();
        }
        smooth + self.lambda * self.penalty_sum(it.x().view())
    }

    fn penalty_sum(&self, x: ArrayView1<F>) -> F {
        x.iter()
            .enumerate()
            .filter(|(i, _)| self.penalized.contains(*i))
            .map(|(_, &xi)| xi.abs())
            .sum()
    }

    /// Partial derivative of the smooth part at the cached iterate:
    /// `d_i = E_col_i . grad g(E x)`. Costs one gradient evaluation.
    pub fn smooth_partial(&self, it: &Iterate<F>, i: usize) -> Result<F, CcmError<F>> {
        let mut grad = Array1::zeros(self.design.nrows());
        self.smooth_gradient(it, &mut grad)?;
        Ok(self.design.column(i).dot(&grad))
    }

    fn smooth_gradient(&self, it: &Iterate<F>, grad: &mut Array1<F>) -> Result<(), CcmError<F>> {
        let t = it.residual();
        if !self.oracle.in_domain(t.view()) {
            return Err(CcmError::DomainViolation);
        }
        self.oracle.gradient(t.view(), grad.view_mut());
        Ok(())
    }

    /// Feasible default start: the origin, provided the objective is finite
    /// there (it may not be when the smooth part's domain excludes `E 0 = 0`).
    pub fn default_start(&self) -> Result<Array1<F>, CcmError<F>> {
        let x0 = Array1::zeros(self.dim());
        if self.objective(x0.view()).is_finite() {
            Ok(x0)
        } else {
            Err(CcmError::NoFiniteStart)
        }
    }
}

/// Quadratic-plus-log-barrier template:
/// `f(x) = x' E'E x - sum_{i not in S} log x_i + lambda * sum_{i in S} |x_i|`.
#[derive(Debug, Clone)]
pub struct F2Problem<F> {
    design: DesignMatrix<F>,
    penalized: PenaltySet,
    lambda: F,
}

impl<F: Real> F2Problem<F> {
    pub fn new(
        design: DesignMatrix<F>,
        penalized: PenaltySet,
        lambda: F,
    ) -> Result<Self, CcmError<F>> {
        if penalized.len() != design.ncols() {
            return Err(CcmError::DimensionMismatch {
                expected: design.ncols(),
                found: penalized.len(),
            });
        }
        Ok(F2Problem { design, penalized, lambda })
    }

    pub fn design(&self) -> &DesignMatrix<F> {
        &self.design
    }

    pub fn penalized(&self) -> &PenaltySet {
        &self.penalized
    }

    pub fn lambda(&self) -> F {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    /// No zero column, `lambda > 0`. (The barrier supplies the level-set
    /// guarantee for the unpenalized coordinates.)
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut violations: Vec<Violation> = self
            .design
            .zero_columns()
            .into_iter()
            .map(|column| Violation::ZeroColumn { column })
            .collect();
        if !(self.lambda > F::zero()) {
            violations.push(Violation::NonpositiveLambda);
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// Whether every barrier coordinate is strictly positive.
    pub fn is_feasible(&self, x: ArrayView1<F>) -> bool {
        x.iter().enumerate().all(|(i, &xi)| self.penalized.contains(i) || xi > F::zero())
    }

    /// Extended-real objective: `+inf` whenever a barrier coordinate is
    /// nonpositive.
    pub fn objective(&self, x: ArrayView1<F>) -> F {
        if !self.is_feasible(x) {
            return F::infinity();
        }
        let mut t = Array1::zeros(self.design.nrows());
        self.design.matvec_into(x, &mut t);
        self.objective_parts(t.view(), x)
    }

    pub(crate) fn objective_cached(&self, it: &Iterate<F>) -> F {
        if !self.is_feasible(it.x().view()) {
            return F::infinity();
        }
        self.objective_parts(it.residual().view(), it.x().view())
    }

    fn objective_parts(&self, t: ArrayView1<F>, x: ArrayView1<F>) -> F {
        let quad = t.dot(&t);
        let mut barrier = F::zero();
        let mut penalty = F::zero();
        for (i, &xi) in x.iter().enumerate() {
            if self.penalized.contains(i) {
                penalty = penalty + xi.abs();
            } else {
                barrier = barrier - xi.ln();
            }
        }
        quad + barrier + self.lambda * penalty
    }

    /// Partial derivative of the quadratic part: `d_i = 2 E_col_i . (E x)`,
    /// O(m) from the cached residual. The barrier term is *not* included —
    /// it is handled separately, exactly, by the coordinate update and the
    /// fixed-point residuals.
    pub fn smooth_partial(&self, it: &Iterate<F>, i: usize) -> F {
        F::cast(2.0) * self.design.column(i).dot(&it.residual().view())
    }

    /// Feasible default start: 1 on the barrier coordinates, 0 on `S`.
    pub fn default_start(&self) -> Array1<F> {
        Array1::from_shape_fn(self.dim(), |i| {
            if self.penalized.contains(i) {
                F::zero()
            } else {
                F::one()
            }
        })
    }
}
