//! Crate-wide error type.

use thiserror::Error;

use crate::solver::SolveOutcome;
use crate::Real;

/// Everything that can go wrong while building or solving a problem.
///
/// Indices carried by variants are 1-based: they are diagnostics meant for
/// humans and match the text formats the CLI speaks.
#[derive(Debug, Error)]
pub enum CcmError<F: Real> {
    #[error("design matrix has no rows or no columns")]
    EmptyMatrix,
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("column {column} of the design matrix is zero")]
    ZeroColumn { column: usize },
    #[error("penalty weight lambda must be strictly positive")]
    NonpositiveLambda,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("smooth part queried outside its effective domain")]
    DomainViolation,
    #[error("scalar minimizer requires strictly positive curvature")]
    NonpositiveCurvature,
    #[error("no sign change found while bracketing the coordinate derivative (grew the bracket {doublings} times)")]
    NoBracket { doublings: usize },
    #[error("scalar minimizer stopped after {max_iterations} iterations without meeting its tolerance")]
    MaxIterations { max_iterations: usize },
    #[error("update order is not a permutation of 1..={n}")]
    InvalidOrder { n: usize },
    #[error("invalid solver configuration: {reason}")]
    InvalidConfig { reason: &'static str },
    #[error("objective is not finite at the starting point")]
    InfeasibleStart,
    #[error("no finite default start exists for this problem; supply x0 explicitly")]
    NoFiniteStart,
    #[error("stopped after {} sweeps without meeting the stopping rule", .0.sweeps_used)]
    NotConverged(Box<SolveOutcome<F>>),
    #[error("matrix is not symmetric (max asymmetry {max_asymmetry})")]
    NotSymmetric { max_asymmetry: F },
    #[error("diagonal entry {index} must be strictly positive")]
    NonpositiveDiagonal { index: usize },
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue} below tolerance")]
    NotPsd { eigenvalue: F },
    #[error("labels must be -1 or +1, found {value} at row {row}")]
    BadLabel { row: usize, value: F },
    #[error("the vectorized path materializes a p^2 x p(p+1)/2 design; p = {p} exceeds the cap of {cap}")]
    VectorizedTooLarge { p: usize, cap: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl<F: Real> CcmError<F> {
    /// Recovers the partial outcome from a [`CcmError::NotConverged`] error.
    pub fn into_partial_outcome(self) -> Option<SolveOutcome<F>> {
        match self {
            CcmError::NotConverged(outcome) => Some(*outcome),
            _ => None,
        }
    }
}
