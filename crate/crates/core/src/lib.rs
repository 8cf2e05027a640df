//! Cyclic coordinatewise minimization for l1-penalized convex objectives.
//!
//! Given an `m x n` design matrix `E` (dense, no zero column), a penalty weight
//! `lambda > 0` and a set `S` of penalized coordinates, the crate minimizes two
//! problem templates over `x` in `R^n`:
//!
//! * **smooth plus l1** ([`model::F1Problem`]):
//!   `g(E x) + lambda * sum_{i in S} |x_i|`, subject to `x_i >= 0` for every
//!   coordinate outside `S`, where `g` is a smooth convex function supplied
//!   through the [`model::SmoothOracle`] trait;
//! * **quadratic plus log barrier** ([`model::F2Problem`]):
//!   `x' E'E x - sum_{i not in S} log x_i + lambda * sum_{i in S} |x_i|`.
//!
//! Each sweep of the solver minimizes the objective *exactly* over one
//! coordinate at a time, holding the rest fixed: closed forms for the
//! quadratic template ([`scalar_min::min_quad_log`], [`scalar_min::min_quad_l1`]),
//! a safeguarded Newton search on the derivative for the general one
//! ([`scalar_min::min_scalar_general`]). Iteration stops once the Euclidean
//! distance between consecutive sweeps drops to `epsilon` (optionally on a
//! KKT-residual threshold instead). The [`optimality`] module computes
//! fixed-point residuals and certifies finished runs; [`concord`] builds the
//! sparse pseudo-likelihood inverse-covariance estimator on top of the
//! quadratic template; [`logistic`] does the same for l1-penalized logistic
//! regression on top of the smooth template.
//!
//! Everything is generic over the floating-point scalar through [`Real`]
//! (implemented for `f32` and `f64`); `f64` aliases for the main entry points
//! live at the crate root.

pub mod concord;
pub mod error;
pub mod io;
mod linalg;
pub mod logistic;
pub mod model;
pub mod optimality;
pub mod oracle;
pub mod scalar_min;
pub mod solver;

use std::fmt;
use std::iter::Sum;
use std::str::FromStr;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive};

pub use concord::{
    concord_solve, levelset_constants, ConcordEstimate, ConcordPath, ConcordSolution,
    CovarianceProblem,
};
pub use error::CcmError;
pub use logistic::{logistic_fit, LogisticDataset, LogisticFit};
pub use model::{DesignMatrix, F1Problem, F2Problem, PenaltySet, SmoothOracle};
pub use optimality::{certify, Certification, CertifyOptions, DiagnosticsReport, KktResidual};
pub use solver::{solve, CoordinateSweep, Iterate, SolveOutcome, SolverConfig, UpdateOrder};

/// Floating-point scalar the solvers are generic over.
///
/// A blanket impl covers every type with the listed bounds; in practice that
/// means `f32` and `f64`. The only extra requirement over `num_traits::Float`
/// is conversion from `f64` literals ([`Real::cast`]), parsing/printing for
/// the text formats, and thread-safety markers for the parallel callers.
pub trait Real:
    Float
    + FromPrimitive
    + ScalarOperand
    + Sum
    + FromStr
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant; panics if the value is not representable
    /// (never the case for the tolerances and small integers used here).
    #[inline]
    fn cast(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in the scalar type")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ScalarOperand
        + Sum
        + FromStr
        + fmt::Debug
        + fmt::Display
        + fmt::LowerExp
        + Send
        + Sync
        + 'static
{
}

/// Double-precision aliases for the main entry points.
pub type DesignMatrix64 = model::DesignMatrix<f64>;
/// Smooth-plus-l1 problem at `f64`, generic over the smooth oracle.
pub type F1Problem64<G> = model::F1Problem<f64, G>;
/// Quadratic-plus-log-barrier problem at `f64`.
pub type F2Problem64 = model::F2Problem<f64>;
/// Solver configuration at `f64`.
pub type SolverConfig64 = solver::SolverConfig<f64>;
/// l1-penalized logistic regression problem at `f64`.
pub type LogisticProblem64 = model::F1Problem<f64, logistic::LogisticOracle<f64>>;
/// CONCORD covariance-selection problem at `f64`.
pub type CovarianceProblem64 = concord::CovarianceProblem<f64>;
