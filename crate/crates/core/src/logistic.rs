//! l1-penalized logistic regression as an instance of the smooth-plus-l1
//! template.
//!
//! With features `X` (one observation per row) and labels `y_i = ±1`, the
//! smooth part is the logistic loss of the linear scores `eta = X beta`,
//!
//! ```text
//! g(eta) = sum_i log(1 + exp(-y_i eta_i)),
//! ```
//!
//! which is nonnegative, strictly convex along every direction `X v != 0`,
//! and finite everywhere. Because it is merely nonnegative (not coercive),
//! bounded level sets require every coefficient to carry the penalty —
//! [`logistic_fit`] always penalizes all of them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1};

use crate::error::CcmError;
use crate::model::{DesignMatrix, F1Problem, LevelSetGuarantee, PenaltySet, SmoothOracle};
use crate::optimality::DiagnosticsReport;
use crate::solver::{solve, SolverConfig};
use crate::Real;

/// `log(1 + e^z)` without overflow: for large `z` the result is `z` plus a
/// vanishing correction.
fn softplus<F: Real>(z: F) -> F {
    if z > F::cast(30.0) {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + e^-z)`, evaluated on the side that avoids large exponentials.
fn sigmoid<F: Real>(z: F) -> F {
    if z >= F::zero() {
        (F::one() + (-z).exp()).recip()
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// Validated classification data: finite features, labels exactly `±1`, and
/// no all-zero feature column.
#[derive(Debug, Clone)]
pub struct LogisticDataset<F> {
    design: DesignMatrix<F>,
    labels: Array1<F>,
}

impl<F: Real> LogisticDataset<F> {
    pub fn new(features: Array2<F>, labels: Array1<F>) -> Result<Self, CcmError<F>> {
        let design = DesignMatrix::new(features)?;
        if labels.len() != design.nrows() {
            return Err(CcmError::DimensionMismatch {
                expected: design.nrows(),
                found: labels.len(),
            });
        }
        for (i, &y) in labels.iter().enumerate() {
            if y != F::one() && y != -F::one() {
                return Err(CcmError::BadLabel { row: i + 1, value: y });
            }
        }
        if let Some(&column) = design.zero_columns().first() {
            return Err(CcmError::ZeroColumn { column });
        }
        Ok(LogisticDataset { design, labels })
    }

    pub fn design(&self) -> &DesignMatrix<F> {
        &self.design
    }

    pub fn labels(&self) -> &Array1<F> {
        &self.labels
    }

    /// Number of observations (rows).
    pub fn observations(&self) -> usize {
        self.design.nrows()
    }

    /// Number of features (columns / coefficients).
    pub fn features(&self) -> usize {
        self.design.ncols()
    }
}

/// The logistic loss as a smooth oracle over the score vector.
#[derive(Debug, Clone)]
pub struct LogisticOracle<F> {
    labels: Array1<F>,
}

impl<F: Real> LogisticOracle<F> {
    pub fn new(labels: Array1<F>) -> Self {
        LogisticOracle { labels }
    }
}

impl<F: Real> SmoothOracle<F> for LogisticOracle<F> {
    fn value(&self, t: ArrayView1<F>) -> F {
        self.labels.iter().zip(t.iter()).map(|(&y, &eta)| softplus(-y * eta)).sum()
    }

    fn gradient(&self, t: ArrayView1<F>, mut out: ArrayViewMut1<F>) {
        for ((o, &y), &eta) in out.iter_mut().zip(self.labels.iter()).zip(t.iter()) {
            *o = -y * sigmoid(-y * eta);
        }
    }

    fn directional_second_derivative(&self, t: ArrayView1<F>, v: ArrayView1<F>) -> F {
        let mut acc = F::zero();
        for ((&y, &eta), &vi) in self.labels.iter().zip(t.iter()).zip(v.iter()) {
            let s = sigmoid(y * eta);
            acc = acc + vi * vi * s * (F::one() - s);
        }
        acc
    }

    fn in_domain(&self, _t: ArrayView1<F>) -> bool {
        true
    }

    fn level_set_guarantee(&self) -> LevelSetGuarantee {
        LevelSetGuarantee::NonnegativeEverywhere
    }
}

/// Assembles the penalized problem for a dataset: logistic loss, every
/// coefficient penalized at weight `lambda`.
pub fn logistic_problem<F: Real>(
    ds: &LogisticDataset<F>,
    lambda: F,
) -> Result<F1Problem<F, LogisticOracle<F>>, CcmError<F>> {
    let problem = F1Problem::new(
        ds.design().clone(),
        PenaltySet::all(ds.features()),
        lambda,
        LogisticOracle::new(ds.labels().clone()),
    )?;
    problem.validate().map_err(|mut v| CcmError::from(v.remove(0)))?;
    Ok(problem)
}

/// A converged fit: coefficients, their exact nonzero pattern, and the run's
/// diagnostics.
#[derive(Debug, Clone)]
pub struct LogisticFit<F> {
    pub beta: Array1<F>,
    /// 0-based indices of coefficients that are exactly nonzero. Coordinate
    /// minimization lands inactive coefficients on literal zero, so no
    /// thresholding is involved.
    pub support: Vec<usize>,
    pub objective: F,
    pub sweeps_used: usize,
    pub diagnostics: DiagnosticsReport<F>,
}

impl<F: Real> LogisticFit<F> {
    /// Class-probability predictions `sigmoid(X_new beta)` for new rows.
    pub fn predict(&self, features: ArrayView2<F>) -> Result<Array1<F>, CcmError<F>> {
        if features.ncols() != self.beta.len() {
            return Err(CcmError::DimensionMismatch {
                expected: self.beta.len(),
                found: features.ncols(),
            });
        }
        Ok(features.rows().into_iter().map(|row| sigmoid(row.dot(&self.beta))).collect())
    }
}

/// Fits the l1-penalized logistic regression by cyclic coordinate
/// minimization, starting from `beta = 0`.
///
/// Budget exhaustion propagates as [`CcmError::NotConverged`] with the
/// partial outcome inside.
pub fn logistic_fit<F: Real>(
    ds: &LogisticDataset<F>,
    lambda: F,
    config: &SolverConfig<F>,
) -> Result<LogisticFit<F>, CcmError<F>> {
    let problem = logistic_problem(ds, lambda)?;
    let x0 = Array1::zeros(ds.features());
    let outcome = solve(&problem, x0.view(), config)?;
    let support =
        outcome.x.iter().enumerate().filter(|(_, &b)| b != F::zero()).map(|(i, _)| i).collect();
    Ok(LogisticFit {
        beta: outcome.x,
        support,
        objective: outcome.objective,
        sweeps_used: outcome.sweeps_used,
        diagnostics: outcome.diagnostics,
    })
}
