//! Optimality checks: fixed-point residuals, per-sweep diagnostics, and the
//! certification record the CLI prints.
//!
//! The residual maps translate "is this point a global minimizer?" into a
//! coordinate-separable vector that is exactly zero at optima. Because the
//! true distance to the optimal set is not observable, the residual inf-norm
//! is the practical surrogate reported everywhere; the 2-norm is exposed for
//! callers that prefer it.

use std::fmt::Write as _;

use ndarray::{Array1, ArrayView1};

use crate::error::CcmError;
use crate::model::{F1Problem, F2Problem, SmoothOracle};
use crate::scalar_min::soft_threshold;
use crate::solver::{CoordinateSweep, SolveOutcome};
use crate::Real;

/// Per-coordinate deviation from the optimality characterization.
///
/// Zero everywhere exactly at a global minimizer; the inf-norm is the
/// headline number.
#[derive(Debug, Clone)]
pub struct KktResidual<F> {
    pub per_coordinate: Array1<F>,
    pub inf_norm: F,
}

impl<F: Real> KktResidual<F> {
    fn new(per_coordinate: Array1<F>) -> Self {
        let inf_norm = per_coordinate.iter().map(|r| r.abs()).fold(F::zero(), F::max);
        KktResidual { per_coordinate, inf_norm }
    }

    pub fn two_norm(&self) -> F {
        self.per_coordinate.iter().map(|&r| r * r).sum::<F>().sqrt()
    }
}

/// Fixed-point residual for the smooth-plus-l1 template.
///
/// With `d = E' grad g(E x)`: penalized coordinates compare `x_i` against
/// the soft-threshold image of `x_i - d_i`; constrained coordinates against
/// the nonnegative projection of the same quantity. Either map leaves `x_i`
/// unchanged exactly when the coordinate satisfies its optimality condition.
pub fn kkt_residual_f1<F, G>(
    problem: &F1Problem<F, G>,
    x: ArrayView1<F>,
) -> Result<KktResidual<F>, CcmError<F>>
where
    F: Real,
    G: SmoothOracle<F>,
{
    let n = problem.dim();
    if x.len() != n {
        return Err(CcmError::DimensionMismatch { expected: n, found: x.len() });
    }
    let mut t = Array1::zeros(problem.design().nrows());
    problem.design().matvec_into(x, &mut t);
    if !problem.is_feasible(x) || !problem.oracle().value(t.view()).is_finite() {
        return Err(CcmError::DomainViolation);
    }
    let mut grad = Array1::zeros(problem.design().nrows());
    problem.oracle().gradient(t.view(), grad.view_mut());
    let lambda = problem.lambda();
    let per = Array1::from_shape_fn(n, |i| {
        let d = problem.design().column(i).dot(&grad);
        if problem.penalized().contains(i) {
            x[i] - soft_threshold(x[i] - d, lambda)
        } else {
            x[i] - (x[i] - d).max(F::zero())
        }
    });
    Ok(KktResidual::new(per))
}

/// Fixed-point residual for the quadratic-plus-barrier template.
///
/// With `d = 2 E'E x`: penalized coordinates use the soft-threshold map;
/// barrier coordinates must balance the quadratic slope against the barrier
/// slope, so their residual is `d_i - 1/x_i`.
pub fn kkt_residual_f2<F: Real>(
    problem: &F2Problem<F>,
    x: ArrayView1<F>,
) -> Result<KktResidual<F>, CcmError<F>> {
    let n = problem.dim();
    if x.len() != n {
        return Err(CcmError::DimensionMismatch { expected: n, found: x.len() });
    }
    if !problem.is_feasible(x) {
        return Err(CcmError::DomainViolation);
    }
    let mut t = Array1::zeros(problem.design().nrows());
    problem.design().matvec_into(x, &mut t);
    let two = F::cast(2.0);
    let lambda = problem.lambda();
    let per = Array1::from_shape_fn(n, |i| {
        let d = two * problem.design().column(i).dot(&t);
        if problem.penalized().contains(i) {
            x[i] - soft_threshold(x[i] - d, lambda)
        } else {
            d - F::one() / x[i]
        }
    });
    Ok(KktResidual::new(per))
}

/// One recorded coordinate update (1-based coordinate label).
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateRecord<F> {
    pub sweep: usize,
    pub coordinate: usize,
    pub value: F,
}

/// Everything measured during a solve, one entry per sweep.
#[derive(Debug, Clone)]
pub struct DiagnosticsReport<F> {
    /// Objective at the starting point (before the first sweep).
    pub initial_objective: F,
    pub objective_trace: Vec<F>,
    pub step_norms: Vec<F>,
    /// Running `sum of ||step||^2`; non-decreasing by construction.
    pub cum_sq_steps: Vec<F>,
    pub kkt_inf_norm_trace: Vec<F>,
    /// Present only when coordinate-granularity tracing was requested.
    pub coordinate_trace: Option<Vec<CoordinateRecord<F>>>,
}

impl<F: Real> DiagnosticsReport<F> {
    pub fn new(initial_objective: F, record_coordinates: bool) -> Self {
        DiagnosticsReport {
            initial_objective,
            objective_trace: Vec::new(),
            step_norms: Vec::new(),
            cum_sq_steps: Vec::new(),
            kkt_inf_norm_trace: Vec::new(),
            coordinate_trace: record_coordinates.then(Vec::new),
        }
    }

    pub fn push_sweep(&mut self, objective: F, step_norm: F, cum_sq: F, kkt_inf_norm: F) {
        self.objective_trace.push(objective);
        self.step_norms.push(step_norm);
        self.cum_sq_steps.push(cum_sq);
        self.kkt_inf_norm_trace.push(kkt_inf_norm);
    }

    /// Appends the coordinate updates of one sweep (0-based input indices
    /// are stored with 1-based labels).
    pub fn push_coordinates(&mut self, sweep: usize, updates: &[(usize, F)]) {
        if let Some(trace) = self.coordinate_trace.as_mut() {
            trace.extend(updates.iter().map(|&(i, value)| CoordinateRecord {
                sweep,
                coordinate: i + 1,
                value,
            }));
        }
    }

    pub fn sweeps(&self) -> usize {
        self.step_norms.len()
    }

    /// Per-sweep table as comma-separated rows with a header line. All
    /// numbers are written in full-precision scientific notation so repeated
    /// runs produce byte-identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,objective,step_norm,cum_sq_steps,kkt_inf_norm\n");
        for k in 0..self.sweeps() {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                k + 1,
                self.objective_trace[k],
                self.step_norms[k],
                self.cum_sq_steps[k],
                self.kkt_inf_norm_trace[k],
            );
        }
        out
    }

    /// Coordinate-granularity table, if recorded.
    pub fn coordinate_csv(&self) -> Option<String> {
        self.coordinate_trace.as_ref().map(|trace| {
            let mut out = String::from("sweep,coordinate,value\n");
            for r in trace {
                let _ = writeln!(out, "{},{},{:.16e}", r.sweep, r.coordinate, r.value);
            }
            out
        })
    }
}

/// Thresholds for [`certify`].
#[derive(Debug, Clone)]
pub struct CertifyOptions<F> {
    /// Final KKT residual inf-norm must not exceed this.
    pub kkt_tol: F,
    /// Allowed relative objective increase per sweep (rounding headroom).
    pub descent_slack: F,
    /// The last squared step must not exceed this.
    pub tail_sq_tol: F,
}

impl<F: Real> Default for CertifyOptions<F> {
    fn default() -> Self {
        Self::for_epsilon(F::cast(1e-8))
    }
}

impl<F: Real> CertifyOptions<F> {
    /// Thresholds matched to a stopping tolerance: a run that stopped on
    /// `||step|| <= epsilon` has final squared step at most `epsilon^2`, so
    /// the tail bound `(2 epsilon)^2` leaves a factor-4 margin (floored at
    /// 1e-20 for very tight epsilons).
    pub fn for_epsilon(epsilon: F) -> Self {
        let two_eps = F::cast(2.0) * epsilon;
        CertifyOptions {
            kkt_tol: F::cast(1e-6),
            descent_slack: F::cast(1e-10),
            tail_sq_tol: (two_eps * two_eps).max(F::cast(1e-20)),
        }
    }
}

/// Pass/fail per certified property, with the measured values kept alongside
/// so failures are diagnosable from the record alone.
#[derive(Debug, Clone)]
pub struct Certification<F> {
    pub converged: bool,
    /// Objective never increased beyond slack, sweep over sweep.
    pub descent_ok: bool,
    pub max_descent_violation: F,
    /// The squared step sequence tailed off.
    pub tail_ok: bool,
    pub final_step_sq: F,
    /// Freshly recomputed KKT residual at the final point is below tolerance.
    pub kkt_ok: bool,
    pub kkt_inf_norm: F,
}

impl<F: Real> Certification<F> {
    pub fn all_pass(&self) -> bool {
        self.descent_ok && self.tail_ok && self.kkt_ok
    }

    /// `key=value` lines (stable order, full-precision numbers).
    pub fn to_key_value_text(&self) -> String {
        let pass = |b: bool| if b { "pass" } else { "fail" };
        let mut out = String::new();
        let _ = writeln!(out, "converged={}", self.converged);
        let _ = writeln!(out, "descent={}", pass(self.descent_ok));
        let _ = writeln!(out, "max_descent_violation={:.16e}", self.max_descent_violation);
        let _ = writeln!(out, "tail={}", pass(self.tail_ok));
        let _ = writeln!(out, "final_step_sq={:.16e}", self.final_step_sq);
        let _ = writeln!(out, "kkt={}", pass(self.kkt_ok));
        let _ = writeln!(out, "kkt_inf_norm={:.16e}", self.kkt_inf_norm);
        let _ = writeln!(out, "certified={}", pass(self.all_pass()));
        out
    }
}

/// Checks a finished (or truncated) run against the three certifiable
/// properties: monotone descent of the objective trace, a square-summable
/// step tail, and a small freshly-recomputed KKT residual at the final
/// point.
pub fn certify<F, P>(
    problem: &P,
    outcome: &SolveOutcome<F>,
    opts: &CertifyOptions<F>,
) -> Result<Certification<F>, CcmError<F>>
where
    F: Real,
    P: CoordinateSweep<F>,
{
    let d = &outcome.diagnostics;

    let mut prev = d.initial_objective;
    let mut max_violation = F::zero();
    let mut descent_ok = true;
    for &obj in &d.objective_trace {
        let rise = obj - prev;
        if rise > max_violation {
            max_violation = rise;
        }
        if rise > opts.descent_slack * (F::one() + prev.abs()) {
            descent_ok = false;
        }
        prev = obj;
    }

    let final_step_sq = match d.step_norms.last() {
        Some(&s) => s * s,
        None => F::infinity(), // zero sweeps recorded: nothing tailed off
    };
    let tail_ok = final_step_sq <= opts.tail_sq_tol;

    let kkt_inf_norm = problem.kkt_inf_norm_at(outcome.x.view())?;
    let kkt_ok = kkt_inf_norm <= opts.kkt_tol;

    Ok(Certification {
        converged: outcome.converged,
        descent_ok,
        max_descent_violation: max_violation,
        tail_ok,
        final_step_sq,
        kkt_ok,
        kkt_inf_norm,
    })
}
