//! Cyclic coordinate sweeps and the outer solve loop.
//!
//! One *sweep* visits every coordinate once, in a configurable cyclic order,
//! and replaces each with the exact minimizer of the objective restricted to
//! that coordinate. The outer loop repeats sweeps until the iterate stops
//! moving (`||x_new - x_old||_2 <= epsilon`), an optional KKT threshold is
//! met, or the sweep budget runs out. Every sweep appends one row of
//! diagnostics (objective, step norm, running squared-step sum, KKT
//! residual).
//!
//! The cached product `t = E x` is updated in O(m) per coordinate and
//! recomputed from scratch every `n^2` coordinate updates so that rounding
//! drift cannot accumulate across long runs.

use std::cell::RefCell;

use ndarray::{Array1, ArrayView1};

use crate::error::CcmError;
use crate::model::{DesignMatrix, F1Problem, F2Problem, SmoothOracle};
use crate::optimality::{self, DiagnosticsReport};
use crate::scalar_min::{min_quad_l1, min_quad_log, min_scalar_general, QuadL1Spec, QuadLogSpec, ScalarProblem};
use crate::Real;

/// Current point plus the cached matrix-vector product `t = E x`.
///
/// All coordinate updates go through [`Iterate::set_coord`], which keeps the
/// cache coherent incrementally and schedules periodic full recomputes.
#[derive(Debug, Clone)]
pub struct Iterate<F> {
    x: Array1<F>,
    residual: Array1<F>,
    updates_since_refresh: usize,
    refresh_period: usize,
}

impl<F: Real> Iterate<F> {
    pub fn new(design: &DesignMatrix<F>, x: Array1<F>) -> Result<Self, CcmError<F>> {
        if x.len() != design.ncols() {
            return Err(CcmError::DimensionMismatch {
                expected: design.ncols(),
                found: x.len(),
            });
        }
        let mut residual = Array1::zeros(design.nrows());
        design.matvec_into(x.view(), &mut residual);
        let n = design.ncols();
        Ok(Iterate {
            x,
            residual,
            updates_since_refresh: 0,
            refresh_period: n.saturating_mul(n),
        })
    }

    pub fn x(&self) -> &Array1<F> {
        &self.x
    }

    /// The cached product `E x`.
    pub fn residual(&self) -> &Array1<F> {
        &self.residual
    }

    /// Sets coordinate `i` to `value`, updating the cached `E x` in O(m).
    pub fn set_coord(&mut self, design: &DesignMatrix<F>, i: usize, value: F) {
        let delta = value - self.x[i];
        self.x[i] = value;
        if delta != F::zero() {
            for (t, &c) in self.residual.iter_mut().zip(design.column(i).iter()) {
                *t = *t + c * delta;
            }
        }
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= self.refresh_period {
            design.matvec_into(self.x.view(), &mut self.residual);
            self.updates_since_refresh = 0;
        }
    }
}

/// Cyclic visiting order for one sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateOrder {
    /// `0, 1, ..., n-1`.
    Natural,
    /// A fixed permutation of `0..n`, applied every sweep.
    Permutation(Vec<usize>),
}

impl UpdateOrder {
    /// A reproducible random permutation (Fisher–Yates over a splitmix64
    /// stream), so runs are order-randomized but exactly repeatable.
    pub fn seeded(n: usize, seed: u64) -> Self {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        };
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = (next() % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        UpdateOrder::Permutation(perm)
    }

    /// Checks that the order visits each of `0..n` exactly once.
    pub fn validate<F: Real>(&self, n: usize) -> Result<(), CcmError<F>> {
        match self {
            UpdateOrder::Natural => Ok(()),
            UpdateOrder::Permutation(p) => {
                if p.len() != n {
                    return Err(CcmError::InvalidOrder { n });
                }
                let mut seen = vec![false; n];
                for &i in p {
                    if i >= n || seen[i] {
                        return Err(CcmError::InvalidOrder { n });
                    }
                    seen[i] = true;
                }
                Ok(())
            }
        }
    }

    /// The coordinate visited at position `k` of a sweep.
    #[inline]
    pub fn index(&self, k: usize) -> usize {
        match self {
            UpdateOrder::Natural => k,
            UpdateOrder::Permutation(p) => p[k],
        }
    }
}

/// Knobs for [`solve`].
#[derive(Debug, Clone)]
pub struct SolverConfig<F> {
    /// Stop once `||x_new - x_old||_2 <= epsilon`. Must be positive.
    pub epsilon: F,
    pub max_sweeps: usize,
    pub order: UpdateOrder,
    /// Derivative tolerance forwarded to the general scalar minimizer.
    pub inner_tol: F,
    /// Optional extra stopping rule: also stop once the KKT residual
    /// inf-norm drops to this value.
    pub kkt_stop: Option<F>,
    /// Record (coordinate, value) pairs for every update. Off by default:
    /// the trace costs O(n) memory per sweep.
    pub record_coordinate_trace: bool,
}

impl<F: Real> Default for SolverConfig<F> {
    fn default() -> Self {
        SolverConfig {
            epsilon: F::cast(1e-8),
            max_sweeps: 10_000,
            order: UpdateOrder::Natural,
            inner_tol: F::cast(1e-12),
            kkt_stop: None,
            record_coordinate_trace: false,
        }
    }
}

/// Which stopping rule ended the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The Euclidean step between consecutive sweeps dropped to `epsilon`.
    StepNorm,
    /// The optional KKT-residual rule fired.
    KktResidual,
    /// The sweep budget ran out (only seen inside `NotConverged`).
    SweepBudget,
}

/// Final iterate plus everything recorded on the way there.
#[derive(Debug, Clone)]
pub struct SolveOutcome<F> {
    pub x: Array1<F>,
    pub objective: F,
    pub sweeps_used: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub diagnostics: DiagnosticsReport<F>,
}

/// A problem the cyclic solver knows how to sweep.
///
/// `State` bundles the iterate with whatever cached products the sweep needs
/// (`E x` for the generic templates, the working product matrix for the
/// covariance path). [`solve`] only ever talks to problems through this
/// trait.
pub trait CoordinateSweep<F: Real> {
    type State;

    fn dim(&self) -> usize;

    /// Builds sweep state at `x0` (dimension-checked; feasibility is caught
    /// by the finiteness test on the initial objective in [`solve`]).
    fn init_state(&self, x0: ArrayView1<F>) -> Result<Self::State, CcmError<F>>;

    /// One full pass over all coordinates in `order`. When `trace` is given,
    /// pushes one `(coordinate, new_value)` pair per update.
    fn sweep_once(
        &self,
        state: &mut Self::State,
        order: &UpdateOrder,
        inner_tol: F,
        trace: Option<&mut Vec<(usize, F)>>,
    ) -> Result<(), CcmError<F>>;

    /// Extended-real objective at the state's iterate.
    fn objective_value(&self, state: &Self::State) -> F;

    /// KKT residual inf-norm at the state's iterate.
    fn kkt_inf_norm(&self, state: &Self::State) -> Result<F, CcmError<F>>;

    fn current_x<'s>(&self, state: &'s Self::State) -> ArrayView1<'s, F>;

    /// KKT residual inf-norm at an arbitrary point (used by certification).
    fn kkt_inf_norm_at(&self, x: ArrayView1<F>) -> Result<F, CcmError<F>> {
        let state = self.init_state(x)?;
        self.kkt_inf_norm(&state)
    }
}

/// One cyclic sweep of exact coordinate minimization for the smooth-plus-l1
/// template.
///
/// Each restricted problem is solved through the general scalar minimizer:
/// the smooth part is evaluated as `phi(u) = g(t_without_i + column_i * u)`
/// against the cached residual, so a single coordinate update costs O(m)
/// per inner derivative evaluation and O(m) to commit.
pub fn sweep_f1<F, G>(
    problem: &F1Problem<F, G>,
    it: &mut Iterate<F>,
    order: &UpdateOrder,
    inner_tol: F,
    mut trace: Option<&mut Vec<(usize, F)>>,
) -> Result<(), CcmError<F>>
where
    F: Real,
    G: SmoothOracle<F>,
{
    let n = problem.dim();
    let m = problem.design().nrows();
    let oracle = problem.oracle();
    // Scratch shared by the closures handed to the scalar minimizer: the
    // residual with coordinate i removed, the probe point, and a gradient.
    let base = RefCell::new(Array1::<F>::zeros(m));
    let probe = RefCell::new(Array1::<F>::zeros(m));
    let grad = RefCell::new(Array1::<F>::zeros(m));

    for k in 0..n {
        let i = order.index(k);
        let col = problem.design().column(i);
        let xi = it.x()[i];
        {
            let mut b = base.borrow_mut();
            b.assign(it.residual());
            if xi != F::zero() {
                for (bv, &cv) in b.iter_mut().zip(col.iter()) {
                    *bv = *bv - cv * xi;
                }
            }
        }
        let fill_probe = |u: F| {
            let b = base.borrow();
            let mut q = probe.borrow_mut();
            for ((qv, &bv), &cv) in q.iter_mut().zip(b.iter()).zip(col.iter()) {
                *qv = bv + cv * u;
            }
        };
        let phi = |u: F| {
            fill_probe(u);
            let q = probe.borrow();
            oracle.value(q.view())
        };
        let dphi = |u: F| {
            fill_probe(u);
            let q = probe.borrow();
            if !oracle.in_domain(q.view()) {
                // Treated by the root search as "past the boundary".
                return F::infinity();
            }
            let mut g = grad.borrow_mut();
            oracle.gradient(q.view(), g.view_mut());
            col.dot(&*g)
        };
        let d2phi = |u: F| {
            fill_probe(u);
            let q = probe.borrow();
            oracle.directional_second_derivative(q.view(), col)
        };

        let new = if problem.penalized().contains(i) {
            let sp = ScalarProblem::penalized(phi, dphi, d2phi, problem.lambda());
            min_scalar_general(&sp, xi.abs(), inner_tol)?
        } else {
            let sp = ScalarProblem::nonnegative(phi, dphi, d2phi);
            min_scalar_general(&sp, xi.abs(), inner_tol)?
        };
        it.set_coord(problem.design(), i, new);
        if let Some(t) = trace.as_deref_mut() {
            t.push((i, new));
        }
    }
    Ok(())
}

/// One cyclic sweep for the quadratic-plus-barrier template, entirely via
/// the closed-form scalar minimizers.
pub fn sweep_f2<F: Real>(
    problem: &F2Problem<F>,
    it: &mut Iterate<F>,
    order: &UpdateOrder,
    mut trace: Option<&mut Vec<(usize, F)>>,
) -> Result<(), CcmError<F>> {
    let n = problem.dim();
    let two = F::cast(2.0);
    for k in 0..n {
        let i = order.index(k);
        let col = problem.design().column(i);
        let a = problem.design().column_norm_sq(i);
        let xi = it.x()[i];
        // Restricted objective in u: a u^2 + b u + const (+ barrier/penalty),
        // with b read off the cached residual.
        let b = two * col.dot(it.residual()) - two * a * xi;
        let new = if problem.penalized().contains(i) {
            min_quad_l1(&QuadL1Spec { a, b, lambda: problem.lambda() })?
        } else {
            min_quad_log(&QuadLogSpec { a, b })?
        };
        it.set_coord(problem.design(), i, new);
        if let Some(t) = trace.as_deref_mut() {
            t.push((i, new));
        }
    }
    Ok(())
}

impl<F: Real, G: SmoothOracle<F>> CoordinateSweep<F> for F1Problem<F, G> {
    type State = Iterate<F>;

    fn dim(&self) -> usize {
        F1Problem::dim(self)
    }

    fn init_state(&self, x0: ArrayView1<F>) -> Result<Iterate<F>, CcmError<F>> {
        Iterate::new(self.design(), x0.to_owned())
    }

    fn sweep_once(
        &self,
        state: &mut Iterate<F>,
        order: &UpdateOrder,
        inner_tol: F,
        trace: Option<&mut Vec<(usize, F)>>,
    ) -> Result<(), CcmError<F>> {
        sweep_f1(self, state, order, inner_tol, trace)
    }

    fn objective_value(&self, state: &Iterate<F>) -> F {
        self.objective_cached(state)
    }

    fn kkt_inf_norm(&self, state: &Iterate<F>) -> Result<F, CcmError<F>> {
        Ok(optimality::kkt_residual_f1(self, state.x().view())?.inf_norm)
    }

    fn current_x<'s>(&self, state: &'s Iterate<F>) -> ArrayView1<'s, F> {
        state.x().view()
    }
}

impl<F: Real> CoordinateSweep<F> for F2Problem<F> {
    type State = Iterate<F>;

    fn dim(&self) -> usize {
        F2Problem::dim(self)
    }

    fn init_state(&self, x0: ArrayView1<F>) -> Result<Iterate<F>, CcmError<F>> {
        Iterate::new(self.design(), x0.to_owned())
    }

    fn sweep_once(
        &self,
        state: &mut Iterate<F>,
        order: &UpdateOrder,
        _inner_tol: F,
        trace: Option<&mut Vec<(usize, F)>>,
    ) -> Result<(), CcmError<F>> {
        sweep_f2(self, state, order, trace)
    }

    fn objective_value(&self, state: &Iterate<F>) -> F {
        self.objective_cached(state)
    }

    fn kkt_inf_norm(&self, state: &Iterate<F>) -> Result<F, CcmError<F>> {
        Ok(optimality::kkt_residual_f2(self, state.x().view())?.inf_norm)
    }

    fn current_x<'s>(&self, state: &'s Iterate<F>) -> ArrayView1<'s, F> {
        state.x().view()
    }
}

/// Runs cyclic sweeps from `x0` until a stopping rule fires.
///
/// Returns the final iterate with full diagnostics. When the sweep budget is
/// exhausted first, the partial outcome rides inside
/// [`CcmError::NotConverged`] so callers can still inspect the trace.
pub fn solve<F, P>(
    problem: &P,
    x0: ArrayView1<F>,
    config: &SolverConfig<F>,
) -> Result<SolveOutcome<F>, CcmError<F>>
where
    F: Real,
    P: CoordinateSweep<F>,
{
    let n = problem.dim();
    if x0.len() != n {
        return Err(CcmError::DimensionMismatch { expected: n, found: x0.len() });
    }
    if !(config.epsilon > F::zero()) {
        return Err(CcmError::InvalidConfig { reason: "epsilon must be strictly positive" });
    }
    config.order.validate::<F>(n)?;

    let mut state = problem.init_state(x0)?;
    let initial_objective = problem.objective_value(&state);
    if !initial_objective.is_finite() {
        return Err(CcmError::InfeasibleStart);
    }

    let mut diagnostics =
        DiagnosticsReport::new(initial_objective, config.record_coordinate_trace);
    let mut prev_x = problem.current_x(&state).to_owned();
    let mut prev_objective = initial_objective;
    let mut cum_sq = F::zero();
    let mut coord_buf: Vec<(usize, F)> = Vec::new();

    for sweep in 1..=config.max_sweeps {
        coord_buf.clear();
        let trace = config.record_coordinate_trace.then_some(&mut coord_buf);
        problem.sweep_once(&mut state, &config.order, config.inner_tol, trace)?;

        let x = problem.current_x(&state);
        let mut step_sq = F::zero();
        for (&a, &b) in x.iter().zip(prev_x.iter()) {
            let d = a - b;
            step_sq = step_sq + d * d;
        }
        let step = step_sq.sqrt();
        cum_sq = cum_sq + step_sq;
        let objective = problem.objective_value(&state);
        let kkt = problem.kkt_inf_norm(&state)?;
        diagnostics.push_sweep(objective, step, cum_sq, kkt);
        if config.record_coordinate_trace {
            diagnostics.push_coordinates(sweep, &coord_buf);
        }
        debug_assert!(
            objective <= prev_objective + F::cast(1e-9) * (F::one() + prev_objective.abs()),
            "sweep {sweep} increased the objective: {prev_objective} -> {objective}"
        );
        prev_objective = objective;
        prev_x.assign(&x);

        let step_hit = step <= config.epsilon;
        let kkt_hit = config.kkt_stop.map_or(false, |tol| kkt <= tol);
        if step_hit || kkt_hit {
            return Ok(SolveOutcome {
                x: prev_x.clone(),
                objective,
                sweeps_used: sweep,
                converged: true,
                stop_reason: if step_hit { StopReason::StepNorm } else { StopReason::KktResidual },
                diagnostics,
            });
        }
    }

    let x = problem.current_x(&state).to_owned();
    let objective = problem.objective_value(&state);
    Err(CcmError::NotConverged(Box::new(SolveOutcome {
        x,
        objective,
        sweeps_used: config.max_sweeps,
        converged: false,
        stop_reason: StopReason::SweepBudget,
        diagnostics,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LeastSquaresOracle, PenaltySet};
    use crate::oracle::grid_min_1d;
    use ndarray::{array, Array2};

    fn lcg_stream(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        }
    }

    #[test]
    fn iterate_cache_stays_coherent_under_many_updates() {
        let mut next = lcg_stream(42);
        let design = DesignMatrix::new(Array2::from_shape_fn((7, 5), |_| next())).unwrap();
        let mut it = Iterate::new(&design, Array1::from_shape_fn(5, |_| next())).unwrap();
        for k in 0..200 {
            it.set_coord(&design, k % 5, 2.0 * next());
            let mut fresh = Array1::zeros(7);
            design.matvec_into(it.x().view(), &mut fresh);
            let drift = (&fresh - it.residual()).iter().map(|d| d.abs()).fold(0.0, f64::max);
            assert!(drift < 1e-13, "drift {drift} after {k} updates");
        }
    }

    #[test]
    fn order_validation_catches_non_permutations() {
        assert!(UpdateOrder::Permutation(vec![0, 0, 1]).validate::<f64>(3).is_err());
        assert!(UpdateOrder::Permutation(vec![0, 1]).validate::<f64>(3).is_err());
        assert!(UpdateOrder::Permutation(vec![0, 1, 3]).validate::<f64>(3).is_err());
        assert!(UpdateOrder::Permutation(vec![2, 0, 1]).validate::<f64>(3).is_ok());
        assert!(UpdateOrder::Natural.validate::<f64>(3).is_ok());
    }

    #[test]
    fn seeded_orders_are_valid_and_reproducible() {
        for seed in [0u64, 1, 999] {
            let a = UpdateOrder::seeded(17, seed);
            let b = UpdateOrder::seeded(17, seed);
            assert_eq!(a, b);
            a.validate::<f64>(17).unwrap();
        }
        assert_ne!(UpdateOrder::seeded(17, 1), UpdateOrder::seeded(17, 2));
    }

    #[test]
    fn sweep_on_decoupled_l1_problem_lands_on_the_minimizer() {
        // E = I decouples the coordinates, so one sweep of *exact* scalar
        // minimization jumps straight to the global minimizer of
        // 1/2 x^2 + |x| per coordinate — the origin — from any start.
        let p = F1Problem::new(
            DesignMatrix::new(Array2::eye(2)).unwrap(),
            PenaltySet::all(2),
            1.0,
            LeastSquaresOracle::origin(),
        )
        .unwrap();
        let mut it = Iterate::new(p.design(), array![3.0, -3.0]).unwrap();
        sweep_f1(&p, &mut it, &UpdateOrder::Natural, 1e-12, None).unwrap();
        assert_eq!(it.x()[0], 0.0);
        assert_eq!(it.x()[1], 0.0);
    }

    #[test]
    fn sweep_on_coupled_row_matches_soft_threshold_algebra() {
        // E = [1 1] couples the two coordinates through a single residual.
        // Restricted problem at coordinate 0 from (1,1):
        //   1/2 (u + 1)^2 + 0.1|u|  =>  u = -0.9; then coordinate 1 sees
        //   1/2 (-0.9 + u)^2 + 0.1|u|  =>  u = 0.8.
        let p = F1Problem::new(
            DesignMatrix::new(array![[1.0f64, 1.0]]).unwrap(),
            PenaltySet::all(2),
            0.1,
            LeastSquaresOracle::origin(),
        )
        .unwrap();
        let mut it = Iterate::new(p.design(), array![1.0, 1.0]).unwrap();
        sweep_f1(&p, &mut it, &UpdateOrder::Natural, 1e-13, None).unwrap();
        assert!((it.x()[0] + 0.9).abs() < 1e-12, "{}", it.x()[0]);
        assert!((it.x()[1] - 0.8).abs() < 1e-12, "{}", it.x()[1]);

        // Same two restricted minimizers from the independent 1-D oracle.
        let first = grid_min_1d(|u: f64| 0.5 * (u + 1.0) * (u + 1.0) + 0.1 * u.abs(), 5.0, 0.1, 1e-10);
        assert!((first + 0.9).abs() < 1e-7);
        let second =
            grid_min_1d(|u: f64| 0.5 * (-0.9 + u) * (-0.9 + u) + 0.1 * u.abs(), 5.0, 0.1, 1e-10);
        assert!((second - 0.8).abs() < 1e-7);
    }

    #[test]
    fn f2_sweep_reaches_and_holds_its_fixed_point() {
        let p = F2Problem::new(
            DesignMatrix::new(Array2::<f64>::eye(2)).unwrap(),
            PenaltySet::from_indices::<f64>(2, [0]).unwrap(),
            1.0,
        )
        .unwrap();
        let mut it = Iterate::new(p.design(), array![5.0, 5.0]).unwrap();
        sweep_f2(&p, &mut it, &UpdateOrder::Natural, None).unwrap();
        assert_eq!(it.x()[0], 0.0);
        // Second coordinate minimizes u^2 - log u: u = sqrt(1/2).
        assert!((it.x()[1] * it.x()[1] - 0.5).abs() < 1e-15);

        // Sweeping a freshly built state at the minimizer must not move at
        // all: with an exact residual cache both closed forms see b = 0 and
        // reproduce the current values bitwise. (The old state's cache is an
        // ulp off after its incremental updates, which is fine — that is the
        // drift the periodic refresh exists for.)
        let frozen = it.x().clone();
        let mut fresh = Iterate::new(p.design(), frozen.clone()).unwrap();
        sweep_f2(&p, &mut fresh, &UpdateOrder::Natural, None).unwrap();
        assert_eq!(fresh.x(), &frozen);
    }

    #[test]
    fn f2_sweep_agrees_with_per_coordinate_grid_search() {
        let mut next = lcg_stream(7);
        let design = DesignMatrix::new(Array2::from_shape_fn((3, 4), |_| next())).unwrap();
        let p = F2Problem::new(
            design,
            PenaltySet::from_indices::<f64>(4, [0, 1]).unwrap(),
            0.5,
        )
        .unwrap();
        let start = array![0.0, 0.0, 1.0, 1.0];
        let mut it = Iterate::new(p.design(), start.clone()).unwrap();

        // Replay the sweep coordinate by coordinate against the 1-D oracle,
        // always restarting the oracle from the solver's own trajectory.
        let mut reference = start;
        for i in 0..4 {
            let snapshot = reference.clone();
            let restricted = |u: f64| {
                let mut y = snapshot.clone();
                y[i] = u;
                p.objective(y.view())
            };
            let oracle_u = grid_min_1d(restricted, 20.0, 0.05, 1e-10);

            let mut partial = Iterate::new(p.design(), reference.clone()).unwrap();
            sweep_partial_f2(&p, &mut partial, i);
            reference[i] = partial.x()[i];
            assert!(
                (reference[i] - oracle_u).abs() < 1e-6,
                "coordinate {i}: solver {} vs oracle {oracle_u}",
                reference[i]
            );
        }

        sweep_f2(&p, &mut it, &UpdateOrder::Natural, None).unwrap();
        for i in 0..4 {
            assert!((it.x()[i] - reference[i]).abs() < 1e-12);
        }
    }

    // Applies just the update of coordinate `i` (test helper mirroring one
    // step of the real sweep).
    fn sweep_partial_f2(p: &F2Problem<f64>, it: &mut Iterate<f64>, i: usize) {
        let col = p.design().column(i);
        let a = p.design().column_norm_sq(i);
        let b = 2.0 * col.dot(it.residual()) - 2.0 * a * it.x()[i];
        let new = if p.penalized().contains(i) {
            min_quad_l1(&QuadL1Spec { a, b, lambda: p.lambda() }).unwrap()
        } else {
            min_quad_log(&QuadLogSpec { a, b }).unwrap()
        };
        it.set_coord(p.design(), i, new);
    }

    #[test]
    fn solve_separable_l1_problem() {
        let p = F1Problem::new(
            DesignMatrix::new(Array2::<f64>::eye(2)).unwrap(),
            PenaltySet::all(2),
            1.0,
            LeastSquaresOracle::shifted(array![3.0, -0.2]),
        )
        .unwrap();
        let out = solve(&p, array![0.0, 0.0].view(), &SolverConfig::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.stop_reason, StopReason::StepNorm);
        assert_eq!(out.sweeps_used, 2, "exact sweep + confirming sweep");
        assert!((out.x[0] - 2.0).abs() < 1e-14);
        assert_eq!(out.x[1], 0.0, "soft-threshold zeros must be exact");
        assert!((out.objective - p.objective(out.x.view())).abs() < 1e-15);
        assert_eq!(out.diagnostics.objective_trace.len(), 2);
    }

    #[test]
    fn solve_f2_frozen_instance() {
        let p = F2Problem::new(
            DesignMatrix::new(Array2::eye(2)).unwrap(),
            PenaltySet::from_indices::<f64>(2, [0]).unwrap(),
            1.0,
        )
        .unwrap();
        let mut cfg = SolverConfig::default();
        cfg.epsilon = 1e-10;
        let out = solve(&p, array![5.0, 5.0].view(), &cfg).unwrap();
        assert!(out.converged);
        assert_eq!(out.sweeps_used, 2);
        assert_eq!(out.x[0], 0.0);
        assert!((out.x[1] - 0.5f64.sqrt()).abs() < 1e-15);

        // Restarting at the answer confirms it in a single sweep and stays
        // within an ulp (the answer itself carries the usual last-digit
        // wobble from the incremental residual cache).
        let again = solve(&p, out.x.view(), &cfg).unwrap();
        assert_eq!(again.sweeps_used, 1);
        assert_eq!(again.x[0], 0.0);
        assert!((again.x[1] - out.x[1]).abs() <= f64::EPSILON);
    }

    #[test]
    fn exhausted_budget_returns_partial_outcome() {
        let mut next = lcg_stream(11);
        let design = DesignMatrix::new(Array2::from_shape_fn((6, 4), |_| next())).unwrap();
        let p =
            F1Problem::new(design, PenaltySet::all(4), 0.1, LeastSquaresOracle::origin())
                .unwrap();
        let mut cfg = SolverConfig::<f64>::default();
        cfg.max_sweeps = 1;
        cfg.epsilon = 1e-16;
        let err = solve(&p, array![1.0, 1.0, 1.0, 1.0].view(), &cfg).unwrap_err();
        match err {
            CcmError::NotConverged(partial) => {
                assert!(!partial.converged);
                assert_eq!(partial.sweeps_used, 1);
                assert_eq!(partial.stop_reason, StopReason::SweepBudget);
                assert_eq!(partial.diagnostics.step_norms.len(), 1);
                assert!(partial.x.iter().all(|v| v.is_finite()));
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn visiting_orders_agree_on_the_minimizer() {
        let mut next = lcg_stream(23);
        let design = DesignMatrix::new(Array2::from_shape_fn((6, 4), |_| next())).unwrap();
        let p = F2Problem::new(
            design,
            PenaltySet::from_indices::<f64>(4, [0, 1]).unwrap(),
            0.4,
        )
        .unwrap();
        let mut cfg = SolverConfig::default();
        cfg.epsilon = 1e-11;
        let a = solve(&p, p.default_start().view(), &cfg).unwrap();
        cfg.order = UpdateOrder::Permutation(vec![3, 1, 0, 2]);
        let b = solve(&p, p.default_start().view(), &cfg).unwrap();
        let gap = a.x.iter().zip(b.x.iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-6, "order changed the answer by {gap}");
    }

    #[test]
    fn coordinate_trace_follows_the_visiting_order() {
        let p = F1Problem::new(
            DesignMatrix::new(Array2::eye(2)).unwrap(),
            PenaltySet::all(2),
            1.0,
            LeastSquaresOracle::shifted(array![3.0, -0.2]),
        )
        .unwrap();
        let mut cfg = SolverConfig::default();
        cfg.record_coordinate_trace = true;
        cfg.order = UpdateOrder::Permutation(vec![1, 0]);
        let out = solve(&p, array![0.0, 0.0].view(), &cfg).unwrap();
        let trace = out.diagnostics.coordinate_trace.as_ref().unwrap();
        assert_eq!(trace.len(), out.sweeps_used * 2);
        // 1-based coordinate labels, visited as 2 then 1 within each sweep.
        assert_eq!(trace[0].coordinate, 2);
        assert_eq!(trace[1].coordinate, 1);
        assert_eq!(trace[0].sweep, 1);
        assert_eq!(trace[2].sweep, 2);
    }

    #[test]
    fn kkt_stop_rule_fires_when_enabled() {
        let mut next = lcg_stream(31);
        let design = DesignMatrix::new(Array2::from_shape_fn((6, 4), |_| next())).unwrap();
        let p =
            F1Problem::new(design, PenaltySet::all(4), 0.1, LeastSquaresOracle::origin())
                .unwrap();
        let mut cfg = SolverConfig::default();
        cfg.epsilon = 1e-300;
        cfg.kkt_stop = Some(1e-6);
        cfg.max_sweeps = 100_000;
        let out = solve(&p, array![1.0, -1.0, 0.5, 2.0].view(), &cfg).unwrap();
        assert_eq!(out.stop_reason, StopReason::KktResidual);
        assert!(*out.diagnostics.kkt_inf_norm_trace.last().unwrap() <= 1e-6);
    }

    #[test]
    fn config_and_start_are_checked() {
        let p = F2Problem::new(
            DesignMatrix::new(Array2::eye(2)).unwrap(),
            PenaltySet::from_indices::<f64>(2, [0]).unwrap(),
            1.0,
        )
        .unwrap();
        let mut cfg = SolverConfig::default();
        cfg.epsilon = 0.0;
        assert!(matches!(
            solve(&p, array![0.0, 1.0].view(), &cfg),
            Err(CcmError::InvalidConfig { .. })
        ));

        let cfg = SolverConfig::default();
        // Barrier coordinate starting at 0 is infeasible.
        assert!(matches!(
            solve(&p, array![0.0, 0.0].view(), &cfg),
            Err(CcmError::InfeasibleStart)
        ));
        assert!(matches!(
            solve(&p, array![0.0].view(), &cfg),
            Err(CcmError::DimensionMismatch { .. })
        ));
        let mut cfg = SolverConfig::default();
        cfg.order = UpdateOrder::Permutation(vec![0, 0]);
        assert!(matches!(
            solve(&p, array![0.0, 1.0].view(), &cfg),
            Err(CcmError::InvalidOrder { .. })
        ));
    }
}
