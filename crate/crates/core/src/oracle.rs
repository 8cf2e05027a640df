//! Slow, independent reference minimizers used to cross-check the solvers.
//!
//! Everything here is deliberately naive and shares no logic with the
//! production code paths: the 1-D routine is a grid scan plus golden-section
//! refinement, and the vector routine is a plain proximal-gradient loop with
//! backtracking. They exist so the test suite can compare two genuinely
//! different routes to the same minimizer.

use ndarray::{Array1, ArrayView1};

use crate::error::CcmError;
use crate::model::{F1Problem, SmoothOracle};
use crate::Real;

/// Minimizes an extended-real convex `phi` over `[-span, span]`.
///
/// Coarse scan at spacing `step`, then golden-section refinement of the
/// bracketing interval down to width `tol`. `phi` may return `+inf` anywhere
/// (points outside a domain simply lose every comparison).
///
/// Test support: panics if the scan never sees a finite value.
pub fn grid_min_1d<F: Real>(phi: impl Fn(F) -> F, span: F, step: F, tol: F) -> F {
    assert!(span > F::zero() && step > F::zero() && tol > F::zero());
    let count = ((span + span) / step).to_usize().expect("grid size overflow");
    let mut best_u = F::nan();
    let mut best_v = F::infinity();
    for k in 0..=count {
        let u = -span + step * F::cast(k as f64);
        let v = phi(u);
        if v < best_v {
            best_v = v;
            best_u = u;
        }
    }
    assert!(best_v.is_finite(), "no finite value on the scan grid");
    golden_section(&phi, best_u - step, best_u + step, tol)
}

/// Golden-section search on `[lo, hi]`; returns the interval midpoint once
/// the width drops below `tol`. Never evaluates the endpoints, so infinite
/// values at the boundary are harmless.
fn golden_section<F: Real>(phi: &impl Fn(F) -> F, mut lo: F, mut hi: F, tol: F) -> F {
    let ratio = F::cast(0.618_033_988_749_894_8);
    let mut c = hi - (hi - lo) * ratio;
    let mut d = lo + (hi - lo) * ratio;
    let mut fc = phi(c);
    let mut fd = phi(d);
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - (hi - lo) * ratio;
            fc = phi(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + (hi - lo) * ratio;
            fd = phi(d);
        }
    }
    (lo + hi) / F::cast(2.0)
}

/// Knobs for [`ista_solve`]. The defaults are tuned for "reference answer"
/// duty: a tight tolerance and a generous iteration budget.
#[derive(Debug, Clone)]
pub struct IstaConfig<F> {
    /// Stop when the prox-gradient mapping `||x - prox(x - s g)||_inf / s`
    /// drops to this value.
    pub tol: F,
    pub max_iters: usize,
    /// Initial step size; backtracking halves it as needed.
    pub initial_step: F,
}

impl<F: Real> Default for IstaConfig<F> {
    fn default() -> Self {
        IstaConfig { tol: F::cast(1e-10), max_iters: 500_000, initial_step: F::one() }
    }
}

/// Proximal-gradient reference solver for the smooth-plus-l1 template.
///
/// Each iteration takes a gradient step on the smooth part and applies the
/// separable prox (soft-threshold on penalized coordinates, projection onto
/// `u >= 0` on the rest), with the step size found by backtracking against
/// the quadratic upper model. First-order and slow, but it reaches the same
/// minimizer as the coordinate solver by a completely different route.
pub fn ista_solve<F, G>(
    problem: &F1Problem<F, G>,
    x0: ArrayView1<F>,
    cfg: &IstaConfig<F>,
) -> Result<Array1<F>, CcmError<F>>
where
    F: Real,
    G: SmoothOracle<F>,
{
    let e = problem.design().entries();
    let (m, n) = e.dim();
    if x0.len() != n {
        return Err(CcmError::DimensionMismatch { expected: n, found: x0.len() });
    }
    let lambda = problem.lambda();
    let oracle = problem.oracle();
    let two = F::cast(2.0);

    let mut x = x0.to_owned();
    let mut ex = e.dot(&x);
    let mut gx = oracle.value(ex.view());
    if !gx.is_finite() {
        return Err(CcmError::InfeasibleStart);
    }
    let mut grad_g = Array1::zeros(m);
    let mut grad = Array1::zeros(n);
    let mut step = cfg.initial_step;

    for _ in 0..cfg.max_iters {
        oracle.gradient(ex.view(), grad_g.view_mut());
        for i in 0..n {
            grad[i] = e.column(i).dot(&grad_g);
        }

        // Backtrack until the quadratic model at `step` majorizes g at the
        // prox point (tiny relative slack so rounding near the minimizer
        // cannot force endless halving). The step never grows back: once it
        // is small enough the loop body is a contraction, and letting it
        // creep up again would trade that for a limit cycle just above the
        // stopping tolerance.
        let (z, ez, gz) = loop {
            let mut z = Array1::zeros(n);
            for i in 0..n {
                let y = x[i] - step * grad[i];
                z[i] = if problem.penalized().contains(i) {
                    let th = step * lambda;
                    if y > th {
                        y - th
                    } else if y < -th {
                        y + th
                    } else {
                        F::zero()
                    }
                } else if y > F::zero() {
                    y
                } else {
                    F::zero()
                };
            }
            let ez = e.dot(&z);
            let gz = oracle.value(ez.view());
            let mut inner = F::zero();
            let mut dist_sq = F::zero();
            for i in 0..n {
                let d = z[i] - x[i];
                inner = inner + grad[i] * d;
                dist_sq = dist_sq + d * d;
            }
            let model = gx + inner + dist_sq / (two * step);
            let slack = F::cast(1e-12) * (F::one() + model.abs());
            if gz.is_finite() && gz <= model + slack {
                break (z, ez, gz);
            }
            step = step / two;
            if step < F::cast(1e-300) {
                return Err(CcmError::NonpositiveCurvature);
            }
        };

        let mut mapping = F::zero();
        for i in 0..n {
            let g = (x[i] - z[i]).abs() / step;
            if g > mapping {
                mapping = g;
            }
        }
        x = z;
        ex = ez;
        gx = gz;
        if mapping <= cfg.tol {
            return Ok(x);
        }
    }
    Err(CcmError::MaxIterations { max_iterations: cfg.max_iters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DesignMatrix, LeastSquaresOracle, PenaltySet};
    use ndarray::{array, Array2};

    #[test]
    fn grid_min_finds_a_parabola_vertex() {
        let u = grid_min_1d(|u: f64| (u - 2.3) * (u - 2.3), 10.0, 0.7, 1e-12);
        assert!((u - 2.3).abs() < 1e-9, "{u}");
    }

    #[test]
    fn grid_min_handles_infinite_regions() {
        let phi = |u: f64| {
            if u <= 0.0 {
                f64::INFINITY
            } else {
                (u - 1.5) * (u - 1.5) - u.ln()
            }
        };
        // Stationarity: 2(u - 1.5) = 1/u  =>  u = (1.5 + sqrt(2.25 + 2)) / 2.
        let expected = (1.5 + 4.25f64.sqrt()) / 2.0;
        let u = grid_min_1d(phi, 50.0, 0.25, 1e-12);
        assert!((u - expected).abs() < 1e-7, "{u} vs {expected}");
    }

    #[test]
    fn ista_matches_the_separable_closed_form() {
        // E = I makes the problem separable: the minimizer soft-thresholds
        // the shift on penalized coordinates.
        let e = DesignMatrix::new(Array2::<f64>::eye(2)).unwrap();
        let p = F1Problem::new(
            e,
            PenaltySet::all(2),
            1.0,
            LeastSquaresOracle::shifted(array![3.0, -0.2]),
        )
        .unwrap();
        let x = ista_solve(&p, array![0.0, 0.0].view(), &IstaConfig::default()).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-9, "{}", x[0]);
        assert_eq!(x[1], 0.0, "prox must produce an exact zero");
    }

    #[test]
    fn ista_projects_constrained_coordinates() {
        let e = DesignMatrix::new(Array2::<f64>::eye(2)).unwrap();
        // Coordinate 1 is constrained (not penalized) and wants to be -2:
        // the projection pins it to exactly 0.
        let p = F1Problem::new(
            e,
            PenaltySet::from_indices::<f64>(2, [1]).unwrap(),
            1.0,
            LeastSquaresOracle::shifted(array![-2.0, 3.0]),
        )
        .unwrap();
        let x = ista_solve(&p, array![1.0, 0.0].view(), &IstaConfig::default()).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn ista_answer_satisfies_first_order_conditions() {
        let mut s = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            s ^= s >> 12;
            s ^= s << 25;
            s ^= s >> 27;
            (s.wrapping_mul(0x2545f4914f6cdd1d) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let m = 12;
        let n = 6;
        let e = DesignMatrix::new(Array2::from_shape_fn((m, n), |_| next())).unwrap();
        let c = Array1::from_shape_fn(m, |_| 2.0 * next());
        let lambda = 0.3;
        let p = F1Problem::new(
            e,
            PenaltySet::all(n),
            lambda,
            LeastSquaresOracle::shifted(c.clone()),
        )
        .unwrap();
        let x = ista_solve(&p, Array1::zeros(n).view(), &IstaConfig::default()).unwrap();

        // Check the subgradient inclusion by hand.
        let r = p.design().entries().dot(&x) - &c;
        for i in 0..n {
            let d = p.design().column(i).dot(&r);
            if x[i] != 0.0 {
                assert!((d + lambda * x[i].signum()).abs() < 1e-7, "i={i}");
            } else {
                assert!(d.abs() <= lambda + 1e-7, "i={i}");
            }
        }
    }
}
