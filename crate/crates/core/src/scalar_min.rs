//! One-dimensional minimizers used inside each coordinate step.
//!
//! The quadratic template only ever produces two restricted shapes, both with
//! closed-form minimizers:
//!
//! * `a u^2 + b u + c - log u` over `u > 0`  ->  [`min_quad_log`],
//! * `a u^2 + b u + c + lambda |u|`          ->  [`min_quad_l1`].
//!
//! The general smooth template falls back to [`min_scalar_general`]: a kink
//! test at zero, then a safeguarded Newton search on the derivative over the
//! half-line the minimizer is known to lie on, with geometric bracket growth
//! and bisection fallback. All minimizers return *exact* zeros when zero is
//! stationary — sparsity in the results is real, not thresholded.

use crate::error::CcmError;
use crate::Real;

/// Iteration cap for the safeguarded Newton search.
pub const MAX_NEWTON_ITERATIONS: usize = 200;
/// Bracket growth cap: the derivative must change sign within
/// `hint * 2^MAX_BRACKET_DOUBLINGS`.
pub const MAX_BRACKET_DOUBLINGS: usize = 60;

/// Soft-thresholding: `sign(x) * max(|x| - lambda, 0)`.
///
/// Nonexpansive in `x` and exactly zero on `[-lambda, lambda]`.
#[inline]
pub fn soft_threshold<F: Real>(x: F, lambda: F) -> F {
    debug_assert!(lambda >= F::zero());
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        F::zero()
    }
}

/// Restricted objective `a u^2 + b u + c - log u` over `u > 0`.
///
/// The constant `c` does not move the minimizer and is not stored.
#[derive(Debug, Clone, Copy)]
pub struct QuadLogSpec<F> {
    /// Quadratic coefficient; must be strictly positive.
    pub a: F,
    /// Linear coefficient.
    pub b: F,
}

/// Restricted objective `a u^2 + b u + c + lambda |u|`.
#[derive(Debug, Clone, Copy)]
pub struct QuadL1Spec<F> {
    /// Quadratic coefficient; must be strictly positive.
    pub a: F,
    /// Linear coefficient.
    pub b: F,
    /// Penalty weight; must be strictly positive.
    pub lambda: F,
}

/// Minimizer of `a u^2 + b u - log u` over `u > 0`:
/// the positive root of `2a u^2 + b u - 1 = 0`.
///
/// Uses `(-b + sqrt(b^2 + 8a)) / (4a)` for `b <= 0` and the algebraically
/// equal, cancellation-free form `2 / (b + sqrt(b^2 + 8a))` for `b > 0`.
/// The result is strictly positive for every finite `b`.
pub fn min_quad_log<F: Real>(spec: &QuadLogSpec<F>) -> Result<F, CcmError<F>> {
    let QuadLogSpec { a, b } = *spec;
    if !(a > F::zero()) {
        return Err(CcmError::NonpositiveCurvature);
    }
    let eight = F::cast(8.0);
    let disc = (b * b + eight * a).sqrt();
    let u = if b > F::zero() {
        (F::one() + F::one()) / (b + disc)
    } else {
        (disc - b) / (F::cast(4.0) * a)
    };
    debug_assert!(u > F::zero());
    Ok(u)
}

/// Minimizer of `a u^2 + b u + lambda |u|`: `soft_threshold(-b, lambda) / (2a)`.
///
/// Returns exactly zero when `|b| <= lambda`.
pub fn min_quad_l1<F: Real>(spec: &QuadL1Spec<F>) -> Result<F, CcmError<F>> {
    let QuadL1Spec { a, b, lambda } = *spec;
    if !(a > F::zero()) {
        return Err(CcmError::NonpositiveCurvature);
    }
    if !(lambda > F::zero()) {
        return Err(CcmError::NonpositiveLambda);
    }
    Ok(soft_threshold(-b, lambda) / (F::cast(2.0) * a))
}

/// Which nonsmooth term the restricted problem carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    /// Minimize `phi(u) + lambda |u|` over all of `R`.
    Penalized,
    /// Minimize `phi(u)` over `u >= 0`.
    NonNegative,
}

/// A one-dimensional restriction of the smooth template.
///
/// `phi` is the smooth part, `dphi`/`d2phi` its first and (directional)
/// second derivatives; `phi` must be convex with `d2phi > 0` wherever it is
/// queried. `lambda` is ignored for [`ScalarKind::NonNegative`].
pub struct ScalarProblem<F, P, D1, D2>
where
    P: Fn(F) -> F,
    D1: Fn(F) -> F,
    D2: Fn(F) -> F,
{
    pub phi: P,
    pub dphi: D1,
    pub d2phi: D2,
    pub kind: ScalarKind,
    pub lambda: F,
}

impl<F: Real, P, D1, D2> ScalarProblem<F, P, D1, D2>
where
    P: Fn(F) -> F,
    D1: Fn(F) -> F,
    D2: Fn(F) -> F,
{
    pub fn penalized(phi: P, dphi: D1, d2phi: D2, lambda: F) -> Self {
        ScalarProblem { phi, dphi, d2phi, kind: ScalarKind::Penalized, lambda }
    }

    pub fn nonnegative(phi: P, dphi: D1, d2phi: D2) -> Self {
        ScalarProblem { phi, dphi, d2phi, kind: ScalarKind::NonNegative, lambda: F::zero() }
    }
}

/// Exact minimizer of the restricted problem, to derivative tolerance `tol`.
///
/// Strategy: test stationarity of zero first (`|dphi(0)| <= lambda` for the
/// penalized kind, `dphi(0) >= 0` for the nonnegative kind) and return an
/// exact `0.0` when it holds. Otherwise the sign of `dphi(0)` pins the
/// half-line containing the minimizer; the smooth derivative on that
/// half-line is bracketed by geometric growth from `bracket_hint` and its
/// root found by Newton steps clipped to the bracket, falling back to
/// bisection whenever a step leaves it. Stops when the derivative magnitude
/// drops to `tol` or the bracket collapses to rounding width.
///
/// `bracket_hint` sets the initial probe scale (the magnitude of the current
/// coordinate value is a good choice; non-positive hints fall back to 1).
pub fn min_scalar_general<F, P, D1, D2>(
    sp: &ScalarProblem<F, P, D1, D2>,
    bracket_hint: F,
    tol: F,
) -> Result<F, CcmError<F>>
where
    F: Real,
    P: Fn(F) -> F,
    D1: Fn(F) -> F,
    D2: Fn(F) -> F,
{
    debug_assert!(tol > F::zero(), "derivative tolerance must be positive");
    let d0 = (sp.dphi)(F::zero());
    let hint = if bracket_hint.abs() > F::zero() { bracket_hint.abs() } else { F::one() };

    let result = match sp.kind {
        ScalarKind::Penalized => {
            if d0.abs() <= sp.lambda {
                return Ok(F::zero());
            }
            if d0 < -sp.lambda {
                // Minimizer on u > 0 where the subproblem derivative is dphi(u) + lambda.
                root_on_halfline(|u| (sp.dphi)(u) + sp.lambda, |u| (sp.d2phi)(u), hint, tol)
            } else {
                // Minimizer on u < 0; substitute u = -v to reuse the same search.
                root_on_halfline(|v| -(sp.dphi)(-v) + sp.lambda, |v| (sp.d2phi)(-v), hint, tol)
                    .map(|v| -v)
            }
        }
        ScalarKind::NonNegative => {
            if d0 >= F::zero() {
                return Ok(F::zero());
            }
            root_on_halfline(|u| (sp.dphi)(u), |u| (sp.d2phi)(u), hint, tol)
        }
    };

    #[cfg(debug_assertions)]
    if let Ok(u) = result {
        // The move must not increase the subproblem objective relative to 0.
        let pen = |v: F| match sp.kind {
            ScalarKind::Penalized => sp.lambda * v.abs(),
            ScalarKind::NonNegative => F::zero(),
        };
        let f_u = (sp.phi)(u) + pen(u);
        let f_0 = (sp.phi)(F::zero()) + pen(F::zero());
        debug_assert!(
            !(f_u.is_finite() && f_0.is_finite())
                || f_u <= f_0 + F::cast(1e-9) * (F::one() + f_0.abs()),
            "scalar step increased the restricted objective"
        );
    }

    result
}

/// Root of an increasing derivative `psi` on `u >= 0`, given `psi(0) < 0`.
///
/// `psi` values that come back non-finite are treated as "past the domain
/// boundary on the growing side" (the objective blows up there, so the sign
/// counts as positive); bisection then pulls the bracket back inside.
fn root_on_halfline<F: Real>(
    psi: impl Fn(F) -> F,
    dpsi: impl Fn(F) -> F,
    hint: F,
    tol: F,
) -> Result<F, CcmError<F>> {
    let two = F::cast(2.0);

    let mut lo = F::zero();
    let mut hi;
    let first = psi(hint);
    if first.is_finite() && first.abs() <= tol {
        return Ok(hint);
    }
    if !first.is_finite() || first > F::zero() {
        hi = hint;
    } else {
        lo = hint;
        let mut cand = hint;
        let mut doublings = 0;
        loop {
            if doublings >= MAX_BRACKET_DOUBLINGS {
                return Err(CcmError::NoBracket { doublings });
            }
            cand = cand * two;
            doublings += 1;
            let p = psi(cand);
            if p.is_finite() && p.abs() <= tol {
                return Ok(cand);
            }
            if !p.is_finite() || p > F::zero() {
                hi = cand;
                break;
            }
            lo = cand;
        }
    }

    // Safeguarded Newton on [lo, hi]: psi(lo) < 0 (or lo = 0), psi(hi) > 0
    // (or hi is past a domain boundary).
    let mut x = (lo + hi) / two;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let px = psi(x);
        if px.is_finite() && px.abs() <= tol {
            return Ok(x);
        }
        if !px.is_finite() || px > F::zero() {
            hi = x;
        } else {
            lo = x;
        }
        let width = hi - lo;
        if width <= F::epsilon() * (lo.abs() + hi.abs() + F::one()) {
            return Ok((lo + hi) / two);
        }
        let mut next = if px.is_finite() {
            let d = dpsi(x);
            if !(d > F::zero()) {
                return Err(CcmError::NonpositiveCurvature);
            }
            x - px / d
        } else {
            F::nan() // force the bisection fallback below
        };
        if !(next > lo && next < hi) {
            next = (lo + hi) / two;
        }
        x = next;
    }
    Err(CcmError::MaxIterations { max_iterations: MAX_NEWTON_ITERATIONS })
}
