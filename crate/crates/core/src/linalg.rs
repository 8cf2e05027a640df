//! Small dense symmetric-matrix helpers: Jacobi eigendecomposition, PSD
//! square roots, and a Cholesky-based positive-definiteness probe.
//!
//! Kept crate-private: these back the covariance vectorization and the
//! positive-definiteness check, at sizes (p in the tens) where a cyclic
//! Jacobi solver is simple, portable, and plenty fast.

use ndarray::{Array1, Array2};

use crate::error::CcmError;
use crate::Real;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors in columns, so
/// `a = V diag(w) V^T` up to rounding. The caller guarantees symmetry.
pub(crate) fn symmetric_eigen<F: Real>(a: &Array2<F>) -> (Array1<F>, Array2<F>) {
    let p = a.nrows();
    debug_assert_eq!(p, a.ncols());
    let mut m = a.clone();
    let mut v = Array2::eye(p);
    if p < 2 {
        return (m.diag().to_owned(), v);
    }

    // Frobenius scale for the off-diagonal convergence test.
    let scale: F = a.iter().map(|&x| x * x).sum::<F>().sqrt();
    let tol = F::epsilon() * (scale + F::one());

    for _ in 0..100 {
        let mut off = F::zero();
        for r in 0..p {
            for c in (r + 1)..p {
                off = off + m[(r, c)] * m[(r, c)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for r in 0..p - 1 {
            for c in (r + 1)..p {
                let apq = m[(r, c)];
                if apq.abs() <= tol * F::cast(1e-3) {
                    continue;
                }
                let app = m[(r, r)];
                let aqq = m[(c, c)];
                let theta = (aqq - app) / (F::cast(2.0) * apq);
                // tan of the rotation angle, smaller root for stability
                let t = {
                    let denom = theta.abs() + (theta * theta + F::one()).sqrt();
                    let t = F::one() / denom;
                    if theta < F::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let cos = F::one() / (t * t + F::one()).sqrt();
                let sin = t * cos;

                for k in 0..p {
                    let mkr = m[(k, r)];
                    let mkc = m[(k, c)];
                    m[(k, r)] = cos * mkr - sin * mkc;
                    m[(k, c)] = sin * mkr + cos * mkc;
                }
                for k in 0..p {
                    let mrk = m[(r, k)];
                    let mck = m[(c, k)];
                    m[(r, k)] = cos * mrk - sin * mck;
                    m[(c, k)] = sin * mrk + cos * mck;
                }
                for k in 0..p {
                    let vkr = v[(k, r)];
                    let vkc = v[(k, c)];
                    v[(k, r)] = cos * vkr - sin * vkc;
                    v[(k, c)] = sin * vkr + cos * vkc;
                }
            }
        }
    }
    (m.diag().to_owned(), v)
}

/// Symmetric PSD square root with round-off tolerance.
///
/// Eigenvalues in `[-1e-8 * trace, 1e-14 * trace)` are treated as zero
/// (sample covariances are PSD only up to floating-point noise); anything
/// more negative is a genuine indefiniteness and errors out.
pub(crate) fn psd_sqrt<F: Real>(a: &Array2<F>) -> Result<Array2<F>, CcmError<F>> {
    let trace: F = a.diag().sum();
    let zero_floor = F::cast(1e-14) * trace;
    let neg_floor = -F::cast(1e-8) * trace;
    let (w, v) = symmetric_eigen(a);
    let mut roots = Array1::zeros(w.len());
    for (r, &lambda) in roots.iter_mut().zip(w.iter()) {
        if lambda < neg_floor {
            return Err(CcmError::NotPsd { eigenvalue: lambda });
        }
        *r = if lambda < zero_floor { F::zero() } else { lambda.sqrt() };
    }
    // v * diag(roots) * v^T
    let p = a.nrows();
    let mut scaled = v.clone();
    for (mut col, &r) in scaled.columns_mut().into_iter().zip(roots.iter()) {
        col.mapv_inplace(|x| x * r);
    }
    let mut out = Array2::zeros((p, p));
    for r in 0..p {
        for c in 0..p {
            out[(r, c)] = scaled.row(r).dot(&v.row(c));
        }
    }
    Ok(out)
}

/// Whether the symmetric matrix has a (strictly positive pivot) Cholesky
/// factorization.
pub(crate) fn cholesky_is_pd<F: Real>(a: &Array2<F>) -> bool {
    let p = a.nrows();
    let mut l = Array2::<F>::zeros((p, p));
    for j in 0..p {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > F::zero()) {
            return false;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..p {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    true
}
