//! Small dense linear algebra helpers: Cholesky factorization and symmetric
//! eigenvalues (cyclic Jacobi). Sized for the low-dimensional matrices this
//! crate needs (covariances, Gram matrices in tests, quadrature rules).

use crate::error::{Error, Result};
use crate::real::Real;
use crate::sample::Matrix;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::InvalidParam("cholesky requires a square matrix".into()));
    }
    let sym_tol = T::c(1e-9);
    for i in 0..n {
        for j in 0..i {
            if (a.get(i, j) - a.get(j, i)).abs() > sym_tol {
                return Err(Error::InvalidParam("covariance is not symmetric".into()));
            }
        }
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s = s - l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if !(s > T::zero()) {
                    return Err(Error::InvalidParam(
                        "covariance is not positive definite".into(),
                    ));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Eigenvalues of a symmetric matrix via the cyclic Jacobi method,
/// returned in ascending order.
pub fn symmetric_eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::InvalidParam("eigenvalues require a square matrix".into()));
    }
    let mut m = a.clone();
    let tol = T::c(1e-14)
        * (0..n)
            .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<T>())
            .fold(T::one(), |acc, v| if v > acc { v } else { acc });
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m.get(i, j).abs();
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= tol * T::c(1e-3) {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (T::c(2.0) * apq);
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // rotate rows/columns p and q
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| m.get(i, i)).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eig)
}
