//! Small dense-matrix checks shared by the covariance and optimizer paths.

use ndarray::Array2;

/// Largest absolute difference between a matrix and its transpose.
pub(crate) fn max_asymmetry(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

/// Checks that a symmetric matrix has no eigenvalue below `-tol`.
///
/// Works by attempting a Cholesky factorization of `m + tol*I`. Pivots are
/// allowed to touch zero (within a rounding guard scaled to the diagonal)
/// so exactly singular but semidefinite inputs pass.
pub(crate) fn is_psd_within(m: &Array2<f64>, tol: f64) -> bool {
    let n = m.nrows();
    if n != m.ncols() {
        return false;
    }
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let mut a = m.clone();
    for i in 0..n {
        a[[i, i]] += tol;
    }
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(1.0f64, f64::max);
    let guard = scale * (n as f64) * 1e-14;

    // In-place lower Cholesky with a zero-pivot allowance.
    let mut l = vec![0.0f64; n * n];
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -guard {
            return false;
        }
        let piv = d.max(0.0).sqrt();
        l[j * n + j] = piv;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if piv > 0.0 {
                l[i * n + j] = s / piv;
            } else if s.abs() > guard {
                return false;
            }
        }
    }
    true
}
