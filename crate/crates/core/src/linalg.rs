//! Small dense linear-algebra helpers for the m×m blocks used by the priors
//! (m ≈ 15). Hand-rolled to avoid a LAPACK dependency at these sizes.

use ndarray::Array2;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Returns None if a pivot is not strictly positive.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves L x = b for lower-triangular L in place.
pub fn solve_lower(l: &Array2<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * b[k];
        }
        b[i] = s / l[[i, i]];
    }
}

/// Solves Lᵀ x = b for lower-triangular L in place.
#[cfg_attr(not(test), allow(dead_code))] // exercised by full-Hessian test oracles
pub fn solve_lower_transpose(l: &Array2<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[[k, i]] * b[k];
        }
        b[i] = s / l[[i, i]];
    }
}

/// Inverse of a lower-triangular matrix (forward substitution per column).
pub fn invert_lower(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        solve_lower(l, &mut e);
        for row in 0..n {
            inv[[row, col]] = e[row];
        }
    }
    inv
}
