//! Equidistant Gaussian basis functions and evaluation of smooth functions as
//! linear combinations f(x) = Σ_p θ_p B_p(x).
//!
//! Each basis function is an unnormalised Gaussian bump
//! B_p(x) = exp(−(x − c_p)² / (2 w²)) with the m centers c_p equally spaced over
//! the domain and a common bandwidth w = width_factor × knot spacing.

use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error("basis needs at least 2 dimensions, got {0}")]
    TooFewDimensions(usize),
    #[error("degenerate domain: lo = {lo}, hi = {hi}")]
    DegenerateDomain { lo: f64, hi: f64 },
    #[error("width factor must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("no evaluation points supplied")]
    EmptyEvaluationPoints,
    #[error("coefficient length {theta} does not match basis dimension {m}")]
    LengthMismatch { theta: usize, m: usize },
}

/// A fixed system of m equidistant Gaussian basis functions over a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSystem {
    centers: Vec<f64>,
    width: f64,
    domain_lo: f64,
    domain_hi: f64,
}

impl BasisSystem {
    pub fn m(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.domain_lo, self.domain_hi)
    }

    pub fn spacing(&self) -> f64 {
        self.centers[1] - self.centers[0]
    }
}

/// Builds m equally spaced Gaussian bumps over [domain_lo, domain_hi] with
/// bandwidth `width_factor` × knot spacing.
pub fn make_basis(
    m: usize,
    domain_lo: f64,
    domain_hi: f64,
    width_factor: f64,
) -> Result<BasisSystem, BasisError> {
    if m < 2 {
        return Err(BasisError::TooFewDimensions(m));
    }
    if !(domain_hi > domain_lo) || !domain_lo.is_finite() || !domain_hi.is_finite() {
        return Err(BasisError::DegenerateDomain {
            lo: domain_lo,
            hi: domain_hi,
        });
    }
    if !(width_factor > 0.0) {
        return Err(BasisError::NonPositiveWidth(width_factor));
    }
    let spacing = (domain_hi - domain_lo) / (m - 1) as f64;
    // First and last centers sit exactly on the domain endpoints.
    let centers: Vec<f64> = (0..m)
        .map(|p| {
            if p == m - 1 {
                domain_hi
            } else {
                domain_lo + p as f64 * spacing
            }
        })
        .collect();
    Ok(BasisSystem {
        centers,
        width: width_factor * spacing,
        domain_lo,
        domain_hi,
    })
}

/// Evaluates all m basis functions at x. Extrapolation beyond the domain is
/// permitted; values decay toward 0.
pub fn eval_basis(sys: &BasisSystem, x: f64) -> Array1<f64> {
    let two_w2 = 2.0 * sys.width * sys.width;
    Array1::from_iter(sys.centers.iter().map(|&c| {
        let d = x - c;
        (-(d * d) / two_w2).exp()
    }))
}

/// Stacks eval_basis rows for a set of evaluation points.
pub fn design_matrix(sys: &BasisSystem, xs: &[f64]) -> Result<Array2<f64>, BasisError> {
    if xs.is_empty() {
        return Err(BasisError::EmptyEvaluationPoints);
    }
    let m = sys.m();
    let mut out = Array2::zeros((xs.len(), m));
    for (i, &x) in xs.iter().enumerate() {
        out.row_mut(i).assign(&eval_basis(sys, x));
    }
    Ok(out)
}

/// Dot product of a coefficient vector with one design-matrix row:
/// f(x) = Σ_p θ_p B_p(x).
pub fn smooth_eval(theta: &[f64], row: &[f64]) -> Result<f64, BasisError> {
    if theta.len() != row.len() {
        return Err(BasisError::LengthMismatch {
            theta: theta.len(),
            m: row.len(),
        });
    }
    Ok(theta.iter().zip(row).map(|(t, b)| t * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn centers_equidistant_and_on_endpoints() {
        let sys = make_basis(3, 0.0, 2.0, 1.0).unwrap();
        assert_eq!(sys.centers(), &[0.0, 1.0, 2.0]);
        assert_eq!(sys.width(), 1.0);

        let sys = make_basis(15, 1.0, 1000.0, 1.0).unwrap();
        assert_relative_eq!(sys.spacing(), 999.0 / 14.0, max_relative = 1e-15);
        assert_eq!(sys.centers()[0], 1.0);
        assert_eq!(sys.centers()[14], 1000.0);
        // adjacent spacing constant to 1e-12 relative
        let s0 = sys.spacing();
        for w in sys.centers().windows(2) {
            assert_relative_eq!(w[1] - w[0], s0, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_arguments() {
        assert_eq!(
            make_basis(1, 0.0, 1.0, 1.0).unwrap_err(),
            BasisError::TooFewDimensions(1)
        );
        assert!(matches!(
            make_basis(5, 2.0, 2.0, 1.0).unwrap_err(),
            BasisError::DegenerateDomain { .. }
        ));
        assert!(matches!(
            make_basis(5, 0.0, 1.0, 0.0).unwrap_err(),
            BasisError::NonPositiveWidth(_)
        ));
    }

    #[test]
    fn gaussian_values_at_reference_offsets() {
        let sys = make_basis(5, 0.0, 4.0, 1.0).unwrap();
        let at_center = eval_basis(&sys, 2.0);
        assert_eq!(at_center[2], 1.0);
        // one bandwidth away
        let off = eval_basis(&sys, 2.0 + sys.width());
        assert_relative_eq!(off[2], (-0.5f64).exp(), max_relative = 1e-15);
        // midway between adjacent centers the two neighbours agree
        let mid = eval_basis(&sys, 1.5);
        assert_relative_eq!(mid[1], mid[2], max_relative = 1e-15);
        assert_relative_eq!(mid[1], (-0.125f64).exp(), max_relative = 1e-15);
        for v in at_center.iter().chain(off.iter()) {
            assert!(*v > 0.0 && *v <= 1.0);
        }
    }

    #[test]
    fn design_matrix_matches_eval_rows() {
        let sys = make_basis(15, 1.0, 1000.0, 1.0).unwrap();
        let xs: Vec<f64> = (1..=1000).map(|t| t as f64).collect();
        let dm = design_matrix(&sys, &xs).unwrap();
        assert_eq!(dm.dim(), (1000, 15));
        assert!(dm.iter().all(|&v| v > 0.0 && v <= 1.0));
        for (i, &x) in xs.iter().enumerate().step_by(97) {
            let row = eval_basis(&sys, x);
            for p in 0..15 {
                assert_eq!(dm[[i, p]], row[p]);
            }
        }
        // xs = centers puts exact ones on the diagonal
        let dm = design_matrix(&sys, sys.centers()).unwrap();
        for p in 0..15 {
            assert_eq!(dm[[p, p]], 1.0);
        }
        assert!(design_matrix(&sys, &[]).is_err());
    }

    #[test]
    fn smooth_eval_is_a_dot_product() {
        let row = [0.5, 1.0, 0.25];
        assert_eq!(smooth_eval(&[0.0, 0.0, 0.0], &row).unwrap(), 0.0);
        assert_eq!(smooth_eval(&[0.0, 1.0, 0.0], &row).unwrap(), 1.0);
        assert_eq!(smooth_eval(&[1.0, 1.0, 1.0], &row).unwrap(), 1.75);
        assert!(smooth_eval(&[1.0], &row).is_err());
    }

    #[test]
    fn translation_equivariance() {
        let sys = make_basis(7, 0.0, 10.0, 1.3).unwrap();
        let shifted = make_basis(7, 5.0, 15.0, 1.3).unwrap();
        for i in 0..40 {
            let x = -2.0 + 0.35 * i as f64;
            let a = eval_basis(&sys, x);
            let b = eval_basis(&shifted, x + 5.0);
            for p in 0..7 {
                assert_abs_diff_eq!(a[p], b[p], epsilon = 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn smooth_eval_linear_in_theta(
            theta1 in proptest::collection::vec(-10.0..10.0f64, 6),
            theta2 in proptest::collection::vec(-10.0..10.0f64, 6),
            a in -5.0..5.0f64,
            b in -5.0..5.0f64,
            x in -5.0..15.0f64,
        ) {
            let sys = make_basis(6, 0.0, 10.0, 1.0).unwrap();
            let row = eval_basis(&sys, x);
            let row = row.as_slice().unwrap();
            let combo: Vec<f64> = theta1.iter().zip(&theta2).map(|(t1, t2)| a * t1 + b * t2).collect();
            let lhs = smooth_eval(&combo, row).unwrap();
            let rhs = a * smooth_eval(&theta1, row).unwrap() + b * smooth_eval(&theta2, row).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
        }
    }
}
