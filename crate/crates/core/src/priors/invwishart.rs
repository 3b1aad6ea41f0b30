//! Inverse-Wishart density and sampling.
//!
//! The density is evaluated with an identity scale matrix (the form used for
//! the coefficient-block prior Σ ~ Inv-Wishart(I_m, ψ)); sampling supports a
//! general SPD scale via the Bartlett decomposition.

use ndarray::Array2;
use rand::{Rng, RngExt};
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::PriorError;
use crate::linalg;

/// Multivariate log-Gamma function ln Γ_m(a).
fn ln_multigamma(m: usize, a: f64) -> f64 {
    let mut total = m as f64 * (m as f64 - 1.0) / 4.0 * std::f64::consts::PI.ln();
    for j in 1..=m {
        total += ln_gamma(a + (1.0 - j as f64) / 2.0);
    }
    total
}

/// Fully normalised log-density of Inv-Wishart(I_m, ψ) at Σ = chol·cholᵀ,
/// taking the lower-triangular Cholesky factor of Σ directly:
///
/// −(ψm/2)·ln 2 − ln Γ_m(ψ/2) − ((ψ+m+1)/2)·ln det Σ − ½·tr(Σ⁻¹).
pub fn log_inverse_wishart(chol: &Array2<f64>, psi: f64) -> Result<f64, PriorError> {
    let m = chol.nrows();
    if chol.ncols() != m {
        return Err(PriorError::DimensionMismatch {
            expected: m,
            got: chol.ncols(),
        });
    }
    if !(psi > m as f64 - 1.0) {
        return Err(PriorError::InvalidDegreesOfFreedom {
            psi,
            m_minus_one: m as f64 - 1.0,
        });
    }
    let log_det: f64 = 2.0 * (0..m).map(|i| chol[[i, i]].ln()).sum::<f64>();
    // tr(Σ⁻¹) = ‖chol⁻¹‖²_F
    let inv = linalg::invert_lower(chol);
    let trace_inv: f64 = inv.iter().map(|v| v * v).sum();
    Ok(-(psi * m as f64 / 2.0) * std::f64::consts::LN_2
        - ln_multigamma(m, psi / 2.0)
        - (psi + m as f64 + 1.0) / 2.0 * log_det
        - 0.5 * trace_inv)
}

/// Draws Σ ~ Inv-Wishart(`scale`, ψ) by the Bartlett decomposition: with
/// A the Bartlett factor of a Wishart(I, ψ) draw and L = chol(scale),
/// Σ = (L·A⁻ᵀ)(L·A⁻ᵀ)ᵀ.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    scale: &Array2<f64>,
    psi: f64,
    rng: &mut R,
) -> Result<Array2<f64>, PriorError> {
    let m = scale.nrows();
    if scale.ncols() != m {
        return Err(PriorError::DimensionMismatch {
            expected: m,
            got: scale.ncols(),
        });
    }
    if !(psi > m as f64 - 1.0) || !psi.is_finite() {
        return Err(PriorError::InvalidDegreesOfFreedom {
            psi,
            m_minus_one: m as f64 - 1.0,
        });
    }
    let l = linalg::cholesky(scale).ok_or(PriorError::NotPositiveDefinite)?;
    let mut bartlett = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        let chi2 = ChiSquared::new(psi - i as f64).expect("validated dof");
        bartlett[[i, i]] = chi2.sample(rng).sqrt();
        for j in 0..i {
            bartlett[[i, j]] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let inv_a = linalg::invert_lower(&bartlett);
    let f = l.dot(&inv_a.t());
    Ok(f.dot(&f.t()))
}
