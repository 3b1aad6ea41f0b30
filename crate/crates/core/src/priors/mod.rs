//! Shrinkage priors for basis-coefficient blocks.
//!
//! Three interchangeable families are provided for the coefficients of each
//! time-varying smooth:
//!
//! * **P-spline / K-penalised** — an improper Gaussian random-walk penalty
//!   −θᵀKθ/(2λ^G²) with K built from first differences of adjacent
//!   coefficients;
//! * **Inverse-Wishart multivariate Normal** — θ ~ MVN(0, Σ) with
//!   Σ ~ Inv-Wishart(I, ψ);
//! * **Horseshoe** — independent θ_p ~ N(0, (λ_p λ^G)²) with half-Cauchy
//!   local and global scales;
//! * **Multivariate Horseshoe** — θ ~ MVN(0, S L Lᵀ S) with
//!   S = diag(λ^G λ_p) and an LKJ(φ) prior on the correlation factor L.
//!
//! Shrinkage-coefficient analytics (κ = 1/(1 + λ^G²λ²) and its covariate
//! analogue) are included for posterior reporting.

mod invwishart;
mod lkj;

pub use invwishart::{log_inverse_wishart, sample_inverse_wishart};
pub use lkj::{
    build_chol_from_cpcs, cpc_beta_shape, cpc_log_density, lkj_chol_logpdf, lkj_log_normaliser,
    sample_lkj_chol,
};

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::linalg;

/// Errors from prior evaluation or sampling.
#[derive(Debug, Error, PartialEq)]
pub enum PriorError {
    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A scale parameter was zero, negative, or non-finite.
    #[error("scale `{name}` must be positive and finite, got {value}")]
    NonPositiveScale { name: &'static str, value: f64 },
    /// A matrix that must be symmetric positive-definite failed its Cholesky.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    /// A correlation Cholesky factor has a (near-)zero diagonal entry.
    #[error("correlation factor is singular at diagonal index {index}")]
    SingularCorrelation { index: usize },
    /// Inverse-Wishart degrees of freedom too small for the dimension.
    #[error("inverse-Wishart degrees of freedom {psi} must exceed dimension − 1 = {m_minus_one}")]
    InvalidDegreesOfFreedom { psi: f64, m_minus_one: f64 },
    /// LKJ shape or dimension out of range.
    #[error("invalid LKJ parameters: m = {m}, shape = {shape}")]
    InvalidLkj { m: usize, shape: f64 },
}

/// The prior family attached to one coefficient block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorFamily {
    /// First-difference penalty −θᵀKθ/(2λ^G²).
    PSplineK,
    /// MVN(0, Σ) with Σ ~ Inv-Wishart(I, ψ).
    InverseWishart { psi: f64 },
    /// Independent horseshoe shrinkage per coefficient.
    Horseshoe,
    /// Horseshoe scales with an LKJ-distributed correlation structure.
    MultivariateHorseshoe,
}

impl PriorFamily {
    /// Default degrees of freedom for the Inverse-Wishart family.
    pub const DEFAULT_IW_PSI: f64 = 20.0;

    /// The Inverse-Wishart family at its default ψ = 20.
    pub fn inverse_wishart_default() -> Self {
        PriorFamily::InverseWishart {
            psi: Self::DEFAULT_IW_PSI,
        }
    }

    /// Validates family-specific constraints for a block of dimension `m`.
    pub fn validate(&self, m: usize) -> Result<(), PriorError> {
        if let PriorFamily::InverseWishart { psi } = self {
            if !(*psi > m as f64 - 1.0) {
                return Err(PriorError::InvalidDegreesOfFreedom {
                    psi: *psi,
                    m_minus_one: m as f64 - 1.0,
                });
            }
        }
        Ok(())
    }
}

/// A coefficient block together with whatever hyper-parameters its prior
/// family carries. Optional fields are present only for the families that
/// use them.
#[derive(Debug, Clone)]
pub struct CoefficientBlock {
    /// Basis coefficients θ.
    pub theta: Array1<f64>,
    /// Local horseshoe scales λ_p (Horseshoe families).
    pub local_scales: Option<Array1<f64>>,
    /// Global scale λ^G.
    pub global_scale: f64,
    /// Lower-triangular correlation factor L (Multivariate Horseshoe).
    pub corr_chol: Option<Array2<f64>>,
    /// LKJ shape φ (Multivariate Horseshoe).
    pub lkj_shape: Option<f64>,
    /// Covariance Σ (Inverse-Wishart family).
    pub cov: Option<Array2<f64>>,
}

impl CoefficientBlock {
    /// Checks the invariants that apply to whichever fields are present:
    /// positive scales, unit-norm correlation rows, SPD covariance.
    pub fn validate(&self) -> Result<(), PriorError> {
        check_scale("global_scale", self.global_scale)?;
        if let Some(scales) = &self.local_scales {
            if scales.len() != self.theta.len() {
                return Err(PriorError::DimensionMismatch {
                    expected: self.theta.len(),
                    got: scales.len(),
                });
            }
            for &s in scales {
                check_scale("local_scale", s)?;
            }
        }
        if let Some(phi) = self.lkj_shape {
            check_scale("lkj_shape", phi)?;
        }
        if let Some(l) = &self.corr_chol {
            for i in 0..l.nrows() {
                let norm: f64 = (0..=i).map(|k| l[[i, k]] * l[[i, k]]).sum();
                if (norm - 1.0).abs() > 1e-10 {
                    return Err(PriorError::SingularCorrelation { index: i });
                }
            }
        }
        if let Some(cov) = &self.cov {
            if linalg::cholesky(cov).is_none() {
                return Err(PriorError::NotPositiveDefinite);
            }
        }
        Ok(())
    }
}

fn check_scale(name: &'static str, value: f64) -> Result<(), PriorError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(PriorError::NonPositiveScale { name, value });
    }
    Ok(())
}

/// Log-density of the half-Cauchy(0, 1) distribution at `x` > 0:
/// ln 2 − ln π − ln(1 + x²).
pub fn half_cauchy_logpdf(x: f64) -> f64 {
    use std::f64::consts::PI;
    (2.0 / PI).ln() - x.mul_add(x, 1.0).ln()
}

/// The m×m first-difference penalty K = DᵀD, where D is the (m−1)×m
/// first-difference operator on adjacent coefficients.
pub fn difference_penalty(m: usize) -> Array2<f64> {
    let mut k = Array2::<f64>::zeros((m, m));
    for r in 0..m.saturating_sub(1) {
        // row r of D has −1 at r and +1 at r+1; accumulate DᵀD.
        k[[r, r]] += 1.0;
        k[[r + 1, r + 1]] += 1.0;
        k[[r, r + 1]] -= 1.0;
        k[[r + 1, r]] -= 1.0;
    }
    k
}

/// Unnormalised P-spline log prior −θᵀKθ/(2·global_scale²); the additive
/// constant is fixed at zero.
pub fn logprior_pspline_k(
    theta: &Array1<f64>,
    global_scale: f64,
    k: &Array2<f64>,
) -> Result<f64, PriorError> {
    check_scale("global_scale", global_scale)?;
    if k.nrows() != theta.len() || k.ncols() != theta.len() {
        return Err(PriorError::DimensionMismatch {
            expected: theta.len(),
            got: k.nrows(),
        });
    }
    let quad = theta.dot(&k.dot(theta));
    Ok(-quad / (2.0 * global_scale * global_scale))
}

/// Gradient of [`logprior_pspline_k`] with respect to θ: −Kθ/λ^G².
pub fn logprior_pspline_k_grad(
    theta: &Array1<f64>,
    global_scale: f64,
    k: &Array2<f64>,
) -> Result<Array1<f64>, PriorError> {
    check_scale("global_scale", global_scale)?;
    if k.nrows() != theta.len() || k.ncols() != theta.len() {
        return Err(PriorError::DimensionMismatch {
            expected: theta.len(),
            got: k.nrows(),
        });
    }
    Ok(k.dot(theta) * (-1.0 / (global_scale * global_scale)))
}

fn log_normal(value: f64, sd: f64) -> f64 {
    use std::f64::consts::PI;
    let z = value / sd;
    -0.5 * (2.0 * PI).ln() - sd.ln() - 0.5 * z * z
}

/// Horseshoe log prior for one block: Σ_p [ log N(θ_p; 0, (λ_p λ^G)²) +
/// log C⁺(λ_p; 0, 1) ].
///
/// The global scale's own half-Cauchy contribution is *not* included here;
/// the caller adds it exactly once per block.
pub fn logprior_horseshoe(
    theta: &Array1<f64>,
    local_scales: &Array1<f64>,
    global_scale: f64,
) -> Result<f64, PriorError> {
    check_scale("global_scale", global_scale)?;
    if local_scales.len() != theta.len() {
        return Err(PriorError::DimensionMismatch {
            expected: theta.len(),
            got: local_scales.len(),
        });
    }
    let mut total = 0.0;
    for (&t, &lam) in theta.iter().zip(local_scales) {
        check_scale("local_scale", lam)?;
        total += log_normal(t, lam * global_scale) + half_cauchy_logpdf(lam);
    }
    Ok(total)
}

/// Multivariate-horseshoe log prior for one block:
/// log MVN(θ; 0, S L Lᵀ S) with S = diag(λ^G·λ), evaluated through the
/// Cholesky factor S·L without ever forming the covariance, plus
/// log C⁺(λ_p) for each local scale, plus the Cholesky-parameterised
/// LKJ(φ) log-density of L, plus log C⁺(φ).
///
/// As with [`logprior_horseshoe`], the global scale's own half-Cauchy term is
/// left to the caller.
pub fn logprior_mv_horseshoe(
    theta: &Array1<f64>,
    local_scales: &Array1<f64>,
    global_scale: f64,
    corr_chol: &Array2<f64>,
    lkj_shape: f64,
) -> Result<f64, PriorError> {
    use std::f64::consts::PI;
    check_scale("global_scale", global_scale)?;
    check_scale("lkj_shape", lkj_shape)?;
    let m = theta.len();
    if local_scales.len() != m {
        return Err(PriorError::DimensionMismatch {
            expected: m,
            got: local_scales.len(),
        });
    }
    if corr_chol.nrows() != m || corr_chol.ncols() != m {
        return Err(PriorError::DimensionMismatch {
            expected: m,
            got: corr_chol.nrows(),
        });
    }
    for i in 0..m {
        if corr_chol[[i, i]] <= 1e-12 {
            return Err(PriorError::SingularCorrelation { index: i });
        }
    }
    // Whitened residual x solves (S L) x = θ, i.e. L x = S⁻¹ θ.
    let mut x: Vec<f64> = (0..m)
        .map(|i| {
            check_scale("local_scale", local_scales[i]).map(|_| {
                theta[i] / (global_scale * local_scales[i])
            })
        })
        .collect::<Result<_, _>>()?;
    linalg::solve_lower(corr_chol, &mut x);
    let quad: f64 = x.iter().map(|v| v * v).sum();
    let mut log_det_chol = 0.0;
    for i in 0..m {
        log_det_chol += (global_scale * local_scales[i]).ln() + corr_chol[[i, i]].ln();
    }
    let mvn = -0.5 * m as f64 * (2.0 * PI).ln() - log_det_chol - 0.5 * quad;
    let local_cauchy: f64 = local_scales.iter().map(|&l| half_cauchy_logpdf(l)).sum();
    let lkj = lkj_chol_logpdf(corr_chol, lkj_shape)?;
    Ok(mvn + local_cauchy + lkj + half_cauchy_logpdf(lkj_shape))
}

/// Inverse-Wishart block log prior: log MVN(θ; 0, Σ) + log IW(Σ; I, ψ),
/// both fully normalised.
pub fn logprior_inverse_wishart_block(
    theta: &Array1<f64>,
    cov: &Array2<f64>,
    psi: f64,
) -> Result<f64, PriorError> {
    use std::f64::consts::PI;
    let m = theta.len();
    if cov.nrows() != m || cov.ncols() != m {
        return Err(PriorError::DimensionMismatch {
            expected: m,
            got: cov.nrows(),
        });
    }
    let chol = linalg::cholesky(cov).ok_or(PriorError::NotPositiveDefinite)?;
    let mut x: Vec<f64> = theta.to_vec();
    linalg::solve_lower(&chol, &mut x);
    let quad: f64 = x.iter().map(|v| v * v).sum();
    let log_det_chol: f64 = (0..m).map(|i| chol[[i, i]].ln()).sum();
    let mvn = -0.5 * m as f64 * (2.0 * PI).ln() - log_det_chol - 0.5 * quad;
    let iw = log_inverse_wishart(&chol, psi)?;
    Ok(mvn + iw)
}

/// Scalar shrinkage coefficient κ = 1/(1 + λ^G²·λ²) ∈ (0, 1].
pub fn shrinkage_kappa(global_scale: f64, local_scale: f64) -> f64 {
    let s = global_scale * local_scale;
    1.0 / s.mul_add(s, 1.0)
}

/// Covariate shrinkage matrix: entrywise κ_pq = 1/(1 + |Σ_pq|).
pub fn covariate_shrinkage_kappa(cov: &Array2<f64>) -> Array2<f64> {
    cov.mapv(|v| 1.0 / (1.0 + v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Distribution;

    #[test]
    fn difference_penalty_annihilates_constants() {
        let k = difference_penalty(6);
        let theta = Array1::from_elem(6, 3.7);
        let lp = logprior_pspline_k(&theta, 1.0, &k).unwrap();
        assert_abs_diff_eq!(lp, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pspline_pinned_value_and_limit() {
        let k = difference_penalty(3);
        let theta = array![0.0, 1.0, 0.0];
        // Dθ = (1, −1), θᵀKθ = 2, log prior = −1.
        let lp = logprior_pspline_k(&theta, 1.0, &k).unwrap();
        assert_abs_diff_eq!(lp, -1.0, epsilon = 1e-12);
        // λ^G → ∞ removes the penalty.
        let lp_loose = logprior_pspline_k(&theta, 1e9, &k).unwrap();
        assert_abs_diff_eq!(lp_loose, 0.0, epsilon = 1e-12);
        // dimension mismatch
        assert!(logprior_pspline_k(&array![0.0, 1.0], 1.0, &k).is_err());
    }

    #[test]
    fn pspline_grad_matches_finite_differences() {
        let k = difference_penalty(5);
        let theta = array![0.3, -1.2, 0.8, 2.0, -0.4];
        let g = 0.7;
        let grad = logprior_pspline_k_grad(&theta, g, &k).unwrap();
        let h = 1e-6;
        for p in 0..5 {
            let mut up = theta.clone();
            up[p] += h;
            let mut dn = theta.clone();
            dn[p] -= h;
            let fd = (logprior_pspline_k(&up, g, &k).unwrap()
                - logprior_pspline_k(&dn, g, &k).unwrap())
                / (2.0 * h);
            assert_relative_eq!(grad[p], fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn half_cauchy_reference_point() {
        // density at 1 is 2/(π·2) = 1/π.
        assert_relative_eq!(
            half_cauchy_logpdf(1.0).exp(),
            1.0 / std::f64::consts::PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn horseshoe_zero_coefficients() {
        let theta = Array1::zeros(4);
        let lam = Array1::from_elem(4, 1.0);
        let lp = logprior_horseshoe(&theta, &lam, 1.0).unwrap();
        let expected = 4.0 * (-0.5 * (2.0 * std::f64::consts::PI).ln() + half_cauchy_logpdf(1.0));
        assert_abs_diff_eq!(lp, expected, epsilon = 1e-12);
    }

    #[test]
    fn horseshoe_scale_product_invariance() {
        // Doubling λ^G while halving every λ_p leaves the normal terms
        // untouched, so the difference is exactly the half-Cauchy change.
        let theta = array![0.5, -1.0, 2.0];
        let lam = array![0.4, 1.3, 0.9];
        let lam_half = lam.mapv(|l| l / 2.0);
        let a = logprior_horseshoe(&theta, &lam, 1.0).unwrap();
        let b = logprior_horseshoe(&theta, &lam_half, 2.0).unwrap();
        let cauchy_shift: f64 = lam
            .iter()
            .zip(&lam_half)
            .map(|(&l, &lh)| half_cauchy_logpdf(lh) - half_cauchy_logpdf(l))
            .sum();
        assert_abs_diff_eq!(b - a, cauchy_shift, epsilon = 1e-12);
    }

    #[test]
    fn horseshoe_rejects_bad_scales() {
        let theta = array![0.0, 0.0];
        assert!(logprior_horseshoe(&theta, &array![1.0, 0.0], 1.0).is_err());
        assert!(logprior_horseshoe(&theta, &array![1.0, 1.0], -1.0).is_err());
        assert!(logprior_horseshoe(&theta, &array![1.0], 1.0).is_err());
    }

    #[test]
    fn mv_horseshoe_identity_reduces_to_horseshoe() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = rand_distr::Normal::<f64>::new(0.0, 1.0).unwrap();
        for _ in 0..20 {
            let m = 4;
            let theta = Array1::from_iter((0..m).map(|_| normal.sample(&mut rng)));
            let lam = Array1::from_iter((0..m).map(|_| normal.sample(&mut rng).abs() + 0.1));
            let g = normal.sample(&mut rng).abs() + 0.1;
            let phi = 1.3;
            let eye = Array2::eye(m);
            let mv = logprior_mv_horseshoe(&theta, &lam, g, &eye, phi).unwrap();
            let hs = logprior_horseshoe(&theta, &lam, g).unwrap();
            // Strip the pieces the MV version adds on top of the normal+local
            // Cauchy core: the LKJ density of I and the φ half-Cauchy.
            let lkj_terms = lkj_chol_logpdf(&eye, phi).unwrap() + half_cauchy_logpdf(phi);
            assert_abs_diff_eq!(mv - lkj_terms, hs, epsilon = 1e-10);
        }
    }

    #[test]
    fn mv_horseshoe_rejects_singular_factor() {
        let theta = array![0.0, 0.0];
        let lam = array![1.0, 1.0];
        let mut l = Array2::eye(2);
        l[[1, 1]] = 0.0;
        let err = logprior_mv_horseshoe(&theta, &lam, 1.0, &l, 1.0).unwrap_err();
        assert_eq!(err, PriorError::SingularCorrelation { index: 1 });
    }

    #[test]
    fn mv_horseshoe_matches_direct_mvn() {
        // Against an explicitly formed covariance S L Lᵀ S.
        let theta = array![0.4, -0.2, 1.1];
        let lam = array![0.5, 2.0, 1.0];
        let g = 0.8;
        let phi = 2.0;
        let l = array![
            [1.0, 0.0, 0.0],
            [0.3, (1.0f64 - 0.09).sqrt(), 0.0],
            [-0.2, 0.4, (1.0f64 - 0.04 - 0.16).sqrt()]
        ];
        let mut cov = Array2::<f64>::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += l[[i, k]] * l[[j, k]];
                }
                cov[[i, j]] = s * (g * lam[i]) * (g * lam[j]);
            }
        }
        let chol = linalg::cholesky(&cov).unwrap();
        let mut x = theta.to_vec();
        linalg::solve_lower(&chol, &mut x);
        let quad: f64 = x.iter().map(|v| v * v).sum();
        let logdet: f64 = (0..3).map(|i| chol[[i, i]].ln()).sum();
        let mvn = -1.5 * (2.0 * std::f64::consts::PI).ln() - logdet - 0.5 * quad;
        let expected = mvn
            + lam.iter().map(|&v| half_cauchy_logpdf(v)).sum::<f64>()
            + lkj_chol_logpdf(&l, phi).unwrap()
            + half_cauchy_logpdf(phi);
        let got = logprior_mv_horseshoe(&theta, &lam, g, &l, phi).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-10);
    }

    #[test]
    fn inverse_wishart_block_identity_cov() {
        // cov = I: the MVN term is the standard normal log density.
        let theta = array![0.7, -0.3, 1.5];
        let eye = Array2::eye(3);
        let psi = 20.0;
        let lp = logprior_inverse_wishart_block(&theta, &eye, psi).unwrap();
        let chol = Array2::eye(3);
        let iw = log_inverse_wishart(&chol, psi).unwrap();
        let quad: f64 = theta.iter().map(|v| v * v).sum();
        let mvn = -1.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * quad;
        assert_abs_diff_eq!(lp, mvn + iw, epsilon = 1e-12);
    }

    #[test]
    fn inverse_wishart_block_zero_theta() {
        // θ = 0: the MVN term is −½ log det(2π·cov).
        let cov = array![[2.0, 0.6], [0.6, 1.5]];
        let psi = 20.0;
        let theta = Array1::zeros(2);
        let lp = logprior_inverse_wishart_block(&theta, &cov, psi).unwrap();
        let chol = linalg::cholesky(&cov).unwrap();
        let iw = log_inverse_wishart(&chol, psi).unwrap();
        let det: f64 = (0..2).map(|i| chol[[i, i]]).product::<f64>().powi(2);
        // −½ log det(2π·cov) = −(m/2) ln 2π − ½ ln det cov.
        let mvn = -(2.0 / 2.0) * (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln();
        assert_abs_diff_eq!(lp, mvn + iw, epsilon = 1e-12);
    }

    #[test]
    fn inverse_wishart_block_rejects_non_spd() {
        let theta = array![0.0, 0.0];
        let bad = array![[1.0, 2.0], [2.0, 1.0]];
        assert_eq!(
            logprior_inverse_wishart_block(&theta, &bad, 20.0).unwrap_err(),
            PriorError::NotPositiveDefinite
        );
    }

    #[test]
    fn kappa_examples() {
        assert_abs_diff_eq!(shrinkage_kappa(1.0, 1.0), 0.5, epsilon = 1e-12);
        assert!(shrinkage_kappa(1.0, 1e9) < 1e-15);
        assert_abs_diff_eq!(shrinkage_kappa(1.0, 0.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kappa_law_is_beta_half_half() {
        // λ ~ C⁺(0,1), λ^G = 1 ⇒ κ = 1/(1+λ²) ~ Beta(½, ½), whose CDF is
        // (2/π)·asin(√x).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000usize;
        let normal = rand_distr::Normal::<f64>::new(0.0, 1.0).unwrap();
        let mut kappas: Vec<f64> = (0..n)
            .map(|_| {
                // |Cauchy| as ratio of normals.
                let lam = (normal.sample(&mut rng) / normal.sample(&mut rng)).abs();
                shrinkage_kappa(1.0, lam)
            })
            .collect();
        kappas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let stat = crate::diagnostics::ks_statistic(&kappas, |x| {
            (2.0 / std::f64::consts::PI) * x.sqrt().asin()
        });
        let p = crate::diagnostics::ks_p_value(stat, n);
        assert!(p > 0.01, "KS p-value {p}");
    }

    #[test]
    fn covariate_kappa_examples() {
        let cov = array![[1.0, 0.0], [0.0, 1.0]];
        let k = covariate_shrinkage_kappa(&cov);
        assert_abs_diff_eq!(k[[0, 1]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k[[0, 0]], 0.5, epsilon = 1e-12);
        let cov = array![[1.0, -1.0], [-1.0, 1.0]];
        let k = covariate_shrinkage_kappa(&cov);
        assert_abs_diff_eq!(k[[0, 1]], 0.5, epsilon = 1e-12);
        let cov = array![[1.0, 1e12], [1e12, 1.0]];
        assert!(covariate_shrinkage_kappa(&cov)[[0, 1]] < 1e-11);
    }

    #[test]
    fn block_validation() {
        let good = CoefficientBlock {
            theta: array![0.1, 0.2],
            local_scales: Some(array![1.0, 2.0]),
            global_scale: 0.5,
            corr_chol: Some(array![[1.0, 0.0], [0.6, 0.8]]),
            lkj_shape: Some(1.0),
            cov: Some(array![[1.0, 0.2], [0.2, 1.0]]),
        };
        assert!(good.validate().is_ok());
        let mut bad_rows = good.clone();
        bad_rows.corr_chol = Some(array![[1.0, 0.0], [0.6, 0.9]]);
        assert!(bad_rows.validate().is_err());
        let mut bad_scale = good.clone();
        bad_scale.global_scale = 0.0;
        assert!(bad_scale.validate().is_err());
        let mut bad_cov = good;
        bad_cov.cov = Some(array![[1.0, 2.0], [2.0, 1.0]]);
        assert!(bad_cov.validate().is_err());
    }

    #[test]
    fn family_validation() {
        assert!(PriorFamily::inverse_wishart_default().validate(15).is_ok());
        assert!(PriorFamily::InverseWishart { psi: 10.0 }.validate(12).is_err());
        assert!(PriorFamily::Horseshoe.validate(15).is_ok());
    }
}
