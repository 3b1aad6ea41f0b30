//! Mean-variance parameterisation of the Gamma distribution.
//!
//! The observation model works in terms of a mean μ and variance σ² rather
//! than the usual shape/rate pair. The conversion is
//!
//! ```text
//! shape α = μ² / σ²,    rate ν = α / μ = μ / σ²,
//! ```
//!
//! which round-trips exactly: mean = α/ν = μ and variance = α/ν² = σ².
//! All densities are computed through the log-Gamma function (never the Gamma
//! function followed by a log) so large shapes cannot overflow, and sampling
//! for shapes below one goes through a log-space boost so tiny shapes cannot
//! degenerate to zero draws.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

/// Errors arising from invalid Gamma mean-variance inputs.
#[derive(Debug, Error, PartialEq)]
pub enum LikelihoodError {
    /// A distribution parameter was zero, negative, or non-finite.
    #[error("parameter `{name}` must be positive and finite, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    /// An observation outside the positive support was supplied.
    #[error("observation must be strictly positive, got {value}")]
    NonPositiveObservation { value: f64 },
}

/// A Gamma distribution described by its mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMV {
    /// Mean μ > 0.
    pub mu: f64,
    /// Variance σ² > 0.
    pub sigma2: f64,
}

impl GammaMV {
    /// Builds the distribution, validating positivity of both moments.
    pub fn new(mu: f64, sigma2: f64) -> Result<Self, LikelihoodError> {
        check_positive("mu", mu)?;
        check_positive("sigma2", sigma2)?;
        Ok(Self { mu, sigma2 })
    }

    /// Shape α = μ²/σ².
    pub fn shape(&self) -> f64 {
        self.mu * self.mu / self.sigma2
    }

    /// Rate ν = μ/σ².
    pub fn rate(&self) -> f64 {
        self.mu / self.sigma2
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), LikelihoodError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(LikelihoodError::NonPositiveParameter { name, value });
    }
    Ok(())
}

/// Converts a (mean, variance) pair to the (shape, rate) pair of the same
/// Gamma distribution.
pub fn gamma_params_from_mv(mu: f64, sigma2: f64) -> Result<(f64, f64), LikelihoodError> {
    let g = GammaMV::new(mu, sigma2)?;
    Ok((g.shape(), g.rate()))
}

/// Log-density of the Gamma distribution with mean `mu` and variance `sigma2`
/// at `y`, fully normalised.
///
/// `y` must be strictly positive: at zero the density is unbounded for shapes
/// below one and the log is undefined.
pub fn gamma_mv_logpdf(y: f64, mu: f64, sigma2: f64) -> Result<f64, LikelihoodError> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(LikelihoodError::NonPositiveObservation { value: y });
    }
    let (shape, rate) = gamma_params_from_mv(mu, sigma2)?;
    Ok(shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * y.ln() - rate * y)
}

/// Partial derivatives of [`gamma_mv_logpdf`] with respect to `mu` and
/// `sigma2`, in that order.
pub fn gamma_mv_grad(y: f64, mu: f64, sigma2: f64) -> Result<(f64, f64), LikelihoodError> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(LikelihoodError::NonPositiveObservation { value: y });
    }
    let (shape, rate) = gamma_params_from_mv(mu, sigma2)?;
    // ℓ = α ln ν − ln Γ(α) + (α−1) ln y − ν y with α(μ,σ²), ν(μ,σ²).
    let dl_dshape = rate.ln() - digamma(shape) + y.ln();
    let dl_drate = shape / rate - y;
    let dshape_dmu = 2.0 * mu / sigma2;
    let drate_dmu = 1.0 / sigma2;
    let dshape_dsigma2 = -mu * mu / (sigma2 * sigma2);
    let drate_dsigma2 = -mu / (sigma2 * sigma2);
    Ok((
        dl_dshape * dshape_dmu + dl_drate * drate_dmu,
        dl_dshape * dshape_dsigma2 + dl_drate * drate_dsigma2,
    ))
}

/// Draws the natural logarithm of a Gamma(mean `mu`, variance `sigma2`)
/// variate.
///
/// For shapes α ≥ 1 this is the log of a rejection-sampled draw. For α < 1 it
/// uses the boost identity G(α) = G(α+1) · U^{1/α} in log space,
/// ln G(α) = ln G(α+1) + ln(U)/α, which stays finite even when the draw
/// itself would underflow to zero.
pub fn gamma_mv_sample_ln<R: Rng + ?Sized>(
    rng: &mut R,
    mu: f64,
    sigma2: f64,
) -> Result<f64, LikelihoodError> {
    let (shape, rate) = gamma_params_from_mv(mu, sigma2)?;
    let scale = 1.0 / rate;
    let ln_y = if shape >= 1.0 {
        let gamma = Gamma::new(shape, scale).expect("validated parameters");
        gamma.sample(rng).ln()
    } else {
        let boosted = Gamma::new(shape + 1.0, scale).expect("validated parameters");
        let g = boosted.sample(rng);
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        g.ln() + u.ln() / shape
    };
    Ok(ln_y)
}

/// Draws one variate from the Gamma distribution with mean `mu` and variance
/// `sigma2`.
///
/// The draw is always strictly positive; for pathologically small shapes the
/// underlying log-space draw may be so negative that exponentiation
/// underflows, in which case the smallest positive double is returned.
pub fn gamma_mv_sample<R: Rng + ?Sized>(
    rng: &mut R,
    mu: f64,
    sigma2: f64,
) -> Result<f64, LikelihoodError> {
    let ln_y = gamma_mv_sample_ln(rng, mu, sigma2)?;
    Ok(ln_y.exp().max(f64::MIN_POSITIVE))
}
