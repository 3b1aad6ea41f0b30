//! Bayesian time-varying AR(1) / GARCH(1,1) models for positive responses under a
//! mean-variance parameterised Gamma likelihood.
//!
//! The crate is organised around a two-step fitting procedure:
//!
//! 1. `model::step1` — regression + time-varying AR(1) mean model with a per-series
//!    constant dispersion, fitted by HMC; posterior-mean fitted means and
//!    standardised residuals are frozen.
//! 2. `model::step2` — time-varying GARCH(1,1) variance model (with either a scalar
//!    variance intercept or a mean-variance smooth τ(μ)) fitted on the frozen
//!    step-1 summary.
//!
//! Smooth coefficient blocks (a_t, b_t, c_t, τ(μ)) are expansions over equidistant
//! Gaussian basis functions (`basis`) with one of three interchangeable shrinkage
//! priors (`priors`): an Inverse-Wishart multivariate Normal, the univariate
//! Horseshoe, or a multivariate Horseshoe with LKJ-distributed correlation.
//!
//! `sampler` provides the static-path HMC engine with dual-averaging step-size and
//! diagonal mass-matrix adaptation, plus split-R̂ / rank-normalised ESS and credible
//! bands. `diagnostics` provides PSIS-smoothed LOO (LOOIC ± SE, Pareto-k) and
//! posterior-predictive statistics. `simulation` generates the synthetic
//! single-process and joint experiments with known ground truth.

pub mod basis;
pub mod diagnostics;
pub mod fit;
pub mod likelihood;
pub mod model;
pub mod priors;
pub mod sampler;
pub mod simulation;

mod linalg;
