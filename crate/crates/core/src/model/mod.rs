//! Model assembly: time-series containers, the time-varying AR(1) mean, the
//! time-varying GARCH(1,1) variance recursion, standardised residuals,
//! missing-data imputation, and the step-1/step-2 log posteriors over
//! unconstrained parameter vectors.

mod blocks;
mod step1;
mod step2;

pub use blocks::{block_dim, BlockSpec};
pub use step1::{log_posterior_step1, Step1Derived, Step1Model};
pub use step2::{
    log_posterior_step2, tvgarch_variance, ArchFeed, FrozenStep1, Step2Derived, Step2Model,
    TauMode,
};

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::basis::{design_matrix, BasisError, BasisSystem};
use crate::priors::{CoefficientBlock, PriorError};

/// Linear predictors with |η| or |ln σ²| above this are rejected (−∞ log
/// posterior) rather than allowed to overflow.
pub const EXPONENT_CAP: f64 = 50.0;
/// The AR lag feeds the clamped log response ln y ∈ [−15, 20].
pub const LOG_LAG_MIN: f64 = -15.0;
pub const LOG_LAG_MAX: f64 = 20.0;
/// Squared standardised residuals feeding the ARCH term are capped here.
pub const ARCH_FEED_CAP: f64 = 10.0;

/// Errors from model assembly and evaluation.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("length mismatch: {context} ({left} vs {right})")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    #[error("non-positive variance at index {index}: {value}")]
    NonPositiveVariance { index: usize, value: f64 },
    #[error("exponent cap exceeded at t index {index}: {value}")]
    ExponentOverflow { index: usize, value: f64 },
    #[error("series `{series_id}` starts with a missing value; no lag available")]
    MissingStart { series_id: String },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Prior(#[from] PriorError),
}

/// One observed series: response, time index, covariates, and missingness.
#[derive(Debug, Clone)]
pub struct TimeSeriesData {
    /// Identifier used for multi-series data.
    pub series_id: String,
    /// Strictly increasing time index.
    pub t: Vec<f64>,
    /// Response; entries under the mask are ignored until imputed.
    pub y: Array1<f64>,
    /// n × j covariate matrix.
    pub x: Array2<f64>,
    /// True where the response is missing.
    pub missing_mask: Vec<bool>,
}

impl TimeSeriesData {
    /// Builds and validates a series.
    pub fn new(
        series_id: String,
        t: Vec<f64>,
        y: Array1<f64>,
        x: Array2<f64>,
        missing_mask: Vec<bool>,
    ) -> Result<Self, ModelError> {
        let n = y.len();
        if t.len() != n {
            return Err(ModelError::LengthMismatch {
                context: "t vs y",
                left: t.len(),
                right: n,
            });
        }
        if x.nrows() != n {
            return Err(ModelError::LengthMismatch {
                context: "X rows vs y",
                left: x.nrows(),
                right: n,
            });
        }
        if missing_mask.len() != n {
            return Err(ModelError::LengthMismatch {
                context: "mask vs y",
                left: missing_mask.len(),
                right: n,
            });
        }
        if n == 0 {
            return Err(ModelError::InvalidData("empty series".into()));
        }
        for w in t.windows(2) {
            if !(w[1] > w[0]) {
                return Err(ModelError::InvalidData(format!(
                    "time index not strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for (i, (&yi, &miss)) in y.iter().zip(&missing_mask).enumerate() {
            if !miss && !(yi > 0.0 && yi.is_finite()) {
                return Err(ModelError::InvalidData(format!(
                    "y[{i}] = {yi} must be positive and finite"
                )));
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidData("non-finite covariate".into()));
        }
        Ok(Self {
            series_id,
            t,
            y,
            x,
            missing_mask,
        })
    }

    /// Convenience constructor for a complete series on t = 1..n with
    /// optional covariates.
    pub fn new_complete(
        series_id: String,
        y: Array1<f64>,
        x: Option<Array2<f64>>,
    ) -> Result<Self, ModelError> {
        let n = y.len();
        let t: Vec<f64> = (1..=n).map(|v| v as f64).collect();
        let x = x.unwrap_or_else(|| Array2::zeros((n, 0)));
        Self::new(series_id, t, y, x, vec![false; n])
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn has_missing(&self) -> bool {
        self.missing_mask.iter().any(|&m| m)
    }
}

/// Step-1 parameters: regression coefficients, intercept, and the TV-AR
/// coefficient block.
#[derive(Debug, Clone)]
pub struct Step1State {
    pub beta: Array1<f64>,
    pub mu0: f64,
    pub a_block: CoefficientBlock,
}

/// Step-2 parameters: mean-variance smooth (or scalar intercept), TV-ARCH
/// and TV-GARCH coefficient blocks.
#[derive(Debug, Clone)]
pub struct Step2State {
    pub tau_block: CoefficientBlock,
    pub b_block: CoefficientBlock,
    pub c_block: CoefficientBlock,
}

/// Clamped log response feeding the AR term.
pub(crate) fn log_lag(y: f64) -> f64 {
    y.ln().clamp(LOG_LAG_MIN, LOG_LAG_MAX)
}

/// Time-varying AR(1) mean trajectory:
/// μ_t = exp(μ₀ + x_tᵀβ + a(t)·ln y_{t−1}) for t ≥ 2, and the regression-only
/// μ_1 = exp(μ₀ + x_1ᵀβ). The lag enters through the clamped log response.
pub fn tvar_mean(
    state: &Step1State,
    data: &TimeSeriesData,
    basis: &BasisSystem,
) -> Result<Array1<f64>, ModelError> {
    if data.has_missing() {
        return Err(ModelError::InvalidData(
            "tvar_mean requires imputed (complete) data".into(),
        ));
    }
    if state.beta.len() != data.n_covariates() {
        return Err(ModelError::LengthMismatch {
            context: "beta vs covariates",
            left: state.beta.len(),
            right: data.n_covariates(),
        });
    }
    let b = design_matrix(basis, &data.t)?;
    let n = data.n();
    let mut mu = Array1::zeros(n);
    for t in 0..n {
        let mut eta = state.mu0 + state.beta.dot(&data.x.row(t));
        if t > 0 {
            let a_t = b.row(t).dot(&state.a_block.theta);
            eta += a_t * log_lag(data.y[t - 1]);
        }
        if eta.abs() > EXPONENT_CAP {
            return Err(ModelError::ExponentOverflow {
                index: t,
                value: eta,
            });
        }
        mu[t] = eta.exp();
    }
    Ok(mu)
}

/// Response-scale residuals ε_t = y_t − μ_t.
pub fn residuals(mu: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>, ModelError> {
    if mu.len() != y.len() {
        return Err(ModelError::LengthMismatch {
            context: "mu vs y",
            left: mu.len(),
            right: y.len(),
        });
    }
    Ok(y - mu)
}

/// Standardised residuals ε_t / √σ²_t.
pub fn standardised_residuals(
    eps: &Array1<f64>,
    sigma2: &Array1<f64>,
) -> Result<Array1<f64>, ModelError> {
    if eps.len() != sigma2.len() {
        return Err(ModelError::LengthMismatch {
            context: "eps vs sigma2",
            left: eps.len(),
            right: sigma2.len(),
        });
    }
    for (i, &v) in sigma2.iter().enumerate() {
        if !(v > 0.0) {
            return Err(ModelError::NonPositiveVariance { index: i, value: v });
        }
    }
    Ok(eps / &sigma2.mapv(f64::sqrt))
}

/// Fills missing responses with the model mean, walking forward so each
/// imputed value can serve as the lag for the next. Deterministic given the
/// step-1 state. Errors if a series starts with a missing value.
pub fn impute_missing(
    data: &TimeSeriesData,
    state: &Step1State,
    basis: &BasisSystem,
) -> Result<TimeSeriesData, ModelError> {
    if !data.has_missing() {
        return Ok(data.clone());
    }
    if data.missing_mask[0] {
        return Err(ModelError::MissingStart {
            series_id: data.series_id.clone(),
        });
    }
    if state.beta.len() != data.n_covariates() {
        return Err(ModelError::LengthMismatch {
            context: "beta vs covariates",
            left: state.beta.len(),
            right: data.n_covariates(),
        });
    }
    let b = design_matrix(basis, &data.t)?;
    let mut y = data.y.clone();
    for t in 1..data.n() {
        if data.missing_mask[t] {
            let a_t = b.row(t).dot(&state.a_block.theta);
            let eta = state.mu0 + state.beta.dot(&data.x.row(t)) + a_t * log_lag(y[t - 1]);
            if eta.abs() > EXPONENT_CAP {
                return Err(ModelError::ExponentOverflow {
                    index: t,
                    value: eta,
                });
            }
            y[t] = eta.exp();
        }
    }
    let mut out = data.clone();
    out.y = y;
    out.missing_mask = vec![false; data.n()];
    Ok(out)
}
