//! Two-step fitting pipeline.
//!
//! Step 1 samples the regression + TV-AR(1) mean model and freezes the
//! posterior means of μ_t and the standardised residuals. Step 2 samples the
//! TV-GARCH(1,1) variance model conditional on those frozen summaries. Missing
//! responses are handled before step 1: a preliminary fit on the observed
//! rows yields a posterior-mean state, the gaps are imputed deterministically
//! from the model mean (walking forward so imputed values feed later lags),
//! and step 1 is refit on the completed series.
//!
//! Covariates are z-scored internally for sampling; the emitted β and μ₀
//! draws are transformed back to the raw covariate scale.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::basis::{make_basis, BasisError, BasisSystem};
use crate::model::{
    impute_missing, ArchFeed, ModelError, Step1Model, Step1State, Step2Model, TauMode,
    TimeSeriesData,
};
use crate::priors::PriorFamily;
use crate::sampler::{hmc_run, DerivedDraws, PosteriorDraws, SamplerConfig, SamplerError};

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

/// Everything a two-step run needs beyond the data.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub family: PriorFamily,
    /// Basis dimension for the time smooths a(t), b(t), c(t).
    pub m_time: usize,
    /// Basis dimension for the mean-variance smooth τ(μ) (data mode).
    pub m_mu: usize,
    /// Bandwidth multiplier on the basis knot spacing.
    pub width_factor: f64,
    /// Scalar τ₀ (simulation mode) or smooth τ(μ) (data mode).
    pub tau_mode: TauMode,
    pub arch_feed: ArchFeed,
    pub step1: SamplerConfig,
    pub step2: SamplerConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            family: PriorFamily::Horseshoe,
            m_time: 15,
            m_mu: 15,
            width_factor: 1.0,
            tau_mode: TauMode::Scalar,
            arch_feed: ArchFeed::FrozenStd,
            step1: SamplerConfig::default(),
            step2: SamplerConfig::default(),
        }
    }
}

impl FitConfig {
    /// Seeds both sampler stages from one master seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.step1.seed = seed;
        self.step2.seed = seed.wrapping_add(1);
        self
    }
}

/// Output of the full two-step run.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub step1: PosteriorDraws,
    pub step2: PosteriorDraws,
    /// Frozen step-1 posterior-mean summaries the variance model conditioned
    /// on.
    pub frozen: crate::model::FrozenStep1,
    pub basis_t: BasisSystem,
    pub basis_mu: Option<BasisSystem>,
    /// The completed (imputed) series actually fitted, on the raw covariate
    /// scale.
    pub data: Vec<TimeSeriesData>,
    /// Column span of each series inside the concatenated trajectories.
    pub spans: Vec<(String, std::ops::Range<usize>)>,
    pub imputed_any: bool,
}

fn pooled_standardiser(series: &[TimeSeriesData]) -> (Vec<f64>, Vec<f64>) {
    let j = series[0].n_covariates();
    let mut means = vec![0.0; j];
    let mut count = 0usize;
    for s in series {
        for row in s.x.rows() {
            for (k, &v) in row.iter().enumerate() {
                means[k] += v;
            }
        }
        count += s.n();
    }
    for m in means.iter_mut() {
        *m /= count as f64;
    }
    let mut sds = vec![0.0; j];
    for s in series {
        for row in s.x.rows() {
            for (k, &v) in row.iter().enumerate() {
                sds[k] += (v - means[k]) * (v - means[k]);
            }
        }
    }
    for sd in sds.iter_mut() {
        *sd = (*sd / count as f64).sqrt();
        if !(*sd > 1e-12) {
            *sd = 1.0;
        }
    }
    (means, sds)
}

fn scale_covariates(
    series: &[TimeSeriesData],
    means: &[f64],
    sds: &[f64],
) -> Vec<TimeSeriesData> {
    series
        .iter()
        .map(|s| {
            let mut out = s.clone();
            for mut row in out.x.rows_mut() {
                for (k, v) in row.iter_mut().enumerate() {
                    *v = (*v - means[k]) / sds[k];
                }
            }
            out
        })
        .collect()
}

/// Rewrites the β and μ₀ columns of sampled values from the z-scored scale
/// back to the raw covariate scale, preserving the linear predictor.
pub(crate) fn back_transform_regression(
    values: &mut Array2<f64>,
    n_cov: usize,
    means: &[f64],
    sds: &[f64],
) {
    for mut row in values.rows_mut() {
        let mut shift = 0.0;
        for j in 0..n_cov {
            let beta_scaled = row[j];
            shift += beta_scaled * means[j] / sds[j];
            row[j] = beta_scaled / sds[j];
        }
        row[n_cov] -= shift;
    }
}

/// Keeps only the observed rows of a series (for the preliminary fit).
fn observed_subset(s: &TimeSeriesData) -> Result<TimeSeriesData, ModelError> {
    let keep: Vec<usize> = (0..s.n()).filter(|&i| !s.missing_mask[i]).collect();
    if keep.len() < 2 {
        return Err(ModelError::InvalidData(format!(
            "series `{}` has fewer than 2 observed values",
            s.series_id
        )));
    }
    let t: Vec<f64> = keep.iter().map(|&i| s.t[i]).collect();
    let y = Array1::from_iter(keep.iter().map(|&i| s.y[i]));
    let mut x = Array2::zeros((keep.len(), s.n_covariates()));
    for (r, &i) in keep.iter().enumerate() {
        x.row_mut(r).assign(&s.x.row(i));
    }
    TimeSeriesData::new(s.series_id.clone(), t, y, x, vec![false; keep.len()])
}

/// Posterior-mean constrained step-1 state (for deterministic imputation).
fn mean_step1_state(model: &Step1Model, draws: &PosteriorDraws) -> Result<Step1State, FitError> {
    let n_cov = model.series()[0].n_covariates();
    let dim = draws.dim();
    let mut beta = Array1::zeros(n_cov);
    let mut mu0 = 0.0;
    let mut theta = Array1::zeros(model.block().m);
    let mut total = 0usize;
    for chain in &draws.values {
        for r in 0..chain.nrows() {
            let x: Vec<f64> = chain.row(r).to_vec();
            debug_assert_eq!(x.len(), dim);
            for j in 0..n_cov {
                beta[j] += x[j];
            }
            mu0 += x[n_cov];
            let block = model
                .block()
                .to_coefficient_block(&x[n_cov + 1..n_cov + 1 + model.block().dim()])
                .ok_or_else(|| {
                    FitError::Internal("retained draw rejected by block transform".into())
                })?;
            theta = theta + block.theta;
            total += 1;
        }
    }
    let total = total as f64;
    let mut a_block = model
        .block()
        .to_coefficient_block(&vec![0.0; model.block().dim()])
        .ok_or_else(|| FitError::Internal("neutral block state rejected".into()))?;
    a_block.theta = theta / total;
    Ok(Step1State {
        beta: beta / total,
        mu0: mu0 / total,
        a_block,
    })
}

struct Step1Summaries {
    derived: DerivedDraws,
    loglik: Array2<f64>,
    frozen: crate::model::FrozenStep1,
}

fn summarise_step1(
    model: &Step1Model,
    draws: &PosteriorDraws,
    n_sum: usize,
) -> Result<Step1Summaries, FitError> {
    let total = draws.n_chains() * draws.n_draws_per_chain();
    let mut mu_m = Array2::zeros((total, n_sum));
    let mut eps_m = Array2::zeros((total, n_sum));
    let mut a_m = Array2::zeros((total, n_sum));
    let mut s2_m = Array2::zeros((total, n_sum));
    let mut ll_m = Array2::zeros((total, n_sum));
    let mut row = 0usize;
    for chain in &draws.values {
        for r in 0..chain.nrows() {
            let x: Vec<f64> = chain.row(r).to_vec();
            let d = model.derive(&x).ok_or_else(|| {
                FitError::Internal(format!("retained step-1 draw {row} failed derivation"))
            })?;
            let mut col = 0usize;
            for si in 0..d.mu.len() {
                let alpha = d.alpha[si];
                for t in 0..d.mu[si].len() {
                    mu_m[(row, col)] = d.mu[si][t];
                    eps_m[(row, col)] = d.eps_std[si][t];
                    a_m[(row, col)] = d.a_t[si][t];
                    s2_m[(row, col)] = d.mu[si][t] * d.mu[si][t] / alpha;
                    ll_m[(row, col)] = d.loglik[si][t];
                    col += 1;
                }
            }
            row += 1;
        }
    }
    // freeze posterior means per series
    let mut frozen = crate::model::FrozenStep1 {
        mu: Vec::new(),
        eps_std: Vec::new(),
    };
    let mut col = 0usize;
    for s in model.series() {
        let n = s.n();
        let mut mu_bar = Array1::zeros(n);
        let mut eps_bar = Array1::zeros(n);
        for t in 0..n {
            mu_bar[t] = mu_m.column(col + t).sum() / total as f64;
            eps_bar[t] = eps_m.column(col + t).sum() / total as f64;
        }
        frozen.mu.push(mu_bar);
        frozen.eps_std.push(eps_bar);
        col += n;
    }
    Ok(Step1Summaries {
        derived: DerivedDraws {
            trajectories: vec![
                ("mu_t".into(), mu_m),
                ("sigma2_t".into(), s2_m),
                ("eps_std_t".into(), eps_m),
                ("a_t".into(), a_m),
            ],
        },
        loglik: ll_m,
        frozen,
    })
}

fn summarise_step2(
    model: &Step2Model,
    draws: &PosteriorDraws,
    frozen: &crate::model::FrozenStep1,
    n_sum: usize,
) -> Result<(DerivedDraws, Array2<f64>), FitError> {
    let total = draws.n_chains() * draws.n_draws_per_chain();
    let mut s2_m = Array2::zeros((total, n_sum));
    let mut tau_m = Array2::zeros((total, n_sum));
    let mut b_m = Array2::zeros((total, n_sum));
    let mut c_m = Array2::zeros((total, n_sum));
    let mut ll_m = Array2::zeros((total, n_sum));
    let mut mu_m = Array2::zeros((total, n_sum));
    let frozen_concat: Vec<f64> = frozen.mu.iter().flat_map(|m| m.iter().copied()).collect();
    let mut row = 0usize;
    for chain in &draws.values {
        for r in 0..chain.nrows() {
            let x: Vec<f64> = chain.row(r).to_vec();
            let d = model.derive(&x).ok_or_else(|| {
                FitError::Internal(format!("retained step-2 draw {row} failed derivation"))
            })?;
            let mut col = 0usize;
            for si in 0..d.sigma2.len() {
                for t in 0..d.sigma2[si].len() {
                    s2_m[(row, col)] = d.sigma2[si][t];
                    tau_m[(row, col)] = d.tau_t[si][t];
                    b_m[(row, col)] = d.b_t[si][t];
                    c_m[(row, col)] = d.c_t[si][t];
                    ll_m[(row, col)] = d.loglik[si][t];
                    mu_m[(row, col)] = frozen_concat[col];
                    col += 1;
                }
            }
            row += 1;
        }
    }
    Ok((
        DerivedDraws {
            trajectories: vec![
                ("sigma2_t".into(), s2_m),
                ("mu_t".into(), mu_m),
                ("tau_t".into(), tau_m),
                ("b_t".into(), b_m),
                ("c_t".into(), c_m),
            ],
        },
        ll_m,
    ))
}

/// Runs the full two-step pipeline.
pub fn fit_two_step(series: Vec<TimeSeriesData>, cfg: &FitConfig) -> Result<FitResult, FitError> {
    if series.is_empty() {
        return Err(FitError::Model(ModelError::InvalidData(
            "no series to fit".into(),
        )));
    }
    let n_cov = series[0].n_covariates();
    for s in &series {
        if s.n_covariates() != n_cov {
            return Err(FitError::Model(ModelError::LengthMismatch {
                context: "covariate count across series",
                left: s.n_covariates(),
                right: n_cov,
            }));
        }
    }

    // shared time basis over the pooled time range
    let t_lo = series
        .iter()
        .map(|s| s.t[0])
        .fold(f64::INFINITY, f64::min);
    let t_hi = series
        .iter()
        .map(|s| *s.t.last().expect("validated non-empty"))
        .fold(f64::NEG_INFINITY, f64::max);
    let basis_t = make_basis(cfg.m_time, t_lo, t_hi, cfg.width_factor)?;

    let (means, sds) = pooled_standardiser(&series);
    let scaled = scale_covariates(&series, &means, &sds);

    // impute missing responses from a preliminary observed-rows fit
    for s in &scaled {
        // fail before the preliminary fit: imputation walks forward from the
        // first observation, so a masked start can never be filled
        if *s.missing_mask.first().expect("validated non-empty") {
            return Err(FitError::Model(ModelError::MissingStart {
                series_id: s.series_id.clone(),
            }));
        }
    }
    let imputed_any = scaled.iter().any(|s| s.has_missing());
    let completed_scaled: Vec<TimeSeriesData> = if imputed_any {
        let subset: Vec<TimeSeriesData> = scaled
            .iter()
            .map(observed_subset)
            .collect::<Result<_, _>>()?;
        let prelim_model = Step1Model::new(subset, &basis_t, cfg.family)?;
        let mut prelim_cfg = cfg.step1.clone();
        prelim_cfg.seed = cfg.step1.seed.wrapping_add(0x9E37_79B9);
        let prelim_draws = hmc_run(&prelim_model, &prelim_model.init(), &prelim_cfg)?;
        let state = mean_step1_state(&prelim_model, &prelim_draws)?;
        scaled
            .iter()
            .map(|s| impute_missing(s, &state, &basis_t))
            .collect::<Result<_, _>>()?
    } else {
        scaled
    };

    // step 1
    let model1 = Step1Model::new(completed_scaled.clone(), &basis_t, cfg.family)?;
    let mut draws1 = hmc_run(&model1, &model1.init(), &cfg.step1)?;
    draws1.names = model1.param_names();
    let n_sum: usize = completed_scaled.iter().map(|s| s.n()).sum();
    let summaries = summarise_step1(&model1, &draws1, n_sum)?;
    for chain in draws1.values.iter_mut() {
        back_transform_regression(chain, n_cov, &means, &sds);
    }
    draws1.derived = Some(summaries.derived);
    draws1.pointwise_loglik = Some(summaries.loglik);
    let frozen = summaries.frozen;

    // mean-variance basis over the frozen mean range (data mode only)
    let basis_mu = match cfg.tau_mode {
        TauMode::Scalar => None,
        TauMode::Smooth => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for m in &frozen.mu {
                for &v in m {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if !(hi - lo > 1e-9) {
                let pad = 1.0f64.max(0.1 * lo.abs());
                lo -= pad;
                hi += pad;
            } else {
                let pad = 0.05 * (hi - lo);
                lo -= pad;
                hi += pad;
            }
            Some(make_basis(cfg.m_mu, lo, hi, cfg.width_factor)?)
        }
    };

    // step 2
    let model2 = Step2Model::new(
        &completed_scaled,
        &frozen,
        &basis_t,
        basis_mu.as_ref(),
        cfg.family,
        cfg.arch_feed,
    )?;
    let mut draws2 = hmc_run(&model2, &model2.init(), &cfg.step2)?;
    draws2.names = model2.param_names();
    let (derived2, loglik2) = summarise_step2(&model2, &draws2, &frozen, n_sum)?;
    draws2.derived = Some(derived2);
    draws2.pointwise_loglik = Some(loglik2);

    // report completed data on the raw covariate scale
    let mut data = Vec::with_capacity(series.len());
    for (orig, comp) in series.iter().zip(&completed_scaled) {
        let mut s = orig.clone();
        s.y = comp.y.clone();
        s.missing_mask = vec![false; s.n()];
        data.push(s);
    }
    let mut spans = Vec::with_capacity(data.len());
    let mut col = 0usize;
    for s in &data {
        spans.push((s.series_id.clone(), col..col + s.n()));
        col += s.n();
    }

    Ok(FitResult {
        step1: draws1,
        step2: draws2,
        frozen,
        basis_t,
        basis_mu,
        data,
        spans,
        imputed_any,
    })
}
