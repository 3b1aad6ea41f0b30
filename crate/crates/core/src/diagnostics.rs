//! Model comparison and checking: pointwise log-likelihood, Pareto-smoothed
//! importance sampling (PSIS), LOOIC with standard error, Pareto-k
//! reporting, posterior predictive statistics, and the Kolmogorov–Smirnov
//! helpers shared by the statistical test suites.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::likelihood::{gamma_mv_logpdf, gamma_mv_sample};
use crate::model::TimeSeriesData;
use crate::sampler::PosteriorDraws;

/// Errors from diagnostic computations.
#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    /// PSIS needs a minimum number of draws.
    #[error("need at least {needed} draws, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    /// The posterior draws lack the derived μ/σ² trajectories.
    #[error("derived trajectories `{name}` missing from draws")]
    MissingDerived { name: &'static str },
    /// Dimension mismatch between draws and data.
    #[error("dimension mismatch: {context}")]
    Mismatch { context: &'static str },
}

/// PSIS-LOO summary for one fit.
#[derive(Debug, Clone)]
pub struct LooResult {
    /// Expected log pointwise predictive density, leave-one-out.
    pub elpd_loo: f64,
    /// −2·elpd_loo.
    pub looic: f64,
    /// Standard error of elpd_loo.
    pub se: f64,
    /// Pareto shape estimate per observation.
    pub pareto_k: Vec<f64>,
    /// Number of observations with k̂ > 0.7.
    pub n_high_k: usize,
    /// Pointwise elpd contributions (needed for pairwise comparisons).
    pub pointwise: Vec<f64>,
}

/// Numerically stable log(Σ exp(x_i)).
pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

// ---------------------------------------------------------------------------
// Kolmogorov–Smirnov helpers (shared by the law tests across modules)
// ---------------------------------------------------------------------------

/// One-sample KS statistic of an ascending-sorted sample against a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let hi = (i as f64 + 1.0) / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Asymptotic p-value of the one-sample KS statistic (Kolmogorov series with
/// the standard finite-sample correction).
pub fn ks_p_value(stat: f64, n: usize) -> f64 {
    let nf = n as f64;
    let lambda = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * stat;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1.0f64).powi(k as i32 - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Pointwise log-likelihood
// ---------------------------------------------------------------------------

/// Pointwise Gamma log-likelihood of `data` under the per-draw derived mean
/// and variance trajectories attached to `draws` (names `mu_t`, `sigma2_t`).
/// Entry (s, t) is the log density of y_t under draw s.
pub fn pointwise_loglik(
    draws: &PosteriorDraws,
    data: &TimeSeriesData,
) -> Result<Array2<f64>, DiagnosticsError> {
    let derived = draws
        .derived
        .as_ref()
        .ok_or(DiagnosticsError::MissingDerived { name: "derived" })?;
    let mu = derived
        .trajectories
        .iter()
        .find(|(n, _)| n == "mu_t")
        .map(|(_, m)| m)
        .ok_or(DiagnosticsError::MissingDerived { name: "mu_t" })?;
    let sigma2 = derived
        .trajectories
        .iter()
        .find(|(n, _)| n == "sigma2_t")
        .map(|(_, m)| m)
        .ok_or(DiagnosticsError::MissingDerived { name: "sigma2_t" })?;
    let n = data.y.len();
    if mu.ncols() != n || sigma2.ncols() != n || mu.nrows() != sigma2.nrows() {
        return Err(DiagnosticsError::Mismatch {
            context: "derived trajectory shape vs data length",
        });
    }
    let s = mu.nrows();
    let mut out = Array2::zeros((s, n));
    for si in 0..s {
        for t in 0..n {
            out[[si, t]] = gamma_mv_logpdf(data.y[t], mu[[si, t]], sigma2[[si, t]])
                .unwrap_or(f64::NEG_INFINITY);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Generalised Pareto fitting and PSIS
// ---------------------------------------------------------------------------

/// Profile-likelihood (quantile-grid) fit of the generalised Pareto shape and
/// scale to positive exceedances, with a probability-weighted-moment
/// fallback. Returns (k, sigma).
fn gpd_fit(exceedances: &[f64]) -> (f64, f64) {
    let x = exceedances; // ascending
    let m = x.len();
    let x_max = x[m - 1];
    let quart = x[(m as f64 / 4.0 + 0.5).floor() as usize - 1].max(1e-300);
    let grid = 30 + (m as f64).sqrt().floor() as usize;
    let mut thetas = Vec::with_capacity(grid);
    let mut profiles = Vec::with_capacity(grid);
    for j in 1..=grid {
        let theta = 1.0 / x_max + (1.0 - (grid as f64 / (j as f64 - 0.5)).sqrt()) / (3.0 * quart);
        // ξ(θ) maximises the likelihood at fixed θ; profile log-likelihood
        // l(θ) = m·(ln(−θ/ξ) − ξ − 1).
        let xi = x.iter().map(|&v| (-theta * v).ln_1p()).sum::<f64>() / m as f64;
        if !xi.is_finite() || xi == 0.0 {
            continue;
        }
        let prof = m as f64 * ((-theta / xi).ln() - xi - 1.0);
        if prof.is_finite() {
            thetas.push(theta);
            profiles.push(prof);
        }
    }
    if thetas.len() >= 2 {
        let norm = logsumexp(&profiles);
        let theta_hat: f64 = thetas
            .iter()
            .zip(&profiles)
            .map(|(&t, &p)| t * (p - norm).exp())
            .sum();
        if theta_hat.is_finite() && theta_hat != 0.0 {
            let k = x.iter().map(|&v| (-theta_hat * v).ln_1p()).sum::<f64>() / m as f64;
            let sigma = -k / theta_hat;
            if k.is_finite() && sigma.is_finite() && sigma > 0.0 {
                return (k, sigma);
            }
        }
    }
    // Probability-weighted moments fallback.
    let b0 = x.iter().sum::<f64>() / m as f64;
    let b1 = x
        .iter()
        .enumerate()
        .map(|(i, &v)| v * i as f64 / (m as f64 - 1.0))
        .sum::<f64>()
        / m as f64;
    let denom = b0 - 2.0 * b1;
    if denom.abs() > 1e-300 {
        let k = 2.0 - b0 / denom;
        let sigma = 2.0 * b0 * b1 / denom;
        if k.is_finite() && sigma > 0.0 {
            return (k, sigma);
        }
    }
    (0.5, b0.max(1e-300))
}

/// GPD quantile function for exceedances.
fn gpd_quantile(p: f64, k: f64, sigma: f64) -> f64 {
    if k.abs() < 1e-9 {
        -sigma * (1.0 - p).ln()
    } else {
        sigma / k * ((1.0 - p).powf(-k) - 1.0)
    }
}

/// Pareto-smoothed importance sampling. Fits a generalised Pareto
/// distribution to the largest M = min(0.2·S, 3·√S) importance ratios,
/// replaces them by the fitted expected order statistics (capped at the raw
/// maximum), and returns self-normalised weights together with the
/// regularised shape estimate k̂.
pub fn psis_smooth(log_ratios: &[f64]) -> Result<(Vec<f64>, f64), DiagnosticsError> {
    let s = log_ratios.len();
    if s < 100 {
        return Err(DiagnosticsError::TooFewDraws { needed: 100, got: s });
    }
    let max_lr = log_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_lr = log_ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max_lr - min_lr).is_finite() || max_lr - min_lr < 1e-14 {
        // Degenerate: all ratios equal.
        return Ok((vec![1.0 / s as f64; s], f64::NEG_INFINITY));
    }
    // Work on the shifted ratio scale r = exp(lr − max) ∈ (0, 1].
    let r: Vec<f64> = log_ratios.iter().map(|&lr| (lr - max_lr).exp()).collect();
    let m = ((0.2 * s as f64).min(3.0 * (s as f64).sqrt())).floor() as usize;

    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap());
    let cutoff = r[order[s - m - 1]];
    let raw_max = r[order[s - 1]];

    let exceedances: Vec<f64> = order[s - m..]
        .iter()
        .map(|&i| r[i] - cutoff)
        .collect(); // ascending because order is ascending

    let mut smoothed = r.clone();
    let k_hat = if exceedances[m - 1] <= 1e-300 {
        f64::NEG_INFINITY
    } else {
        let (k_raw, sigma) = gpd_fit(&exceedances);
        // Replace tail values by expected order statistics of the fit.
        for (z, &i) in order[s - m..].iter().enumerate().map(|(z, i)| (z, i)) {
            let p = (z as f64 + 0.5) / m as f64;
            smoothed[i] = (cutoff + gpd_quantile(p, k_raw, sigma)).min(raw_max);
        }
        // Weakly-informative regularisation of the reported shape.
        (m as f64 * k_raw + 10.0 * 0.5) / (m as f64 + 10.0)
    };

    let total: f64 = smoothed.iter().sum();
    let weights: Vec<f64> = smoothed.iter().map(|&w| w / total).collect();
    Ok((weights, k_hat))
}

// ---------------------------------------------------------------------------
// LOO
// ---------------------------------------------------------------------------

/// PSIS-LOO from a (draws × n) pointwise log-likelihood matrix.
pub fn loo_from_loglik(loglik: &Array2<f64>) -> Result<LooResult, DiagnosticsError> {
    let s = loglik.nrows();
    let n = loglik.ncols();
    if s < 100 {
        return Err(DiagnosticsError::TooFewDraws { needed: 100, got: s });
    }
    let mut pointwise = Vec::with_capacity(n);
    let mut pareto_k = Vec::with_capacity(n);
    for t in 0..n {
        let col: Vec<f64> = loglik.column(t).to_vec();
        let log_ratios: Vec<f64> = col.iter().map(|&ll| -ll).collect();
        let (weights, k) = psis_smooth(&log_ratios)?;
        let terms: Vec<f64> = col
            .iter()
            .zip(&weights)
            .map(|(&ll, &w)| ll + w.ln())
            .collect();
        pointwise.push(logsumexp(&terms));
        pareto_k.push(k);
    }
    let elpd: f64 = pointwise.iter().sum();
    let mean = elpd / n as f64;
    let var = pointwise.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n as f64 - 1.0);
    let se = (n as f64 * var).sqrt();
    let n_high_k = pareto_k.iter().filter(|&&k| k > 0.7).count();
    Ok(LooResult {
        elpd_loo: elpd,
        looic: -2.0 * elpd,
        se,
        pareto_k,
        n_high_k,
        pointwise,
    })
}

/// PSIS-LOO for a fit: computes the pointwise log-likelihood from the derived
/// trajectories and feeds it through [`loo_from_loglik`].
pub fn loo(draws: &PosteriorDraws, data: &TimeSeriesData) -> Result<LooResult, DiagnosticsError> {
    let ll = match &draws.pointwise_loglik {
        Some(ll) => ll.clone(),
        None => pointwise_loglik(draws, data)?,
    };
    loo_from_loglik(&ll)
}

// ---------------------------------------------------------------------------
// Posterior predictive statistics
// ---------------------------------------------------------------------------

/// Posterior predictive check material: per-draw log-scale mean and SD of
/// replicate data, plus the observed statistics.
#[derive(Debug, Clone)]
pub struct PpdStats {
    pub mean_logscale: Vec<f64>,
    pub sd_logscale: Vec<f64>,
    pub observed_mean: f64,
    pub observed_sd: f64,
}

/// Simulates one replicate dataset per draw from Gamma(μ_t, σ²_t) and
/// records the mean and SD of the log replicates; deterministic given
/// `seed`. A variance floor of 1e-12 guards degenerate draws.
pub fn ppd_stats(
    draws: &PosteriorDraws,
    data: &TimeSeriesData,
    seed: u64,
) -> Result<PpdStats, DiagnosticsError> {
    let derived = draws
        .derived
        .as_ref()
        .ok_or(DiagnosticsError::MissingDerived { name: "derived" })?;
    let mu = derived
        .trajectories
        .iter()
        .find(|(n, _)| n == "mu_t")
        .map(|(_, m)| m)
        .ok_or(DiagnosticsError::MissingDerived { name: "mu_t" })?;
    let sigma2 = derived
        .trajectories
        .iter()
        .find(|(n, _)| n == "sigma2_t")
        .map(|(_, m)| m)
        .ok_or(DiagnosticsError::MissingDerived { name: "sigma2_t" })?;
    let n = data.y.len();
    if mu.ncols() != n {
        return Err(DiagnosticsError::Mismatch {
            context: "derived trajectory shape vs data length",
        });
    }
    let s = mu.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean_logscale = Vec::with_capacity(s);
    let mut sd_logscale = Vec::with_capacity(s);
    for si in 0..s {
        let mut logs = Vec::with_capacity(n);
        for t in 0..n {
            let m_st = mu[[si, t]].max(1e-12);
            let v_st = sigma2[[si, t]].max(1e-12);
            let y = gamma_mv_sample(&mut rng, m_st, v_st)
                .unwrap_or(f64::MIN_POSITIVE);
            logs.push(y.ln());
        }
        let mean = logs.iter().sum::<f64>() / n as f64;
        let var = logs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        mean_logscale.push(mean);
        sd_logscale.push(var.sqrt());
    }
    let obs_logs: Vec<f64> = data.y.iter().map(|&y| y.ln()).collect();
    let observed_mean = obs_logs.iter().sum::<f64>() / n as f64;
    let obs_var = obs_logs
        .iter()
        .map(|v| (v - observed_mean) * (v - observed_mean))
        .sum::<f64>()
        / (n as f64 - 1.0);
    Ok(PpdStats {
        mean_logscale,
        sd_logscale,
        observed_mean,
        observed_sd: obs_var.sqrt(),
    })
}
