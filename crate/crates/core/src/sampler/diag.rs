//! Convergence diagnostics for posterior draws: split-R̂, rank-normalised
//! effective sample size, and pointwise credible bands.

use ndarray::{Array1, Array2};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{PosteriorDraws, SamplerError};

/// Split-R̂ for one parameter: each chain is halved, and the usual
/// between/within variance ratio is computed over the resulting sequences.
/// Constant chains return 1.0 by convention.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let sequences = split_chains(chains);
    let n = sequences[0].len() as f64;
    let means: Vec<f64> = sequences.iter().map(|s| mean(s)).collect();
    let vars: Vec<f64> = sequences.iter().map(|s| variance(s)).collect();
    let w = mean(&vars);
    if w <= 0.0 || !w.is_finite() {
        return 1.0;
    }
    let b_over_n = variance(&means);
    let var_plus = (n - 1.0) / n * w + b_over_n;
    (var_plus / w).sqrt()
}

/// Rank-normalised effective sample size: pooled draws are converted to
/// normal scores through their ranks, then the split-chain autocorrelation
/// series is summed with Geyer's initial monotone positive sequence.
pub fn rank_normalised_ess(chains: &[Vec<f64>]) -> f64 {
    let ranked = rank_normalise(chains);
    let sequences = split_chains(&ranked);
    let m = sequences.len() as f64;
    let n = sequences[0].len();
    if n < 4 {
        return f64::NAN;
    }
    let nf = n as f64;
    let total = m * nf;

    let acovs: Vec<Vec<f64>> = sequences.iter().map(|s| autocovariance(s)).collect();
    let chain_vars: Vec<f64> = acovs.iter().map(|a| a[0] * nf / (nf - 1.0)).collect();
    let mean_var = mean(&chain_vars);
    if mean_var <= 0.0 || !mean_var.is_finite() {
        return f64::NAN;
    }
    let seq_means: Vec<f64> = sequences.iter().map(|s| mean(s)).collect();
    let var_plus = mean_var * (nf - 1.0) / nf
        + if sequences.len() > 1 {
            variance(&seq_means)
        } else {
            0.0
        };

    // ρ_t = 1 − (W − mean autocovariance at lag t)/var⁺, paired and summed
    // while the pairs stay positive, enforcing monotone decrease.
    let mut rho_hat_sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 1usize;
    while t + 1 < n {
        let acov_t = mean(&acovs.iter().map(|a| a[t]).collect::<Vec<_>>());
        let acov_t1 = mean(&acovs.iter().map(|a| a[t + 1]).collect::<Vec<_>>());
        let rho_t = 1.0 - (mean_var - acov_t) / var_plus;
        let rho_t1 = 1.0 - (mean_var - acov_t1) / var_plus;
        let mut pair = rho_t + rho_t1;
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        prev_pair = pair;
        rho_hat_sum += pair;
        t += 2;
    }
    let tau = 1.0 + 2.0 * rho_hat_sum;
    (total / tau).min(total)
}

fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[half..2 * half].to_vec());
    }
    out
}

fn rank_normalise(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let total: usize = chains.iter().map(|c| c.len()).sum();
    // pool with provenance
    let mut pooled: Vec<(f64, usize, usize)> = Vec::with_capacity(total);
    for (ci, c) in chains.iter().enumerate() {
        for (di, &v) in c.iter().enumerate() {
            pooled.push((v, ci, di));
        }
    }
    pooled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    // average ranks over ties
    let mut i = 0usize;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let z = normal.inverse_cdf((avg_rank - 0.375) / (total as f64 + 0.25));
        for p in &pooled[i..=j] {
            out[p.1][p.2] = z;
        }
        i = j + 1;
    }
    out
}

fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mu = mean(x);
    let mut out = vec![0.0; n];
    for lag in 0..n {
        let mut s = 0.0;
        for i in 0..n - lag {
            s += (x[i] - mu) * (x[i + lag] - mu);
        }
        out[lag] = s / n as f64;
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let mu = mean(x);
    x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Split-R̂ and rank-normalised ESS for every parameter.
pub fn diagnostics_rhat_ess(draws: &PosteriorDraws) -> Result<Vec<(f64, f64)>, SamplerError> {
    if draws.n_chains() < 2 {
        return Err(SamplerError::TooFewDraws {
            needed: "at least 2 chains",
            got: draws.n_chains(),
        });
    }
    if draws.n_draws_per_chain() < 100 {
        return Err(SamplerError::TooFewDraws {
            needed: "at least 100 draws per chain",
            got: draws.n_draws_per_chain(),
        });
    }
    let dim = draws.dim();
    let mut out = Vec::with_capacity(dim);
    for j in 0..dim {
        let chains: Vec<Vec<f64>> = draws
            .values
            .iter()
            .map(|c| c.column(j).to_vec())
            .collect();
        out.push((split_rhat(&chains), rank_normalised_ess(&chains)));
    }
    Ok(out)
}

/// Interpolated quantile (linear between order statistics) of a sorted slice.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Pointwise 10% / 50% / 90% bands of a (draws × n) trajectory matrix.
pub fn credible_band(
    trajectory: &Array2<f64>,
) -> Result<(Array1<f64>, Array1<f64>, Array1<f64>), SamplerError> {
    if trajectory.nrows() < 100 {
        return Err(SamplerError::TooFewDraws {
            needed: "at least 100 draws",
            got: trajectory.nrows(),
        });
    }
    let n = trajectory.ncols();
    let mut lower = Array1::zeros(n);
    let mut median = Array1::zeros(n);
    let mut upper = Array1::zeros(n);
    for t in 0..n {
        let mut col: Vec<f64> = trajectory.column(t).to_vec();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lower[t] = quantile_sorted(&col, 0.10);
        median[t] = quantile_sorted(&col, 0.50);
        upper[t] = quantile_sorted(&col, 0.90);
    }
    Ok((lower, median, upper))
}
