//! Gradient-based MCMC: static-path Hamiltonian Monte Carlo with
//! dual-averaging step-size adaptation and windowed diagonal mass-matrix
//! estimation, running independent chains in parallel.
//!
//! The integrator uses a jittered leapfrog count (uniform between 1 and a
//! per-trajectory maximum derived from a fixed trajectory length), which
//! avoids the resonance pathologies of a fixed path length while staying far
//! simpler than a tree-building sampler. Divergences are detected by a
//! Hamiltonian error above 1000 and reported per chain; a post-warmup
//! divergence rate above 20% flags the result without aborting it.

mod diag;

pub use diag::{credible_band, diagnostics_rhat_ess, split_rhat, rank_normalised_ess};

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

/// Errors from sampler configuration or execution.
#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    /// Configuration violated an invariant.
    #[error("invalid sampler configuration: {reason}")]
    InvalidConfig { reason: &'static str },
    /// The log posterior was not finite at the initial point.
    #[error("log posterior is not finite at the initial point (chain {chain})")]
    NonFiniteInit { chain: usize },
    /// Too few chains or draws for the requested diagnostic.
    #[error("diagnostic needs {needed}, got {got}")]
    TooFewDraws { needed: &'static str, got: usize },
}

/// Tuning knobs for one HMC run.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Number of independent chains.
    pub chains: usize,
    /// Warmup (adaptation) iterations per chain, discarded.
    pub warmup: usize,
    /// Retained post-warmup draws per chain.
    pub draws: usize,
    /// Target Metropolis acceptance statistic for dual averaging.
    pub target_accept: f64,
    /// Hard ceiling on leapfrog steps per trajectory.
    pub max_leapfrog: usize,
    /// Seed; chains derive independent streams from it.
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 1000,
            draws: 1000,
            target_accept: 0.8,
            max_leapfrog: 1024,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    /// Validates counts and the acceptance target range.
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.chains == 0 || self.draws == 0 || self.max_leapfrog == 0 {
            return Err(SamplerError::InvalidConfig {
                reason: "chains, draws and max_leapfrog must be positive",
            });
        }
        if !(self.target_accept > 0.5 && self.target_accept < 0.999) {
            return Err(SamplerError::InvalidConfig {
                reason: "target_accept must lie in (0.5, 0.999)",
            });
        }
        Ok(())
    }
}

/// A differentiable log-density target. Implementations may return −∞ to
/// reject a state (the gradient is then ignored), but must never panic on
/// finite input.
pub trait LogDensity: Sync {
    /// Dimension of the unconstrained space.
    fn dim(&self) -> usize;
    /// Writes ∇log p into `grad` and returns log p at `x`.
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Adapter exposing a closure as a [`LogDensity`].
pub struct FnTarget<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> f64 + Sync> LogDensity for FnTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(x, grad)
    }
}

/// Per-draw trajectories derived from the raw parameter draws by the model
/// layer (time-varying functions, means, variances).
#[derive(Debug, Clone, Default)]
pub struct DerivedDraws {
    /// Named (total draws × n) matrices, e.g. "a_t", "sigma2_t".
    pub trajectories: Vec<(String, Array2<f64>)>,
}

/// Posterior draws from all chains plus sampler-level diagnostics.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    /// Parameter labels, one per dimension.
    pub names: Vec<String>,
    /// One (draws × dim) matrix per chain.
    pub values: Vec<Array2<f64>>,
    /// Post-warmup divergence count per chain.
    pub divergences: Vec<usize>,
    /// Adapted step size per chain.
    pub step_sizes: Vec<f64>,
    /// Mean post-warmup acceptance statistic per chain.
    pub accept_rates: Vec<f64>,
    /// True when the pooled post-warmup divergence rate exceeds 20%.
    pub divergence_flagged: bool,
    /// Derived per-draw trajectories, attached by the model layer.
    pub derived: Option<DerivedDraws>,
    /// Pointwise log-likelihood, (total draws × n), attached by the model layer.
    pub pointwise_loglik: Option<Array2<f64>>,
}

impl PosteriorDraws {
    /// Number of chains.
    pub fn n_chains(&self) -> usize {
        self.values.len()
    }

    /// Post-warmup draws per chain.
    pub fn n_draws_per_chain(&self) -> usize {
        self.values.first().map_or(0, |v| v.nrows())
    }

    /// Dimension of the parameter vector.
    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.ncols())
    }

    /// All chains stacked into one (chains·draws × dim) matrix, chain-major.
    pub fn flat(&self) -> Array2<f64> {
        let rows = self.n_chains() * self.n_draws_per_chain();
        let mut out = Array2::zeros((rows, self.dim()));
        let mut r = 0;
        for chain in &self.values {
            for row in chain.rows() {
                out.row_mut(r).assign(&row);
                r += 1;
            }
        }
        out
    }

    /// Column index of a named parameter.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Posterior mean of every parameter over all chains.
    pub fn means(&self) -> Vec<f64> {
        let flat = self.flat();
        let n = flat.nrows() as f64;
        (0..flat.ncols())
            .map(|j| flat.column(j).sum() / n)
            .collect()
    }
}

/// Trajectory length target (in integration time) used to derive the
/// leapfrog count from the adapted step size.
const TRAJECTORY_LENGTH: f64 = 1.6;
/// Hamiltonian error above which a transition is declared divergent.
const DIVERGENCE_ENERGY: f64 = 1000.0;

struct DualAveraging {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    count: usize,
}

impl DualAveraging {
    fn new(eps0: f64) -> Self {
        Self {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: 0.0,
            h_bar: 0.0,
            count: 0,
        }
    }

    fn update(&mut self, accept_stat: f64, target: f64) {
        const GAMMA: f64 = 0.05;
        const T0: f64 = 10.0;
        const KAPPA: f64 = 0.75;
        self.count += 1;
        let m = self.count as f64;
        let eta = 1.0 / (m + T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (target - accept_stat);
        self.log_eps = self.mu - m.sqrt() / GAMMA * self.h_bar;
        let weight = m.powf(-KAPPA);
        self.log_eps_bar = weight * self.log_eps + (1.0 - weight) * self.log_eps_bar;
    }

    fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    fn adapted(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Online mean/variance accumulator for mass-matrix estimation.
struct Welford {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    /// Regularised variance estimate (shrunk towards 1e-3 as in windowed
    /// adaptation practice).
    fn shrunk_variance(&self) -> Option<Vec<f64>> {
        if self.count < 3 {
            return None;
        }
        let n = self.count as f64;
        Some(
            self.m2
                .iter()
                .map(|&m2| {
                    let var = m2 / (n - 1.0);
                    (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
                })
                .collect(),
        )
    }
}

struct Chain<'a, T: LogDensity> {
    target: &'a T,
    rng: ChaCha8Rng,
    /// Inverse mass (estimated posterior variances), one per dimension.
    inv_mass: Vec<f64>,
}

struct Transition {
    accept_stat: f64,
    divergent: bool,
}

impl<'a, T: LogDensity> Chain<'a, T> {
    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p
            .iter()
            .zip(&self.inv_mass)
            .map(|(&pi, &im)| pi * pi * im)
            .sum::<f64>()
    }

    fn sample_momentum(&mut self, p: &mut [f64]) {
        for (pi, im) in p.iter_mut().zip(&self.inv_mass) {
            let z: f64 = self.rng.sample(StandardNormal);
            *pi = z / im.sqrt();
        }
    }

    /// One leapfrog step in place; returns the new log density.
    fn leapfrog_step(&self, x: &mut [f64], p: &mut [f64], grad: &mut [f64], eps: f64) -> f64 {
        for (pi, gi) in p.iter_mut().zip(grad.iter()) {
            *pi += 0.5 * eps * gi;
        }
        for ((xi, pi), im) in x.iter_mut().zip(p.iter()).zip(&self.inv_mass) {
            *xi += eps * pi * im;
        }
        let logp = self.target.logp_grad(x, grad);
        if logp.is_finite() {
            for (pi, gi) in p.iter_mut().zip(grad.iter()) {
                *pi += 0.5 * eps * gi;
            }
        }
        logp
    }

    /// One full HMC transition; `x`, `logp` and `grad` are updated on accept.
    fn transition(
        &mut self,
        x: &mut Vec<f64>,
        logp: &mut f64,
        grad: &mut Vec<f64>,
        eps: f64,
        max_leapfrog: usize,
    ) -> Transition {
        let dim = x.len();
        let mut p = vec![0.0; dim];
        self.sample_momentum(&mut p);
        let h0 = -*logp + self.kinetic(&p);

        let steps_cap = ((TRAJECTORY_LENGTH / eps).round() as i64)
            .clamp(1, max_leapfrog as i64) as usize;
        let steps = self.rng.random_range(1..=steps_cap);

        let mut x_new = x.clone();
        let mut grad_new = grad.clone();
        let mut logp_new = *logp;
        for _ in 0..steps {
            logp_new = self.leapfrog_step(&mut x_new, &mut p, &mut grad_new, eps);
            if !logp_new.is_finite() {
                break;
            }
        }
        let h1 = if logp_new.is_finite() {
            -logp_new + self.kinetic(&p)
        } else {
            f64::INFINITY
        };
        let energy_error = h1 - h0;
        let divergent = !energy_error.is_finite() || energy_error > DIVERGENCE_ENERGY;
        let accept_stat = if divergent {
            0.0
        } else {
            (-energy_error).exp().min(1.0)
        };
        if !divergent {
            let u: f64 = self.rng.random();
            if u.ln() < -energy_error {
                *x = x_new;
                *logp = logp_new;
                *grad = grad_new;
            }
        }
        Transition {
            accept_stat,
            divergent,
        }
    }

    /// Step-size initialisation: double or halve until the single-step
    /// acceptance probability crosses one half.
    fn find_initial_step(&mut self, x: &[f64], logp: f64, grad: &[f64]) -> f64 {
        let dim = x.len();
        let mut eps = 1.0;
        let mut p = vec![0.0; dim];
        self.sample_momentum(&mut p);
        let h0 = -logp + self.kinetic(&p);
        let ratio_at = |this: &Self, eps: f64, p: &[f64]| -> f64 {
            let mut x1 = x.to_vec();
            let mut p1 = p.to_vec();
            let mut g1 = grad.to_vec();
            let lp = this.leapfrog_step(&mut x1, &mut p1, &mut g1, eps);
            if !lp.is_finite() {
                return f64::NEG_INFINITY;
            }
            h0 - (-lp + this.kinetic(&p1))
        };
        let mut log_ratio = ratio_at(self, eps, &p);
        let dir: f64 = if log_ratio > (0.5f64).ln() { 1.0 } else { -1.0 };
        for _ in 0..50 {
            if dir * log_ratio <= dir * (0.5f64).ln() {
                break;
            }
            eps *= (2.0f64).powf(dir);
            if !(1e-10..=1e6).contains(&eps) {
                break;
            }
            log_ratio = ratio_at(self, eps, &p);
        }
        eps.clamp(1e-10, 1e6)
    }
}

struct ChainOutput {
    draws: Array2<f64>,
    divergences: usize,
    step_size: f64,
    accept_rate: f64,
}

fn run_chain<T: LogDensity>(
    target: &T,
    init: &[f64],
    cfg: &SamplerConfig,
    chain_id: usize,
) -> Result<ChainOutput, SamplerError> {
    let dim = target.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain_id as u64 + 1);

    let mut chain = Chain {
        target,
        rng,
        inv_mass: vec![1.0; dim],
    };

    let mut x = init.to_vec();
    let mut grad = vec![0.0; dim];
    let mut logp = target.logp_grad(&x, &mut grad);
    if !logp.is_finite() {
        return Err(SamplerError::NonFiniteInit { chain: chain_id });
    }
    // Overdisperse starting points slightly across chains, staying within
    // the typical set of the init.
    if chain_id > 0 {
        for xi in x.iter_mut() {
            let z: f64 = chain.rng.sample(StandardNormal);
            *xi += 0.1 * z;
        }
        logp = target.logp_grad(&x, &mut grad);
        if !logp.is_finite() {
            // fall back to the supplied init
            x = init.to_vec();
            logp = target.logp_grad(&x, &mut grad);
        }
    }

    let eps0 = chain.find_initial_step(&x, logp, &grad);
    let mut averaging = DualAveraging::new(eps0);

    // Windowed mass adaptation: slow-start buffer, doubling estimation
    // windows, terminal step-size-only buffer.
    const INIT_BUFFER: usize = 75;
    const TERM_BUFFER: usize = 50;
    const BASE_WINDOW: usize = 25;
    let adapt_mass = cfg.warmup >= INIT_BUFFER + TERM_BUFFER + BASE_WINDOW;
    let mut window_start = INIT_BUFFER;
    let mut window_size = BASE_WINDOW;
    let mut window_end = if adapt_mass {
        let mut end = window_start + window_size;
        if end + 2 * window_size + TERM_BUFFER > cfg.warmup {
            end = cfg.warmup - TERM_BUFFER;
        }
        end
    } else {
        usize::MAX
    };
    let mut welford = Welford::new(dim);

    for iter in 0..cfg.warmup {
        let eps = averaging.current();
        let t = chain.transition(&mut x, &mut logp, &mut grad, eps, cfg.max_leapfrog);
        averaging.update(t.accept_stat, cfg.target_accept);

        if adapt_mass && iter >= window_start && iter < window_end {
            welford.push(&x);
        }
        if adapt_mass && iter + 1 == window_end {
            if let Some(vars) = welford.shrunk_variance() {
                chain.inv_mass = vars;
            }
            welford = Welford::new(dim);
            window_start = window_end;
            window_size *= 2;
            let mut end = window_start + window_size;
            if end + 2 * window_size + TERM_BUFFER > cfg.warmup || end > cfg.warmup - TERM_BUFFER {
                end = cfg.warmup - TERM_BUFFER;
            }
            window_end = if window_start < end { end } else { usize::MAX };
            // Re-initialise step-size adaptation for the new metric.
            let eps_restart = averaging.adapted().max(1e-10);
            averaging = DualAveraging::new(eps_restart);
        }
    }

    let eps = if cfg.warmup > 0 {
        averaging.adapted().max(1e-10)
    } else {
        eps0
    };

    let mut draws = Array2::zeros((cfg.draws, dim));
    let mut divergences = 0usize;
    let mut accept_sum = 0.0;
    for d in 0..cfg.draws {
        let t = chain.transition(&mut x, &mut logp, &mut grad, eps, cfg.max_leapfrog);
        if t.divergent {
            divergences += 1;
        }
        accept_sum += t.accept_stat;
        for j in 0..dim {
            draws[[d, j]] = x[j];
        }
    }

    Ok(ChainOutput {
        draws,
        divergences,
        step_size: eps,
        accept_rate: accept_sum / cfg.draws as f64,
    })
}

/// Runs `cfg.chains` independent HMC chains against `target` from the common
/// initial point `init`. Deterministic given the seed; chains run in
/// parallel on the ambient rayon pool.
pub fn hmc_run<T: LogDensity>(
    target: &T,
    init: &[f64],
    cfg: &SamplerConfig,
) -> Result<PosteriorDraws, SamplerError> {
    cfg.validate()?;
    if init.len() != target.dim() {
        return Err(SamplerError::InvalidConfig {
            reason: "init length does not match target dimension",
        });
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(SamplerError::NonFiniteInit { chain: 0 });
    }

    let outputs: Result<Vec<ChainOutput>, SamplerError> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain_id| run_chain(target, init, cfg, chain_id))
        .collect();
    let outputs = outputs?;

    let total_draws = cfg.chains * cfg.draws;
    let total_div: usize = outputs.iter().map(|o| o.divergences).sum();
    let names = (0..target.dim()).map(|i| format!("theta[{i}]")).collect();
    Ok(PosteriorDraws {
        names,
        values: outputs.iter().map(|o| o.draws.clone()).collect(),
        divergences: outputs.iter().map(|o| o.divergences).collect(),
        step_sizes: outputs.iter().map(|o| o.step_size).collect(),
        accept_rates: outputs.iter().map(|o| o.accept_rate).collect(),
        divergence_flagged: total_div as f64 > 0.2 * total_draws as f64,
        derived: None,
        pointwise_loglik: None,
    })
}
