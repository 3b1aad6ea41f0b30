//! `tvgarch fit` — the two-step fitting pipeline plus artefact emission.

use std::path::PathBuf;

use tvgarch_core::diagnostics::loo_from_loglik;
use tvgarch_core::fit::{fit_two_step, FitConfig, FitResult};
use tvgarch_core::model::{ArchFeed, TauMode};
use tvgarch_core::priors::PriorFamily;
use tvgarch_core::sampler::{credible_band, diagnostics_rhat_ess, PosteriorDraws};

use crate::config::{pick, require, Config};
use crate::error::CliError;
use crate::ingest::read_data_csv;
use crate::output::{
    sha256_file, write_draws_csv, write_json, write_trajectories_csv, FitMeta, LooJson,
    ParamSummary, StepSummary, SummaryJson, TrajectoryRow,
};

const CONFIG_KEYS: &[&str] = &[
    "data",
    "prior",
    "m",
    "m-mu",
    "width-factor",
    "tau-mode",
    "arch-feed",
    "chains",
    "warmup",
    "draws",
    "target-accept",
    "seed",
    "out",
];

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    /// Flat key=value config file; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input data CSV (`series_id,t,y,<covariates...>`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Basis-coefficient prior: inverse-wishart | horseshoe | mv-horseshoe.
    #[arg(long)]
    pub prior: Option<String>,
    /// Basis dimension for the time smooths a(t), b(t), c(t).
    #[arg(long)]
    pub m: Option<usize>,
    /// Basis dimension for the mean-variance smooth τ(μ); defaults to --m.
    #[arg(long = "m-mu")]
    pub m_mu: Option<usize>,
    /// Bandwidth multiplier on the basis knot spacing.
    #[arg(long = "width-factor")]
    pub width_factor: Option<f64>,
    /// Variance intercept: scalar (τ₀) or smooth (τ(μ)).
    #[arg(long = "tau-mode")]
    pub tau_mode: Option<String>,
    /// ARCH feed: frozen-std | recursive-std | frozen-raw.
    #[arg(long = "arch-feed")]
    pub arch_feed: Option<String>,
    /// Number of HMC chains per step.
    #[arg(long)]
    pub chains: Option<usize>,
    /// Warmup iterations per chain.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Retained draws per chain.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Dual-averaging target acceptance statistic.
    #[arg(long = "target-accept")]
    pub target_accept: Option<f64>,
    /// Master seed; step 2 derives its own stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_prior(raw: &str) -> Result<PriorFamily, CliError> {
    match raw.to_ascii_lowercase().as_str() {
        "inverse-wishart" => Ok(PriorFamily::inverse_wishart_default()),
        "horseshoe" => Ok(PriorFamily::Horseshoe),
        "mv-horseshoe" => Ok(PriorFamily::MultivariateHorseshoe),
        other => Err(CliError::Validation(format!(
            "unknown prior `{other}` (expected inverse-wishart, horseshoe or mv-horseshoe)"
        ))),
    }
}

fn prior_name(family: PriorFamily) -> &'static str {
    match family {
        PriorFamily::InverseWishart { .. } => "inverse-wishart",
        PriorFamily::Horseshoe => "horseshoe",
        PriorFamily::MultivariateHorseshoe => "mv-horseshoe",
        PriorFamily::PSplineK => "pspline-k",
    }
}

fn parse_tau_mode(raw: &str) -> Result<TauMode, CliError> {
    match raw.to_ascii_lowercase().as_str() {
        "scalar" => Ok(TauMode::Scalar),
        "smooth" => Ok(TauMode::Smooth),
        other => Err(CliError::Validation(format!(
            "unknown tau mode `{other}` (expected scalar or smooth)"
        ))),
    }
}

fn parse_arch_feed(raw: &str) -> Result<ArchFeed, CliError> {
    match raw.to_ascii_lowercase().as_str() {
        "frozen-std" => Ok(ArchFeed::FrozenStd),
        "recursive-std" => Ok(ArchFeed::RecursiveStd),
        "frozen-raw" => Ok(ArchFeed::FrozenRaw),
        other => Err(CliError::Validation(format!(
            "unknown arch feed `{other}` (expected frozen-std, recursive-std or frozen-raw)"
        ))),
    }
}

fn tau_mode_name(mode: TauMode) -> &'static str {
    match mode {
        TauMode::Scalar => "scalar",
        TauMode::Smooth => "smooth",
    }
}

fn arch_feed_name(feed: ArchFeed) -> &'static str {
    match feed {
        ArchFeed::FrozenStd => "frozen-std",
        ArchFeed::RecursiveStd => "recursive-std",
        ArchFeed::FrozenRaw => "frozen-raw",
    }
}

pub fn run(args: FitArgs) -> Result<(), CliError> {
    let cfg_file = Config::load(args.config.as_deref(), CONFIG_KEYS)?;
    let data_path: PathBuf = require(args.data, &cfg_file, "data")?;
    let prior_raw: String =
        pick(args.prior, &cfg_file, "prior")?.unwrap_or_else(|| "horseshoe".into());
    let family = parse_prior(&prior_raw)?;
    let m = pick(args.m, &cfg_file, "m")?.unwrap_or(15);
    let m_mu = pick(args.m_mu, &cfg_file, "m-mu")?.unwrap_or(m);
    let width_factor = pick(args.width_factor, &cfg_file, "width-factor")?.unwrap_or(1.0);
    let tau_mode = match pick(args.tau_mode, &cfg_file, "tau-mode")? {
        Some(raw) => parse_tau_mode(&raw)?,
        None => TauMode::Scalar,
    };
    let arch_feed = match pick(args.arch_feed, &cfg_file, "arch-feed")? {
        Some(raw) => parse_arch_feed(&raw)?,
        None => ArchFeed::FrozenStd,
    };
    let chains = pick(args.chains, &cfg_file, "chains")?.unwrap_or(4);
    let warmup = pick(args.warmup, &cfg_file, "warmup")?.unwrap_or(1000);
    let draws = pick(args.draws, &cfg_file, "draws")?.unwrap_or(1000);
    let target_accept = pick(args.target_accept, &cfg_file, "target-accept")?.unwrap_or(0.8);
    let seed = pick(args.seed, &cfg_file, "seed")?.unwrap_or(0);
    let out: PathBuf = require(args.out, &cfg_file, "out")?;

    let ingested = read_data_csv(&data_path)?;
    let n_series = ingested.series.len();
    let n_obs: usize = ingested.series.iter().map(|s| s.n()).sum();

    let mut fit_cfg = FitConfig {
        family,
        m_time: m,
        m_mu,
        width_factor,
        tau_mode,
        arch_feed,
        ..FitConfig::default()
    }
    .with_seed(seed);
    for stage in [&mut fit_cfg.step1, &mut fit_cfg.step2] {
        stage.chains = chains;
        stage.warmup = warmup;
        stage.draws = draws;
        stage.target_accept = target_accept;
    }
    fit_cfg
        .step1
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let fit = fit_two_step(ingested.series, &fit_cfg)?;

    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    write_draws_csv(&out.join("draws_step1.csv"), &fit.step1)?;
    write_draws_csv(&out.join("draws_step2.csv"), &fit.step2)?;
    write_trajectories_csv(&out.join("trajectories.csv"), &trajectory_rows(&fit)?)?;

    let (summary, worst) = build_summary(&fit)?;
    write_json(&out.join("summary.json"), &summary)?;

    let loglik = fit
        .step2
        .pointwise_loglik
        .as_ref()
        .expect("fit attaches pointwise log-likelihood");
    let loo = loo_from_loglik(loglik).map_err(|e| CliError::Convergence(e.to_string()))?;
    write_json(
        &out.join("loo.json"),
        &LooJson {
            n: loo.pointwise.len(),
            elpd_loo: loo.elpd_loo,
            looic: loo.looic,
            se: loo.se,
            n_high_k: loo.n_high_k,
            pareto_k: loo.pareto_k,
            pointwise: loo.pointwise,
        },
    )?;

    let meta = FitMeta {
        command: "fit".into(),
        data_path: data_path.display().to_string(),
        data_sha256: sha256_file(&data_path)?,
        n_series,
        n_obs,
        covariates: ingested.covariate_names,
        imputed: fit.imputed_any,
        prior: prior_name(family).into(),
        m,
        m_mu,
        width_factor,
        tau_mode: tau_mode_name(tau_mode).into(),
        arch_feed: arch_feed_name(arch_feed).into(),
        chains,
        warmup,
        draws,
        target_accept,
        seed,
    };
    write_json(&out.join("meta.json"), &meta)?;

    if !summary.converged {
        let (step, name, rhat) = worst.expect("non-convergence implies a worst parameter");
        return Err(CliError::Convergence(format!(
            "convergence failure: split-R̂ exceeds 1.1 (worst: {step} parameter `{name}`, R̂ = {rhat:.4}); \
             artefacts written to {} — inspect summary.json",
            out.display()
        )));
    }
    println!(
        "fit: {} series, {} observations, prior {} → {}",
        n_series,
        n_obs,
        prior_name(family),
        out.display()
    );
    Ok(())
}

/// 10/50/90% bands for every derived trajectory, split back into series.
fn trajectory_rows(fit: &FitResult) -> Result<Vec<TrajectoryRow>, CliError> {
    let mut rows = Vec::new();
    let sources: [(&PosteriorDraws, &[&str]); 2] = [
        (&fit.step1, &["a_t", "mu_t"]),
        (&fit.step2, &["sigma2_t", "tau_t", "b_t", "c_t"]),
    ];
    for (draws, wanted) in sources {
        let derived = draws
            .derived
            .as_ref()
            .expect("fit attaches derived trajectories");
        for name in wanted {
            let matrix = derived
                .trajectories
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m)
                .expect("derived trajectory present");
            let (lo, med, hi) =
                credible_band(matrix).map_err(|e| CliError::Validation(e.to_string()))?;
            for (series_id, span) in &fit.spans {
                let series = fit
                    .data
                    .iter()
                    .find(|s| &s.series_id == series_id)
                    .expect("span ids come from the data");
                for (offset, col) in span.clone().enumerate() {
                    rows.push(TrajectoryRow {
                        series_id: series_id.clone(),
                        t: series.t[offset],
                        name: (*name).into(),
                        q10: lo[col],
                        q50: med[col],
                        q90: hi[col],
                    });
                }
            }
        }
    }
    Ok(rows)
}

type WorstParam = Option<(&'static str, String, f64)>;

/// R̂/ESS per parameter for both steps; also returns the worst parameter when
/// any R̂ exceeds 1.1.
fn build_summary(fit: &FitResult) -> Result<(SummaryJson, WorstParam), CliError> {
    let mut max_rhat: Option<f64> = None;
    let mut worst: WorstParam = None;
    let mut step = |label: &'static str, draws: &PosteriorDraws| -> Result<StepSummary, CliError> {
        let stats = if draws.n_chains() >= 2 {
            diagnostics_rhat_ess(draws)
                .map_err(|e| CliError::Validation(e.to_string()))?
                .into_iter()
                .map(|(r, e)| (Some(r), Some(e)))
                .collect()
        } else {
            vec![(None, None); draws.dim()]
        };
        let parameters = draws
            .names
            .iter()
            .zip(&stats)
            .map(|(name, &(rhat, ess))| {
                if let Some(r) = rhat {
                    if r.is_finite() && max_rhat.map_or(true, |m| r > m) {
                        max_rhat = Some(r);
                    }
                    if r > 1.1 && worst.as_ref().map_or(true, |(_, _, w)| r > *w) {
                        worst = Some((label, name.clone(), r));
                    }
                }
                ParamSummary {
                    name: name.clone(),
                    rhat,
                    ess,
                }
            })
            .collect();
        Ok(StepSummary {
            parameters,
            divergences: draws.divergences.clone(),
            step_sizes: draws.step_sizes.clone(),
            accept_rates: draws.accept_rates.clone(),
            divergence_flagged: draws.divergence_flagged,
        })
    };
    let step1 = step("step1", &fit.step1)?;
    let step2 = step("step2", &fit.step2)?;
    let converged = worst.is_none();
    Ok((
        SummaryJson {
            step1,
            step2,
            max_rhat,
            converged,
        },
        worst,
    ))
}
