//! Scratch probe for acceptance budgets (ignored by default).

use ndarray::{Array1, Array2};
use tvgarch_core::fit::{fit_two_step, FitConfig};
use tvgarch_core::model::ArchFeed;
use tvgarch_core::priors::PriorFamily;
use tvgarch_core::sampler::credible_band;
use tvgarch_core::simulation::{simulate, SimKind, SimSpec};

fn coverage(matrix: &Array2<f64>, truth: &Array1<f64>) -> f64 {
    let (lo, _, hi) = credible_band(matrix).unwrap();
    let n = truth.len();
    (0..n)
        .filter(|&t| lo[t] <= truth[t] && truth[t] <= hi[t])
        .count() as f64
        / n as f64
}

fn zero_cover(matrix: &Array2<f64>) -> f64 {
    let (lo, _, hi) = credible_band(matrix).unwrap();
    (0..lo.len()).filter(|&t| lo[t] <= 0.0 && 0.0 <= hi[t]).count() as f64 / lo.len() as f64
}

fn traj<'a>(
    draws: &'a tvgarch_core::sampler::PosteriorDraws,
    name: &str,
) -> &'a Array2<f64> {
    draws
        .derived
        .as_ref()
        .unwrap()
        .trajectories
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, m)| m)
        .unwrap()
}

fn budget(
    m: usize,
    warmup: usize,
    draws: usize,
    ta: f64,
    family: PriorFamily,
    feed: ArchFeed,
    seed: u64,
) -> FitConfig {
    let mut cfg = FitConfig {
        family,
        m_time: m,
        m_mu: m,
        arch_feed: feed,
        ..FitConfig::default()
    }
    .with_seed(seed);
    for stage in [&mut cfg.step1, &mut cfg.step2] {
        stage.chains = 2;
        stage.warmup = warmup;
        stage.draws = draws;
        stage.target_accept = ta;
    }
    cfg
}

#[test]
#[ignore]
fn probe_joint_feed_and_size() {
    // JOINT at n=400 (rescaled) and n=1000 under the matched recursive-std feed.
    for (n, scale) in [(400usize, 2.5f64), (1000, 1.0)] {
        for seed in [1u64, 2, 3] {
            let mut spec = SimSpec::new(SimKind::Joint, n, seed);
            spec.time_scale = scale;
            let sim = simulate(&spec).unwrap();
            let start = std::time::Instant::now();
            let cfg = budget(
                8,
                600,
                400,
                0.9,
                PriorFamily::Horseshoe,
                ArchFeed::RecursiveStd,
                300 + seed,
            );
            match fit_two_step(vec![sim.data.clone()], &cfg) {
                Ok(fit) => {
                    let ca = coverage(traj(&fit.step1, "a_t"), &sim.truth.a);
                    let cb = coverage(traj(&fit.step2, "b_t"), &sim.truth.b);
                    let cc = coverage(traj(&fit.step2, "c_t"), &sim.truth.c);
                    println!(
                        "joint n={n} seed {seed} recursive-std: a={ca:.3} b={cb:.3} c={cc:.3}  [{:.1}s]",
                        start.elapsed().as_secs_f64()
                    );
                }
                Err(e) => println!("joint n={n} seed {seed} recursive-std: ERROR {e}"),
            }
        }
    }
}

#[test]
#[ignore]
fn probe_tvarch1_feeds() {
    for feed in [ArchFeed::FrozenStd, ArchFeed::RecursiveStd] {
        for seed in [1u64, 2, 3] {
            let mut spec = SimSpec::new(SimKind::Tvarch1, 400, seed);
            spec.time_scale = 2.5;
            let sim = simulate(&spec).unwrap();
            let start = std::time::Instant::now();
            let cfg = budget(8, 600, 400, 0.9, PriorFamily::Horseshoe, feed, 100 + seed);
            let fit = fit_two_step(vec![sim.data.clone()], &cfg).unwrap();
            let cb = coverage(traj(&fit.step2, "b_t"), &sim.truth.b);
            let za = zero_cover(traj(&fit.step1, "a_t"));
            println!(
                "tvarch1 seed {seed} {feed:?}: b={cb:.3} zero(a)={za:.3}  [{:.1}s]",
                start.elapsed().as_secs_f64()
            );
        }
    }
}
