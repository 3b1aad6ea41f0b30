//! LKJ distribution on correlation matrices, handled through the Cholesky
//! factor and the vine of canonical partial correlations (CPCs).
//!
//! A correlation factor L is parameterised by CPCs z_{ij} ∈ (−1, 1) for
//! i > j, with row construction
//!
//! ```text
//! L_{i1} = z_{i1},   L_{ij} = z_{ij}·Π_{k<j}√(1−z_{ik}²),   L_{ii} = Π_{k<i}√(1−z_{ik}²).
//! ```
//!
//! Under LKJ(φ), the CPC in column j (1-based vine level) is an independent
//! shifted Beta(b_j, b_j) variable on (−1, 1) with b_j = φ + (m−1−j)/2. This
//! yields both an exact sampler and the exact φ-dependent normalising
//! constant of the Cholesky-parameterised density
//!
//! ```text
//! log p(L; φ) = Σ_{i=2}^{m} (m − i + 2φ − 2)·ln L_{ii} + ln c_m(φ),
//! ln c_m(φ) = −Σ_{j=1}^{m−1} (m−j)·[(2b_j − 1)·ln 2 + ln B(b_j, b_j)].
//! ```

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use statrs::function::beta::ln_beta;

use super::PriorError;

/// Beta shape b_j = φ + (m − 1 − j)/2 for the CPCs at vine level `j`
/// (1-based column index).
pub fn cpc_beta_shape(m: usize, level: usize, shape: f64) -> f64 {
    shape + (m as f64 - 1.0 - level as f64) / 2.0
}

/// Builds the lower-triangular correlation factor from the strictly-lower
/// CPC entries, supplied row-major: (z_21), (z_31, z_32), …
pub fn build_chol_from_cpcs(m: usize, cpcs: &[f64]) -> Result<Array2<f64>, PriorError> {
    let expected = m * (m - 1) / 2;
    if cpcs.len() != expected {
        return Err(PriorError::DimensionMismatch {
            expected,
            got: cpcs.len(),
        });
    }
    let mut l = Array2::<f64>::zeros((m, m));
    l[[0, 0]] = 1.0;
    let mut idx = 0;
    for i in 1..m {
        let mut remainder: f64 = 1.0; // Π_{k<j} (1 − z_{ik}²)
        for j in 0..i {
            let z = cpcs[idx];
            idx += 1;
            l[[i, j]] = z * remainder.sqrt();
            remainder *= 1.0 - z * z;
        }
        l[[i, i]] = remainder.max(0.0).sqrt();
    }
    Ok(l)
}

/// Joint log-density of the CPC vector under LKJ(`shape`): the sum of
/// independent shifted-Beta log densities, exactly normalised in `shape`.
pub fn cpc_log_density(m: usize, cpcs: &[f64], shape: f64) -> Result<f64, PriorError> {
    let expected = m * (m - 1) / 2;
    if cpcs.len() != expected {
        return Err(PriorError::DimensionMismatch {
            expected,
            got: cpcs.len(),
        });
    }
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(PriorError::InvalidLkj { m, shape });
    }
    let ln2 = std::f64::consts::LN_2;
    let mut total = 0.0;
    let mut idx = 0;
    for i in 1..m {
        for j in 0..i {
            let z = cpcs[idx];
            idx += 1;
            let b = cpc_beta_shape(m, j + 1, shape);
            // density on (−1,1): (1−z²)^{b−1} / (2^{2b−1} B(b,b))
            total += (b - 1.0) * (1.0 - z * z).ln() - (2.0 * b - 1.0) * ln2 - ln_beta(b, b);
        }
    }
    Ok(total)
}

/// Exact log normalising constant of the Cholesky-parameterised LKJ density.
pub fn lkj_log_normaliser(m: usize, shape: f64) -> Result<f64, PriorError> {
    if m < 1 || !(shape > 0.0) || !shape.is_finite() {
        return Err(PriorError::InvalidLkj { m, shape });
    }
    let ln2 = std::f64::consts::LN_2;
    let mut total = 0.0;
    for j in 1..m {
        let b = cpc_beta_shape(m, j, shape);
        total -= (m - j) as f64 * ((2.0 * b - 1.0) * ln2 + ln_beta(b, b));
    }
    Ok(total)
}

/// Log-density of the LKJ(`shape`) distribution over lower-triangular
/// Cholesky factors of correlation matrices, fully normalised:
/// Σ_{i=2}^{m} (m − i + 2φ − 2)·ln L_ii + ln c_m(φ).
pub fn lkj_chol_logpdf(l: &Array2<f64>, shape: f64) -> Result<f64, PriorError> {
    let m = l.nrows();
    if l.ncols() != m {
        return Err(PriorError::DimensionMismatch {
            expected: m,
            got: l.ncols(),
        });
    }
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(PriorError::InvalidLkj { m, shape });
    }
    let mut total = lkj_log_normaliser(m, shape)?;
    for i in 1..m {
        let diag = l[[i, i]];
        if diag <= 1e-12 {
            return Err(PriorError::SingularCorrelation { index: i });
        }
        total += (m as f64 - (i + 1) as f64 + 2.0 * shape - 2.0) * diag.ln();
    }
    Ok(total)
}

/// Draws the lower-triangular Cholesky factor of an LKJ(`shape`)-distributed
/// correlation matrix by the vine construction.
pub fn sample_lkj_chol<R: Rng + ?Sized>(
    m: usize,
    shape: f64,
    rng: &mut R,
) -> Result<Array2<f64>, PriorError> {
    if m < 2 || !(shape > 0.0) || !shape.is_finite() {
        return Err(PriorError::InvalidLkj { m, shape });
    }
    let n_cpcs = m * (m - 1) / 2;
    let mut cpcs = Vec::with_capacity(n_cpcs);
    for i in 1..m {
        for j in 0..i {
            let b = cpc_beta_shape(m, j + 1, shape);
            let beta = Beta::new(b, b).expect("validated shape");
            cpcs.push(2.0 * beta.sample(rng) - 1.0);
        }
    }
    build_chol_from_cpcs(m, &cpcs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{RngExt as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn correlation_from_chol(l: &Array2<f64>) -> Array2<f64> {
        let m = l.nrows();
        let mut r = Array2::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += l[[i, k]] * l[[j, k]];
                }
                r[[i, j]] = s;
            }
        }
        r
    }

    #[test]
    fn chol_rows_have_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &m in &[2usize, 3, 5, 8] {
            for &shape in &[0.5, 1.0, 5.0] {
                let l = sample_lkj_chol(m, shape, &mut rng).unwrap();
                let r = correlation_from_chol(&l);
                for i in 0..m {
                    assert_abs_diff_eq!(r[[i, i]], 1.0, epsilon = 1e-10);
                    for j in 0..m {
                        assert!(r[[i, j]].abs() <= 1.0 + 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn m2_shape1_correlation_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000usize;
        let mut rs: Vec<f64> = (0..n)
            .map(|_| sample_lkj_chol(2, 1.0, &mut rng).unwrap()[[1, 0]])
            .collect();
        rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let stat = crate::diagnostics::ks_statistic(&rs, |r| (r + 1.0) / 2.0);
        let p = crate::diagnostics::ks_p_value(stat, n);
        assert!(p > 0.01, "KS p-value {p}");
    }

    #[test]
    fn small_shape_piles_mass_at_the_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000usize;
        let edge_frac = |shape: f64, rng: &mut ChaCha8Rng| {
            (0..n)
                .filter(|_| sample_lkj_chol(2, shape, rng).unwrap()[[1, 0]].abs() > 0.9)
                .count() as f64
                / n as f64
        };
        let half = edge_frac(0.5, &mut rng);
        let one = edge_frac(1.0, &mut rng);
        let five = edge_frac(5.0, &mut rng);
        assert!(half > one + 0.02, "{half} vs {one}");
        assert!(one > five, "{one} vs {five}");
    }

    #[test]
    fn m2_marginal_density_matches_chi2() {
        // m=2 marginal of r under LKJ(φ) is ∝ (1−r²)^{φ−1}; χ² test of the
        // histogram against bin masses computed by quadrature.
        let n = 20_000usize;
        let bins = 20usize;
        let threshold = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.999);
        for (seed, shape) in [(10u64, 0.5), (11, 1.0), (12, 5.0)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut counts = vec![0usize; bins];
            for _ in 0..n {
                let r = sample_lkj_chol(2, shape, &mut rng).unwrap()[[1, 0]];
                let b = (((r + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
                counts[b] += 1;
            }
            // Bin masses of the Beta(φ, φ) law of (r+1)/2 via trapezoid sums.
            let density = |u: f64| {
                if u <= 0.0 || u >= 1.0 {
                    0.0
                } else {
                    ((shape - 1.0) * (u.ln() + (1.0 - u).ln()) - ln_beta(shape, shape)).exp()
                }
            };
            let mut chi2 = 0.0;
            for (b, &count) in counts.iter().enumerate() {
                let lo = b as f64 / bins as f64;
                let hi = (b + 1) as f64 / bins as f64;
                let steps = 400;
                let mut mass = 0.0;
                for s in 0..steps {
                    let a = lo + (hi - lo) * s as f64 / steps as f64;
                    let c = lo + (hi - lo) * (s + 1) as f64 / steps as f64;
                    mass += 0.5 * (density(a) + density(c)) * (c - a);
                }
                let expected = mass * n as f64;
                chi2 += (count as f64 - expected).powi(2) / expected;
            }
            assert!(chi2 < threshold, "χ² {chi2} ≥ {threshold} at φ={shape}");
        }
    }

    #[test]
    fn m3_level1_cpcs_are_raw_correlations() {
        // At m=3 the level-1 CPCs equal the matrix entries r_21 and r_31 and
        // follow Beta(φ+½, φ+½) on (−1,1); spot-check the moments.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shape = 2.0;
        let n = 20_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let l = sample_lkj_chol(3, shape, &mut rng).unwrap();
            let r = correlation_from_chol(&l);
            sum += r[[1, 0]];
            sumsq += r[[1, 0]] * r[[1, 0]];
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // 2X−1 with X ~ Beta(b,b), b = 2.5: mean 0, variance 4·b²/((2b)²(2b+1)) = 1/(2b+1).
        let b = cpc_beta_shape(3, 1, shape);
        assert_abs_diff_eq!(mean, 0.0, epsilon = 0.02);
        assert_relative_eq!(var, 1.0 / (2.0 * b + 1.0), max_relative = 0.05);
    }

    #[test]
    fn chol_logpdf_m2_closed_form() {
        // p(L; φ) at m=2 reduces to the shifted Beta(φ, φ) density of r.
        for &shape in &[0.5, 1.0, 3.7] {
            for &r in &[-0.8, -0.2, 0.0, 0.55] {
                let l = build_chol_from_cpcs(2, &[r]).unwrap();
                let lp = lkj_chol_logpdf(&l, shape).unwrap();
                let direct = (shape - 1.0) * (1.0 - r * r).ln()
                    - (2.0 * shape - 1.0) * std::f64::consts::LN_2
                    - ln_beta(shape, shape);
                assert_abs_diff_eq!(lp, direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn chol_logpdf_consistent_with_cpc_density() {
        // Change of variables: p_L(L) = p_z(z) / |det ∂L/∂z| with
        // |det ∂L/∂z| = Π_{i,j<i} Π_{k<j} √(1−z_{ik}²).
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for &m in &[3usize, 5] {
            for _ in 0..10 {
                let shape = 1.5;
                let n_cpcs = m * (m - 1) / 2;
                let cpcs: Vec<f64> = (0..n_cpcs).map(|_| rng.random::<f64>() * 1.6 - 0.8).collect();
                let l = build_chol_from_cpcs(m, &cpcs).unwrap();
                let mut log_jac = 0.0;
                let mut idx = 0;
                for i in 1..m {
                    let mut running = 0.0;
                    for _ in 0..i {
                        let z = cpcs[idx];
                        idx += 1;
                        log_jac += running;
                        running += 0.5 * (1.0 - z * z).ln();
                    }
                }
                let lhs = lkj_chol_logpdf(&l, shape).unwrap();
                let rhs = cpc_log_density(m, &cpcs, shape).unwrap() - log_jac;
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(sample_lkj_chol(1, 1.0, &mut rng).is_err());
        assert!(sample_lkj_chol(3, 0.0, &mut rng).is_err());
        assert!(sample_lkj_chol(3, f64::NAN, &mut rng).is_err());
        assert!(build_chol_from_cpcs(3, &[0.1, 0.2]).is_err());
        let l = Array2::eye(3);
        assert!(lkj_chol_logpdf(&l, -1.0).is_err());
    }

    #[test]
    fn identity_factor_logpdf_is_the_normaliser() {
        // ln L_ii = 0 for the identity, so only c_m(φ) remains.
        for &m in &[2usize, 4] {
            for &shape in &[0.5, 1.0, 2.0] {
                let l = Array2::eye(m);
                assert_abs_diff_eq!(
                    lkj_chol_logpdf(&l, shape).unwrap(),
                    lkj_log_normaliser(m, shape).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }
}
