//! Unconstrained parameterisations of the coefficient blocks, one per prior
//! family, with log-prior evaluation (including all transform Jacobians) and
//! exact reverse-mode gradients.
//!
//! Layouts (q = m(m−1)/2):
//! - P-spline K-penalty: [θ (m), ln λ^G] — centred coefficients.
//! - Horseshoe: [z (m), ln λ (m), ln λ^G]; θ_p = λ^G λ_p z_p.
//! - Multivariate horseshoe: [z (m), ln λ (m), ln λ^G, atanh-CPC (q), ln φ];
//!   θ = λ^G diag(λ) L z with L built from the canonical partial
//!   correlations.
//! - Inverse-Wishart: [z (m), ln diag C (m), strict lower C (q)];
//!   θ = C z with Σ = CCᵀ ~ IW(I, ψ).

use ndarray::{Array1, Array2};
use statrs::function::gamma::digamma;

use crate::linalg::invert_lower;
use crate::priors::{
    build_chol_from_cpcs, cpc_beta_shape, cpc_log_density, difference_penalty, half_cauchy_logpdf,
    log_inverse_wishart, CoefficientBlock, PriorError, PriorFamily,
};

const LN_2PI: f64 = 1.8378770664093453;
/// Log-scale parameters beyond this are rejected outright; e^40 is far past
/// any scale the likelihood can support.
const LOG_SCALE_GUARD: f64 = 40.0;

/// Number of unconstrained parameters for a block of `m` coefficients.
pub fn block_dim(family: &PriorFamily, m: usize) -> usize {
    let q = m * (m - 1) / 2;
    match family {
        PriorFamily::PSplineK => m + 1,
        PriorFamily::Horseshoe => 2 * m + 1,
        PriorFamily::MultivariateHorseshoe => 2 * m + 2 + q,
        PriorFamily::InverseWishart { .. } => 2 * m + q,
    }
}

/// d/dx of half_cauchy_logpdf(e^x) at scale value s = e^x.
fn half_cauchy_log_grad_times_scale(s: f64) -> f64 {
    -2.0 * s * s / (1.0 + s * s)
}

/// Evaluated block: coefficients, log prior (with Jacobians), and the
/// intermediates the backward pass needs.
pub(crate) struct BlockEval {
    pub theta: Array1<f64>,
    pub logprior: f64,
    cache: Cache,
}

enum Cache {
    PSpline {
        k_theta: Array1<f64>,
        lambda: f64,
        quad: f64,
    },
    Horseshoe {
        scales: Vec<f64>, // λ^G λ_p
        lam: Vec<f64>,
        lam_g: f64,
    },
    MvHorseshoe {
        lam: Vec<f64>,
        lam_g: f64,
        phi: f64,
        cpcs: Vec<f64>,
        l: Array2<f64>,
    },
    InvWishart {
        c: Array2<f64>,
    },
}

/// A block specification: family, size, and any fixed structures.
#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub family: PriorFamily,
    pub m: usize,
    penalty: Option<Array2<f64>>,
}

impl BlockSpec {
    pub fn new(family: PriorFamily, m: usize) -> Result<Self, PriorError> {
        family.validate(m)?;
        let penalty = match family {
            PriorFamily::PSplineK => Some(difference_penalty(m)),
            _ => None,
        };
        Ok(Self {
            family,
            m,
            penalty,
        })
    }

    pub fn dim(&self) -> usize {
        block_dim(&self.family, self.m)
    }

    /// A neutral starting point: zero coefficients, unit scales, identity
    /// correlation.
    pub fn init(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Evaluates θ and the log prior; `None` signals a rejected state
    /// (numerical guard or singular factor), mapped to −∞ by the caller.
    pub(crate) fn eval(&self, params: &[f64]) -> Option<BlockEval> {
        debug_assert_eq!(params.len(), self.dim());
        let m = self.m;
        match self.family {
            PriorFamily::PSplineK => {
                let g = params[m];
                if g.abs() > LOG_SCALE_GUARD {
                    return None;
                }
                let lambda = g.exp();
                let theta = Array1::from_iter(params[..m].iter().cloned());
                let k = self.penalty.as_ref().expect("penalty present");
                let k_theta = k.dot(&theta);
                let quad = theta.dot(&k_theta);
                let logprior =
                    -quad / (2.0 * lambda * lambda) + half_cauchy_logpdf(lambda) + g;
                Some(BlockEval {
                    theta,
                    logprior,
                    cache: Cache::PSpline {
                        k_theta,
                        lambda,
                        quad,
                    },
                })
            }
            PriorFamily::Horseshoe => {
                let (z, rest) = params.split_at(m);
                let (u, g) = rest.split_at(m);
                let g = g[0];
                if g.abs() > LOG_SCALE_GUARD || u.iter().any(|v| v.abs() > LOG_SCALE_GUARD) {
                    return None;
                }
                let lam_g = g.exp();
                let lam: Vec<f64> = u.iter().map(|&v| v.exp()).collect();
                let scales: Vec<f64> = lam.iter().map(|&l| lam_g * l).collect();
                let theta = Array1::from_iter(z.iter().zip(&scales).map(|(&zp, &s)| s * zp));
                let mut logprior = -0.5 * z.iter().map(|&v| v * v).sum::<f64>()
                    - 0.5 * m as f64 * LN_2PI;
                for (&lp, &up) in lam.iter().zip(u) {
                    logprior += half_cauchy_logpdf(lp) + up;
                }
                logprior += half_cauchy_logpdf(lam_g) + g;
                Some(BlockEval {
                    theta,
                    logprior,
                    cache: Cache::Horseshoe { scales, lam, lam_g },
                })
            }
            PriorFamily::MultivariateHorseshoe => {
                let q = m * (m - 1) / 2;
                let (z, rest) = params.split_at(m);
                let (u, rest) = rest.split_at(m);
                let g = rest[0];
                let w = &rest[1..1 + q];
                let h = rest[1 + q];
                if g.abs() > LOG_SCALE_GUARD
                    || h.abs() > LOG_SCALE_GUARD
                    || u.iter().any(|v| v.abs() > LOG_SCALE_GUARD)
                {
                    return None;
                }
                let lam_g = g.exp();
                let phi = h.exp();
                let lam: Vec<f64> = u.iter().map(|&v| v.exp()).collect();
                let cpcs: Vec<f64> = w.iter().map(|&v| v.tanh()).collect();
                let l = build_chol_from_cpcs(m, &cpcs).ok()?;
                if l.diag().iter().any(|&d| d <= 1e-150) {
                    return None;
                }
                let zv = Array1::from_iter(z.iter().cloned());
                let v = l.dot(&zv);
                let theta =
                    Array1::from_iter(v.iter().zip(&lam).map(|(&vp, &lp)| lam_g * lp * vp));
                let mut logprior = -0.5 * z.iter().map(|&x| x * x).sum::<f64>()
                    - 0.5 * m as f64 * LN_2PI;
                for (&lp, &up) in lam.iter().zip(u) {
                    logprior += half_cauchy_logpdf(lp) + up;
                }
                logprior += half_cauchy_logpdf(lam_g) + g;
                logprior += cpc_log_density(m, &cpcs, phi).ok()?;
                // tanh Jacobian dc/dw = 1 − c²
                logprior += cpcs.iter().map(|&c| (1.0 - c * c).ln()).sum::<f64>();
                logprior += half_cauchy_logpdf(phi) + h;
                Some(BlockEval {
                    theta,
                    logprior,
                    cache: Cache::MvHorseshoe {
                        lam,
                        lam_g,
                        phi,
                        cpcs,
                        l,
                    },
                })
            }
            PriorFamily::InverseWishart { psi } => {
                let (z, rest) = params.split_at(m);
                let (d, low) = rest.split_at(m);
                if d.iter().any(|v| v.abs() > LOG_SCALE_GUARD) {
                    return None;
                }
                let mut c = Array2::<f64>::zeros((m, m));
                let mut idx = 0;
                for i in 0..m {
                    c[[i, i]] = d[i].exp();
                    for j in 0..i {
                        c[[i, j]] = low[idx];
                        idx += 1;
                    }
                }
                let zv = Array1::from_iter(z.iter().cloned());
                let theta = c.dot(&zv);
                let mut logprior = -0.5 * z.iter().map(|&x| x * x).sum::<f64>()
                    - 0.5 * m as f64 * LN_2PI;
                logprior += log_inverse_wishart(&c, psi).ok()?;
                // |dΣ/dC| = 2^m Π C_ii^{m−i} (0-based) and dC_ii/dd_i = C_ii
                logprior += m as f64 * std::f64::consts::LN_2;
                for (i, &di) in d.iter().enumerate() {
                    logprior += (m - i) as f64 * di + di;
                }
                Some(BlockEval {
                    theta,
                    logprior,
                    cache: Cache::InvWishart { c },
                })
            }
        }
    }

    /// Adds ∂(log posterior)/∂params to `grad`, given the likelihood's
    /// ∂/∂θ and the cached forward pass.
    pub(crate) fn backprop(
        &self,
        params: &[f64],
        eval: &BlockEval,
        dl_dtheta: &[f64],
        grad: &mut [f64],
    ) {
        debug_assert_eq!(grad.len(), self.dim());
        let m = self.m;
        match (&self.family, &eval.cache) {
            (
                PriorFamily::PSplineK,
                Cache::PSpline {
                    k_theta,
                    lambda,
                    quad,
                },
            ) => {
                let inv_l2 = 1.0 / (lambda * lambda);
                for p in 0..m {
                    grad[p] += dl_dtheta[p] - k_theta[p] * inv_l2;
                }
                grad[m] +=
                    quad * inv_l2 + half_cauchy_log_grad_times_scale(*lambda) + 1.0;
            }
            (PriorFamily::Horseshoe, Cache::Horseshoe { scales, lam, lam_g }) => {
                let z = &params[..m];
                let mut g_acc = 0.0;
                for p in 0..m {
                    let dth = dl_dtheta[p];
                    let theta_p = eval.theta[p];
                    grad[p] += dth * scales[p] - z[p];
                    grad[m + p] +=
                        dth * theta_p + half_cauchy_log_grad_times_scale(lam[p]) + 1.0;
                    g_acc += dth * theta_p;
                }
                grad[2 * m] += g_acc + half_cauchy_log_grad_times_scale(*lam_g) + 1.0;
            }
            (
                PriorFamily::MultivariateHorseshoe,
                Cache::MvHorseshoe {
                    lam,
                    lam_g,
                    phi,
                    cpcs,
                    l,
                },
            ) => {
                let q = m * (m - 1) / 2;
                let z = &params[..m];
                // dl/dv_i for v = Lz
                let dl_dv: Vec<f64> = (0..m).map(|i| dl_dtheta[i] * lam_g * lam[i]).collect();
                // z: Lᵀ dl_dv − z
                for k in 0..m {
                    let mut acc = 0.0;
                    for i in k..m {
                        acc += l[[i, k]] * dl_dv[i];
                    }
                    grad[k] += acc - z[k];
                }
                // scales
                let mut g_acc = 0.0;
                for p in 0..m {
                    let dth = dl_dtheta[p];
                    let theta_p = eval.theta[p];
                    grad[m + p] +=
                        dth * theta_p + half_cauchy_log_grad_times_scale(lam[p]) + 1.0;
                    g_acc += dth * theta_p;
                }
                grad[2 * m] += g_acc + half_cauchy_log_grad_times_scale(*lam_g) + 1.0;
                // CPC entries, row by row
                let mut idx = 0;
                let mut dphi_acc = 0.0;
                for i in 1..m {
                    // suffix sums T_k = Σ_{j=k..i} L_ij z_j (j = i is the diagonal)
                    let mut suffix = vec![0.0; i + 2];
                    suffix[i] = l[[i, i]] * z[i];
                    for k in (0..i).rev() {
                        suffix[k] = l[[i, k]] * z[k] + suffix[k + 1];
                    }
                    let mut prefix = 1.0; // Π_{k'<k} √(1−c²)
                    for k in 0..i {
                        let c = cpcs[idx];
                        let s2 = 1.0 - c * c;
                        let b = cpc_beta_shape(m, k + 1, *phi);
                        // likelihood path through v_i, then the prior terms
                        // (shifted-Beta exponent and tanh Jacobian combine
                        // to −2cb in w-space)
                        grad[2 * m + 1 + idx] +=
                            dl_dv[i] * (prefix * z[k] * s2 - c * suffix[k + 1]) - 2.0 * c * b;
                        dphi_acc += s2.ln() - 2.0 * std::f64::consts::LN_2
                            - 2.0 * digamma(b)
                            + 2.0 * digamma(2.0 * b);
                        prefix *= s2.sqrt();
                        idx += 1;
                    }
                }
                grad[2 * m + 1 + q] +=
                    dphi_acc * phi + half_cauchy_log_grad_times_scale(*phi) + 1.0;
            }
            (PriorFamily::InverseWishart { psi }, Cache::InvWishart { c }) => {
                let z = &params[..m];
                // z: Cᵀ dl_dθ − z
                for k in 0..m {
                    let mut acc = 0.0;
                    for i in k..m {
                        acc += c[[i, k]] * dl_dtheta[i];
                    }
                    grad[k] += acc - z[k];
                }
                // ∇_C of −½tr(Σ⁻¹) is Σ⁻²C on the lower triangle
                let w = invert_lower(c);
                let sigma_inv = w.t().dot(&w);
                let s2c = sigma_inv.dot(&sigma_inv).dot(c);
                for i in 0..m {
                    grad[m + i] += dl_dtheta[i] * z[i] * c[[i, i]]
                        - (psi + m as f64 + 1.0)
                        + s2c[[i, i]] * c[[i, i]]
                        + (m - i) as f64
                        + 1.0;
                }
                let mut idx = 0;
                for i in 0..m {
                    for j in 0..i {
                        grad[2 * m + idx] += dl_dtheta[i] * z[j] + s2c[[i, j]];
                        idx += 1;
                    }
                }
            }
            _ => unreachable!("cache matches family"),
        }
    }

    /// Materialises the constrained [`CoefficientBlock`] for reporting.
    pub fn to_coefficient_block(&self, params: &[f64]) -> Option<CoefficientBlock> {
        let eval = self.eval(params)?;
        let m = self.m;
        let block = match self.family {
            PriorFamily::PSplineK => CoefficientBlock {
                theta: eval.theta,
                local_scales: None,
                global_scale: params[m].exp(),
                corr_chol: None,
                lkj_shape: None,
                cov: None,
            },
            PriorFamily::Horseshoe => CoefficientBlock {
                theta: eval.theta,
                local_scales: Some(Array1::from_iter(
                    params[m..2 * m].iter().map(|&u| u.exp()),
                )),
                global_scale: params[2 * m].exp(),
                corr_chol: None,
                lkj_shape: None,
                cov: None,
            },
            PriorFamily::MultivariateHorseshoe => {
                let q = m * (m - 1) / 2;
                let cpcs: Vec<f64> =
                    params[2 * m + 1..2 * m + 1 + q].iter().map(|&w| w.tanh()).collect();
                let l = build_chol_from_cpcs(m, &cpcs).ok()?;
                CoefficientBlock {
                    theta: eval.theta,
                    local_scales: Some(Array1::from_iter(
                        params[m..2 * m].iter().map(|&u| u.exp()),
                    )),
                    global_scale: params[2 * m].exp(),
                    corr_chol: Some(l),
                    lkj_shape: Some(params[2 * m + 1 + q].exp()),
                    cov: None,
                }
            }
            PriorFamily::InverseWishart { .. } => {
                let mut c = Array2::<f64>::zeros((m, m));
                let mut idx = 0;
                for i in 0..m {
                    c[[i, i]] = params[m + i].exp();
                    for j in 0..i {
                        c[[i, j]] = params[2 * m + idx];
                        idx += 1;
                    }
                }
                let cov = c.dot(&c.t());
                CoefficientBlock {
                    theta: eval.theta,
                    local_scales: None,
                    global_scale: 1.0,
                    corr_chol: None,
                    lkj_shape: None,
                    cov: Some(cov),
                }
            }
        };
        Some(block)
    }

    /// Human-readable names for the block's unconstrained parameters,
    /// prefixed by the block label.
    pub fn param_names(&self, label: &str) -> Vec<String> {
        let m = self.m;
        let mut names = Vec::with_capacity(self.dim());
        match self.family {
            PriorFamily::PSplineK => {
                for p in 0..m {
                    names.push(format!("{label}.theta[{p}]"));
                }
                names.push(format!("{label}.log_global_scale"));
            }
            PriorFamily::Horseshoe => {
                for p in 0..m {
                    names.push(format!("{label}.z[{p}]"));
                }
                for p in 0..m {
                    names.push(format!("{label}.log_local_scale[{p}]"));
                }
                names.push(format!("{label}.log_global_scale"));
            }
            PriorFamily::MultivariateHorseshoe => {
                for p in 0..m {
                    names.push(format!("{label}.z[{p}]"));
                }
                for p in 0..m {
                    names.push(format!("{label}.log_local_scale[{p}]"));
                }
                names.push(format!("{label}.log_global_scale"));
                for i in 1..m {
                    for j in 0..i {
                        names.push(format!("{label}.cpc[{i},{j}]"));
                    }
                }
                names.push(format!("{label}.log_lkj_shape"));
            }
            PriorFamily::InverseWishart { .. } => {
                for p in 0..m {
                    names.push(format!("{label}.z[{p}]"));
                }
                for i in 0..m {
                    names.push(format!("{label}.log_chol_diag[{i}]"));
                }
                for i in 1..m {
                    for j in 0..i {
                        names.push(format!("{label}.chol[{i},{j}]"));
                    }
                }
            }
        }
        names
    }
}
