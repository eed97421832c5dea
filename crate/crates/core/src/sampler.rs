//! Metropolis-within-Gibbs sampling of `(β, σ², ρ)`.
//!
//! Each iteration draws `β` and `σ²` from their closed-form conditionals and
//! updates `ρ` with a symmetric random-walk Metropolis step. The proposal
//! scale is adapted in blocks during burn-in only and frozen afterwards.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FslmError, Result};
use crate::model::{
    beta_conditional_factor, bic, log_likelihood, rho_log_conditional, sigma2_conditional_params, FslmData, PriorSpec,
    Theta,
};
use crate::rng::{substream, FslmRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalKernel {
    /// `ρ' = ρ + cψ`, `ψ ~ N(0, 1)`.
    Normal,
    /// `ρ' = ρ + cu`, `u ~ U[-1, 1]`.
    Uniform,
}

impl std::str::FromStr for ProposalKernel {
    type Err = FslmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(ProposalKernel::Normal),
            "uniform" => Ok(ProposalKernel::Uniform),
            other => Err(FslmError::InvalidParameter(format!(
                "unknown proposal kernel {other:?} (expected normal or uniform)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MhConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub tuning_c: f64,
    pub kernel: ProposalKernel,
    pub adapt: bool,
    pub adapt_block: usize,
    pub target_acceptance: (f64, f64),
    pub seed: u64,
    /// Starting point; `None` starts from OLS with `ρ` at the support midpoint.
    pub init: Option<Theta>,
    /// Store every `thin`-th iteration.
    pub thin: usize,
    /// Skip the `ρ` update and hold it at its initial value.
    pub fix_rho: bool,
}

impl Default for MhConfig {
    fn default() -> Self {
        Self {
            n_iter: 20_000,
            burn_in: 5_000,
            tuning_c: 0.1,
            kernel: ProposalKernel::Normal,
            adapt: true,
            adapt_block: 100,
            target_acceptance: (0.40, 0.60),
            seed: 0,
            init: None,
            thin: 1,
            fix_rho: false,
        }
    }
}

impl MhConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.burn_in >= self.n_iter {
            return Err(FslmError::InvalidParameter(format!(
                "need 0 <= burn_in < n_iter, got burn_in = {}, n_iter = {}",
                self.burn_in, self.n_iter
            )));
        }
        if !(self.tuning_c > 0.0 && self.tuning_c.is_finite()) {
            return Err(FslmError::InvalidParameter(format!(
                "tuning constant must be positive, got {}",
                self.tuning_c
            )));
        }
        if self.adapt_block == 0 || self.thin == 0 {
            return Err(FslmError::InvalidParameter(
                "adapt_block and thin must be at least 1".into(),
            ));
        }
        let (lo, hi) = self.target_acceptance;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(FslmError::InvalidParameter(format!(
                "invalid target acceptance band ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Stored draws. Row `j` is iteration `(j + 1) * thin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub init: Theta,
    pub draws_beta: DMatrix<f64>,
    pub draws_sigma2: Vec<f64>,
    pub draws_rho: Vec<f64>,
    /// Whether any `ρ` move was accepted since the previous stored row.
    pub accepted: Vec<bool>,
    /// Accepted `ρ` moves per stored row (at most `thin`).
    pub accept_counts: Vec<u32>,
    pub thin: usize,
    /// Tuning constant in force during each adaptation block.
    pub tuning_trace: Vec<f64>,
    pub adapt_block: usize,
    pub burn_in: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws_rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws_rho.is_empty()
    }

    pub fn k(&self) -> usize {
        self.draws_beta.ncols()
    }

    pub fn theta(&self, j: usize) -> Theta {
        Theta {
            beta: self.draws_beta.row(j).transpose(),
            sigma2: self.draws_sigma2[j],
            rho: self.draws_rho[j],
        }
    }

    /// Tuning constant after burn-in.
    pub fn final_tuning(&self) -> f64 {
        *self.tuning_trace.last().expect("chain has at least one block")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub mean: Theta,
    pub std: Theta,
    /// `β_1 … β_k`, `σ²`, `ρ`, in that order.
    pub params: Vec<ParamSummary>,
    pub acceptance_rate: f64,
    pub log_likelihood: f64,
    pub bic: f64,
    pub n_draws: usize,
}

pub fn propose_rho<R: Rng + ?Sized>(rho_old: f64, c: f64, kernel: ProposalKernel, rng: &mut R) -> f64 {
    let step: f64 = match kernel {
        ProposalKernel::Normal => rng.sample(StandardNormal),
        ProposalKernel::Uniform => rng.random_range(-1.0..=1.0),
    };
    rho_old + c * step
}

/// `ln α = min(ln p(ρ') - ln p(ρ), 0)`; `-∞` for `ρ'` outside the support.
pub fn acceptance_log_prob(
    rho_new: f64,
    rho_old: f64,
    beta: &DVector<f64>,
    sigma2: f64,
    data: &FslmData,
    prior: &PriorSpec,
) -> Result<f64> {
    if !prior.rho_in_support(rho_new) {
        return Ok(f64::NEG_INFINITY);
    }
    let new = rho_log_conditional(rho_new, beta, sigma2, data, prior)?;
    let old = rho_log_conditional(rho_old, beta, sigma2, data, prior)?;
    Ok((new - old).min(0.0))
}

/// Widen the proposal by 10% above the band, shrink it below, keep it inside.
pub fn adapt_tuning(c: f64, block_acceptance: f64, target: (f64, f64)) -> f64 {
    if block_acceptance > target.1 {
        c * 1.1
    } else if block_acceptance < target.0 {
        c / 1.1
    } else {
        c
    }
}

fn default_init(data: &FslmData, prior: &PriorSpec) -> Result<Theta> {
    let (beta, s2) = data.ols()?;
    let (lo, hi) = prior.rho_support();
    Theta::new(beta, s2.max(1e-8), 0.5 * (lo + hi))
}

fn draw_beta(sigma2: f64, rho: f64, data: &FslmData, prior: &PriorSpec, rng: &mut FslmRng) -> Result<DVector<f64>> {
    // cov = σ² P⁻¹ with P = L Lᵀ, so mean + σ L⁻ᵀ ξ has that covariance.
    let (mean, chol) = beta_conditional_factor(sigma2, rho, data, prior)?;
    let xi = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let step = chol
        .l()
        .transpose()
        .solve_upper_triangular(&xi)
        .expect("Cholesky factor has positive diagonal");
    Ok(mean + step * sigma2.sqrt())
}

fn draw_inverse_gamma(shape: f64, scale: f64, rng: &mut FslmRng) -> Result<f64> {
    let gamma =
        Gamma::new(shape, 1.0).map_err(|e| FslmError::InvalidParameter(format!("inverse-gamma shape {shape}: {e}")))?;
    let g: f64 = gamma.sample(rng);
    let draw = scale / g;
    if !(draw > 0.0 && draw.is_finite()) {
        return Err(FslmError::Degenerate(format!(
            "inverse-gamma draw {draw} (shape {shape}, scale {scale})"
        )));
    }
    Ok(draw)
}

/// Run the sampler for `config.n_iter` iterations.
pub fn run_mwg(data: &FslmData, prior: &PriorSpec, config: &MhConfig) -> Result<Chain> {
    config.validate()?;
    if prior.k() != data.k() {
        return Err(FslmError::InvalidDimension(format!(
            "prior has {} coefficients for {} score columns",
            prior.k(),
            data.k()
        )));
    }
    let init = match &config.init {
        Some(theta) => {
            if theta.beta.len() != data.k() {
                return Err(FslmError::InvalidParameter("initial beta has the wrong length".into()));
            }
            Theta::new(theta.beta.clone(), theta.sigma2, theta.rho)?
        }
        None => default_init(data, prior)?,
    };
    if !prior.rho_in_support(init.rho) {
        return Err(FslmError::InvalidParameter(format!(
            "initial rho {} outside support {:?}",
            init.rho,
            prior.rho_support()
        )));
    }

    let k = data.k();
    let n_rows = config.n_iter / config.thin;
    let mut chain = Chain {
        init: init.clone(),
        draws_beta: DMatrix::zeros(n_rows, k),
        draws_sigma2: Vec::with_capacity(n_rows),
        draws_rho: Vec::with_capacity(n_rows),
        accepted: Vec::with_capacity(n_rows),
        accept_counts: Vec::with_capacity(n_rows),
        thin: config.thin,
        tuning_trace: Vec::with_capacity(config.n_iter.div_ceil(config.adapt_block)),
        adapt_block: config.adapt_block,
        burn_in: config.burn_in,
    };

    let mut rng = substream(config.seed, 0);
    let (a_shape, _) = sigma2_conditional_params(&init.beta, init.rho, data, prior)?;
    let mut sigma2 = init.sigma2;
    let mut rho = init.rho;
    let mut c = config.tuning_c;
    let mut block_accepts = 0usize;
    let mut group_accepts = 0u32;
    chain.tuning_trace.push(c);

    for iter in 1..=config.n_iter {
        let fail = |source: FslmError| FslmError::Sampler {
            iteration: iter,
            source: Box::new(source),
        };

        let beta = draw_beta(sigma2, rho, data, prior, &mut rng).map_err(fail)?;
        let scale = (data.residual_ss(&beta, rho) + 2.0 * prior.b()) / 2.0;
        sigma2 = draw_inverse_gamma(a_shape, scale, &mut rng).map_err(fail)?;

        if !config.fix_rho {
            let candidate = propose_rho(rho, c, config.kernel, &mut rng);
            let log_alpha = acceptance_log_prob(candidate, rho, &beta, sigma2, data, prior).map_err(fail)?;
            let u: f64 = rng.random();
            if log_alpha > u.ln() {
                rho = candidate;
                block_accepts += 1;
                group_accepts += 1;
            }
        }

        if iter % config.thin == 0 {
            let row = chain.draws_sigma2.len();
            chain.draws_beta.row_mut(row).copy_from(&beta.transpose());
            chain.draws_sigma2.push(sigma2);
            chain.draws_rho.push(rho);
            chain.accepted.push(group_accepts > 0);
            chain.accept_counts.push(group_accepts);
            group_accepts = 0;
        }

        if iter % config.adapt_block == 0 {
            if config.adapt && !config.fix_rho && iter <= config.burn_in {
                let rate = block_accepts as f64 / config.adapt_block as f64;
                c = adapt_tuning(c, rate, config.target_acceptance);
            }
            block_accepts = 0;
            if iter < config.n_iter {
                chain.tuning_trace.push(c);
            }
        }
    }
    Ok(chain)
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn describe(name: String, values: &[f64]) -> ParamSummary {
    let n = values.len() as f64;
    let rough = values.iter().sum::<f64>() / n;
    let mean = rough + values.iter().map(|v| v - rough).sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    ParamSummary {
        name,
        mean,
        std: var.sqrt(),
        q025: quantile(&sorted, 0.025),
        q50: quantile(&sorted, 0.5),
        q975: quantile(&sorted, 0.975),
    }
}

/// Posterior means, standard deviations and quantiles over stored rows
/// `burn_in..`, with the BIC evaluated at the posterior mean.
pub fn summarize(chain: &Chain, burn_in: usize, data: &FslmData) -> Result<PosteriorSummary> {
    if burn_in >= chain.len() {
        return Err(FslmError::EmptyChain);
    }
    let k = chain.k();
    let kept = chain.len() - burn_in;
    let mut params = Vec::with_capacity(k + 2);
    for j in 0..k {
        let col: Vec<f64> = chain.draws_beta.column(j).rows(burn_in, kept).iter().copied().collect();
        params.push(describe(format!("beta_{}", j + 1), &col));
    }
    params.push(describe("sigma2".into(), &chain.draws_sigma2[burn_in..]));
    params.push(describe("rho".into(), &chain.draws_rho[burn_in..]));

    let means: Vec<f64> = params.iter().map(|p| p.mean).collect();
    let stds: Vec<f64> = params.iter().map(|p| p.std).collect();
    let mean = Theta::from_slice(&means);
    let std = Theta::from_slice(&stds);

    let accepted: u64 = chain.accept_counts[burn_in..].iter().map(|&c| u64::from(c)).sum();
    let acceptance_rate = accepted as f64 / (kept * chain.thin) as f64;
    let ll = log_likelihood(&mean, data)?;
    let bic = bic(&mean, data)?;
    Ok(PosteriorSummary {
        mean,
        std,
        params,
        acceptance_rate,
        log_likelihood: ll,
        bic,
        n_draws: kept,
    })
}
