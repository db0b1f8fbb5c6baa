//! Hierarchical prior `∫ λ(α) Π_α dα` and a Metropolis-within-Gibbs sampler
//! for `(α, μ_1..μ_J)` given the data.
//!
//! Each sweep draws `μ^J | α, Y` exactly from the conjugate posterior and
//! then updates `α | μ^J` with one random-walk Metropolis-Hastings step. The
//! `α` target is proportional to `λ(α) p(μ^J | α)` with
//!
//! ```text
//! log p(μ^J | α) = Σ_{j≤J} [ (1/2 + α) log j - 1/2 j^{1+2α} μ_j² ] + const,
//! ```
//!
//! the omitted constant being free of `α`. Proposals are `N(α, σ²)` conditioned
//! on being positive, so `q(α'|α) = φ_σ(α' - α) / Φ(α/σ)` and the Hastings
//! correction `Φ(α/σ) / Φ(α'/σ)` enters the acceptance ratio.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gaussian_posterior::prior_precision;
use crate::numeric::{ln_normal_cdf, quantile};
use crate::sequence_model::{rng_from_seed, Observation};

/// Hyperprior density `λ` on `α ∈ (0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum HyperPrior {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    InverseGamma { shape: f64, scale: f64 },
}

impl Default for HyperPrior {
    fn default() -> Self {
        HyperPrior::Exponential { rate: 1.0 }
    }
}

impl HyperPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            HyperPrior::Exponential { rate } => *rate > 0.0 && rate.is_finite(),
            HyperPrior::Gamma { shape, rate } => *shape > 0.0 && *rate > 0.0 && shape.is_finite() && rate.is_finite(),
            HyperPrior::InverseGamma { shape, scale } => {
                *shape > 0.0 && *scale > 0.0 && shape.is_finite() && scale.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid hyperprior parameters: {self:?}")))
        }
    }

    /// `log λ(α)`; `-∞` for `α <= 0`.
    pub fn ln_density(&self, alpha: f64) -> f64 {
        if alpha <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            HyperPrior::Exponential { rate } => rate.ln() - rate * alpha,
            HyperPrior::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * alpha.ln() - rate * alpha
            }
            HyperPrior::InverseGamma { shape, scale } => {
                shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * alpha.ln() - scale / alpha
            }
        }
    }

    pub fn density(&self, alpha: f64) -> f64 {
        self.ln_density(alpha).exp()
    }

    /// Constants `(c_2, c_3, c_4)` with
    /// `c_4^{-1} α^{-c_3} e^{-c_2 α} <= λ(α) <= c_4 α^{-c_3} e^{-c_2 α}` for `α >= c1`.
    pub fn envelope(&self, c1: f64) -> (f64, f64, f64) {
        match *self {
            HyperPrior::Exponential { rate } => (rate, 0.0, rate.max(1.0 / rate)),
            HyperPrior::Gamma { shape, rate } => {
                let k = (shape * rate.ln() - ln_gamma(shape)).exp();
                (rate, 1.0 - shape, k.max(1.0 / k))
            }
            HyperPrior::InverseGamma { shape, scale } => {
                // λ(α) α^{shape+1} = K e^{-scale/α} ∈ [K e^{-scale/c1}, K]
                let k = (shape * scale.ln() - ln_gamma(shape)).exp();
                let low = k * (-scale / c1).exp();
                (0.0, shape + 1.0, k.max(1.0 / low))
            }
        }
    }
}

/// Settings for one Metropolis-within-Gibbs chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbConfig {
    /// Number of coefficients `μ_1..μ_J` carried by the chain.
    #[serde(rename = "J")]
    pub j: usize,
    pub iterations: usize,
    pub burn_in: usize,
    /// Standard deviation of the `α` random walk.
    pub proposal_sd: f64,
    pub seed: u64,
    #[serde(default = "default_initial_alpha")]
    pub initial_alpha: f64,
    /// Keep every `thin`-th post-burn-in `(α, μ^J)` draw; 0 keeps none.
    #[serde(default = "default_thin")]
    pub thin: usize,
    /// Test hook: hold `α` fixed at this value and skip the Metropolis step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_alpha: Option<f64>,
}

fn default_initial_alpha() -> f64 {
    1.0
}

fn default_thin() -> usize {
    100
}

/// Random-walk scale matched to the width of `α | μ^J`.
///
/// When `μ_j` is a draw at regularity `α`, the conditional log-density has
/// curvature close to `2 Σ_{j≤J} (log j)²`; the scale is `2.4` times its
/// inverse square root, floored at 0.001 and capped at `0.3 (1 ∨ log log n)`.
pub fn default_proposal_sd(n: f64, j: usize) -> f64 {
    let info: f64 = (2..=j).map(|k| 2.0 * (k as f64).ln().powi(2)).sum();
    let cap = 0.3 * n.ln().ln().max(1.0);
    if info <= 0.0 {
        return cap;
    }
    (2.4 / info.sqrt()).clamp(0.001, cap)
}

impl HbConfig {
    /// Defaults for an observation: `J = N`, 10% burn-in, thinning every 100.
    pub fn for_observation(obs: &Observation, iterations: usize, seed: u64) -> Self {
        let j = obs.truncation;
        HbConfig {
            j,
            iterations,
            burn_in: iterations / 10,
            proposal_sd: default_proposal_sd(obs.n, j),
            seed,
            initial_alpha: default_initial_alpha(),
            thin: default_thin(),
            pin_alpha: None,
        }
    }

    pub fn validate(&self, obs: &Observation) -> Result<()> {
        if self.j == 0 || self.j > obs.truncation {
            return Err(Error::config(format!(
                "J = {} must lie in 1..={} (the observation's N)",
                self.j, obs.truncation
            )));
        }
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::config(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if !(self.proposal_sd > 0.0 && self.proposal_sd.is_finite()) {
            return Err(Error::config(format!(
                "proposal_sd must be positive, got {}",
                self.proposal_sd
            )));
        }
        if !(self.initial_alpha > 0.0 && self.initial_alpha.is_finite()) {
            return Err(Error::config("initial_alpha must be positive"));
        }
        if let Some(a) = self.pin_alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config("pin_alpha must be positive"));
            }
        }
        Ok(())
    }
}

/// One retained joint draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinnedDraw {
    pub iteration: usize,
    pub alpha: f64,
    pub mu: Vec<f64>,
}

/// Output of [`run_mwg`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbChain {
    /// Post-burn-in `α` draws.
    pub alphas: Vec<f64>,
    /// Running mean of each `μ_j` over post-burn-in sweeps.
    pub mu_mean: Vec<f64>,
    /// Running sample variance of each `μ_j` over post-burn-in sweeps.
    pub mu_var: Vec<f64>,
    pub accepted: usize,
    pub proposed: usize,
    pub acceptance_rate: f64,
    pub thinned: Vec<ThinnedDraw>,
    pub config: HbConfig,
}

/// JSON summary of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbSummary {
    pub acceptance_rate: f64,
    pub alpha_mean: f64,
    pub alpha_quantiles: [f64; 3],
    pub mu_mean: Vec<f64>,
    pub mu_var: Vec<f64>,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal_sd: f64,
    #[serde(rename = "J")]
    pub j: usize,
    pub seed: u64,
}

impl HbChain {
    pub fn alpha_mean(&self) -> f64 {
        self.alphas.iter().sum::<f64>() / self.alphas.len() as f64
    }

    pub fn alpha_quantiles(&self, probs: &[f64]) -> Vec<f64> {
        let mut sorted = self.alphas.clone();
        sorted.sort_by(f64::total_cmp);
        probs.iter().map(|q| quantile(&sorted, *q)).collect()
    }

    /// Counts of `α` draws in `bins` equal cells over `(lo, hi]`; draws
    /// outside are ignored.
    pub fn alpha_histogram(&self, lo: f64, hi: f64, bins: usize) -> Vec<usize> {
        let mut counts = vec![0; bins];
        let width = (hi - lo) / bins as f64;
        for &a in &self.alphas {
            if a > lo && a <= hi {
                let b = (((a - lo) / width).ceil() as usize).clamp(1, bins) - 1;
                counts[b] += 1;
            }
        }
        counts
    }

    /// Centre of the fullest cell of width `bin_width` on `(0, max α]`.
    pub fn alpha_mode(&self, bin_width: f64) -> f64 {
        let top = self.alphas.iter().copied().fold(0.0, f64::max);
        let bins = ((top / bin_width).ceil() as usize).max(1);
        let hi = bins as f64 * bin_width;
        let counts = self.alpha_histogram(0.0, hi, bins);
        let mut best = 0;
        for (b, c) in counts.iter().enumerate() {
            if *c > counts[best] {
                best = b;
            }
        }
        (best as f64 + 0.5) * bin_width
    }

    pub fn summary(&self) -> HbSummary {
        let q = self.alpha_quantiles(&[0.025, 0.5, 0.975]);
        HbSummary {
            acceptance_rate: self.acceptance_rate,
            alpha_mean: self.alpha_mean(),
            alpha_quantiles: [q[0], q[1], q[2]],
            mu_mean: self.mu_mean.clone(),
            mu_var: self.mu_var.clone(),
            iterations: self.config.iterations,
            burn_in: self.config.burn_in,
            thin: self.config.thin,
            proposal_sd: self.config.proposal_sd,
            j: self.config.j,
            seed: self.config.seed,
        }
    }

    /// Single-column CSV of the post-burn-in `α` draws.
    pub fn write_alpha_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha"])?;
        for a in &self.alphas {
            w.write_record([a.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_alpha_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_alpha_csv(file)
    }
}

/// `Σ_{j≤J} [(1/2 + α) log j - 1/2 j^{1+2α} μ_j²]`.
pub fn log_conditional_mu_density(mu: &[f64], alpha: f64) -> f64 {
    mu.iter()
        .enumerate()
        .map(|(k, m)| {
            let ln_j = ((k + 1) as f64).ln();
            (0.5 + alpha) * ln_j - 0.5 * prior_precision(ln_j, alpha) * m * m
        })
        .sum()
}

/// Same sum with `j^{1+2α}` already tabulated.
fn log_conditional_from_precision(ln_j: &[f64], precision: &[f64], mu: &[f64], alpha: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..mu.len() {
        total += (0.5 + alpha) * ln_j[k] - 0.5 * precision[k] * mu[k] * mu[k];
    }
    total
}

/// `log q(α | α') - log q(α' | α)` for the positive-truncated normal walk.
fn ln_hastings_correction(alpha: f64, alpha_prop: f64, sd: f64) -> f64 {
    ln_normal_cdf(alpha / sd) - ln_normal_cdf(alpha_prop / sd)
}

fn combine_log_ratio(alpha: f64, alpha_prop: f64, ln_p_cur: f64, ln_p_prop: f64, hyper: &HyperPrior, sd: f64) -> f64 {
    hyper.ln_density(alpha_prop) - hyper.ln_density(alpha) + ln_p_prop - ln_p_cur
        + ln_hastings_correction(alpha, alpha_prop, sd)
}

/// Log of the Metropolis-Hastings ratio for moving `α → α'` with `μ^J` held fixed.
pub fn log_acceptance_ratio(alpha: f64, alpha_prop: f64, mu: &[f64], hyper: &HyperPrior, proposal_sd: f64) -> f64 {
    combine_log_ratio(
        alpha,
        alpha_prop,
        log_conditional_mu_density(mu, alpha),
        log_conditional_mu_density(mu, alpha_prop),
        hyper,
        proposal_sd,
    )
}

/// Accepts with probability `1 ∧ exp(log_ratio)`.
pub fn metropolis_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

/// Draws from `N(alpha, sd²)` conditioned on a positive outcome.
pub fn propose_alpha<R: Rng + ?Sized>(alpha: f64, sd: f64, rng: &mut R) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let cand = alpha + sd * z;
        if cand > 0.0 {
            return cand;
        }
    }
}

/// One Metropolis-Hastings update of `α` given `μ^J`.
pub fn mh_alpha_step<R: Rng + ?Sized>(
    alpha: f64,
    mu: &[f64],
    hyper: &HyperPrior,
    proposal_sd: f64,
    rng: &mut R,
) -> (f64, bool) {
    let cand = propose_alpha(alpha, proposal_sd, rng);
    let log_ratio = log_acceptance_ratio(alpha, cand, mu, hyper, proposal_sd);
    if metropolis_accept(log_ratio, rng) {
        (cand, true)
    } else {
        (alpha, false)
    }
}

/// Runs the Metropolis-within-Gibbs sampler.
pub fn run_mwg(obs: &Observation, hyper: &HyperPrior, cfg: &HbConfig) -> Result<HbChain> {
    obs.validate()?;
    hyper.validate()?;
    cfg.validate(obs)?;
    let j = cfg.j;
    let spec = obs.spectrum()?;
    let ln_j = &spec.ln_i[..j];
    // n κ_j² and n κ_j y_j are fixed across sweeps.
    let n_kappa_sq: Vec<f64> = spec.kappa[..j].iter().map(|k| obs.n * k * k).collect();
    let n_kappa_y: Vec<f64> = spec.kappa[..j].iter().zip(&obs.y).map(|(k, y)| obs.n * k * y).collect();

    let mut rng = rng_from_seed(cfg.seed);
    let mut alpha = cfg.pin_alpha.unwrap_or(cfg.initial_alpha);
    let mut precision: Vec<f64> = ln_j.iter().map(|l| prior_precision(*l, alpha)).collect();
    let mut proposal_precision = vec![0.0; j];
    let mut mu = vec![0.0; j];

    let kept = cfg.iterations - cfg.burn_in;
    let mut alphas = Vec::with_capacity(kept);
    let mut mean = vec![0.0; j];
    let mut m2 = vec![0.0; j];
    let mut thinned = Vec::new();
    let mut accepted = 0usize;
    let mut proposed = 0usize;

    for iter in 0..cfg.iterations {
        for k in 0..j {
            let denom = precision[k] + n_kappa_sq[k];
            let z: f64 = StandardNormal.sample(&mut rng);
            mu[k] = n_kappa_y[k] / denom + z / denom.sqrt();
        }

        if cfg.pin_alpha.is_none() {
            let cand = propose_alpha(alpha, cfg.proposal_sd, &mut rng);
            for k in 0..j {
                proposal_precision[k] = prior_precision(ln_j[k], cand);
            }
            let ln_p_cur = log_conditional_from_precision(ln_j, &precision, &mu, alpha);
            let ln_p_prop = log_conditional_from_precision(ln_j, &proposal_precision, &mu, cand);
            if ln_p_cur.is_nan() || ln_p_cur.is_infinite() {
                return Err(Error::Numerical(format!(
                    "log p(mu | alpha) = {ln_p_cur} at iteration {iter} (alpha = {alpha})"
                )));
            }
            if ln_p_prop.is_nan() || ln_p_prop == f64::INFINITY {
                return Err(Error::Numerical(format!(
                    "log p(mu | alpha') = {ln_p_prop} at iteration {iter} (alpha' = {cand})"
                )));
            }
            let log_ratio = combine_log_ratio(alpha, cand, ln_p_cur, ln_p_prop, hyper, cfg.proposal_sd);
            if log_ratio.is_nan() {
                return Err(Error::Numerical(format!("acceptance ratio is NaN at iteration {iter}")));
            }
            proposed += 1;
            if metropolis_accept(log_ratio, &mut rng) {
                accepted += 1;
                alpha = cand;
                std::mem::swap(&mut precision, &mut proposal_precision);
            }
        }

        if iter >= cfg.burn_in {
            alphas.push(alpha);
            let count = (iter - cfg.burn_in + 1) as f64;
            for k in 0..j {
                let delta = mu[k] - mean[k];
                mean[k] += delta / count;
                m2[k] += delta * (mu[k] - mean[k]);
            }
            if cfg.thin > 0 && (iter - cfg.burn_in).is_multiple_of(cfg.thin) {
                thinned.push(ThinnedDraw {
                    iteration: iter,
                    alpha,
                    mu: mu.clone(),
                });
            }
        }
    }

    let mu_var = if kept > 1 {
        m2.iter().map(|s| s / (kept - 1) as f64).collect()
    } else {
        vec![0.0; j]
    };
    let acceptance_rate = if proposed > 0 {
        accepted as f64 / proposed as f64
    } else {
        0.0
    };
    Ok(HbChain {
        alphas,
        mu_mean: mean,
        mu_var,
        accepted,
        proposed,
        acceptance_rate,
        thinned,
        config: cfg.clone(),
    })
}
