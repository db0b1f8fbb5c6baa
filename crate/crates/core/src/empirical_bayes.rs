//! Marginal likelihood of the prior regularity and its maximizer.
//!
//! Under `μ ~ ⊗ N(0, i^{-1-2α})` the data are `Y_i ~ N(0, i^{-1-2α} κ_i² + 1/n)`.
//! Relative to `⊗ N(0, 1/n)` the log-likelihood of `α` is
//!
//! ```text
//! ℓ_n(α) = -1/2 Σ_i [ log(1 + n/a_i) - n² Y_i² / (a_i + n) ],   a_i = i^{1+2α} κ_i^{-2},
//! ```
//!
//! truncated at the observation's `N`. Every term is evaluated through
//! `r_i = n / a_i = exp(ln n - (1+2α) ln i + 2 ln κ_i)` so that large `α`
//! drives `r_i` to zero instead of overflowing `a_i`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_posterior::{posterior, CoordinatePosterior};
use crate::numeric::golden_section_max;
use crate::sequence_model::{Observation, Spectrum};

/// Grid resolution used when none is specified.
pub const DEFAULT_GRID_SIZE: usize = 200;
/// Golden-section tolerance in `α` used when none is specified.
pub const DEFAULT_REFINE_TOL: f64 = 1e-4;

/// Precomputed terms for repeated evaluation of `ℓ_n` and its derivative.
#[derive(Debug, Clone)]
pub struct LikelihoodEvaluator {
    ln_n: f64,
    n: f64,
    ln_i: Vec<f64>,
    two_ln_kappa: Vec<f64>,
    n_y_sq: Vec<f64>,
}

impl LikelihoodEvaluator {
    pub fn new(obs: &Observation) -> Result<Self> {
        obs.validate()?;
        let spec = obs.spectrum()?;
        Ok(Self::from_parts(obs.n, &obs.y, &spec))
    }

    pub(crate) fn from_parts(n: f64, y: &[f64], spec: &Spectrum) -> Self {
        LikelihoodEvaluator {
            ln_n: n.ln(),
            n,
            ln_i: spec.ln_i.clone(),
            two_ln_kappa: spec.ln_kappa.iter().map(|l| 2.0 * l).collect(),
            n_y_sq: y.iter().map(|v| n * v * v).collect(),
        }
    }

    /// `n / a_i` at regularity `alpha`.
    #[inline]
    fn ratio(&self, k: usize, alpha: f64) -> f64 {
        (self.ln_n - (1.0 + 2.0 * alpha) * self.ln_i[k] + self.two_ln_kappa[k]).exp()
    }

    /// `ℓ_n(α)`, summed in ascending coordinate order.
    pub fn log_likelihood(&self, alpha: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..self.ln_i.len() {
            let r = self.ratio(k, alpha);
            // n/(a+n) = r/(1+r)
            let w = r / (1.0 + r);
            total += r.ln_1p() - self.n_y_sq[k] * w;
        }
        -0.5 * total
    }

    /// `M_n(α) = dℓ_n/dα = Σ ln i [ n/(a_i+n) - n² Y_i² a_i/(a_i+n)² ]`.
    pub fn score(&self, alpha: f64) -> f64 {
        let mut total = 0.0;
        // i = 1 contributes nothing (ln 1 = 0).
        for k in 1..self.ln_i.len() {
            let r = self.ratio(k, alpha);
            let w = r / (1.0 + r);
            let v = 1.0 / (1.0 + r);
            total += self.ln_i[k] * (w - self.n_y_sq[k] * w * v);
        }
        total
    }

    pub fn n(&self) -> f64 {
        self.n
    }
}

/// `ℓ_n(α)` for the observation, truncated at its `N`.
pub fn log_likelihood(alpha: f64, obs: &Observation) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(LikelihoodEvaluator::new(obs)?.log_likelihood(alpha))
}

/// Derivative of [`log_likelihood`] in `α`.
pub fn score(alpha: f64, obs: &Observation) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(LikelihoodEvaluator::new(obs)?.score(alpha))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("alpha must be a finite value >= 0, got {alpha}")))
    }
}

/// `ℓ_n` sampled on a uniform grid over `[0, log n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodCurve {
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    pub argmax_index: usize,
}

impl LikelihoodCurve {
    pub fn max_value(&self) -> f64 {
        self.values[self.argmax_index]
    }

    /// `exp(ℓ_n - max ℓ_n)` at every grid point.
    pub fn normalized(&self) -> Vec<f64> {
        let top = self.max_value();
        self.values.iter().map(|v| (v - top).exp()).collect()
    }

    /// CSV with columns `alpha,loglik,normalized`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "loglik", "normalized"])?;
        for ((a, v), z) in self.alphas.iter().zip(&self.values).zip(self.normalized()) {
            w.write_record([a.to_string(), v.to_string(), z.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

/// Result of maximizing `ℓ_n` over `[0, log n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbFit {
    pub alpha_hat: f64,
    pub loglik: f64,
    pub curve: LikelihoodCurve,
    /// Whether golden-section refinement improved on the best grid point.
    pub refined: bool,
}

/// Maximizes `ℓ_n` on `[0, log n]`.
///
/// The likelihood is evaluated on `grid_size` equispaced points including both
/// endpoints. The best point (smallest `α` on ties) is then refined by
/// golden-section search over its two neighbouring cells, and the refined
/// value replaces it only if it is strictly larger.
pub fn fit(obs: &Observation, grid_size: usize, refine_tol: f64) -> Result<EbFit> {
    let eval = LikelihoodEvaluator::new(obs)?;
    fit_with(&eval, grid_size, refine_tol)
}

pub fn fit_default(obs: &Observation) -> Result<EbFit> {
    fit(obs, DEFAULT_GRID_SIZE, DEFAULT_REFINE_TOL)
}

pub(crate) fn fit_with(eval: &LikelihoodEvaluator, grid_size: usize, refine_tol: f64) -> Result<EbFit> {
    if grid_size < 16 {
        return Err(Error::config(format!("grid_size must be at least 16, got {grid_size}")));
    }
    if !(refine_tol > 0.0 && refine_tol.is_finite()) {
        return Err(Error::config(format!("refine_tol must be positive, got {refine_tol}")));
    }
    if eval.n <= 1.0 {
        return Err(Error::config(format!(
            "the search interval [0, log n] needs n > 1, got n = {}",
            eval.n
        )));
    }
    let top = eval.n.ln();
    let last = grid_size - 1;
    let alphas: Vec<f64> = (0..grid_size).map(|k| top * k as f64 / last as f64).collect();
    let mut values = Vec::with_capacity(grid_size);
    for &a in &alphas {
        let v = eval.log_likelihood(a);
        if !v.is_finite() {
            return Err(Error::Numerical(format!("log-likelihood is {v} at alpha = {a}")));
        }
        values.push(v);
    }
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    let lo = alphas[best.saturating_sub(1)];
    let hi = alphas[(best + 1).min(last)];
    let (cand, cand_value) = golden_section_max(|a| eval.log_likelihood(a), lo, hi, refine_tol);
    let (alpha_hat, loglik, refined) = if cand_value > values[best] {
        (cand, cand_value, true)
    } else {
        (alphas[best], values[best], false)
    };
    Ok(EbFit {
        alpha_hat,
        loglik,
        curve: LikelihoodCurve {
            alphas,
            values,
            argmax_index: best,
        },
        refined,
    })
}

/// The empirical-Bayes posterior `Π_{α̂_n}(· | Y)`.
pub fn eb_posterior(obs: &Observation, fit: &EbFit) -> Result<CoordinatePosterior> {
    posterior(fit.alpha_hat, obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence_model::{simulate, ModelSpec, TruthSpec};

    fn obs(model: ModelSpec, n: f64, y: Vec<f64>) -> Observation {
        Observation::new(model, n, y, 0).unwrap()
    }

    #[test]
    fn single_coordinate_is_flat() {
        let o = obs(ModelSpec::ExactPower { p: 0.0 }, 1.0, vec![0.0]);
        for alpha in [0.0, 0.5, 3.0] {
            let v = log_likelihood(alpha, &o).unwrap();
            assert!((v + 0.5 * 2f64.ln()).abs() < 1e-15);
            assert_eq!(score(alpha, &o).unwrap(), 0.0);
        }
    }

    #[test]
    fn two_coordinate_hand_value() {
        // -1/2 [ln 2 + ln(1 + 1/8)] = -1/2 ln(9/4) = -ln(3/2)
        let o = obs(ModelSpec::ExactPower { p: 0.0 }, 1.0, vec![0.0, 0.0]);
        let v = log_likelihood(1.0, &o).unwrap();
        assert!((v + 1.5f64.ln()).abs() < 1e-15);
        assert!((v + 0.405_465_1).abs() < 1e-7);
    }

    #[test]
    fn zero_data_is_increasing_with_positive_score() {
        let o = obs(ModelSpec::Volterra, 1e6, vec![0.0; 50]);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..100 {
            let alpha = k as f64 * 0.1;
            let v = log_likelihood(alpha, &o).unwrap();
            assert!(v > prev);
            prev = v;
            let s = score(alpha, &o).unwrap();
            let direct: f64 = (2..=50)
                .map(|i| {
                    let i = i as f64;
                    let kappa = 1.0 / ((i - 0.5) * std::f64::consts::PI);
                    1e6 * i.ln() / (i.powf(1.0 + 2.0 * alpha) / (kappa * kappa) + 1e6)
                })
                .sum();
            assert!(s > 0.0);
            assert!((s - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn reverse_order_sum_agrees() {
        let o = simulate(&TruthSpec::SineDecay, &ModelSpec::Volterra, 1e7, 2000, 4).unwrap();
        let alpha = 0.9;
        let forward = log_likelihood(alpha, &o).unwrap();
        let kappa = o.model.kappas(2000).unwrap();
        let reversed: f64 = (0..2000)
            .rev()
            .map(|k| {
                let a = ((k + 1) as f64).powf(1.0 + 2.0 * alpha) / (kappa[k] * kappa[k]);
                -0.5 * ((1.0 + o.n / a).ln() - o.n * o.n * o.y[k] * o.y[k] / (a + o.n))
            })
            .sum();
        assert!((forward - reversed).abs() <= 1e-12 * forward.abs().max(1.0));
    }

    #[test]
    fn data_scaling_identity() {
        let base = simulate(&TruthSpec::SineDecay, &ModelSpec::Volterra, 1e5, 300, 8).unwrap();
        let c = 1.7;
        let scaled = Observation::new(base.model.clone(), base.n, base.y.iter().map(|v| c * v).collect(), 0).unwrap();
        let kappa = base.model.kappas(300).unwrap();
        for alpha in [0.0, 0.4, 1.3, 5.0] {
            let diff = log_likelihood(alpha, &scaled).unwrap() - log_likelihood(alpha, &base).unwrap();
            let quad: f64 = (0..300)
                .map(|k| {
                    let a = ((k + 1) as f64).powf(1.0 + 2.0 * alpha) / (kappa[k] * kappa[k]);
                    base.n * base.n * base.y[k] * base.y[k] / (a + base.n)
                })
                .sum();
            let expected = 0.5 * (c * c - 1.0) * quad;
            assert!(expected > 0.0);
            assert!((diff - expected).abs() <= 1e-9 * expected.max(1.0));
        }
    }

    #[test]
    fn fit_zero_data_hits_right_endpoint() {
        for n in [1e3, 1e8] {
            let o = obs(ModelSpec::Volterra, n, vec![0.0; 100]);
            let f = fit_default(&o).unwrap();
            assert_eq!(f.alpha_hat, n.ln());
            assert!(!f.refined);
        }
    }

    #[test]
    fn fit_single_coordinate_breaks_ties_left() {
        let o = obs(ModelSpec::ExactPower { p: 0.0 }, 100.0, vec![0.4]);
        let f = fit_default(&o).unwrap();
        assert_eq!(f.alpha_hat, 0.0);
        assert_eq!(f.curve.argmax_index, 0);
    }

    #[test]
    fn fit_validates_inputs() {
        let o = obs(ModelSpec::Volterra, 1e4, vec![0.1; 10]);
        assert!(matches!(fit(&o, 15, 1e-4), Err(Error::Config(_))));
        assert!(fit(&o, 16, 0.0).is_err());
        let small = obs(ModelSpec::Volterra, 0.5, vec![0.1; 10]);
        assert!(fit_default(&small).is_err());
    }

    #[test]
    fn curve_layout_and_refinement_bound() {
        let o = simulate(&TruthSpec::SineDecay, &ModelSpec::Volterra, 1e9, 1000, 12).unwrap();
        let f = fit(&o, 64, 1e-6).unwrap();
        let c = &f.curve;
        assert_eq!(c.alphas[0], 0.0);
        assert_eq!(*c.alphas.last().unwrap(), o.n.ln());
        assert!(c.alphas.windows(2).all(|w| w[0] < w[1]));
        assert!(c.values.iter().all(|v| v.is_finite()));
        assert!(f.loglik >= c.max_value());
        assert!((f.loglik - log_likelihood(f.alpha_hat, &o).unwrap()).abs() < 1e-12 * f.loglik.abs().max(1.0));
        // Near-stationarity of an interior refined maximum: the Newton step to
        // the root of the score is below the refinement tolerance. Roundoff in
        // ℓ_n (here of order 1e8) limits the attainable accuracy to about 1e-5.
        assert!(f.refined);
        let s = score(f.alpha_hat, &o).unwrap();
        let curvature = (score(f.alpha_hat + 1e-3, &o).unwrap() - score(f.alpha_hat - 1e-3, &o).unwrap()) / 2e-3;
        assert!((s / curvature).abs() < DEFAULT_REFINE_TOL);
    }

    #[test]
    fn normalized_curve_peaks_at_one() {
        let o = simulate(&TruthSpec::SineDecay, &ModelSpec::Volterra, 1e7, 500, 3).unwrap();
        let f = fit_default(&o).unwrap();
        let z = f.curve.normalized();
        assert_eq!(z[f.curve.argmax_index], 1.0);
        assert!(z.iter().all(|v| *v >= 0.0) && z.iter().all(|v| *v <= 1.0));
        let mut buf = Vec::new();
        f.curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("alpha,loglik,normalized\n"));
        assert_eq!(text.lines().count(), DEFAULT_GRID_SIZE + 1);
    }

    #[test]
    fn eb_posterior_is_plug_in() {
        let o = simulate(&TruthSpec::SineDecay, &ModelSpec::Volterra, 1e7, 500, 3).unwrap();
        let f = fit_default(&o).unwrap();
        assert_eq!(eb_posterior(&o, &f).unwrap(), posterior(f.alpha_hat, &o).unwrap());
        let zero = obs(ModelSpec::Volterra, 1e7, vec![0.0; 20]);
        let fz = fit_default(&zero).unwrap();
        assert!(eb_posterior(&zero, &fz).unwrap().means.iter().all(|m| *m == 0.0));
    }
}
