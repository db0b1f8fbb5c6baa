//! The inverse Gaussian sequence model `Y_i = κ_i μ_i + n^{-1/2} Z_i`.
//!
//! A [`ModelSpec`] fixes the singular values `κ_i` of the forward operator, a
//! [`TruthSpec`] generates the true coefficients, and [`simulate`] draws an
//! [`Observation`]. The Volterra example works in the cosine basis
//! `e_i(t) = √2 cos((i - 1/2)πt)` on `[0, 1]`.

use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper cap on the automatic truncation level.
pub const MAX_AUTO_TRUNCATION: usize = 100_000;

/// Seedable generator used for every simulation in the crate.
pub type SimRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Singular-value sequence of a mildly ill-posed diagonal operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelSpec {
    /// `κ_i = i^{-p}`.
    ExactPower { p: f64 },
    /// Integration operator on `[0, 1]`: `κ_i = 1 / ((i - 1/2)π)`, order 1.
    Volterra,
    /// Tabulated `κ_1..κ_len` with a declared order `p` and sandwich constant `c`.
    Explicit { kappas: Vec<f64>, p: f64, c: f64 },
}

impl ModelSpec {
    pub fn exact_power(p: f64) -> Result<Self> {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::config(format!("ill-posedness order must be >= 0, got {p}")));
        }
        Ok(ModelSpec::ExactPower { p })
    }

    /// Builds a tabulated operator, checking positivity and the sandwich
    /// `c^{-1} i^{-p} <= κ_i <= c i^{-p}` on every entry.
    pub fn explicit(kappas: Vec<f64>, p: f64, c: f64) -> Result<Self> {
        let model = ModelSpec::Explicit { kappas, p, c };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::ExactPower { p } => {
                if !(*p >= 0.0 && p.is_finite()) {
                    return Err(Error::config(format!("ill-posedness order must be >= 0, got {p}")));
                }
            }
            ModelSpec::Volterra => {}
            ModelSpec::Explicit { kappas, p, c } => {
                if !(*p >= 0.0 && p.is_finite()) {
                    return Err(Error::config(format!("ill-posedness order must be >= 0, got {p}")));
                }
                if !(*c >= 1.0 && c.is_finite()) {
                    return Err(Error::config(format!("sandwich constant must be >= 1, got {c}")));
                }
                if kappas.is_empty() {
                    return Err(Error::config("explicit operator needs at least one singular value"));
                }
                for (k, &kappa) in kappas.iter().enumerate() {
                    let i = (k + 1) as f64;
                    if !(kappa > 0.0 && kappa.is_finite()) {
                        return Err(Error::config(format!("κ_{} = {kappa} is not positive", k + 1)));
                    }
                    let scaled = kappa * i.powf(*p);
                    if scaled < 1.0 / c || scaled > *c {
                        return Err(Error::config(format!(
                            "κ_{} = {kappa} violates the sandwich with p = {p}, C = {c}",
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Declared ill-posedness order `p`.
    pub fn order(&self) -> f64 {
        match self {
            ModelSpec::ExactPower { p } => *p,
            ModelSpec::Volterra => 1.0,
            ModelSpec::Explicit { p, .. } => *p,
        }
    }

    /// Number of tabulated singular values, if the operator is finite.
    pub fn table_len(&self) -> Option<usize> {
        match self {
            ModelSpec::Explicit { kappas, .. } => Some(kappas.len()),
            _ => None,
        }
    }

    /// `κ_i` for `i >= 1`.
    pub fn kappa(&self, i: usize) -> Result<f64> {
        if i == 0 {
            return Err(Error::config("coordinates are indexed from 1"));
        }
        match self {
            ModelSpec::ExactPower { p } => Ok(if *p == 0.0 { 1.0 } else { (i as f64).powf(-p) }),
            ModelSpec::Volterra => Ok(1.0 / ((i as f64 - 0.5) * PI)),
            ModelSpec::Explicit { kappas, .. } => kappas.get(i - 1).copied().ok_or(Error::OutOfRange {
                index: i,
                len: kappas.len(),
            }),
        }
    }

    /// `κ_1..κ_len`.
    pub fn kappas(&self, len: usize) -> Result<Vec<f64>> {
        (1..=len).map(|i| self.kappa(i)).collect()
    }

    /// Smallest `C >= 1` with `C^{-1} i^{-p} <= κ_i <= C i^{-p}` for `i <= len`.
    ///
    /// For the Volterra operator this approaches π from below as `len` grows.
    pub fn sandwich_constant(&self, len: usize) -> Result<f64> {
        let p = self.order();
        let mut c: f64 = 1.0;
        for i in 1..=len {
            let scaled = self.kappa(i)? * (i as f64).powf(p);
            c = c.max(scaled).max(1.0 / scaled);
        }
        Ok(c)
    }

    /// Default truncation `min(ceil(n^{1/(1+2p)}), 10^5)`.
    pub fn auto_truncation(&self, n: f64) -> usize {
        let raw = n.powf(1.0 / (1.0 + 2.0 * self.order()));
        // Absorb rounding noise such as 1e12^{1/3} = 10000.000000000002.
        let level = (raw * (1.0 - 1e-12)).ceil();
        let capped = (level.max(1.0) as usize).min(MAX_AUTO_TRUNCATION);
        match self.table_len() {
            Some(len) => capped.min(len),
            None => capped,
        }
    }
}

/// Per-coordinate constants reused by the likelihood, posterior and sampler.
#[derive(Debug, Clone)]
pub(crate) struct Spectrum {
    pub ln_i: Vec<f64>,
    pub kappa: Vec<f64>,
    pub ln_kappa: Vec<f64>,
}

impl Spectrum {
    pub fn new(model: &ModelSpec, len: usize) -> Result<Self> {
        let kappa = model.kappas(len)?;
        let ln_kappa = kappa.iter().map(|k| k.ln()).collect();
        let ln_i = (1..=len).map(|i| (i as f64).ln()).collect();
        Ok(Spectrum { ln_i, kappa, ln_kappa })
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }
}

/// Rule generating the true coefficients `μ_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TruthSpec {
    /// Listed coefficients, zero beyond the list.
    Explicit {
        coefficients: Vec<f64>,
    },
    /// `μ_{0,i} = c i^{-1/2-β}`.
    PowerLaw {
        beta: f64,
        c: f64,
    },
    /// `μ_{0,i} = i^{-3/2} sin(i)`.
    SineDecay,
    /// `μ_{0,i} = c e^{-γ i}`.
    AnalyticDecay {
        gamma: f64,
        c: f64,
    },
    Zero,
}

impl TruthSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            TruthSpec::Explicit { coefficients } => {
                if coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::config("explicit truth has non-finite coefficients"));
                }
            }
            TruthSpec::PowerLaw { beta, c } => {
                if !(*beta > 0.0 && *c > 0.0 && beta.is_finite() && c.is_finite()) {
                    return Err(Error::config("power-law truth needs beta > 0 and c > 0"));
                }
            }
            TruthSpec::AnalyticDecay { gamma, c } => {
                if !(*gamma > 0.0 && *c > 0.0 && gamma.is_finite() && c.is_finite()) {
                    return Err(Error::config("analytic truth needs gamma > 0 and c > 0"));
                }
            }
            TruthSpec::SineDecay | TruthSpec::Zero => {}
        }
        Ok(())
    }

    /// `μ_{0,i}` for `i >= 1`.
    pub fn coefficient(&self, i: usize) -> f64 {
        let x = i as f64;
        match self {
            TruthSpec::Explicit { coefficients } => coefficients.get(i - 1).copied().unwrap_or(0.0),
            TruthSpec::PowerLaw { beta, c } => c * x.powf(-0.5 - beta),
            TruthSpec::SineDecay => x.powf(-1.5) * x.sin(),
            TruthSpec::AnalyticDecay { gamma, c } => c * (-gamma * x).exp(),
            TruthSpec::Zero => 0.0,
        }
    }

    /// `μ_{0,1..len}`.
    pub fn coefficients(&self, len: usize) -> Vec<f64> {
        (1..=len).map(|i| self.coefficient(i)).collect()
    }

    /// Sobolev regularity for the truths that have a natural one.
    pub fn regularity(&self) -> Option<f64> {
        match self {
            TruthSpec::PowerLaw { beta, .. } => Some(*beta),
            TruthSpec::SineDecay => Some(1.0),
            _ => None,
        }
    }
}

/// Observed coefficients `Y_1..Y_N` at noise precision `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub n: f64,
    #[serde(rename = "N")]
    pub truncation: usize,
    pub seed: u64,
    pub model: ModelSpec,
    pub y: Vec<f64>,
}

impl Observation {
    /// Wraps existing data, e.g. read from disk or built by hand in tests.
    pub fn new(model: ModelSpec, n: f64, y: Vec<f64>, seed: u64) -> Result<Self> {
        let obs = Observation {
            n,
            truncation: y.len(),
            seed,
            model,
            y,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(Error::config(format!(
                "noise precision n must be positive, got {}",
                self.n
            )));
        }
        if self.truncation == 0 {
            return Err(Error::config("truncation level N must be at least 1"));
        }
        if self.y.len() != self.truncation {
            return Err(Error::config(format!(
                "observation has {} coefficients but N = {}",
                self.y.len(),
                self.truncation
            )));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("observation contains non-finite coefficients"));
        }
        self.model.validate()?;
        if let Some(len) = self.model.table_len() {
            if len < self.truncation {
                return Err(Error::OutOfRange {
                    index: self.truncation,
                    len,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.truncation
    }

    pub fn is_empty(&self) -> bool {
        self.truncation == 0
    }

    pub(crate) fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::new(&self.model, self.truncation)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let obs: Observation = serde_json::from_str(s)?;
        obs.validate()?;
        Ok(obs)
    }
}

/// Draws `y_i = κ_i μ_{0,i} + n^{-1/2} z_i`, `i = 1..N`, from a generator
/// seeded with `seed`.
pub fn simulate(truth: &TruthSpec, model: &ModelSpec, n: f64, truncation: usize, seed: u64) -> Result<Observation> {
    truth.validate()?;
    model.validate()?;
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::config(format!("noise precision n must be positive, got {n}")));
    }
    if truncation == 0 {
        return Err(Error::config("truncation level N must be at least 1"));
    }
    let kappa = model.kappas(truncation)?;
    let sd = n.sqrt().recip();
    let mut rng = rng_from_seed(seed);
    let y = kappa
        .iter()
        .enumerate()
        .map(|(k, kappa)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            kappa * truth.coefficient(k + 1) + sd * z
        })
        .collect();
    Ok(Observation {
        n,
        truncation,
        seed,
        model: model.clone(),
        y,
    })
}

/// `Σ i^{2β} μ_i²`.
pub fn sobolev_norm_sq(mu: &[f64], beta: f64) -> f64 {
    mu.iter()
        .enumerate()
        .map(|(k, m)| ((k + 1) as f64).powf(2.0 * beta) * m * m)
        .sum()
}

/// `Σ e^{2γi} μ_i²`.
pub fn analytic_norm_sq(mu: &[f64], gamma: f64) -> f64 {
    mu.iter()
        .enumerate()
        .map(|(k, m)| (2.0 * gamma * (k + 1) as f64).exp() * m * m)
        .sum()
}

/// Cosine basis function `e_i(t) = √2 cos((i - 1/2)πt)`.
pub fn cosine_basis(i: usize, t: f64) -> f64 {
    SQRT_2 * ((i as f64 - 0.5) * PI * t).cos()
}

/// `f(t) = Σ_i μ_i e_i(t)` at each grid point, by direct summation.
pub fn synthesize_function(mu: &[f64], t_grid: &[f64]) -> Vec<f64> {
    t_grid
        .iter()
        .map(|&t| mu.iter().enumerate().map(|(k, m)| m * cosine_basis(k + 1, t)).sum())
        .collect()
}

/// Uniform grid of `points` values covering `[0, 1]`.
pub fn unit_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|k| k as f64 / (points - 1) as f64).collect(),
    }
}

/// Drift of the observed process, `∫_0^t ∫_0^s μ(u) du ds`, computed in
/// coefficient space for the Volterra operator.
///
/// With `f_i(t) = √2 sin((i - 1/2)πt)` the integration operator satisfies
/// `∫_0^t e_i = κ_i f_i(t)` and `∫_0^t f_i = κ_i (√2 - e_i(t))`, so the double
/// primitive of `Σ μ_i e_i` equals `Σ κ_i² μ_i (√2 - e_i(t))`.
pub fn volterra_forward_check(mu: &[f64], t: f64) -> f64 {
    mu.iter()
        .enumerate()
        .map(|(k, m)| {
            let kappa = 1.0 / ((k as f64 + 0.5) * PI);
            kappa * kappa * m * (SQRT_2 - cosine_basis(k + 1, t))
        })
        .sum()
}

/// Single primitive `∫_0^t μ(u) du = Σ κ_i μ_i f_i(t)` with the sine basis `f_i`.
pub fn volterra_image(mu: &[f64], t: f64) -> f64 {
    mu.iter()
        .enumerate()
        .map(|(k, m)| {
            let x = (k as f64 + 0.5) * PI;
            m / x * SQRT_2 * (x * t).sin()
        })
        .sum()
}
