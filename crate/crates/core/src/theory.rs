//! Deterministic diagnostics: the function `h_n`, the bracket
//! `[α̲_n, ᾱ_n]` that contains the marginal-likelihood maximizer with high
//! probability, and minimax rates with their slowly varying corrections.
//!
//! ```text
//! h_n(α) = (1+2α+2p) / (n^{1/(1+2α+2p)} log n) · Σ_i n² i^{1+2α} μ_{0,i}² log i / (i^{1+2α} κ_i^{-2} + n)²
//! α̲_n = inf{α > 0 : h_n(α) > l} ∧ √(log n)
//! ᾱ_n = inf{α > 0 : h_n(α) > L (log n)²}
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sequence_model::{ModelSpec, Spectrum};

/// Scan step for the first-crossing search.
pub const SCAN_STEP: f64 = 1e-3;
/// Bisection tolerance on a crossing.
pub const CROSSING_TOL: f64 = 1e-6;
/// Spacing of the stored `h_n` curve.
pub const CURVE_STEP: f64 = 1e-2;

pub const DEFAULT_L_LOWER: f64 = 0.01;
pub const DEFAULT_L_UPPER: f64 = 1.0;

/// Precomputed evaluator of `h_n` for one truth, operator and noise level.
#[derive(Debug, Clone)]
pub struct HnEvaluator {
    n: f64,
    ln_n: f64,
    p: f64,
    // Only coordinates i >= 2 with μ_{0,i} != 0 contribute.
    ln_i: Vec<f64>,
    two_ln_kappa: Vec<f64>,
    weight: Vec<f64>,
}

impl HnEvaluator {
    pub fn new(mu0: &[f64], model: &ModelSpec, n: f64, truncation: usize) -> Result<Self> {
        if !(n > std::f64::consts::E && n.is_finite()) {
            return Err(Error::Domain(format!("h_n needs log n > 1, got n = {n}")));
        }
        if truncation == 0 {
            return Err(Error::config("truncation level N must be at least 1"));
        }
        model.validate()?;
        let spec = Spectrum::new(model, truncation)?;
        let mut ln_i = Vec::new();
        let mut two_ln_kappa = Vec::new();
        let mut weight = Vec::new();
        for k in 1..truncation {
            let m = mu0.get(k).copied().unwrap_or(0.0);
            if m != 0.0 {
                ln_i.push(spec.ln_i[k]);
                two_ln_kappa.push(2.0 * spec.ln_kappa[k]);
                // μ² κ² log i; the remaining factor is n² a/(a+n)² with a = i^{1+2α} κ^{-2}.
                weight.push(m * m * spec.kappa[k] * spec.kappa[k] * spec.ln_i[k]);
            }
        }
        Ok(HnEvaluator {
            n,
            ln_n: n.ln(),
            p: model.order(),
            ln_i,
            two_ln_kappa,
            weight,
        })
    }

    /// True when `μ_{0,i} = 0` for every `2 <= i <= N`, so `h_n ≡ 0`.
    pub fn is_identically_zero(&self) -> bool {
        self.weight.is_empty()
    }

    pub fn value(&self, alpha: f64) -> f64 {
        let mut sum = 0.0;
        for k in 0..self.weight.len() {
            // r = n / a
            let r = (self.ln_n - (1.0 + 2.0 * alpha) * self.ln_i[k] + self.two_ln_kappa[k]).exp();
            let w = r / (1.0 + r);
            let v = 1.0 / (1.0 + r);
            sum += self.weight[k] * self.n * w * v;
        }
        let e = 1.0 + 2.0 * alpha + 2.0 * self.p;
        e / ((self.ln_n / e).exp() * self.ln_n) * sum
    }

    /// First `α` in `[0, cap]` with `h_n(α) > threshold`, located by a scan of
    /// step [`SCAN_STEP`] and bisection to [`CROSSING_TOL`].
    pub fn first_crossing(&self, threshold: f64, cap: f64) -> Option<f64> {
        if self.value(0.0) > threshold {
            return Some(0.0);
        }
        let steps = (cap / SCAN_STEP).ceil() as usize;
        let mut prev = 0.0;
        for k in 1..=steps {
            let a = (k as f64 * SCAN_STEP).min(cap);
            if self.value(a) > threshold {
                let (mut lo, mut hi) = (prev, a);
                while hi - lo > CROSSING_TOL {
                    let mid = 0.5 * (lo + hi);
                    if self.value(mid) > threshold {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(hi);
            }
            prev = a;
        }
        None
    }
}

/// `h_n(α)` truncated at `N`, using the declared order `p` of the model.
pub fn h_n(alpha: f64, mu0: &[f64], model: &ModelSpec, n: f64, truncation: usize) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!("alpha must be a finite value >= 0, got {alpha}")));
    }
    Ok(HnEvaluator::new(mu0, model, n, truncation)?.value(alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LowerStatus {
    Crossed,
    /// No crossing below `√(log n)`; the bound equals `√(log n)`.
    Capped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpperStatus {
    Crossed,
    /// `μ_{0,i} = 0` for all `i >= 2`, so `h_n ≡ 0` and `ᾱ_n = ∞`.
    IdenticallyZero,
    /// No crossing below the scan cap `(log n)/(2 log 2)`; reported as `∞`.
    NoCrossingBelowCap,
}

/// Deterministic bracket for the marginal-likelihood maximizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    pub alpha_lower: f64,
    #[serde(with = "extended_real")]
    pub alpha_upper: f64,
    pub lower_status: LowerStatus,
    pub upper_status: UpperStatus,
    pub l: f64,
    #[serde(rename = "L")]
    pub big_l: f64,
    pub n: f64,
    #[serde(rename = "N")]
    pub truncation: usize,
    pub scan_cap: f64,
    /// `(α, h_n(α))` on a grid of step [`CURVE_STEP`] over `[0, scan_cap]`.
    #[serde(skip)]
    pub h_curve: Vec<(f64, f64)>,
}

impl BracketReport {
    pub fn contains(&self, alpha: f64) -> bool {
        alpha >= self.alpha_lower && alpha <= self.alpha_upper
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV with columns `alpha,h`.
    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "h"])?;
        for (a, h) in &self.h_curve {
            w.write_record([a.to_string(), h.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_curve_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_curve_csv(file)
    }
}

/// `+∞` serialized as the string `"inf"`.
mod extended_real {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {t}"
            ))),
        }
    }
}

/// Computes `[α̲_n, ᾱ_n]` for thresholds `l` and `L`.
pub fn bracket(mu0: &[f64], model: &ModelSpec, n: f64, truncation: usize, l: f64, big_l: f64) -> Result<BracketReport> {
    if !(l > 0.0 && big_l > 0.0 && l.is_finite() && big_l.is_finite()) {
        return Err(Error::config(format!(
            "thresholds must be positive, got l = {l}, L = {big_l}"
        )));
    }
    let eval = HnEvaluator::new(mu0, model, n, truncation)?;
    let ln_n = n.ln();
    let scan_cap = ln_n / (2.0 * std::f64::consts::LN_2);
    let root = ln_n.sqrt();

    let (alpha_lower, lower_status) = match eval.first_crossing(l, root) {
        Some(a) => (a.min(root), LowerStatus::Crossed),
        None => (root, LowerStatus::Capped),
    };
    let (alpha_upper, upper_status) = if eval.is_identically_zero() {
        (f64::INFINITY, UpperStatus::IdenticallyZero)
    } else {
        match eval.first_crossing(big_l * ln_n * ln_n, scan_cap) {
            Some(a) => (a, UpperStatus::Crossed),
            None => (f64::INFINITY, UpperStatus::NoCrossingBelowCap),
        }
    };

    let points = (scan_cap / CURVE_STEP).floor() as usize;
    let h_curve = (0..=points)
        .map(|k| {
            let a = k as f64 * CURVE_STEP;
            (a, eval.value(a))
        })
        .collect();

    Ok(BracketReport {
        alpha_lower,
        alpha_upper,
        lower_status,
        upper_status,
        l,
        big_l,
        n,
        truncation,
        scan_cap,
        h_curve,
    })
}

/// `n^{-β/(1+2β+2p)}`.
pub fn minimax_rate_sobolev(beta: f64, p: f64, n: f64) -> f64 {
    n.powf(-beta / (1.0 + 2.0 * beta + 2.0 * p))
}

/// `n^{-1/2} (log n)^{1/2+p}`.
pub fn minimax_rate_analytic(p: f64, n: f64) -> f64 {
    n.powf(-0.5) * n.ln().powf(0.5 + p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateCase {
    Sobolev,
    Analytic,
}

/// Slowly varying factor `L_n` multiplying the minimax rate:
/// `(log n)² (log log n)^{1/2}` for Sobolev truths and
/// `(log n)^{(1/2+p)√(log n)/2 + 1 - p} (log log n)^{1/2}` for analytic ones.
pub fn slowly_varying_factor(case: RateCase, p: f64, n: f64) -> Result<f64> {
    Ok(ln_slowly_varying_factor(case, p, n.ln())?.exp())
}

/// `log L_n` as a function of `log n`, usable far beyond the range of `f64` for `n`.
pub fn ln_slowly_varying_factor(case: RateCase, p: f64, ln_n: f64) -> Result<f64> {
    if ln_n.is_nan() || ln_n <= 1.0 {
        return Err(Error::Domain(format!(
            "log log n is undefined or non-positive at log n = {ln_n}"
        )));
    }
    let lnln = ln_n.ln();
    let half_lnlnln = 0.5 * lnln.ln();
    Ok(match case {
        RateCase::Sobolev => 2.0 * lnln + half_lnlnln,
        RateCase::Analytic => ((0.5 + p) * ln_n.sqrt() / 2.0 + 1.0 - p) * lnln + half_lnlnln,
    })
}
