//! Reproducible experiment drivers behind the command-line tool.
//!
//! Every driver derives its seeds from one base seed, writes CSV/JSON files
//! under an output directory, and records a manifest with the config, its
//! SHA-256 hash and every seed used. Nothing time-dependent is written, so a
//! rerun of the same config reproduces every file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::empirical_bayes::{fit, EbFit, DEFAULT_GRID_SIZE, DEFAULT_REFINE_TOL};
use crate::error::{Error, Result};
use crate::gaussian_posterior::{posterior, risk_of, squared_error};
use crate::hierarchical_bayes::{default_proposal_sd, run_mwg, HbChain, HbConfig, HbSummary, HyperPrior};
use crate::numeric::ols_slope;
use crate::sequence_model::{simulate, synthesize_function, unit_grid, ModelSpec, Observation, TruthSpec};
use crate::theory::{bracket, BracketReport, DEFAULT_L_LOWER, DEFAULT_L_UPPER};

/// Offset separating the chain's random stream from the data stream.
const CHAIN_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// How the truncation level `N` is chosen per rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind")]
pub enum TruncationRule {
    /// `N = ⌈n^{1/(1+2p)}⌉`, capped.
    #[default]
    Auto,
    Fixed {
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Mode {
    #[serde(rename = "EB")]
    Eb,
    #[serde(rename = "HB")]
    Hb,
    #[default]
    Both,
}

/// Chain settings shared by every rung; `J`, `N` and seeds are filled per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HbSettings {
    pub iterations: usize,
    /// Defaults to 10% of `iterations`.
    pub burn_in: Option<usize>,
    /// Defaults to [`default_proposal_sd`] for the rung.
    pub proposal_sd: Option<f64>,
    /// Defaults to the rung's `N`.
    #[serde(rename = "J")]
    pub j: Option<usize>,
    pub thin: usize,
    pub initial_alpha: f64,
    pub hyperprior: HyperPrior,
}

impl Default for HbSettings {
    fn default() -> Self {
        HbSettings {
            iterations: 10_000,
            burn_in: None,
            proposal_sd: None,
            j: None,
            thin: 100,
            initial_alpha: 1.0,
            hyperprior: HyperPrior::default(),
        }
    }
}

impl HbSettings {
    fn chain_config(&self, obs: &Observation, seed: u64) -> HbConfig {
        let j = self.j.unwrap_or(obs.truncation).min(obs.truncation);
        HbConfig {
            j,
            iterations: self.iterations,
            burn_in: self.burn_in.unwrap_or(self.iterations / 10),
            proposal_sd: self.proposal_sd.unwrap_or_else(|| default_proposal_sd(obs.n, j)),
            seed,
            initial_alpha: self.initial_alpha,
            thin: self.thin,
            pin_alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub truth: TruthSpec,
    pub n_ladder: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(rename = "N_rule")]
    pub n_rule: TruncationRule,
    /// Where files go; not part of the recorded config, so the same
    /// experiment written to two places has identical manifests.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    pub mode: Mode,
    pub hb: HbSettings,
    pub grid_size: usize,
    pub refine_tol: f64,
    /// Points of the `[0, 1]` grid on which functions are written.
    pub grid_points: usize,
    pub l: f64,
    #[serde(rename = "L")]
    pub big_l: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelSpec::Volterra,
            truth: TruthSpec::SineDecay,
            n_ladder: vec![1e3, 1e5, 1e7, 1e9, 1e11],
            replicates: 1,
            seed: 0,
            n_rule: TruncationRule::Auto,
            output_dir: PathBuf::from("out"),
            mode: Mode::Both,
            hb: HbSettings::default(),
            grid_size: DEFAULT_GRID_SIZE,
            refine_tol: DEFAULT_REFINE_TOL,
            grid_points: 512,
            l: DEFAULT_L_LOWER,
            big_l: DEFAULT_L_UPPER,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::config(format!("invalid experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.truth.validate()?;
        if self.n_ladder.is_empty() {
            return Err(Error::config("n_ladder is empty"));
        }
        if self.n_ladder.iter().any(|n| !(*n > 1.0 && n.is_finite())) {
            return Err(Error::config("every n in n_ladder must be finite and > 1"));
        }
        if self.n_ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("n_ladder must be strictly increasing"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates must be at least 1"));
        }
        if let TruncationRule::Fixed { n } = self.n_rule {
            if n == 0 {
                return Err(Error::config("fixed N must be at least 1"));
            }
        }
        if self.grid_points < 2 {
            return Err(Error::config("grid_points must be at least 2"));
        }
        self.hb.hyperprior.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_string(self)?;
        let digest = Sha256::digest(json.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn truncation_for(&self, n: f64) -> usize {
        match self.n_rule {
            TruncationRule::Auto => self.model.auto_truncation(n),
            TruncationRule::Fixed { n: fixed } => fixed,
        }
    }

    /// Data seed of replicate `rep` on rung `rung`.
    pub fn run_seed(&self, rung: usize, rep: usize) -> u64 {
        self.seed.wrapping_add((rung * self.replicates + rep) as u64)
    }

    /// Simulates the observation for one rung and replicate.
    pub fn observe(&self, rung: usize, rep: usize) -> Result<Observation> {
        let n = self.n_ladder[rung];
        simulate(
            &self.truth,
            &self.model,
            n,
            self.truncation_for(n),
            self.run_seed(rung, rep),
        )
    }
}

/// Seed of the chain run on an observation drawn with `data_seed`.
pub fn chain_seed(data_seed: u64) -> u64 {
    data_seed.wrapping_add(CHAIN_SEED_OFFSET)
}

/// Record written next to the outputs of every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest<R> {
    pub command: String,
    pub library_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub runs: Vec<R>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<SlopeSummary>,
}

impl<R: Serialize> Manifest<R> {
    fn new(command: &str, cfg: &ExperimentConfig, runs: Vec<R>) -> Result<Self> {
        Ok(Manifest {
            command: command.to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash()?,
            config: cfg.clone(),
            runs,
            slope: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbRun {
    pub n: f64,
    #[serde(rename = "N")]
    pub truncation: usize,
    pub replicate: usize,
    pub seed: u64,
    pub alpha_hat: f64,
    pub loglik: f64,
    pub refined: bool,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbRun {
    pub n: f64,
    #[serde(rename = "N")]
    pub truncation: usize,
    pub replicate: usize,
    pub seed: u64,
    pub chain_seed: u64,
    pub acceptance_rate: f64,
    pub alpha_mean: f64,
    pub alpha_quantiles: [f64; 3],
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: f64,
    #[serde(rename = "N")]
    pub truncation: usize,
    pub seeds: Vec<u64>,
    pub mean_squared_error: f64,
    pub mean_posterior_risk: f64,
    pub mean_alpha_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSummary {
    pub beta: f64,
    pub reference: f64,
    pub squared_error: f64,
    pub posterior_risk: f64,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn run_stem(n: f64, rep: usize) -> String {
    format!("n{n:e}_r{rep}")
}

/// Writes `t` followed by one column per function.
pub fn write_function_csv(path: &Path, grid: &[f64], columns: &[(&str, &[f64])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t"];
    header.extend(columns.iter().map(|(name, _)| *name));
    w.write_record(&header)?;
    for (k, t) in grid.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(columns.iter().map(|(_, v)| v[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Empirical-Bayes fit with the config's grid settings.
pub fn eb_fit(cfg: &ExperimentConfig, obs: &Observation) -> Result<EbFit> {
    fit(obs, cfg.grid_size, cfg.refine_tol)
}

/// Hierarchical-Bayes chain with the config's settings.
pub fn hb_chain(cfg: &ExperimentConfig, obs: &Observation) -> Result<HbChain> {
    let chain_cfg = cfg.hb.chain_config(obs, chain_seed(obs.seed));
    run_mwg(obs, &cfg.hb.hyperprior, &chain_cfg)
}

/// Writes the EB outputs for one observation into `dir` and returns the record.
pub fn write_eb_run(cfg: &ExperimentConfig, obs: &Observation, rep: usize, dir: &Path) -> Result<EbRun> {
    let fit = eb_fit(cfg, obs)?;
    let post = posterior(fit.alpha_hat, obs)?;
    let stem = run_stem(obs.n, rep);
    let grid = unit_grid(cfg.grid_points);
    let truth_f = synthesize_function(&cfg.truth.coefficients(obs.truncation), &grid);
    let mean_f = post.mean_function(&grid);
    let f_path = dir.join(format!("{stem}_function.csv"));
    write_function_csv(&f_path, &grid, &[("true_f", &truth_f), ("eb_mean_f", &mean_f)])?;
    let l_path = dir.join(format!("{stem}_likelihood.csv"));
    fit.curve.save_csv(&l_path)?;
    Ok(EbRun {
        n: obs.n,
        truncation: obs.truncation,
        replicate: rep,
        seed: obs.seed,
        alpha_hat: fit.alpha_hat,
        loglik: fit.loglik,
        refined: fit.refined,
        files: vec![file_name(&f_path), file_name(&l_path)],
    })
}

/// Writes the HB outputs for one observation into `dir` and returns the record.
pub fn write_hb_run(cfg: &ExperimentConfig, obs: &Observation, rep: usize, dir: &Path) -> Result<HbRun> {
    let chain = hb_chain(cfg, obs)?;
    let summary: HbSummary = chain.summary();
    let stem = run_stem(obs.n, rep);
    let a_path = dir.join(format!("{stem}_alpha.csv"));
    chain.save_alpha_csv(&a_path)?;
    let s_path = dir.join(format!("{stem}_chain.json"));
    write_json(&s_path, &summary)?;
    let grid = unit_grid(cfg.grid_points);
    let truth_f = synthesize_function(&cfg.truth.coefficients(obs.truncation), &grid);
    let mean_f = synthesize_function(&chain.mu_mean, &grid);
    let f_path = dir.join(format!("{stem}_function.csv"));
    write_function_csv(&f_path, &grid, &[("true_f", &truth_f), ("hb_mean_f", &mean_f)])?;
    Ok(HbRun {
        n: obs.n,
        truncation: obs.truncation,
        replicate: rep,
        seed: obs.seed,
        chain_seed: chain.config.seed,
        acceptance_rate: chain.acceptance_rate,
        alpha_mean: summary.alpha_mean,
        alpha_quantiles: summary.alpha_quantiles,
        files: vec![file_name(&a_path), file_name(&s_path), file_name(&f_path)],
    })
}

fn for_each_run<R>(cfg: &ExperimentConfig, mut f: impl FnMut(&Observation, usize) -> Result<R>) -> Result<Vec<R>> {
    let mut runs = Vec::with_capacity(cfg.n_ladder.len() * cfg.replicates);
    for rung in 0..cfg.n_ladder.len() {
        for rep in 0..cfg.replicates {
            let obs = cfg.observe(rung, rep)?;
            runs.push(f(&obs, rep)?);
        }
    }
    Ok(runs)
}

/// EB posterior mean against the truth along the `n` ladder.
///
/// Writes `<out>/figure1/` with a function CSV and a likelihood CSV per run
/// and `manifest.json`.
pub fn run_figure1(cfg: &ExperimentConfig) -> Result<Manifest<EbRun>> {
    cfg.validate()?;
    let dir = cfg.output_dir.join("figure1");
    ensure_dir(&dir)?;
    let runs = for_each_run(cfg, |obs, rep| write_eb_run(cfg, obs, rep, &dir))?;
    let manifest = Manifest::new("figure1", cfg, runs)?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// HB chains along the `n` ladder, on the same observations as figure 1.
///
/// Writes `<out>/figure2/` with the `α` draws, a chain summary and a function
/// CSV per run and `manifest.json`.
pub fn run_figure2(cfg: &ExperimentConfig) -> Result<Manifest<HbRun>> {
    cfg.validate()?;
    let dir = cfg.output_dir.join("figure2");
    ensure_dir(&dir)?;
    let runs = for_each_run(cfg, |obs, rep| write_hb_run(cfg, obs, rep, &dir))?;
    let manifest = Manifest::new("figure2", cfg, runs)?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Manifests of whichever figures were run.
pub type FigureManifests = (Option<Manifest<EbRun>>, Option<Manifest<HbRun>>);

/// Runs figure 1, figure 2 or both, as selected by `cfg.mode`.
pub fn run_figures(cfg: &ExperimentConfig) -> Result<FigureManifests> {
    let eb = match cfg.mode {
        Mode::Eb | Mode::Both => Some(run_figure1(cfg)?),
        Mode::Hb => None,
    };
    let hb = match cfg.mode {
        Mode::Hb | Mode::Both => Some(run_figure2(cfg)?),
        Mode::Eb => None,
    };
    Ok((eb, hb))
}

/// `-2β / (1 + 2β + 2p)`, the log-log slope of the squared minimax rate.
pub fn reference_slope(beta: f64, p: f64) -> f64 {
    -2.0 * beta / (1.0 + 2.0 * beta + 2.0 * p)
}

/// Averages squared error and posterior risk of the EB posterior per rung.
///
/// The error is measured over all coefficients: past `N` the estimate is
/// zero, so the truncated tail `Σ_{i>N} μ_{0,i}²` is added to both.
pub fn rate_points(cfg: &ExperimentConfig, beta: f64) -> Result<Vec<RatePoint>> {
    cfg.validate()?;
    if cfg.n_ladder.len() < 3 {
        return Err(Error::config("a rate sweep needs at least 3 rungs"));
    }
    match (&cfg.truth, cfg.truth.regularity()) {
        (TruthSpec::PowerLaw { .. } | TruthSpec::SineDecay, Some(b)) if (b - beta).abs() < 1e-12 => {}
        (TruthSpec::PowerLaw { .. } | TruthSpec::SineDecay, Some(b)) => {
            return Err(Error::config(format!(
                "beta = {beta} does not match the truth's regularity {b}"
            )));
        }
        _ => return Err(Error::config("a rate sweep needs a PowerLaw or SineDecay truth")),
    }
    let mut points = Vec::with_capacity(cfg.n_ladder.len());
    for (rung, &n) in cfg.n_ladder.iter().enumerate() {
        let truncation = cfg.truncation_for(n);
        let mu0 = cfg.truth.coefficients(truncation);
        let tail = truth_tail(&cfg.truth, truncation);
        let (mut se, mut risk, mut alpha) = (0.0, 0.0, 0.0);
        let mut seeds = Vec::with_capacity(cfg.replicates);
        for rep in 0..cfg.replicates {
            let obs = cfg.observe(rung, rep)?;
            let fit = eb_fit(cfg, &obs)?;
            let post = posterior(fit.alpha_hat, &obs)?;
            se += squared_error(&post.means, &mu0) + tail;
            risk += risk_of(&post, &mu0) + tail;
            alpha += fit.alpha_hat;
            seeds.push(obs.seed);
        }
        let r = cfg.replicates as f64;
        points.push(RatePoint {
            n,
            truncation,
            seeds,
            mean_squared_error: se / r,
            mean_posterior_risk: risk / r,
            mean_alpha_hat: alpha / r,
        });
    }
    Ok(points)
}

/// `Σ_{i>N} μ_{0,i}²`.
fn truth_tail(truth: &TruthSpec, truncation: usize) -> f64 {
    const TAIL_TERMS: usize = 1_000_000;
    (truncation + 1..=truncation + TAIL_TERMS)
        .rev()
        .map(|i| truth.coefficient(i).powi(2))
        .sum()
}

/// Log-log slopes of the averaged squared error and posterior risk.
pub fn rate_slopes(points: &[RatePoint], beta: f64, p: f64) -> SlopeSummary {
    let ln_n: Vec<f64> = points.iter().map(|pt| pt.n.ln()).collect();
    let ln_se: Vec<f64> = points.iter().map(|pt| pt.mean_squared_error.ln()).collect();
    let ln_risk: Vec<f64> = points.iter().map(|pt| pt.mean_posterior_risk.ln()).collect();
    SlopeSummary {
        beta,
        reference: reference_slope(beta, p),
        squared_error: ols_slope(&ln_n, &ln_se),
        posterior_risk: ols_slope(&ln_n, &ln_risk),
    }
}

/// Squared error and posterior risk of the EB posterior against `n`.
///
/// Writes `<out>/rate_sweep/rate_sweep.csv` and `manifest.json`; the manifest
/// carries the fitted log-log slopes.
pub fn run_rate_sweep(cfg: &ExperimentConfig, beta: f64) -> Result<Manifest<RatePoint>> {
    let points = rate_points(cfg, beta)?;
    let dir = cfg.output_dir.join("rate_sweep");
    ensure_dir(&dir)?;
    let csv_path = dir.join("rate_sweep.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["n", "N", "mean_squared_error", "mean_posterior_risk", "mean_alpha_hat"])?;
    for pt in &points {
        w.write_record([
            pt.n.to_string(),
            pt.truncation.to_string(),
            pt.mean_squared_error.to_string(),
            pt.mean_posterior_risk.to_string(),
            pt.mean_alpha_hat.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let slope = rate_slopes(&points, beta, cfg.model.order());
    let mut manifest = Manifest::new("rate-sweep", cfg, points)?;
    manifest.slope = Some(slope);
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Bracket `[α̲_n, ᾱ_n]` for the config's truth at one `n`.
pub fn run_bracket(cfg: &ExperimentConfig, n: f64) -> Result<BracketReport> {
    cfg.validate()?;
    let truncation = cfg.truncation_for(n);
    let mu0 = cfg.truth.coefficients(truncation);
    bracket(&mu0, &cfg.model, n, truncation, cfg.l, cfg.big_l)
}
