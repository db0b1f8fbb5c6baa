use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptive_inverse::experiment::{self, write_json, ExperimentConfig};
use adaptive_inverse::{posterior, Error, Observation, Result};
use clap::{Args, Parser, Subcommand};

/// Empirical and hierarchical Bayes for inverse problems in sequence space.
#[derive(Parser)]
#[command(name = "adaptive-inverse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); unspecified fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Single {
    #[command(flatten)]
    common: Common,
    /// Noise precision; defaults to the last rung of the ladder.
    #[arg(long)]
    n: Option<f64>,
}

#[derive(Args)]
struct Fitting {
    #[command(flatten)]
    single: Single,
    /// Observation JSON written by `simulate`; simulated from the config otherwise.
    #[arg(long)]
    obs: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one observation and write observation.json.
    Simulate(Single),
    /// Maximize the marginal likelihood and write the fit, curve and posterior.
    EbFit(Fitting),
    /// Run the Metropolis-within-Gibbs sampler and write the α draws and summary.
    HbRun(Fitting),
    /// Compute the deterministic bracket for the config's truth.
    Bracket {
        #[command(flatten)]
        single: Single,
        #[arg(long)]
        l: Option<f64>,
        #[arg(long = "L")]
        big_l: Option<f64>,
    },
    /// EB posterior means along the n ladder.
    Figure1(Common),
    /// HB chains along the n ladder.
    Figure2(Common),
    /// Figure 1 and/or figure 2 as selected by the config's mode.
    Figures(Common),
    /// Squared error and posterior risk against n, with log-log slopes.
    RateSweep {
        #[command(flatten)]
        common: Common,
        /// Regularity of the truth, used for the reference slope.
        #[arg(long)]
        beta: f64,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn rung_n(cfg: &ExperimentConfig, n: Option<f64>) -> Result<f64> {
    let n = n.unwrap_or(*cfg.n_ladder.last().expect("validated ladder is non-empty"));
    if !(n > 1.0 && n.is_finite()) {
        return Err(Error::Config(format!("n must be finite and > 1, got {n}")));
    }
    Ok(n)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::Io {
        path: cfg.output_dir.clone(),
        source: e,
    })?;
    Ok(&cfg.output_dir)
}

fn observation(cfg: &ExperimentConfig, single: &Single, obs: Option<&Path>) -> Result<Observation> {
    match obs {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            Observation::from_json(&text)
        }
        None => {
            let n = rung_n(cfg, single.n)?;
            adaptive_inverse::simulate(&cfg.truth, &cfg.model, n, cfg.truncation_for(n), cfg.seed)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(single) => {
            let cfg = load_config(&single.common)?;
            let obs = observation(&cfg, &single, None)?;
            let path = out_dir(&cfg)?.join("observation.json");
            write_json(&path, &obs)?;
            println!(
                "n = {:e}, N = {}, seed = {} -> {}",
                obs.n,
                obs.truncation,
                obs.seed,
                path.display()
            );
        }
        Command::EbFit(fitting) => {
            let cfg = load_config(&fitting.single.common)?;
            let obs = observation(&cfg, &fitting.single, fitting.obs.as_deref())?;
            let fit = experiment::eb_fit(&cfg, &obs)?;
            let post = posterior(fit.alpha_hat, &obs)?;
            let dir = out_dir(&cfg)?;
            write_json(
                &dir.join("eb_fit.json"),
                &serde_json::json!({
                    "alpha_hat": fit.alpha_hat,
                    "loglik": fit.loglik,
                    "refined": fit.refined,
                    "n": obs.n,
                    "N": obs.truncation,
                    "seed": obs.seed,
                }),
            )?;
            fit.curve.save_csv(&dir.join("likelihood.csv"))?;
            write_json(&dir.join("posterior.json"), &post)?;
            println!("alpha_hat = {:.6}, loglik = {:.6}", fit.alpha_hat, fit.loglik);
        }
        Command::HbRun(fitting) => {
            let cfg = load_config(&fitting.single.common)?;
            let obs = observation(&cfg, &fitting.single, fitting.obs.as_deref())?;
            let chain = experiment::hb_chain(&cfg, &obs)?;
            let dir = out_dir(&cfg)?;
            chain.save_alpha_csv(&dir.join("alpha_draws.csv"))?;
            let summary = chain.summary();
            write_json(&dir.join("chain_summary.json"), &summary)?;
            println!(
                "acceptance = {:.3}, alpha mean = {:.4}, 95% interval = [{:.4}, {:.4}]",
                summary.acceptance_rate, summary.alpha_mean, summary.alpha_quantiles[0], summary.alpha_quantiles[2]
            );
        }
        Command::Bracket { single, l, big_l } => {
            let mut cfg = load_config(&single.common)?;
            cfg.l = l.unwrap_or(cfg.l);
            cfg.big_l = big_l.unwrap_or(cfg.big_l);
            let n = rung_n(&cfg, single.n)?;
            let report = experiment::run_bracket(&cfg, n)?;
            let dir = out_dir(&cfg)?;
            write_json(&dir.join("bracket.json"), &report)?;
            report.save_curve_csv(&dir.join("h_curve.csv"))?;
            println!(
                "bracket = [{:.6}, {}] ({:?}, {:?})",
                report.alpha_lower,
                if report.alpha_upper.is_finite() {
                    format!("{:.6}", report.alpha_upper)
                } else {
                    "inf".into()
                },
                report.lower_status,
                report.upper_status
            );
        }
        Command::Figure1(common) => {
            let m = experiment::run_figure1(&load_config(&common)?)?;
            for r in &m.runs {
                println!("n = {:e} rep {}: alpha_hat = {:.4}", r.n, r.replicate, r.alpha_hat);
            }
        }
        Command::Figure2(common) => {
            let m = experiment::run_figure2(&load_config(&common)?)?;
            for r in &m.runs {
                println!(
                    "n = {:e} rep {}: alpha mean = {:.4}, acceptance = {:.3}",
                    r.n, r.replicate, r.alpha_mean, r.acceptance_rate
                );
            }
        }
        Command::Figures(common) => {
            let (eb, hb) = experiment::run_figures(&load_config(&common)?)?;
            println!(
                "figure1 runs: {}, figure2 runs: {}",
                eb.map_or(0, |m| m.runs.len()),
                hb.map_or(0, |m| m.runs.len())
            );
        }
        Command::RateSweep { common, beta } => {
            let m = experiment::run_rate_sweep(&load_config(&common)?, beta)?;
            let s = m.slope.expect("rate sweeps record slopes");
            println!(
                "slope: squared error {:.4}, posterior risk {:.4}, reference {:.4}",
                s.squared_error, s.posterior_risk, s.reference
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
