//! Behaviour of the EB and HB procedures on simulated data.

use adaptive_inverse::empirical_bayes::{fit_default, log_likelihood, score};
use adaptive_inverse::gaussian_posterior::{posterior, posterior_risk, squared_error};
use adaptive_inverse::sequence_model::{simulate, ModelSpec, Observation, TruthSpec};
use adaptive_inverse::theory::h_n;
use proptest::prelude::*;

fn eb_error(n: f64, seed: u64) -> f64 {
    let model = ModelSpec::Volterra;
    let len = model.auto_truncation(n);
    let obs = simulate(&TruthSpec::SineDecay, &model, n, len, seed).unwrap();
    let f = fit_default(&obs).unwrap();
    let post = posterior(f.alpha_hat, &obs).unwrap();
    let mu0 = TruthSpec::SineDecay.coefficients(len);
    squared_error(&post.means, &mu0)
}

#[test]
fn eb_mean_improves_along_the_ladder() {
    for seed in 0..5 {
        let coarse = eb_error(1e3, seed);
        let fine = eb_error(1e11, seed);
        assert!(fine < coarse / 10.0, "seed {seed}: {fine} vs {coarse}");
    }
}

#[test]
fn eb_beats_a_rough_prior_at_large_n() {
    let model = ModelSpec::Volterra;
    let n = 1e11;
    let len = model.auto_truncation(n);
    let mu0 = TruthSpec::SineDecay.coefficients(len);
    for seed in 0..5 {
        let obs = simulate(&TruthSpec::SineDecay, &model, n, len, seed).unwrap();
        let a = fit_default(&obs).unwrap().alpha_hat;
        assert!(posterior_risk(a, &obs, &mu0).unwrap() < posterior_risk(0.1, &obs, &mu0).unwrap());
    }
}

fn small_obs() -> impl Strategy<Value = Observation> {
    (1.0f64..1e6, prop::collection::vec(-3.0f64..3.0, 1..30), 0.0f64..2.5)
        .prop_map(|(n, y, p)| Observation::new(ModelSpec::ExactPower { p }, n, y, 0).unwrap())
}

proptest! {
    #[test]
    fn posterior_shrinks_towards_zero(obs in small_obs(), alpha in 0.0f64..5.0) {
        let post = posterior(alpha, &obs).unwrap();
        let p = obs.model.order();
        for (k, (m, v)) in post.means.iter().zip(&post.vars).enumerate() {
            let i = (k + 1) as f64;
            let kappa = i.powf(-p);
            prop_assert!(m.abs() <= (obs.y[k] / kappa).abs() * (1.0 + 1e-12));
            prop_assert!(m * obs.y[k] >= 0.0);
            prop_assert!(*v <= i.powf(-1.0 - 2.0 * alpha) * (1.0 + 1e-12));
            prop_assert!(*v <= 1.0 / (obs.n * kappa * kappa) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn fit_stays_in_the_search_interval(obs in small_obs()) {
        prop_assume!(obs.n > 1.0 + 1e-9);
        let f = fit_default(&obs).unwrap();
        prop_assert!(f.alpha_hat >= 0.0 && f.alpha_hat <= obs.n.ln());
        // No grid point beats the reported maximum.
        prop_assert!(f.curve.values.iter().all(|v| *v <= f.loglik));
    }

    #[test]
    fn score_sign_matches_likelihood_slope(obs in small_obs(), alpha in 0.1f64..4.0) {
        let s = score(alpha, &obs).unwrap();
        let h = 1e-4;
        let diff = log_likelihood(alpha + h, &obs).unwrap() - log_likelihood(alpha - h, &obs).unwrap();
        prop_assume!(s.abs() > 1e-3);
        prop_assert_eq!(s > 0.0, diff > 0.0);
    }

    #[test]
    fn h_is_nonnegative(alpha in 0.0f64..20.0, n in 3.0f64..1e12, c in prop::collection::vec(-2.0f64..2.0, 1..50)) {
        prop_assert!(h_n(alpha, &c, &ModelSpec::Volterra, n, c.len()).unwrap() >= 0.0);
    }
}

#[test]
fn default_proposal_mixes_along_the_default_ladder() {
    let cfg = adaptive_inverse::experiment::ExperimentConfig::default();
    for rung in 0..cfg.n_ladder.len() {
        let obs = cfg.observe(rung, 0).unwrap();
        let chain = adaptive_inverse::experiment::hb_chain(&cfg, &obs).unwrap();
        assert!(
            chain.acceptance_rate > 0.1 && chain.acceptance_rate < 0.9,
            "n = {}: {}",
            obs.n,
            chain.acceptance_rate
        );
    }
}
