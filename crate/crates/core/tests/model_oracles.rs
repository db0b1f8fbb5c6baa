//! Sequence-model quantities against independently coded references.

use std::f64::consts::{PI, SQRT_2};

use adaptive_inverse::sequence_model::{
    analytic_norm_sq, simulate, sobolev_norm_sq, synthesize_function, unit_grid, ModelSpec, Observation, TruthSpec,
};
use proptest::prelude::*;

#[test]
fn first_observation_has_the_model_mean() {
    let (n, reps) = (1e3, 10_000);
    let mean = (0..reps)
        .map(|s| {
            simulate(&TruthSpec::SineDecay, &ModelSpec::Volterra, n, 1, s)
                .unwrap()
                .y[0]
        })
        .sum::<f64>()
        / reps as f64;
    let expected = 2.0 / PI * 1f64.sin();
    let se = 1.0 / (n * reps as f64).sqrt();
    assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected}");
}

#[test]
fn parseval_on_a_fine_grid() {
    let len = 300;
    let mu = TruthSpec::SineDecay.coefficients(len);
    let grid = unit_grid(16 * len + 1);
    let f = synthesize_function(&mu, &grid);
    let h = 1.0 / (grid.len() - 1) as f64;
    let last = f.len() - 1;
    let integral = h * (f.iter().map(|v| v * v).sum::<f64>() - 0.5 * (f[0] * f[0] + f[last] * f[last]));
    let energy: f64 = mu.iter().map(|m| m * m).sum();
    assert!((integral - energy).abs() < 1e-10, "{integral} vs {energy}");
}

#[test]
fn synthesis_matches_cosine_recurrence() {
    let mu = TruthSpec::PowerLaw { beta: 0.5, c: 1.0 }.coefficients(500);
    let grid = unit_grid(97);
    let fast = synthesize_function(&mu, &grid);
    for (t, v) in grid.iter().zip(&fast) {
        let theta = PI * t;
        // c_{i+1} = 2 cos θ c_i - c_{i-1}, with c_0 = c_1 = cos(θ/2).
        let (mut prev, mut cur) = ((0.5 * theta).cos(), (0.5 * theta).cos());
        let mut s = mu[0] * cur;
        for m in &mu[1..] {
            let next = 2.0 * theta.cos() * cur - prev;
            prev = cur;
            cur = next;
            s += m * cur;
        }
        assert!((SQRT_2 * s - v).abs() < 1e-10, "t = {t}");
    }
}

#[test]
fn norms_against_closed_forms() {
    // Σ i^{2β'} i^{-1-2β} over i <= 2000 for β' = β - 1: a convergent p-series.
    let mu = TruthSpec::PowerLaw { beta: 1.5, c: 1.0 }.coefficients(2000);
    let direct: f64 = (1..=2000).rev().map(|i| (i as f64).powi(-3)).sum();
    assert!((sobolev_norm_sq(&mu, 0.5) - direct).abs() < 1e-13);
    // Σ e^{2γ'i} e^{-2γi} = Σ r^i with r = e^{-2(γ-γ')}.
    let (gamma, gp, len) = (1.0, 0.25, 60);
    let mu = TruthSpec::AnalyticDecay { gamma, c: 1.0 }.coefficients(len);
    let r = (-2.0 * (gamma - gp)).exp();
    let geometric = r * (1.0 - r.powi(len as i32)) / (1.0 - r);
    assert!((analytic_norm_sq(&mu, gp) - geometric).abs() < 1e-14);
}

proptest! {
    #[test]
    fn observation_json_round_trips(n in 1.0f64..1e12, len in 1usize..40, seed in any::<u64>(), p in 0.0f64..3.0) {
        let obs = simulate(&TruthSpec::SineDecay, &ModelSpec::ExactPower { p }, n, len, seed).unwrap();
        let back = Observation::from_json(&obs.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, obs);
    }

    #[test]
    fn auto_truncation_is_the_smallest_sufficient_level(n in 2.0f64..1e14, p in 0.0f64..3.0) {
        let model = ModelSpec::ExactPower { p };
        let level = model.auto_truncation(n);
        let target = n.powf(1.0 / (1.0 + 2.0 * p));
        prop_assert!(level >= 1);
        if target < 1e5 {
            prop_assert!(level as f64 >= target * (1.0 - 1e-9));
            prop_assert!(((level - 1) as f64) < target);
        } else {
            prop_assert_eq!(level, 100_000);
        }
    }
}
