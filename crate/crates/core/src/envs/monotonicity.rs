//! Sampled checks of the structural assumptions behind equilibrium
//! uniqueness: monotone population reward and separable reward.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::env::Environment;
use crate::envs::sets::random_distribution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub pairs: usize,
    /// Pairs whose margin is nonnegative.
    pub violations: usize,
    /// Largest (least negative) margin seen.
    pub max_margin: f64,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// `sum_x (mu - nu)(x) * (r_M(x, mu) - r_M(x, nu))`; negative for a strictly
/// monotone game.
pub fn monotonicity_margin(env: &dyn Environment, mu: &Distribution, nu: &Distribution) -> f64 {
    (0..env.n_states())
        .map(|x| (mu.get(x) - nu.get(x)) * (env.reward_mean_field(x, mu) - env.reward_mean_field(x, nu)))
        .sum()
}

/// Draws `n_pairs` pairs of distinct random distributions and counts pairs
/// with a nonnegative margin.
pub fn check_monotonicity(env: &dyn Environment, n_pairs: usize, seed: u64) -> MonotonicityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = env.state_space();
    let mut violations = 0;
    let mut max_margin = f64::NEG_INFINITY;
    for _ in 0..n_pairs {
        let mu = random_distribution(space, rng.random());
        let nu = loop {
            let nu = random_distribution(space, rng.random());
            if nu != mu {
                break nu;
            }
        };
        let m = monotonicity_margin(env, &mu, &nu);
        if m >= 0.0 {
            violations += 1;
        }
        max_margin = max_margin.max(m);
    }
    MonotonicityReport {
        pairs: n_pairs,
        violations,
        max_margin,
    }
}

/// Largest `|r(x, a, mu) - r_A(x, a) - r_M(x, mu)|` over every state-action
/// pair and `n_samples` random populations.
pub fn separability_error(env: &dyn Environment, n_samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let mu = random_distribution(env.state_space(), rng.random());
        for x in 0..env.n_states() {
            let rm = env.reward_mean_field(x, &mu);
            for a in 0..env.n_actions() {
                let err = env.reward(x, a, &mu) - (env.reward_action(x, a) + rm);
                worst = worst.max(err.abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{
        make_beach_bar_2d, make_exploration_1d, BeachBar2DConfig, Exploration1DConfig,
        NegatedMeanFieldReward, TabularMfg,
    };

    #[test]
    fn crowd_aversion_is_monotone() {
        let env = make_exploration_1d(&Exploration1DConfig::default()).unwrap();
        let rep = check_monotonicity(&env, 200, 1);
        assert_eq!(rep.violations, 0);
        assert!(rep.max_margin < 0.0);
        let env = make_beach_bar_2d(&BeachBar2DConfig::default()).unwrap();
        assert!(check_monotonicity(&env, 50, 2).passed());
        assert!(check_monotonicity(&TabularMfg::crowd_averse(5, 0.5), 50, 3).passed());
    }

    #[test]
    fn crowd_seeking_always_violates() {
        let rep = check_monotonicity(&TabularMfg::crowd_seeking(6, 0.5), 100, 4);
        assert_eq!(rep.violations, 100);
        let env = NegatedMeanFieldReward(make_exploration_1d(&Exploration1DConfig::default()).unwrap());
        assert_eq!(check_monotonicity(&env, 100, 5).violations, 100);
    }

    #[test]
    fn margin_oracle_on_two_states() {
        // r_M = -mu(x): margin = -|mu - nu|_2^2.
        let env = TabularMfg::crowd_averse(2, 0.5);
        let mu = Distribution::new(vec![0.25, 0.75]).unwrap();
        let nu = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert!((monotonicity_margin(&env, &mu, &nu) + 0.125).abs() < 1e-15);
    }

    #[test]
    fn lattice_rewards_are_separable() {
        let env = make_exploration_1d(&Exploration1DConfig::default()).unwrap();
        assert!(separability_error(&env, 20, 6) < 1e-12);
        let env = make_beach_bar_2d(&BeachBar2DConfig::default()).unwrap();
        assert!(separability_error(&env, 5, 7) < 1e-12);
    }
}
