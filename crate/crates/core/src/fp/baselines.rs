//! Population-agnostic baseline trained on an average of equilibrium flows.

use std::collections::BTreeMap;

use crate::distribution::MFFlow;
use crate::env::{reward_table, Environment};
use crate::error::{check_at_least, check_len, MfgError, Result};
use crate::mfg::backward_induction;
use crate::policy::NonStationaryPolicy;

/// Greedy policy for the MDP whose stage reward is the mean of the rewards
/// along the given flows (and whose kernel is the mean kernel).
pub fn solve_mixture_reward(
    env: &dyn Environment,
    flows: &[MFFlow],
    horizon: usize,
) -> Result<NonStationaryPolicy> {
    if flows.is_empty() {
        return Err(MfgError::InvalidConfig("mixture reward needs at least one flow".into()));
    }
    for f in flows {
        check_at_least("flow length", horizon + 1, f.len())?;
        check_len("flow states", env.n_states(), f.n_states())?;
    }
    let na = env.n_actions();
    let k = flows.len() as f64;
    let rewards: Vec<Vec<f64>> = (0..=horizon)
        .map(|n| {
            let mut acc = vec![0.0; env.n_states() * na];
            for f in flows {
                for (a, r) in acc.iter_mut().zip(reward_table(env, f.get(n))) {
                    *a += r;
                }
            }
            acc.into_iter().map(|a| a / k).collect()
        })
        .collect();
    let independent = env.transition_mu_independent();
    let (policy, _) = backward_induction(
        env.n_states(),
        na,
        env.gamma(),
        horizon,
        |n, x, a| rewards[n][x * na + a],
        |n, x, a| {
            if independent {
                return env.transition(x, a, flows[0].get(n));
            }
            let mut merged = BTreeMap::new();
            for f in flows {
                for (y, p) in env.transition(x, a, f.get(n)) {
                    *merged.entry(y).or_insert(0.0) += p / k;
                }
            }
            merged.into_iter().collect()
        },
    );
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Distribution;
    use crate::envs::{make_exploration_1d, Exploration1DConfig};
    use crate::mfg::best_response;

    #[test]
    fn one_flow_is_a_best_response() {
        let env = make_exploration_1d(&Exploration1DConfig {
            size: 6,
            ..Default::default()
        })
        .unwrap();
        let flow = MFFlow::constant(&Distribution::new(vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap(), 4);
        let (br, _) = best_response(&env, &flow, 4).unwrap();
        assert_eq!(solve_mixture_reward(&env, std::slice::from_ref(&flow), 4).unwrap(), br);
        assert_eq!(solve_mixture_reward(&env, &[flow.clone(), flow], 4).unwrap(), br);
        assert!(solve_mixture_reward(&env, &[], 4).is_err());
    }
}
