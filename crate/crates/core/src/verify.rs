//! Self-checks run by the command-line `verify` verb: brute-force optimality
//! of backward induction on small random games.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{Distribution, MFFlow};
use crate::env::Environment;
use crate::envs::TabularMfg;
use crate::error::Result;
use crate::mfg::{best_response, evaluate_policy, exploitability_against, rollout_flow};
use crate::policy::{NonStationaryPolicy, StationaryPolicy};
use crate::seed::SeedTree;

/// Largest `|A|^(|X| * steps)` the enumeration will attempt.
pub const MAX_ENUMERATED_POLICIES: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instances: usize,
    /// Worst gap between the backward-induction value and the enumerated
    /// optimum.
    pub max_value_gap: f64,
    /// Worst gap between exploitability and its enumerated counterpart.
    pub max_exploitability_gap: f64,
}

impl OracleReport {
    pub fn passed(&self, value_tol: f64, exploitability_tol: f64) -> bool {
        self.max_value_gap <= value_tol && self.max_exploitability_gap <= exploitability_tol
    }
}

/// Best `J(mu0, pi; flow)` over every deterministic non-stationary policy.
/// `None` when there are more than [`MAX_ENUMERATED_POLICIES`] of them.
pub fn enumerate_best_value(
    env: &dyn Environment,
    mu0: &Distribution,
    flow: &MFFlow,
    horizon: usize,
) -> Result<Option<f64>> {
    let (ns, na, steps) = (env.n_states(), env.n_actions(), horizon + 1);
    let Some(count) = u32::try_from(ns * steps).ok().and_then(|e| na.checked_pow(e)) else {
        return Ok(None);
    };
    if count > MAX_ENUMERATED_POLICIES {
        return Ok(None);
    }
    let mut best = f64::NEG_INFINITY;
    let mut actions = vec![0usize; ns];
    for code in 0..count {
        let mut c = code;
        let mut rules = Vec::with_capacity(steps);
        for _ in 0..steps {
            for a in actions.iter_mut() {
                *a = c % na;
                c /= na;
            }
            rules.push(StationaryPolicy::deterministic(&actions, na)?);
        }
        let policy = NonStationaryPolicy::new(rules)?;
        best = best.max(evaluate_policy(env, mu0, &policy, flow, horizon)?);
    }
    Ok(Some(best))
}

fn random_simplex<R: Rng>(n: usize, rng: &mut R) -> Result<Distribution> {
    Distribution::from_weights((0..n).map(|_| rng.random::<f64>() + 1e-3).collect())
}

/// Compares best response and exploitability with exhaustive enumeration on
/// `instances` random games with at most 3 states, 2 actions and 3 steps.
pub fn oracle_equivalence(instances: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = SeedTree::new(seed).rng("oracle-games");
    let mut report = OracleReport {
        instances,
        max_value_gap: 0.0,
        max_exploitability_gap: 0.0,
    };
    for _ in 0..instances {
        let ns = rng.random_range(1..=3);
        let na = rng.random_range(1..=2);
        let horizon = rng.random_range(0..=3);
        let gamma = rng.random_range(0.5..0.95);
        let mu_dependent = rng.random_bool(0.5);
        let env = TabularMfg::random(ns, na, gamma, mu_dependent, &mut rng)?;
        let mu0 = random_simplex(ns, &mut rng)?;
        let rules = (0..=horizon)
            .map(|_| {
                let rows = (0..ns)
                    .map(|_| random_simplex(na, &mut rng).map(|d| d.probs().to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                StationaryPolicy::from_rows(rows)
            })
            .collect::<Result<Vec<_>>>()?;
        let policy = NonStationaryPolicy::new(rules)?;
        let flow = rollout_flow(&env, &mu0, &policy, horizon)?;
        let best = enumerate_best_value(&env, &mu0, &flow, horizon)?.expect("toy games are small");
        let (_, table) = best_response(&env, &flow, horizon)?;
        report.max_value_gap = report.max_value_gap.max((table.initial_value(&mu0) - best).abs());
        let e = exploitability_against(&env, &mu0, &policy, &flow, horizon)?;
        let own = evaluate_policy(&env, &mu0, &policy, &flow, horizon)?;
        report.max_exploitability_gap = report.max_exploitability_gap.max((e - (best - own)).abs());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_agrees_with_backward_induction() {
        let r = oracle_equivalence(30, 4).unwrap();
        assert!(r.passed(1e-12, 1e-9), "{r:?}");
    }

    #[test]
    fn enumeration_refuses_large_games() {
        let env = TabularMfg::constant_reward(8, 3, 0.9, 1.0);
        let flow = MFFlow::constant(&Distribution::uniform(8), 5);
        assert_eq!(enumerate_best_value(&env, &Distribution::uniform(8), &flow, 5).unwrap(), None);
    }

    #[test]
    fn constant_game_optimum_is_geometric_sum() {
        let env = TabularMfg::constant_reward(2, 2, 0.5, 1.0);
        let flow = MFFlow::constant(&Distribution::uniform(2), 2);
        let best = enumerate_best_value(&env, &Distribution::uniform(2), &flow, 2).unwrap().unwrap();
        assert!((best - 1.75).abs() < 1e-15);
    }
}
