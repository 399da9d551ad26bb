//! Uniform mixtures of population-dependent policies.

use crate::distribution::{Distribution, MFFlow};
use crate::env::{check_distribution, Environment};
use crate::error::{check_len, MfgError, Result};
use crate::mfg::{best_response, check_policy, evaluate_rules, push_forward};
use crate::policy::{PopulationPolicy, StationaryPolicy};

/// Result of [`rollout_mixture`].
#[derive(Clone, Debug)]
pub struct MixtureRollout {
    /// Flow of each subpopulation.
    pub flows: Vec<MFFlow>,
    /// Decision rules each subpopulation applied, one per step.
    pub rules: Vec<Vec<StationaryPolicy>>,
    /// Uniform average of the subpopulation flows.
    pub average: MFFlow,
    /// `J(mu0, pi_k; average)` for each member.
    pub values: Vec<f64>,
}

impl MixtureRollout {
    /// `(1/K) sum_k J(mu0, pi_k; average)`.
    pub fn mean_value(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn mean_distribution(parts: &[Distribution]) -> Distribution {
    if parts.len() == 1 {
        return parts[0].clone();
    }
    let k = parts.len() as f64;
    let mut acc = vec![0.0; parts[0].len()];
    for d in parts {
        for (a, p) in acc.iter_mut().zip(d.probs()) {
            *a += p;
        }
    }
    Distribution::from_mass(acc.into_iter().map(|a| a / k).collect())
}

/// Splits the population into one equal share per policy. Every share starts
/// at `mu0`; at step `n` share `k` plays `pi_k(. | x, avg_n)` where `avg_n`
/// is the mean of all shares, and moves under the kernel at `avg_n`.
pub fn rollout_mixture(
    env: &dyn Environment,
    mu0: &Distribution,
    policies: &[&dyn PopulationPolicy],
    horizon: usize,
) -> Result<MixtureRollout> {
    if policies.is_empty() {
        return Err(MfgError::InvalidPolicy("empty mixture".into()));
    }
    check_distribution(env, mu0)?;
    for p in policies {
        check_len("policy actions", env.n_actions(), p.n_actions())?;
    }
    let k = policies.len();
    let mut current = vec![mu0.clone(); k];
    let mut flows: Vec<Vec<Distribution>> = vec![Vec::with_capacity(horizon + 1); k];
    let mut rules: Vec<Vec<StationaryPolicy>> = vec![Vec::with_capacity(horizon + 1); k];
    let mut average = Vec::with_capacity(horizon + 1);
    for n in 0..=horizon {
        let avg = mean_distribution(&current);
        for (i, policy) in policies.iter().enumerate() {
            let rule = policy.decision_rule(n, &avg);
            check_policy(env, &rule)?;
            let next = (n < horizon).then(|| push_forward(env, &current[i], &rule, &avg));
            flows[i].push(current[i].clone());
            rules[i].push(rule);
            if let Some(next) = next {
                current[i] = next;
            }
        }
        average.push(avg);
    }
    let average = MFFlow::new(average)?;
    let values = rules
        .iter()
        .map(|r| evaluate_rules(env, mu0, r, &average, horizon))
        .collect();
    Ok(MixtureRollout {
        flows: flows.into_iter().map(MFFlow::new).collect::<Result<_>>()?,
        rules,
        average,
        values,
    })
}

/// Best response value against the mixture's average flow minus the
/// mixture's mean value.
pub fn mixture_exploitability(
    env: &dyn Environment,
    mu0: &Distribution,
    rollout: &MixtureRollout,
    horizon: usize,
) -> Result<f64> {
    let (_, table) = best_response(env, &rollout.average, horizon)?;
    Ok(table.initial_value(mu0) - rollout.mean_value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_exploration_1d, Exploration1DConfig};
    use crate::mfg::{exploitability, induce_policy};
    use crate::policy::{NonStationaryPolicy, UniformPolicy};

    fn env3() -> impl Environment {
        make_exploration_1d(&Exploration1DConfig {
            size: 3,
            ..Default::default()
        })
        .unwrap()
    }

    /// Moves right when the state's mass is at most a threshold, else left.
    struct Threshold(f64);

    impl PopulationPolicy for Threshold {
        fn n_actions(&self) -> usize {
            3
        }

        fn act(&self, _step: usize, x: usize, mu: &Distribution) -> Vec<f64> {
            if mu.get(x) <= self.0 {
                vec![0.0, 0.0, 1.0]
            } else {
                vec![1.0, 0.0, 0.0]
            }
        }
    }

    #[test]
    fn single_member_matches_self_consistent_rollout() {
        let env = env3();
        let mu0 = Distribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        let p = Threshold(0.35);
        let m = rollout_mixture(&env, &mu0, &[&p], 4).unwrap();
        let (reduced, flow) = induce_policy(&p, &env, &mu0, 4).unwrap();
        assert_eq!(m.average, flow);
        assert_eq!(m.rules[0], reduced.steps());
        let e = mixture_exploitability(&env, &mu0, &m, 4).unwrap();
        assert!((e - exploitability(&env, &mu0, &reduced, 4).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn identical_members_collapse() {
        let env = env3();
        let mu0 = Distribution::new(vec![0.2, 0.5, 0.3]).unwrap();
        let p = Threshold(0.4);
        let one = rollout_mixture(&env, &mu0, &[&p], 5).unwrap();
        let three = rollout_mixture(&env, &mu0, &[&p, &p, &p], 5).unwrap();
        for (a, b) in one.average.states().iter().zip(three.average.states()) {
            assert!(a.l1_distance(b) < 1e-15);
        }
    }

    #[test]
    fn two_members_match_hand_recursion() {
        // Member A: threshold 0.35; member B: always stay.
        let env = env3();
        let mu0 = Distribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        let a = Threshold(0.35);
        let stay = NonStationaryPolicy::constant(StationaryPolicy::deterministic(&[1, 1, 1], 3).unwrap(), 3);
        let m = rollout_mixture(&env, &mu0, &[&a, &stay], 3).unwrap();
        // Step 0: avg = mu0. A moves x0 left (0.6 > .35), x1 right, x2 right.
        // A_1 = [0.6, 0, 0.4]; B_1 = mu0; avg_1 = [0.6, 0.15, 0.25].
        // Step 1: A moves x0 left, x1 right, x2 right: A_2 = [0.6, 0, 0.4].
        // Steps 2, 3 repeat since avg stays the same.
        let expect = [
            [0.6, 0.3, 0.1],
            [0.6, 0.15, 0.25],
            [0.6, 0.15, 0.25],
            [0.6, 0.15, 0.25],
        ];
        for (d, e) in m.average.states().iter().zip(expect) {
            for (p, q) in d.probs().iter().zip(e) {
                assert!((p - q).abs() < 1e-15);
            }
        }
        assert!(m.flows[0].get(1).l1_distance(&Distribution::new(vec![0.6, 0.0, 0.4]).unwrap()) < 1e-15);
        for f in &m.flows {
            assert!(f.states().iter().all(|d| (d.total() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn uniform_mixture_exploitability_is_nonnegative() {
        let env = env3();
        let mu0 = Distribution::uniform(3);
        let u = UniformPolicy { n_actions: 3 };
        let t = Threshold(0.3);
        let m = rollout_mixture(&env, &mu0, &[&u, &t], 6).unwrap();
        assert!(mixture_exploitability(&env, &mu0, &m, 6).unwrap() >= -1e-9);
        assert!(rollout_mixture(&env, &mu0, &[], 6).is_err());
    }
}
