//! Fictitious play for one initial distribution, with exact best responses.

use serde::{Deserialize, Serialize};

use crate::distribution::{Distribution, MFFlow};
use crate::env::Environment;
use crate::error::{MfgError, Result};
use crate::mfg::{best_response, exploitability, rollout_flow};
use crate::policy::{NonStationaryPolicy, StationaryPolicy};

/// Output of [`solve_specialized_fp`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecializedSolution {
    /// The average policy: past best responses weighted by the mass each
    /// one's flow puts on a state.
    pub policy: NonStationaryPolicy,
    /// `Phi(mu0, policy)`, the equilibrium flow estimate.
    pub flow: MFFlow,
    /// Uniform average of the induced flows of all best responses so far.
    pub averaged_flow: MFFlow,
    /// The averaged flow one iteration earlier (the initial constant flow
    /// when only one iteration ran).
    pub previous_averaged_flow: MFFlow,
    /// Exploitability of the average policy after iterations `1..=K`.
    pub curve: Vec<f64>,
}

/// Running flow-weighted mixture of non-stationary policies.
struct MixtureAccumulator {
    n_states: usize,
    n_actions: usize,
    numer: Vec<f64>,
    denom: Vec<f64>,
}

impl MixtureAccumulator {
    fn new(steps: usize, n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            numer: vec![0.0; steps * n_states * n_actions],
            denom: vec![0.0; steps * n_states],
        }
    }

    fn add(&mut self, policy: &NonStationaryPolicy, flow: &MFFlow) {
        let (ns, na) = (self.n_states, self.n_actions);
        let steps = self.denom.len() / ns;
        for n in 0..steps {
            let rule = policy.step(n);
            for (x, &m) in flow.get(n).probs().iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                self.denom[n * ns + x] += m;
                let base = (n * ns + x) * na;
                for (a, p) in rule.row(x).iter().enumerate() {
                    self.numer[base + a] += m * p;
                }
            }
        }
    }

    /// Mixture rules; states no flow has reached get the uniform rule.
    fn policy(&self) -> NonStationaryPolicy {
        let (ns, na) = (self.n_states, self.n_actions);
        let steps = self.denom.len() / ns;
        let rules = (0..steps)
            .map(|n| {
                let mut probs = Vec::with_capacity(ns * na);
                for x in 0..ns {
                    let d = self.denom[n * ns + x];
                    let base = (n * ns + x) * na;
                    if d > 0.0 {
                        let row = &self.numer[base..base + na];
                        let total: f64 = row.iter().sum();
                        probs.extend(row.iter().map(|v| v / total));
                    } else {
                        probs.extend(std::iter::repeat_n(1.0 / na as f64, na));
                    }
                }
                StationaryPolicy::from_flat(na, probs).expect("mixture rows are distributions")
            })
            .collect();
        NonStationaryPolicy::new(rules).expect("consistent steps")
    }
}

/// Classic fictitious play from `mu0`: iteration `k` best-responds to the
/// averaged flow of iterations `1..k` (the constant `mu0` flow at `k = 1`)
/// and folds its induced flow into the average with weight `1/k`.
pub fn solve_specialized_fp(
    env: &dyn Environment,
    mu0: &Distribution,
    iterations: usize,
    horizon: usize,
) -> Result<SpecializedSolution> {
    if iterations == 0 {
        return Err(MfgError::InvalidConfig("fictitious play needs at least one iteration".into()));
    }
    let mut averaged = MFFlow::constant(mu0, horizon);
    let mut previous = averaged.clone();
    let mut acc = MixtureAccumulator::new(horizon + 1, env.n_states(), env.n_actions());
    let mut curve = Vec::with_capacity(iterations);
    let mut policy = None;
    for k in 1..=iterations {
        let (br, _) = best_response(env, &averaged, horizon)?;
        let induced = rollout_flow(env, mu0, &br, horizon)?;
        acc.add(&br, &induced);
        previous = averaged;
        averaged = if k == 1 {
            induced
        } else {
            previous.mix(&induced, 1.0 / k as f64)?
        };
        let avg_policy = acc.policy();
        curve.push(exploitability(env, mu0, &avg_policy, horizon)?);
        policy = Some(avg_policy);
    }
    let policy = policy.expect("at least one iteration");
    let flow = rollout_flow(env, mu0, &policy, horizon)?;
    Ok(SpecializedSolution {
        policy,
        flow,
        averaged_flow: averaged,
        previous_averaged_flow: previous,
        curve,
    })
}
