//! Exact finite-horizon primitives: mean-field propagation, policy
//! evaluation, best response by backward induction and exploitability.
//!
//! Everything here propagates distributions exactly; nothing samples.
//! Horizons are inclusive: a horizon `N` covers steps `0..=N`, so a flow
//! has `N + 1` states and a return sums `N + 1` discounted rewards.

use crate::distribution::{Distribution, MFFlow};
use crate::env::{check_distribution, reward_table, Environment};
use crate::error::{check_at_least, check_len, Result};
use crate::policy::{NonStationaryPolicy, PopulationPolicy, StationaryPolicy};

/// Pushes `rho` one step forward under `policy`, with `mf_state` as the
/// mean-field argument of the kernel.
pub fn push_forward(
    env: &dyn Environment,
    rho: &Distribution,
    policy: &StationaryPolicy,
    mf_state: &Distribution,
) -> Distribution {
    let mut next = vec![0.0; env.n_states()];
    for (x, &mass) in rho.probs().iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (a, &pa) in policy.row(x).iter().enumerate() {
            let w = mass * pa;
            if w == 0.0 {
                continue;
            }
            for (y, p) in env.transition(x, a, mf_state) {
                next[y] += w * p;
            }
        }
    }
    Distribution::from_mass(next)
}

pub(crate) fn check_policy(env: &dyn Environment, policy: &StationaryPolicy) -> Result<()> {
    check_len("policy states", env.n_states(), policy.n_states())?;
    check_len("policy actions", env.n_actions(), policy.n_actions())
}

/// Next mean-field state `phi(mu, policy)`.
pub fn step_mean_field(
    env: &dyn Environment,
    mu: &Distribution,
    policy: &StationaryPolicy,
) -> Result<Distribution> {
    check_distribution(env, mu)?;
    check_policy(env, policy)?;
    Ok(push_forward(env, mu, policy, mu))
}

/// Flow `Phi(mu0, policy)` over steps `0..=horizon`.
pub fn rollout_flow(
    env: &dyn Environment,
    mu0: &Distribution,
    policy: &NonStationaryPolicy,
    horizon: usize,
) -> Result<MFFlow> {
    check_distribution(env, mu0)?;
    check_at_least("policy steps", horizon + 1, policy.len())?;
    check_policy(env, policy.step(0))?;
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(mu0.clone());
    for n in 0..horizon {
        let next = push_forward(env, &states[n], policy.step(n), &states[n]);
        states.push(next);
    }
    MFFlow::new(states)
}

/// `J(mu0, policy; flow)`: expected discounted return of one agent starting
/// from `mu0` while the population follows `flow`.
pub fn evaluate_policy(
    env: &dyn Environment,
    mu0: &Distribution,
    policy: &NonStationaryPolicy,
    flow: &MFFlow,
    horizon: usize,
) -> Result<f64> {
    check_distribution(env, mu0)?;
    check_at_least("flow length", horizon + 1, flow.len())?;
    check_at_least("policy steps", horizon + 1, policy.len())?;
    check_policy(env, policy.step(0))?;
    check_len("flow states", env.n_states(), flow.n_states())?;
    Ok(evaluate_rules(env, mu0, policy.steps(), flow, horizon))
}

pub(crate) fn evaluate_rules(
    env: &dyn Environment,
    mu0: &Distribution,
    rules: &[StationaryPolicy],
    flow: &MFFlow,
    horizon: usize,
) -> f64 {
    let gamma = env.gamma();
    let na = env.n_actions();
    let mut rho = mu0.clone();
    let mut total = 0.0;
    let mut discount = 1.0;
    for n in 0..=horizon {
        let mf = flow.get(n);
        let rule = &rules[n];
        let rewards = reward_table(env, mf);
        let mut stage = 0.0;
        for (x, &mass) in rho.probs().iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let row = rule.row(x);
            let r = &rewards[x * na..(x + 1) * na];
            stage += mass * row.iter().zip(r).map(|(p, r)| p * r).sum::<f64>();
        }
        total += discount * stage;
        discount *= gamma;
        if n < horizon {
            rho = push_forward(env, &rho, rule, mf);
        }
    }
    total
}

/// Optimal values and action values over steps `0..=horizon`; the value
/// after the last step is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    q_values: Vec<f64>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn value(&self, n: usize, x: usize) -> f64 {
        self.values[n * self.n_states + x]
    }

    pub fn values_at(&self, n: usize) -> &[f64] {
        &self.values[n * self.n_states..(n + 1) * self.n_states]
    }

    pub fn q(&self, n: usize, x: usize, a: usize) -> f64 {
        self.q_values[(n * self.n_states + x) * self.n_actions + a]
    }

    pub fn q_row(&self, n: usize, x: usize) -> &[f64] {
        let i = (n * self.n_states + x) * self.n_actions;
        &self.q_values[i..i + self.n_actions]
    }

    /// `sum_x mu0(x) V_0(x)`, the best achievable return from `mu0`.
    pub fn initial_value(&self, mu0: &Distribution) -> f64 {
        mu0.probs()
            .iter()
            .zip(self.values_at(0))
            .map(|(m, v)| m * v)
            .sum()
    }
}

/// Index of the first maximum.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Backward induction for a finite MDP given stage rewards and kernels.
///
/// `reward(n, x, a)` and `transition(n, x, a)` describe step `n`. Returns
/// the greedy deterministic policy (lowest action index on ties) and the
/// value table.
pub fn backward_induction<R, P>(
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    horizon: usize,
    reward: R,
    transition: P,
) -> (NonStationaryPolicy, ValueTable)
where
    R: Fn(usize, usize, usize) -> f64,
    P: Fn(usize, usize, usize) -> Vec<(usize, f64)>,
{
    let steps = horizon + 1;
    let mut values = vec![0.0; steps * n_states];
    let mut q_values = vec![0.0; steps * n_states * n_actions];
    let mut greedy = vec![vec![0usize; n_states]; steps];
    let mut next_v = vec![0.0; n_states];
    for n in (0..steps).rev() {
        for x in 0..n_states {
            let qi = (n * n_states + x) * n_actions;
            for a in 0..n_actions {
                let cont: f64 = transition(n, x, a)
                    .into_iter()
                    .map(|(y, p)| p * next_v[y])
                    .sum();
                q_values[qi + a] = reward(n, x, a) + gamma * cont;
            }
            let row = &q_values[qi..qi + n_actions];
            let best = argmax_first(row);
            greedy[n][x] = best;
            values[n * n_states + x] = row[best];
        }
        next_v.copy_from_slice(&values[n * n_states..(n + 1) * n_states]);
    }
    let policy = NonStationaryPolicy::new(
        greedy
            .iter()
            .map(|acts| StationaryPolicy::deterministic(acts, n_actions).expect("valid actions"))
            .collect(),
    )
    .expect("consistent steps");
    (
        policy,
        ValueTable {
            horizon,
            n_states,
            n_actions,
            values,
            q_values,
        },
    )
}

/// Best response to a fixed flow over steps `0..=horizon`.
pub fn best_response(
    env: &dyn Environment,
    flow: &MFFlow,
    horizon: usize,
) -> Result<(NonStationaryPolicy, ValueTable)> {
    check_at_least("flow length", horizon + 1, flow.len())?;
    check_len("flow states", env.n_states(), flow.n_states())?;
    let na = env.n_actions();
    let rewards: Vec<Vec<f64>> = (0..=horizon)
        .map(|n| reward_table(env, flow.get(n)))
        .collect();
    Ok(backward_induction(
        env.n_states(),
        na,
        env.gamma(),
        horizon,
        |n, x, a| rewards[n][x * na + a],
        |n, x, a| env.transition(x, a, flow.get(n)),
    ))
}

/// `max_pi' J(mu0, pi'; flow) - J(mu0, policy; flow)` for `flow = Phi(mu0, policy)`.
pub fn exploitability(
    env: &dyn Environment,
    mu0: &Distribution,
    policy: &NonStationaryPolicy,
    horizon: usize,
) -> Result<f64> {
    let flow = rollout_flow(env, mu0, policy, horizon)?;
    exploitability_against(env, mu0, policy, &flow, horizon)
}

/// Exploitability of `policy` against a flow the caller already computed
/// (normally `Phi(mu0, policy)`).
pub fn exploitability_against(
    env: &dyn Environment,
    mu0: &Distribution,
    policy: &NonStationaryPolicy,
    flow: &MFFlow,
    horizon: usize,
) -> Result<f64> {
    let (_, table) = best_response(env, flow, horizon)?;
    let best = table.initial_value(mu0);
    let own = evaluate_policy(env, mu0, policy, flow, horizon)?;
    Ok(best - own)
}

/// Self-consistent rollout of a population-dependent policy:
/// `pi_n = pi~(., mu_n)` and `mu_{n+1} = phi(mu_n, pi_n)`.
pub fn induce_policy(
    policy: &dyn PopulationPolicy,
    env: &dyn Environment,
    mu0: &Distribution,
    horizon: usize,
) -> Result<(NonStationaryPolicy, MFFlow)> {
    check_distribution(env, mu0)?;
    check_len("policy actions", env.n_actions(), policy.n_actions())?;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut rules = Vec::with_capacity(horizon + 1);
    states.push(mu0.clone());
    for n in 0..=horizon {
        let rule = policy.decision_rule(n, &states[n]);
        check_policy(env, &rule)?;
        if n < horizon {
            let next = push_forward(env, &states[n], &rule, &states[n]);
            states.push(next);
        }
        rules.push(rule);
    }
    Ok((NonStationaryPolicy::new(rules)?, MFFlow::new(states)?))
}
