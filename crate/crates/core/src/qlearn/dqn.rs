//! DQN for a population-dependent best response against a flow bank.
//!
//! Each episode samples a bank flow and a start state, then plays the inner
//! steps with an epsilon-greedy policy on the target network, where the
//! population input and the mean-field argument of the environment are both
//! the bank flow at the current step. After the episode one minibatch
//! gradient step is taken on the squared TD error with targets
//! `r + gamma * max_a' Q_online(x', mu', a')`, zero past the last step.
//! The target network is synced every `sync_period` gradient steps.

use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng;

use crate::env::Environment;
use crate::error::{MfgError, Result};
use crate::fp::AveragedFlowBank;
use crate::mfg::argmax_first;
use crate::qlearn::config::RLConfig;
use crate::qlearn::network::{BatchInput, QNetwork};
use crate::qlearn::optim::Optimizer;
use crate::qlearn::replay::{ReplayBuffer, Transition};
use crate::seed::SeedTree;

/// Reported after every environment step, for auditing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DqnStep {
    pub episode: usize,
    pub inner_step: usize,
    /// Gradient steps taken so far.
    pub updates: usize,
    pub target_checksum: u64,
    pub action: usize,
}

fn sample_index<R: Rng>(rng: &mut R, weights: impl IntoIterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights {
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Mean over the batch of `(target - Q(x, mu, a))^2`.
pub fn td_loss(predicted: &[f64], targets: &[f64]) -> f64 {
    predicted
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / predicted.len().max(1) as f64
}

pub fn train_dqn(
    env: &dyn Environment,
    bank: &AveragedFlowBank,
    cfg: &RLConfig,
    zero_mu_input: bool,
) -> Result<QNetwork> {
    train_dqn_observed(env, bank, cfg, zero_mu_input, &mut |_| {})
}

pub fn train_dqn_observed(
    env: &dyn Environment,
    bank: &AveragedFlowBank,
    cfg: &RLConfig,
    zero_mu_input: bool,
    observer: &mut dyn FnMut(DqnStep),
) -> Result<QNetwork> {
    cfg.validate()?;
    if bank.n_states() != env.n_states() {
        return Err(MfgError::Shape {
            what: "bank flow states",
            expected: env.n_states(),
            actual: bank.n_states(),
        });
    }
    let horizon = bank.horizon();
    let inner = cfg.inner_steps.unwrap_or(horizon + 1).min(horizon + 1);
    let na = env.n_actions();
    let gamma = env.gamma();
    let seeds = SeedTree::new(cfg.seed);
    let mut online = QNetwork::init(cfg.network_spec(env, zero_mu_input)?, &mut seeds.rng("init"))?;
    let mut target = online.clone();
    let mut target_sum = target.checksum();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, online.params());
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, seeds.rng("minibatch"));
    let mut rng = seeds.rng("env-sampling");
    let all_states: Vec<usize> = (0..env.n_states()).collect();
    // Greedy target-network actions per (flow, step), valid until the next sync.
    let mut target_proj = target.state_projection(&all_states);
    let mut greedy_cache: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut updates = 0usize;

    for episode in 0..cfg.episodes {
        let flow_idx = rng.random_range(0..bank.len());
        let flow = bank.flow(flow_idx);
        let mut x = sample_index(&mut rng, bank.initial(flow_idx).probs().iter().copied().enumerate());
        for n in 0..inner {
            let mu = flow.get(n);
            let action = if rng.random::<f64>() < cfg.epsilon {
                rng.random_range(0..na)
            } else {
                let acts = greedy_cache.entry((flow_idx, n)).or_insert_with(|| {
                    let q = target.q_table_with(&target_proj, mu.probs()).expect("population matches");
                    q.rows()
                        .into_iter()
                        .map(|r| argmax_first(r.as_slice().expect("standard layout")))
                        .collect()
                });
                acts[x]
            };
            observer(DqnStep {
                episode,
                inner_step: n,
                updates,
                target_checksum: target_sum,
                action,
            });
            let reward = env.reward(x, action, mu);
            let next = sample_index(&mut rng, env.transition(x, action, mu));
            buffer.push(Transition {
                state: x,
                action,
                reward,
                next_state: next,
                flow: flow_idx,
                step: n,
                terminal: n == horizon,
            });
            x = next;
        }

        let batch = buffer.sample(cfg.batch_size);
        let targets = td_targets(&online, bank, &batch, gamma)?;
        gradient_step(&mut online, &mut opt, bank, &batch, &targets)?;
        updates += 1;
        if updates.is_multiple_of(cfg.sync_period) {
            target = online.clone();
            target_sum = target.checksum();
            target_proj = target.state_projection(&all_states);
            greedy_cache.clear();
        }
    }
    Ok(online)
}

/// Groups transitions into distinct states and populations for one batched
/// forward pass. `next` selects the successor side.
fn batch_layout(batch: &[Transition], next: bool) -> (Vec<usize>, Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut states = Vec::new();
    let mut state_pos = HashMap::new();
    let mut mus = Vec::new();
    let mut mu_pos = HashMap::new();
    let mut pairs = Vec::with_capacity(batch.len());
    for t in batch {
        let (x, key) = if next {
            (t.next_state, (t.flow, t.step + 1))
        } else {
            (t.state, (t.flow, t.step))
        };
        let i = *state_pos.entry(x).or_insert_with(|| {
            states.push(x);
            states.len() - 1
        });
        let j = *mu_pos.entry(key).or_insert_with(|| {
            mus.push(key);
            mus.len() - 1
        });
        pairs.push((i, j));
    }
    (states, mus, pairs)
}

fn td_targets(online: &QNetwork, bank: &AveragedFlowBank, batch: &[Transition], gamma: f64) -> Result<Vec<f64>> {
    let live: Vec<Transition> = batch.iter().filter(|t| !t.terminal).copied().collect();
    let mut cont = vec![0.0; batch.len()];
    if !live.is_empty() {
        let (states, keys, pairs) = batch_layout(&live, true);
        let mus: Vec<&[f64]> = keys.iter().map(|&(f, n)| bank.flow(f).get(n).probs()).collect();
        let q = online.forward(&BatchInput {
            states: &states,
            mus: &mus,
            pairs: &pairs,
        })?;
        let mut k = 0;
        for (c, t) in cont.iter_mut().zip(batch) {
            if !t.terminal {
                *c = q.row(k).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                k += 1;
            }
        }
    }
    Ok(batch.iter().zip(cont).map(|(t, c)| t.reward + gamma * c).collect())
}

fn gradient_step(
    online: &mut QNetwork,
    opt: &mut Optimizer,
    bank: &AveragedFlowBank,
    batch: &[Transition],
    targets: &[f64],
) -> Result<()> {
    if batch.is_empty() {
        return Ok(());
    }
    let (states, keys, pairs) = batch_layout(batch, false);
    let mus: Vec<&[f64]> = keys.iter().map(|&(f, n)| bank.flow(f).get(n).probs()).collect();
    let (q, cache) = online.forward_train(&BatchInput {
        states: &states,
        mus: &mus,
        pairs: &pairs,
    })?;
    let mut dq = Array2::zeros(q.dim());
    let scale = 2.0 / batch.len() as f64;
    for (s, (t, v)) in batch.iter().zip(targets).enumerate() {
        dq[[s, t.action]] = scale * (q[[s, t.action]] - v);
    }
    let grads = online.backward(&cache, &dq);
    opt.step(online.params_mut(), &grads);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{Distribution, MFFlow};
    use crate::envs::{make_exploration_1d, Exploration1DConfig, TabularMfg};
    use crate::mfg::best_response;
    use crate::qlearn::greedy::GreedyPolicy;
    use crate::PopulationPolicy;

    /// One state, two actions, rewards 1 and 3, no discounting.
    fn bandit() -> TabularMfg {
        TabularMfg::new(1, 2, 0.0, vec![1.0, 3.0], vec![0.0], vec![1.0, 1.0], None).unwrap()
    }

    fn bank_for(mu: Distribution, horizon: usize) -> AveragedFlowBank {
        AveragedFlowBank::from_parts(vec!["m".into()], vec![MFFlow::constant(&mu, horizon)], 0).unwrap()
    }

    #[test]
    fn td_loss_is_zero_only_at_targets() {
        assert_eq!(td_loss(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!(td_loss(&[1.0, 2.0], &[1.0, 2.5]) > 0.0);
    }

    #[test]
    fn undiscounted_bandit_learns_immediate_rewards() {
        let env = bandit();
        let bank = bank_for(Distribution::uniform(1), 3);
        let cfg = RLConfig {
            episodes: 3000,
            epsilon: 0.5,
            batch_size: 32,
            hidden: Some(vec![8]),
            learning_rate: 1e-2,
            seed: 11,
            ..Default::default()
        };
        let net = train_dqn(&env, &bank, &cfg, false).unwrap();
        let q = net.q_values(0, &[1.0]).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-2, "{q:?}");
        assert!((q[1] - 3.0).abs() < 1e-2, "{q:?}");
    }

    #[test]
    fn same_seed_same_weights() {
        let env = make_exploration_1d(&Exploration1DConfig {
            size: 4,
            ..Default::default()
        })
        .unwrap();
        let bank = bank_for(Distribution::uniform(4), 3);
        let cfg = RLConfig {
            episodes: 40,
            hidden: Some(vec![8]),
            seed: 3,
            ..Default::default()
        };
        let a = train_dqn(&env, &bank, &cfg, false).unwrap();
        let b = train_dqn(&env, &bank, &cfg, false).unwrap();
        assert_eq!(a, b);
        let c = train_dqn(&env, &bank, &RLConfig { seed: 4, ..cfg }, false).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn target_network_only_changes_at_syncs() {
        let env = make_exploration_1d(&Exploration1DConfig {
            size: 4,
            ..Default::default()
        })
        .unwrap();
        let bank = bank_for(Distribution::uniform(4), 4);
        let cfg = RLConfig {
            episodes: 30,
            sync_period: 7,
            hidden: Some(vec![8]),
            ..Default::default()
        };
        let mut seen: Vec<DqnStep> = Vec::new();
        train_dqn_observed(&env, &bank, &cfg, false, &mut |s| seen.push(s)).unwrap();
        assert_eq!(seen.len(), 30 * 5);
        for w in seen.windows(2) {
            let same_period = w[0].updates / 7 == w[1].updates / 7;
            if same_period {
                assert_eq!(w[0].target_checksum, w[1].target_checksum);
            } else {
                assert_ne!(w[0].target_checksum, w[1].target_checksum);
            }
        }
    }

    #[test]
    fn toy_greedy_matches_backward_induction() {
        let env = make_exploration_1d(&Exploration1DConfig {
            size: 3,
            ..Default::default()
        })
        .unwrap();
        let mu = Distribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        let flow = MFFlow::new(vec![
            mu.clone(),
            Distribution::new(vec![0.3, 0.4, 0.3]).unwrap(),
            Distribution::new(vec![0.1, 0.3, 0.6]).unwrap(),
        ])
        .unwrap();
        let bank = AveragedFlowBank::from_parts(vec!["m".into()], vec![flow.clone()], 1).unwrap();
        let cfg = RLConfig {
            episodes: 6000,
            epsilon: 0.3,
            batch_size: 32,
            sync_period: 20,
            hidden: Some(vec![32, 32]),
            seed: 1,
            ..Default::default()
        };
        let net = train_dqn(&env, &bank, &cfg, false).unwrap();
        let greedy = GreedyPolicy::new(net);
        let (br, _) = best_response(&env, &flow, 2).unwrap();
        for n in 0..=2 {
            assert_eq!(&greedy.decision_rule(n, flow.get(n)), br.step(n), "step {n}");
        }
    }
}
