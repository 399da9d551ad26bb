//! Greedy population-dependent policy read off a Q-network.

use ndarray::Array2;

use crate::distribution::Distribution;
use crate::mfg::argmax_first;
use crate::policy::{PopulationPolicy, StationaryPolicy};
use crate::qlearn::network::QNetwork;

/// Plays `argmax_a Q(x, mu, a)`, lowest index on ties.
#[derive(Clone, Debug)]
pub struct GreedyPolicy {
    net: QNetwork,
    /// State part of the first layer for every state, computed once.
    state_proj: Array2<f64>,
}

impl GreedyPolicy {
    pub fn new(net: QNetwork) -> Self {
        let all: Vec<usize> = (0..net.spec().n_states).collect();
        let state_proj = net.state_projection(&all);
        Self { net, state_proj }
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn into_network(self) -> QNetwork {
        self.net
    }

    /// Q-values of every state against `mu`, one row per state.
    pub fn q_table(&self, mu: &Distribution) -> Array2<f64> {
        self.net
            .q_table_with(&self.state_proj, mu.probs())
            .expect("population size matches the network")
    }

    /// Greedy action of every state against `mu`.
    pub fn actions(&self, mu: &Distribution) -> Vec<usize> {
        let q = self.q_table(mu);
        q.rows()
            .into_iter()
            .map(|r| argmax_first(r.as_slice().expect("standard layout")))
            .collect()
    }
}

/// Convenience constructor.
pub fn greedy_policy(net: QNetwork) -> GreedyPolicy {
    GreedyPolicy::new(net)
}

impl PopulationPolicy for GreedyPolicy {
    fn n_actions(&self) -> usize {
        self.net.spec().n_actions
    }

    fn act(&self, _step: usize, x: usize, mu: &Distribution) -> Vec<f64> {
        let q = self.net.q_values(x, mu.probs()).expect("valid state and population");
        let mut out = vec![0.0; q.len()];
        out[argmax_first(&q)] = 1.0;
        out
    }

    fn decision_rule(&self, _step: usize, mu: &Distribution) -> StationaryPolicy {
        StationaryPolicy::deterministic(&self.actions(mu), self.n_actions()).expect("actions in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlearn::network::NetworkSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_picks_action_zero() {
        let p = GreedyPolicy::new(QNetwork::zeros(NetworkSpec::flat(4, 3, vec![8])).unwrap());
        let mu = Distribution::uniform(4);
        assert_eq!(p.actions(&mu), vec![0; 4]);
        assert_eq!(p.act(0, 2, &mu), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_output_bias_shift_keeps_policy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = QNetwork::init(NetworkSpec::flat(5, 3, vec![6]), &mut rng).unwrap();
        let mut shifted = net.clone();
        let last = shifted.params().len() - 1;
        shifted.params_mut()[last].mapv_inplace(|b| b + 3.25);
        let (a, b) = (GreedyPolicy::new(net), GreedyPolicy::new(shifted));
        for seed in 0..20u64 {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let mu = Distribution::from_weights((0..5).map(|_| rand::Rng::random::<f64>(&mut r)).collect()).unwrap();
            assert_eq!(a.actions(&mu), b.actions(&mu));
        }
    }

    #[test]
    fn table_and_single_state_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = GreedyPolicy::new(QNetwork::init(NetworkSpec::conv(3, 3, 5, vec![2], vec![4]), &mut rng).unwrap());
        let mu = Distribution::from_weights((1..=9).map(f64::from).collect()).unwrap();
        let rule = p.decision_rule(0, &mu);
        for x in 0..9 {
            assert_eq!(rule.row(x), p.act(0, x, &mu).as_slice());
        }
    }
}
