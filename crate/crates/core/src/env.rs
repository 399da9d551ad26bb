//! The environment contract shared by every game in the crate.

use crate::distribution::Distribution;
use crate::error::{check_len, Result};
use crate::space::StateSpace;

/// A finite mean-field game: kernel `p(x'|x,a,mu)`, separable reward
/// `r(x,a,mu) = r_A(x,a) + r_M(x,mu)` and discount `gamma`.
pub trait Environment: Send + Sync {
    fn state_space(&self) -> &StateSpace;

    fn n_actions(&self) -> usize;

    fn gamma(&self) -> f64;

    /// Action-dependent part `r_A(x, a)`.
    fn reward_action(&self, x: usize, a: usize) -> f64;

    /// Population-dependent part `r_M(x, mu)`.
    fn reward_mean_field(&self, x: usize, mu: &Distribution) -> f64;

    fn reward(&self, x: usize, a: usize, mu: &Distribution) -> f64 {
        self.reward_action(x, a) + self.reward_mean_field(x, mu)
    }

    /// Sparse next-state distribution `(x', p)`; probabilities sum to one.
    fn transition(&self, x: usize, a: usize, mu: &Distribution) -> Vec<(usize, f64)>;

    /// True when `p` does not depend on `mu`.
    fn transition_mu_independent(&self) -> bool;

    fn n_states(&self) -> usize {
        self.state_space().size()
    }
}

/// Rewards `r(x, a, mu)` for all pairs, row-major by state.
pub fn reward_table(env: &dyn Environment, mu: &Distribution) -> Vec<f64> {
    let na = env.n_actions();
    let mut out = Vec::with_capacity(env.n_states() * na);
    for x in 0..env.n_states() {
        let rm = env.reward_mean_field(x, mu);
        for a in 0..na {
            out.push(env.reward_action(x, a) + rm);
        }
    }
    out
}

pub(crate) fn check_distribution(env: &dyn Environment, mu: &Distribution) -> Result<()> {
    check_len("distribution length", env.n_states(), mu.len())
}
