//! Small games given by explicit tables, used as oracles and stress cases.

use rand::Rng;

use crate::distribution::Distribution;
use crate::env::Environment;
use crate::error::{MfgError, Result};
use crate::space::StateSpace;

/// A finite game with reward `base[x][a] + sum_y coupling[x][y] * mu(y)` and
/// kernel `(1 - mu(0)) * p0 + mu(0) * p1` (just `p0` when `p1` is absent).
#[derive(Clone, Debug)]
pub struct TabularMfg {
    space: StateSpace,
    n_actions: usize,
    gamma: f64,
    base: Vec<f64>,
    coupling: Vec<f64>,
    p0: Vec<f64>,
    p1: Option<Vec<f64>>,
}

impl TabularMfg {
    /// `base` is `n_states x n_actions`, `coupling` is `n_states x n_states`,
    /// kernels are `n_states x n_actions x n_states`, all row-major.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        base: Vec<f64>,
        coupling: Vec<f64>,
        p0: Vec<f64>,
        p1: Option<Vec<f64>>,
    ) -> Result<Self> {
        if n_actions == 0 {
            return Err(MfgError::InvalidConfig("no actions".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(MfgError::InvalidConfig(format!("gamma {gamma} not in [0,1)")));
        }
        crate::error::check_len("reward table", n_states * n_actions, base.len())?;
        crate::error::check_len("coupling table", n_states * n_states, coupling.len())?;
        if base.iter().chain(&coupling).any(|v| !v.is_finite()) {
            return Err(MfgError::InvalidConfig("non-finite reward entry".into()));
        }
        for kernel in std::iter::once(&p0).chain(p1.as_ref()) {
            crate::error::check_len("kernel", n_states * n_actions * n_states, kernel.len())?;
            for row in kernel.chunks(n_states) {
                if Distribution::new(row.to_vec()).is_err() {
                    return Err(MfgError::InvalidConfig(
                        "kernel row is not a probability vector".into(),
                    ));
                }
            }
        }
        Ok(Self {
            space: StateSpace::line(n_states)?,
            n_actions,
            gamma,
            base,
            coupling,
            p0,
            p1,
        })
    }

    /// Every state-action pair pays `c` and stays put.
    pub fn constant_reward(n_states: usize, n_actions: usize, gamma: f64, c: f64) -> Self {
        let mut p0 = vec![0.0; n_states * n_actions * n_states];
        for x in 0..n_states {
            for a in 0..n_actions {
                p0[(x * n_actions + a) * n_states + x] = 1.0;
            }
        }
        Self::new(
            n_states,
            n_actions,
            gamma,
            vec![c; n_states * n_actions],
            vec![0.0; n_states * n_states],
            p0,
            None,
        )
        .expect("constant game is well formed")
    }

    /// Random rewards in `[-1, 1]`, random dense kernels and, when
    /// `mu_dependent`, a second kernel blended in by `mu(0)`.
    pub fn random<R: Rng>(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        mu_dependent: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let base = (0..n_states * n_actions)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let coupling = (0..n_states * n_states)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let kernel = |rng: &mut R| {
            let mut k = Vec::with_capacity(n_states * n_actions * n_states);
            for _ in 0..n_states * n_actions {
                let w: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 1e-3).collect();
                let total: f64 = w.iter().sum();
                k.extend(w.into_iter().map(|v| v / total));
            }
            k
        };
        let p0 = kernel(rng);
        let p1 = mu_dependent.then(|| kernel(rng));
        Self::new(n_states, n_actions, gamma, base, coupling, p0, p1)
    }

    /// Agents stay put and are rewarded by `+mu(x)`: crowds attract, so the
    /// game is not monotone.
    pub fn crowd_seeking(n_states: usize, gamma: f64) -> Self {
        let mut g = Self::constant_reward(n_states, 1, gamma, 0.0);
        for x in 0..n_states {
            g.coupling[x * n_states + x] = 1.0;
        }
        g
    }

    /// Agents stay put and are penalized by `-mu(x)`: strictly monotone.
    pub fn crowd_averse(n_states: usize, gamma: f64) -> Self {
        let mut g = Self::crowd_seeking(n_states, gamma);
        for c in &mut g.coupling {
            *c = -*c;
        }
        g
    }

    fn kernel_row(kernel: &[f64], n_states: usize, n_actions: usize, x: usize, a: usize) -> &[f64] {
        let start = (x * n_actions + a) * n_states;
        &kernel[start..start + n_states]
    }
}

impl Environment for TabularMfg {
    fn state_space(&self) -> &StateSpace {
        &self.space
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn reward_action(&self, x: usize, a: usize) -> f64 {
        self.base[x * self.n_actions + a]
    }

    fn reward_mean_field(&self, x: usize, mu: &Distribution) -> f64 {
        let n = self.space.size();
        self.coupling[x * n..(x + 1) * n]
            .iter()
            .zip(mu.probs())
            .map(|(c, m)| c * m)
            .sum()
    }

    fn transition(&self, x: usize, a: usize, mu: &Distribution) -> Vec<(usize, f64)> {
        let n = self.space.size();
        let r0 = Self::kernel_row(&self.p0, n, self.n_actions, x, a);
        let row: Vec<f64> = match &self.p1 {
            None => r0.to_vec(),
            Some(p1) => {
                let lam = mu.get(0);
                let r1 = Self::kernel_row(p1, n, self.n_actions, x, a);
                r0.iter().zip(r1).map(|(u, v)| (1.0 - lam) * u + lam * v).collect()
            }
        };
        row.into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .collect()
    }

    fn transition_mu_independent(&self) -> bool {
        self.p1.is_none()
    }
}

/// Wraps an environment and negates its population-dependent reward term.
/// Turning crowd aversion into crowd seeking breaks monotonicity.
#[derive(Clone, Debug)]
pub struct NegatedMeanFieldReward<E>(pub E);

impl<E: Environment> Environment for NegatedMeanFieldReward<E> {
    fn state_space(&self) -> &StateSpace {
        self.0.state_space()
    }

    fn n_actions(&self) -> usize {
        self.0.n_actions()
    }

    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    fn reward_action(&self, x: usize, a: usize) -> f64 {
        self.0.reward_action(x, a)
    }

    fn reward_mean_field(&self, x: usize, mu: &Distribution) -> f64 {
        -self.0.reward_mean_field(x, mu)
    }

    fn transition(&self, x: usize, a: usize, mu: &Distribution) -> Vec<(usize, f64)> {
        self.0.transition(x, a, mu)
    }

    fn transition_mu_independent(&self) -> bool {
        self.0.transition_mu_independent()
    }
}
