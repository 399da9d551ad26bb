//! Hyper-parameters shared by DQN training and exact fitting.

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{MfgError, Result};
use crate::qlearn::network::{Embedding, NetworkSpec};
use crate::qlearn::optim::OptimizerKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RLConfig {
    /// DQN episodes per best-response training.
    pub episodes: usize,
    /// Steps per episode; `None` runs to the end of the bank flows.
    pub inner_steps: Option<usize>,
    /// Transitions per DQN minibatch.
    pub batch_size: usize,
    /// Gradient steps between target-network syncs.
    pub sync_period: usize,
    /// Exploration probability of the behaviour policy.
    pub epsilon: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub buffer_capacity: usize,
    /// Dense hidden widths; `None` picks the geometry default.
    pub hidden: Option<Vec<usize>>,
    /// Conv channels on grids; `None` picks the default.
    pub conv_channels: Option<Vec<usize>>,
    pub seed: u64,
    /// Upper bound on regression steps in exact fitting.
    pub fit_max_steps: usize,
    /// Exact fitting stops once the mean squared error drops below this.
    pub fit_loss_tolerance: f64,
    /// Populations per regression minibatch; 0 uses all.
    pub fit_batch_mus: usize,
    /// States per regression minibatch; 0 uses all.
    pub fit_batch_states: usize,
    /// Steps between full-dataset loss evaluations.
    pub fit_eval_every: usize,
    /// Extra steps at the last bank state when computing regression targets,
    /// so that equal populations at different steps get nearly equal targets.
    pub fit_tail_steps: usize,
    /// Start each fictitious-play iteration's fit from the previous network.
    pub warm_start: bool,
}

impl Default for RLConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            inner_steps: None,
            batch_size: 64,
            sync_period: 50,
            epsilon: 0.1,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            buffer_capacity: 50_000,
            hidden: None,
            conv_channels: None,
            seed: 0,
            fit_max_steps: 1000,
            fit_loss_tolerance: 1e-6,
            fit_batch_mus: 0,
            fit_batch_states: 0,
            fit_eval_every: 50,
            fit_tail_steps: 0,
            warm_start: true,
        }
    }
}

impl RLConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MfgError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 || self.sync_period == 0 || self.buffer_capacity == 0 {
            return bad("batch_size, sync_period and buffer_capacity must be positive");
        }
        if self.inner_steps == Some(0) {
            return bad("inner_steps must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.fit_loss_tolerance.is_nan() || self.fit_loss_tolerance < 0.0 || self.fit_eval_every == 0 {
            return bad("fit tolerance must be non-negative and fit_eval_every positive");
        }
        Ok(())
    }

    /// Network layout for `env`, applying any overrides.
    pub fn network_spec(&self, env: &dyn Environment, zero_mu_input: bool) -> Result<NetworkSpec> {
        let mut spec = NetworkSpec::default_for(env.state_space(), env.n_actions());
        if let Some(h) = &self.hidden {
            spec.hidden = h.clone();
        }
        if let (Some(c), Embedding::Conv { channels, .. }) = (&self.conv_channels, &mut spec.embedding) {
            *channels = c.clone();
        }
        spec.zero_mu_input = zero_mu_input;
        spec.validate()?;
        Ok(spec)
    }
}
