//! Population-conditioned Q-functions: network, replay memory, DQN, exact
//! regression and gradient verification.

mod config;
mod dqn;
mod fit;
mod gradcheck;
mod greedy;
mod io;
mod network;
mod optim;
mod replay;

pub use config::RLConfig;
pub use dqn::{td_loss, train_dqn, train_dqn_observed, DqnStep};
pub use fit::{dataset_loss, fit_network, fit_q_exact, greedy_agreement, FitReport, QDataset};
pub use gradcheck::{gradient_check, gradient_check_scaled, GradCheckReport, FD_STEP, REL_FLOOR};
pub use greedy::{greedy_policy, GreedyPolicy};
pub use io::{NETWORK_FORMAT, NETWORK_VERSION};
pub use network::{Activation, BatchInput, Embedding, ForwardCache, NetworkSpec, QNetwork};
pub use optim::{AdamParams, Optimizer, OptimizerKind};
pub use replay::{ReplayBuffer, Transition};
