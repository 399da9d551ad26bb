//! Equilibrium solvers built on fictitious play.

mod bank;
mod baselines;
mod master;
mod mixture;
mod specialized;

pub use bank::AveragedFlowBank;
pub use baselines::solve_mixture_reward;
pub use master::{
    average_exploitability, flow_against, master_fictitious_play, mixture_exploitabilities, solve_unconditioned,
    ExploitabilityCurve, FlowInduction, MasterConfig, MasterPolicyBundle, SolverMode, BUNDLE_FORMAT, BUNDLE_VERSION,
};
pub use mixture::{mixture_exploitability, rollout_mixture, MixtureRollout};
pub use specialized::{solve_specialized_fp, SpecializedSolution};
