//! Concrete games, initial-distribution sets and structural checks.

mod lattice;
mod monotonicity;
mod sets;
mod tabular;

pub use lattice::{
    make_beach_bar_2d, make_exploration_1d, BeachBar2DConfig, CrowdLattice, Exploration1DConfig,
    DEFAULT_GAMMA, DEFAULT_MU_CLIP,
};
pub use monotonicity::{check_monotonicity, monotonicity_margin, separability_error, MonotonicityReport};
pub use sets::{
    gaussian_distribution, make_testing_set, make_training_set, random_distribution,
    DistributionSet, Provenance, SetEntry, SetKind, TestingSetParams, TrainingSetParams,
};
pub use tabular::{NegatedMeanFieldReward, TabularMfg};
