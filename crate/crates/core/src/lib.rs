//! Finite-state mean-field games: exact solvers, fictitious play over a
//! population of initial distributions, population-conditioned Q-learning
//! and benchmark metrics.

pub mod distribution;
pub mod env;
pub mod envs;
pub mod error;
pub mod fp;
pub mod metrics;
pub mod mfg;
pub mod policy;
pub mod qlearn;
pub mod seed;
pub mod space;
pub mod verify;

pub use distribution::{Distribution, MFFlow};
pub use env::Environment;
pub use error::{MfgError, Result};
pub use policy::{NonStationaryPolicy, PopulationPolicy, StationaryPolicy};
pub use space::{ActionSpace, StateSpace};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
