//! The standard comparison table: one specialized row per training
//! distribution, then the mixture-reward, unconditioned, uniform and master
//! rows, against training columns followed by testing columns.

use serde::{Deserialize, Serialize};

use crate::distribution::MFFlow;
use crate::env::Environment;
use crate::envs::{DistributionSet, SetKind};
use crate::error::{check_len, MfgError, Result};
use crate::fp::{solve_mixture_reward, MasterPolicyBundle, SpecializedSolution};
use crate::metrics::matrix::{performance_matrices, BenchmarkRow, PerformanceMatrix};
use crate::metrics::wasserstein::GroundMetric;
use crate::policy::UniformPolicy;

pub const SPECIALIZED_PREFIX: &str = "specialized:";
pub const ROW_MIXTURE_REWARD: &str = "mixture_reward";
pub const ROW_UNCONDITIONED: &str = "unconditioned";
pub const ROW_UNIFORM: &str = "uniform_random";
pub const ROW_MASTER: &str = "master";

pub struct BenchmarkInputs<'a> {
    pub training: &'a DistributionSet,
    pub testing: &'a DistributionSet,
    /// Specialized solutions, aligned with `training`.
    pub specialized_training: &'a [SpecializedSolution],
    /// Specialized solutions, aligned with `testing`; their flows are the
    /// references of the testing columns.
    pub specialized_testing: &'a [SpecializedSolution],
    pub master: &'a MasterPolicyBundle,
    pub unconditioned: &'a MasterPolicyBundle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub w: PerformanceMatrix,
    pub e: PerformanceMatrix,
    /// The first `n_training` columns are the training distributions.
    pub n_training: usize,
}

impl Benchmark {
    pub fn training_columns(&self) -> Vec<usize> {
        (0..self.n_training).collect()
    }

    pub fn testing_columns(&self) -> Vec<usize> {
        (self.n_training..self.e.columns.len()).collect()
    }

    /// Row index of `label`.
    pub fn row(&self, label: &str) -> Result<usize> {
        self.e
            .row_index(label)
            .ok_or_else(|| MfgError::InvalidConfig(format!("benchmark has no row {label}")))
    }

    /// Specialized rows, in training order.
    pub fn specialized_rows(&self) -> Vec<usize> {
        (0..self.e.rows.len())
            .filter(|&i| self.e.rows[i].starts_with(SPECIALIZED_PREFIX))
            .collect()
    }

    /// Mean exploitability of each specialized row away from its own column.
    pub fn specialized_off_diagonal_mean(&self) -> f64 {
        let rows = self.specialized_rows();
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, &r) in rows.iter().enumerate() {
            for j in self.training_columns() {
                if j != i {
                    total += self.e.get(r, j);
                    count += 1;
                }
            }
        }
        if count == 0 {
            f64::NAN
        } else {
            total / count as f64
        }
    }
}

/// Builds every row and evaluates both matrices.
pub fn run_benchmark(
    env: &dyn Environment,
    inputs: &BenchmarkInputs<'_>,
    horizon: usize,
    metric: &GroundMetric,
) -> Result<Benchmark> {
    check_len("specialized training solutions", inputs.training.len(), inputs.specialized_training.len())?;
    check_len("specialized testing solutions", inputs.testing.len(), inputs.specialized_testing.len())?;
    let train_flows: Vec<MFFlow> = inputs.specialized_training.iter().map(|s| s.flow.clone()).collect();
    let mixture = solve_mixture_reward(env, &train_flows, horizon)?;
    let uniform = UniformPolicy {
        n_actions: env.n_actions(),
    };

    let mut rows: Vec<BenchmarkRow<'_>> = inputs
        .training
        .names()
        .into_iter()
        .zip(inputs.specialized_training)
        .map(|(name, s)| BenchmarkRow::single(format!("{SPECIALIZED_PREFIX}{name}"), &s.policy))
        .collect();
    rows.push(BenchmarkRow::single(ROW_MIXTURE_REWARD, &mixture));
    rows.push(BenchmarkRow {
        label: ROW_UNCONDITIONED.into(),
        policies: inputs.unconditioned.members(),
    });
    rows.push(BenchmarkRow::single(ROW_UNIFORM, &uniform));
    rows.push(BenchmarkRow {
        label: ROW_MASTER.into(),
        policies: inputs.master.members(),
    });

    let entries = inputs
        .training
        .entries()
        .iter()
        .chain(inputs.testing.entries())
        .cloned()
        .collect();
    let columns = DistributionSet::new(SetKind::Testing, entries)?;
    let references: Vec<MFFlow> = train_flows
        .into_iter()
        .chain(inputs.specialized_testing.iter().map(|s| s.flow.clone()))
        .collect();
    let (w, e) = performance_matrices(env, &rows, &columns, &references, horizon, metric)?;
    Ok(Benchmark {
        w,
        e,
        n_training: inputs.training.len(),
    })
}
