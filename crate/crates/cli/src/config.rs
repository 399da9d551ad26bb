//! Experiment configuration: a versioned TOML file with no unknown keys.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mfg_core::envs::{
    make_beach_bar_2d, make_exploration_1d, make_testing_set, make_training_set, BeachBar2DConfig,
    CrowdLattice, DistributionSet, Exploration1DConfig, TestingSetParams, TrainingSetParams,
};
use mfg_core::fp::{FlowInduction, MasterConfig, SolverMode};
use mfg_core::metrics::{GroundMetric, MetricScale};
use mfg_core::qlearn::RLConfig;
use mfg_core::seed::SeedTree;
use mfg_core::space::Geometry;
use mfg_core::Environment;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Root of every random substream.
    pub seed: u64,
    /// Left out of snapshots so that results do not depend on where they are
    /// written.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub sets: SetsConfig,
    #[serde(default)]
    pub fp: FpConfig,
    #[serde(default)]
    pub rl: RLConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EnvironmentSpec {
    #[serde(rename = "exploration_1d")]
    Exploration1d(Exploration1DConfig),
    #[serde(rename = "beach_bar_2d")]
    BeachBar2d(BeachBar2DConfig),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SetsConfig {
    /// `None` picks the geometry default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSetParams>,
    pub testing: TestingSection,
}

/// Testing-set shape; its random entries are drawn from the root seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestingSection {
    pub random_count: usize,
    pub std_factors: Vec<f64>,
}

impl Default for TestingSection {
    fn default() -> Self {
        let d = TestingSetParams::default();
        Self {
            random_count: d.random_count,
            std_factors: d.std_factors,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpConfig {
    /// Last time step; `None` means 30 on a line and 40 on a grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub specialized_iterations: usize,
    pub master_iterations: usize,
    pub mode: SolverMode,
    pub induction: FlowInduction,
    pub metric_scale: MetricScale,
}

impl Default for FpConfig {
    fn default() -> Self {
        Self {
            horizon: None,
            specialized_iterations: 20,
            master_iterations: 10,
            mode: SolverMode::Exact,
            induction: FlowInduction::Bank,
            metric_scale: MetricScale::Normalized,
        }
    }
}

/// Everything a command needs, built from a config.
pub struct Experiment {
    pub env: CrowdLattice,
    pub training: DistributionSet,
    pub testing: DistributionSet,
    pub horizon: usize,
    pub metric: GroundMetric,
    pub seeds: SeedTree,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            );
        }
        if cfg.rl.seed != RLConfig::default().seed {
            bail!("rl.seed is derived from the root seed; set the top-level seed instead");
        }
        if cfg.fp.specialized_iterations == 0 || cfg.fp.master_iterations == 0 {
            bail!("fictitious play needs at least one iteration");
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn master_config(&self, horizon: usize) -> MasterConfig {
        MasterConfig {
            iterations: self.fp.master_iterations,
            horizon,
            mode: self.fp.mode,
            induction: self.fp.induction,
            track_curve: true,
        }
    }

    pub fn build_env(&self) -> Result<CrowdLattice> {
        Ok(match &self.environment {
            EnvironmentSpec::Exploration1d(c) => make_exploration_1d(c)?,
            EnvironmentSpec::BeachBar2d(c) => make_beach_bar_2d(c)?,
        })
    }

    pub fn build(&self) -> Result<Experiment> {
        let env = self.build_env()?;
        let space = env.state_space();
        let seeds = SeedTree::new(self.seed);
        let training_params = self
            .sets
            .training
            .clone()
            .unwrap_or_else(|| TrainingSetParams::for_space(space));
        let testing_params = TestingSetParams {
            random_count: self.sets.testing.random_count,
            seed: seeds.seed("env-sampling"),
            std_factors: self.sets.testing.std_factors.clone(),
        };
        let training = make_training_set(space, &training_params)?;
        let testing = make_testing_set(space, &training_params, &testing_params)?;
        let horizon = self.fp.horizon.unwrap_or(match space.geometry() {
            Geometry::Line { .. } => 30,
            Geometry::Grid { .. } => 40,
        });
        let metric = GroundMetric::new(space, self.fp.metric_scale);
        Ok(Experiment {
            env,
            training,
            testing,
            horizon,
            metric,
            seeds,
        })
    }
}
