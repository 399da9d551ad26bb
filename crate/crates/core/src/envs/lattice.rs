//! Crowd-aversion games on a lattice: the 1-D exploration game and the
//! 2-D beach bar.

use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::env::Environment;
use crate::error::{MfgError, Result};
use crate::space::{ActionSpace, StateSpace};

pub const DEFAULT_MU_CLIP: f64 = 1e-10;
pub const DEFAULT_GAMMA: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Exploration1DConfig {
    pub size: usize,
    /// Cost per unit of displacement; `None` means `1 / size`.
    pub move_cost_scale: Option<f64>,
    /// Floor applied to `mu(x)` inside the logarithm.
    pub mu_clip: f64,
    pub gamma: f64,
}

impl Default for Exploration1DConfig {
    fn default() -> Self {
        Self {
            size: 32,
            move_cost_scale: None,
            mu_clip: DEFAULT_MU_CLIP,
            gamma: DEFAULT_GAMMA,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeachBar2DConfig {
    pub width: usize,
    pub height: usize,
    /// `(col, row)` of the bar; `None` means `(width / 2, height / 2)`.
    pub bar: Option<(usize, usize)>,
    pub move_cost_scale: Option<f64>,
    pub mu_clip: f64,
    pub gamma: f64,
    /// Drop the `stay` action and keep only the four moves.
    pub four_actions: bool,
}

impl Default for BeachBar2DConfig {
    fn default() -> Self {
        Self {
            width: 16,
            height: 16,
            bar: None,
            move_cost_scale: None,
            mu_clip: DEFAULT_MU_CLIP,
            gamma: DEFAULT_GAMMA,
            four_actions: false,
        }
    }
}

/// Deterministic lattice game with reward
/// `bonus(x) - log(max(mu(x), clip)) - move_cost * |a|_1`.
#[derive(Clone, Debug)]
pub struct CrowdLattice {
    space: StateSpace,
    actions: ActionSpace,
    gamma: f64,
    move_cost: f64,
    mu_clip: f64,
    bonus: Vec<f64>,
    successors: Vec<usize>,
}

impl CrowdLattice {
    fn build(
        space: StateSpace,
        actions: ActionSpace,
        gamma: f64,
        move_cost: f64,
        mu_clip: f64,
        bonus: Vec<f64>,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(MfgError::InvalidConfig(format!("gamma {gamma} not in (0,1)")));
        }
        if !(move_cost.is_finite() && move_cost >= 0.0) {
            return Err(MfgError::InvalidConfig(format!("bad move cost {move_cost}")));
        }
        let n = space.size();
        if !(mu_clip > 0.0 && mu_clip < 1.0 / n as f64) {
            return Err(MfgError::InvalidConfig(format!(
                "mu_clip {mu_clip} not in (0, 1/{n})"
            )));
        }
        let na = actions.len();
        let mut successors = Vec::with_capacity(n * na);
        for x in 0..n {
            for &mv in actions.moves() {
                successors.push(space.shift_clamped(x, mv));
            }
        }
        Ok(Self {
            space,
            actions,
            gamma,
            move_cost,
            mu_clip,
            bonus,
            successors,
        })
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn mu_clip(&self) -> f64 {
        self.mu_clip
    }

    pub fn move_cost(&self) -> f64 {
        self.move_cost
    }

    /// Position-only part of the reward (the bar attraction, zero in 1-D).
    pub fn bonus(&self, x: usize) -> f64 {
        self.bonus[x]
    }

    pub fn next_state(&self, x: usize, a: usize) -> usize {
        self.successors[x * self.actions.len() + a]
    }
}

impl Environment for CrowdLattice {
    fn state_space(&self) -> &StateSpace {
        &self.space
    }

    fn n_actions(&self) -> usize {
        self.actions.len()
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn reward_action(&self, _x: usize, a: usize) -> f64 {
        -self.move_cost * self.actions.get(a).l1() as f64
    }

    fn reward_mean_field(&self, x: usize, mu: &Distribution) -> f64 {
        self.bonus[x] - mu.get(x).max(self.mu_clip).ln()
    }

    fn reward(&self, x: usize, a: usize, mu: &Distribution) -> f64 {
        self.bonus[x]
            - mu.get(x).max(self.mu_clip).ln()
            - self.move_cost * self.actions.get(a).l1() as f64
    }

    fn transition(&self, x: usize, a: usize, _mu: &Distribution) -> Vec<(usize, f64)> {
        vec![(self.next_state(x, a), 1.0)]
    }

    fn transition_mu_independent(&self) -> bool {
        true
    }
}

/// Agents on a line of `size` cells choose to step left, stay or step right;
/// crowded cells are penalized by `-log mu(x)`.
pub fn make_exploration_1d(cfg: &Exploration1DConfig) -> Result<CrowdLattice> {
    if cfg.size < 2 {
        return Err(MfgError::InvalidConfig(format!(
            "exploration game needs at least 2 cells, got {}",
            cfg.size
        )));
    }
    let space = StateSpace::line(cfg.size)?;
    let move_cost = cfg.move_cost_scale.unwrap_or(1.0 / cfg.size as f64);
    CrowdLattice::build(
        space,
        ActionSpace::line(),
        cfg.gamma,
        move_cost,
        cfg.mu_clip,
        vec![0.0; cfg.size],
    )
}

/// Agents on a grid are drawn to a bar by `-|x - bar|_1 / (width + height)`
/// while avoiding crowded cells.
pub fn make_beach_bar_2d(cfg: &BeachBar2DConfig) -> Result<CrowdLattice> {
    if cfg.width < 2 || cfg.height < 2 {
        return Err(MfgError::InvalidConfig(format!(
            "beach bar grid must be at least 2x2, got {}x{}",
            cfg.width, cfg.height
        )));
    }
    let space = StateSpace::grid(cfg.width, cfg.height)?;
    let (bc, br) = cfg.bar.unwrap_or((cfg.width / 2, cfg.height / 2));
    if bc >= cfg.width || br >= cfg.height {
        return Err(MfgError::InvalidConfig(format!(
            "bar ({bc}, {br}) outside the {}x{} grid",
            cfg.width, cfg.height
        )));
    }
    let bar = space.index(bc, br);
    let norm = (cfg.width + cfg.height) as f64;
    let bonus = (0..space.size())
        .map(|x| -(space.l1(x, bar) as f64) / norm)
        .collect();
    let actions = if cfg.four_actions {
        ActionSpace::grid_four()
    } else {
        ActionSpace::grid_with_stay()
    };
    let move_cost = cfg.move_cost_scale.unwrap_or(1.0 / space.size() as f64);
    CrowdLattice::build(space, actions, cfg.gamma, move_cost, cfg.mu_clip, bonus)
}
