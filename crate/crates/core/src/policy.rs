//! Stationary, non-stationary and population-dependent policies.

use serde::{Deserialize, Serialize};

use crate::distribution::{Distribution, MFFlow, MASS_TOLERANCE};
use crate::error::{MfgError, Result};

/// Action probabilities for every state: an `n_states x n_actions` table.
///
/// Serialized as `{"table": [[...], ...]}` with one row per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStationary", into = "RawStationary")]
pub struct StationaryPolicy {
    n_actions: usize,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawStationary {
    table: Vec<Vec<f64>>,
}

impl TryFrom<RawStationary> for StationaryPolicy {
    type Error = MfgError;

    fn try_from(raw: RawStationary) -> Result<Self> {
        StationaryPolicy::from_rows(raw.table)
    }
}

impl From<StationaryPolicy> for RawStationary {
    fn from(p: StationaryPolicy) -> Self {
        RawStationary {
            table: p.probs.chunks(p.n_actions).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl StationaryPolicy {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || n_actions == 0 {
            return Err(MfgError::InvalidPolicy("empty table".into()));
        }
        let mut probs = Vec::with_capacity(rows.len() * n_actions);
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != n_actions {
                return Err(MfgError::Shape {
                    what: "policy row",
                    expected: n_actions,
                    actual: row.len(),
                });
            }
            check_row(x, &row)?;
            probs.extend(row);
        }
        Ok(Self { n_actions, probs })
    }

    pub fn from_flat(n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_actions == 0 || probs.is_empty() || !probs.len().is_multiple_of(n_actions) {
            return Err(MfgError::InvalidPolicy(format!(
                "flat table of length {} does not split into rows of {n_actions}",
                probs.len()
            )));
        }
        for (x, row) in probs.chunks(n_actions).enumerate() {
            check_row(x, row)?;
        }
        Ok(Self { n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// One action per state, chosen with probability one.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (x, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(MfgError::InvalidPolicy(format!(
                    "action {a} at state {x} out of range"
                )));
            }
            probs[x * n_actions + a] = 1.0;
        }
        Self::from_flat(n_actions, probs)
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.probs[x * self.n_actions + a]
    }

    pub fn flat(&self) -> &[f64] {
        &self.probs
    }
}

fn check_row(x: usize, row: &[f64]) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(MfgError::InvalidPolicy(format!("bad probability at state {x}")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(MfgError::InvalidPolicy(format!(
            "row {x} sums to {total}"
        )));
    }
    Ok(())
}

/// A time-indexed sequence of stationary policies, one per step.
///
/// Serialized as `{"steps": [{"table": ...}, ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNonStationary")]
pub struct NonStationaryPolicy {
    steps: Vec<StationaryPolicy>,
}

#[derive(Deserialize)]
struct RawNonStationary {
    steps: Vec<StationaryPolicy>,
}

impl TryFrom<RawNonStationary> for NonStationaryPolicy {
    type Error = MfgError;

    fn try_from(raw: RawNonStationary) -> Result<Self> {
        NonStationaryPolicy::new(raw.steps)
    }
}

impl NonStationaryPolicy {
    pub fn new(steps: Vec<StationaryPolicy>) -> Result<Self> {
        let Some(first) = steps.first() else {
            return Err(MfgError::InvalidPolicy("no steps".into()));
        };
        let (ns, na) = (first.n_states(), first.n_actions());
        for s in &steps {
            if s.n_states() != ns || s.n_actions() != na {
                return Err(MfgError::InvalidPolicy(
                    "steps disagree on table shape".into(),
                ));
            }
        }
        Ok(Self { steps })
    }

    /// The same stationary policy at every step `0..=horizon`.
    pub fn constant(policy: StationaryPolicy, horizon: usize) -> Self {
        Self {
            steps: vec![policy; horizon + 1],
        }
    }

    pub fn steps(&self) -> &[StationaryPolicy] {
        &self.steps
    }

    pub fn step(&self, n: usize) -> &StationaryPolicy {
        &self.steps[n]
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.steps[0].n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.steps[0].n_actions()
    }
}

/// A policy that may react to the current mean-field state.
///
/// `step` is the time index at which the rule is queried. Population-dependent
/// policies proper ignore it; it lets a time-indexed policy act through the
/// same interface.
pub trait PopulationPolicy: Send + Sync {
    fn n_actions(&self) -> usize;

    /// Action distribution at state `x` facing `mu`.
    fn act(&self, step: usize, x: usize, mu: &Distribution) -> Vec<f64>;

    /// The stationary decision rule `x -> act(step, x, mu)` for all states.
    fn decision_rule(&self, step: usize, mu: &Distribution) -> StationaryPolicy {
        let na = self.n_actions();
        let mut probs = Vec::with_capacity(mu.len() * na);
        for x in 0..mu.len() {
            probs.extend(self.act(step, x, mu));
        }
        StationaryPolicy::from_flat(na, probs).expect("policy produced an invalid row")
    }
}

/// Uniformly random over actions, whatever the state and population.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformPolicy {
    pub n_actions: usize,
}

impl PopulationPolicy for UniformPolicy {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn act(&self, _step: usize, _x: usize, _mu: &Distribution) -> Vec<f64> {
        vec![1.0 / self.n_actions as f64; self.n_actions]
    }

    fn decision_rule(&self, _step: usize, mu: &Distribution) -> StationaryPolicy {
        StationaryPolicy::uniform(mu.len(), self.n_actions)
    }
}

/// Ignores the population entirely.
impl PopulationPolicy for StationaryPolicy {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn act(&self, _step: usize, x: usize, _mu: &Distribution) -> Vec<f64> {
        self.row(x).to_vec()
    }

    fn decision_rule(&self, _step: usize, _mu: &Distribution) -> StationaryPolicy {
        self.clone()
    }
}

/// Ignores the population and follows the time index; steps past the end
/// reuse the last rule.
impl PopulationPolicy for NonStationaryPolicy {
    fn n_actions(&self) -> usize {
        self.steps[0].n_actions()
    }

    fn act(&self, step: usize, x: usize, _mu: &Distribution) -> Vec<f64> {
        self.steps[step.min(self.steps.len() - 1)].row(x).to_vec()
    }

    fn decision_rule(&self, step: usize, _mu: &Distribution) -> StationaryPolicy {
        self.steps[step.min(self.steps.len() - 1)].clone()
    }
}

/// A population-dependent policy tabulated along a known flow: facing `mu`,
/// play the rule of the flow step closest to `mu` in L1 (earliest on ties).
#[derive(Clone, Debug)]
pub struct TabularOnFlow {
    flow: MFFlow,
    policy: NonStationaryPolicy,
}

impl TabularOnFlow {
    pub fn new(flow: MFFlow, policy: NonStationaryPolicy) -> Result<Self> {
        crate::error::check_at_least("policy steps", flow.len(), policy.len())?;
        crate::error::check_len("policy states", flow.n_states(), policy.n_states())?;
        Ok(Self { flow, policy })
    }

    fn nearest_step(&self, mu: &Distribution) -> usize {
        let mut best = (0, f64::INFINITY);
        for (n, d) in self.flow.states().iter().enumerate() {
            let dist = d.l1_distance(mu);
            if dist < best.1 {
                best = (n, dist);
            }
        }
        best.0
    }
}

impl PopulationPolicy for TabularOnFlow {
    fn n_actions(&self) -> usize {
        self.policy.n_actions()
    }

    fn act(&self, _step: usize, x: usize, mu: &Distribution) -> Vec<f64> {
        self.policy.step(self.nearest_step(mu)).row(x).to_vec()
    }

    fn decision_rule(&self, _step: usize, mu: &Distribution) -> StationaryPolicy {
        self.policy.step(self.nearest_step(mu)).clone()
    }
}
