//! Mean-field states (probability vectors over the state space) and flows.

use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};

/// Tolerance on the total mass of a probability vector.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A probability vector over a finite state space.
///
/// Serialized as `{"probs": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct Distribution {
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for Distribution {
    type Error = MfgError;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        Distribution::validated(raw.probs)
    }
}

impl Distribution {
    /// Validates a probability vector (nonnegative, finite, mass 1 within
    /// [`MASS_TOLERANCE`]) and renormalizes it.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_mass(&probs)?;
        let mut d = Self { probs };
        d.renormalize();
        Ok(d)
    }

    /// Like [`Distribution::new`] but keeps the entries bit for bit, so that
    /// serialization round-trips exactly.
    pub fn validated(probs: Vec<f64>) -> Result<Self> {
        check_mass(&probs)?;
        Ok(Self { probs })
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(MfgError::InvalidDistribution("empty".into()));
        }
        if let Some(p) = weights.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(MfgError::InvalidDistribution(format!("bad weight {p}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(MfgError::InvalidDistribution("zero total weight".into()));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over an empty set");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn dirac(n: usize, x: usize) -> Self {
        assert!(x < n, "dirac at {x} outside 0..{n}");
        let mut probs = vec![0.0; n];
        probs[x] = 1.0;
        Self { probs }
    }

    /// Builds from a vector already known to be a probability vector up to
    /// rounding; renormalizes.
    pub(crate) fn from_mass(probs: Vec<f64>) -> Self {
        let mut d = Self { probs };
        d.renormalize();
        d
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, x: usize) -> f64 {
        self.probs[x]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Rescales so the entries sum to one.
    pub fn renormalize(&mut self) {
        let total: f64 = self.probs.iter().sum();
        if total > 0.0 {
            for p in &mut self.probs {
                *p /= total;
            }
        }
    }

    /// `(1 - w) * self + w * other`.
    pub fn mix(&self, other: &Distribution, w: f64) -> Result<Distribution> {
        if self.len() != other.len() {
            return Err(MfgError::Shape {
                what: "distribution mix",
                expected: self.len(),
                actual: other.len(),
            });
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect();
        Ok(Self::from_mass(probs))
    }

    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

fn check_mass(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(MfgError::InvalidDistribution("empty".into()));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(MfgError::InvalidDistribution(format!("bad entry {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(MfgError::InvalidDistribution(format!("mass {total} is not 1")));
    }
    Ok(())
}

/// A truncated mean-field flow: distributions at steps `0..=horizon`.
///
/// Serialized as `{"states": [{"probs": [...]}, ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFlow")]
pub struct MFFlow {
    states: Vec<Distribution>,
}

#[derive(Deserialize)]
struct RawFlow {
    states: Vec<Distribution>,
}

impl TryFrom<RawFlow> for MFFlow {
    type Error = MfgError;

    fn try_from(raw: RawFlow) -> Result<Self> {
        MFFlow::new(raw.states)
    }
}

impl MFFlow {
    pub fn new(states: Vec<Distribution>) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(MfgError::InvalidDistribution("empty flow".into()));
        };
        let n = first.len();
        if let Some(bad) = states.iter().find(|d| d.len() != n) {
            return Err(MfgError::Shape {
                what: "flow state",
                expected: n,
                actual: bad.len(),
            });
        }
        Ok(Self { states })
    }

    /// The flow that stays at `mu` for `horizon + 1` steps.
    pub fn constant(mu: &Distribution, horizon: usize) -> Self {
        Self {
            states: vec![mu.clone(); horizon + 1],
        }
    }

    pub fn states(&self) -> &[Distribution] {
        &self.states
    }

    pub fn get(&self, n: usize) -> &Distribution {
        &self.states[n]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Index of the last step.
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn n_states(&self) -> usize {
        self.states[0].len()
    }

    /// `(1 - w) * self + w * other`, step by step.
    pub fn mix(&self, other: &MFFlow, w: f64) -> Result<MFFlow> {
        if self.len() != other.len() {
            return Err(MfgError::Shape {
                what: "flow mix",
                expected: self.len(),
                actual: other.len(),
            });
        }
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.mix(b, w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { states })
    }

    /// Uniform average of several flows of equal shape.
    pub fn average(flows: &[&MFFlow]) -> Result<MFFlow> {
        let Some(first) = flows.first() else {
            return Err(MfgError::InvalidDistribution("average of no flows".into()));
        };
        let len = first.len();
        let n = first.n_states();
        let mut acc = vec![vec![0.0; n]; len];
        for f in flows {
            if f.len() != len {
                return Err(MfgError::Shape {
                    what: "flow average",
                    expected: len,
                    actual: f.len(),
                });
            }
            for (row, d) in acc.iter_mut().zip(f.states()) {
                for (a, p) in row.iter_mut().zip(d.probs()) {
                    *a += p;
                }
            }
        }
        let k = flows.len() as f64;
        let states = acc
            .into_iter()
            .map(|row| Distribution::from_mass(row.into_iter().map(|a| a / k).collect()))
            .collect();
        Ok(Self { states })
    }

    /// Keeps steps `0..=horizon`.
    pub fn truncated(&self, horizon: usize) -> Result<MFFlow> {
        crate::error::check_at_least("flow length", horizon + 1, self.len())?;
        Ok(Self {
            states: self.states[..=horizon].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_entries() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::from_weights(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn renormalization_restores_mass() {
        let d = Distribution::new(vec![0.3, 0.3, 0.4 + 5e-10]).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_uses_documented_field_names() {
        let d = Distribution::new(vec![0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"probs":[0.25,0.75]}"#);
        let f = MFFlow::constant(&d, 1);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"states":[{"probs":[0.25,0.75]},{"probs":[0.25,0.75]}]}"#);
        let back: MFFlow = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<Distribution>(r#"{"probs":[0.2,0.2]}"#).is_err());
        assert!(serde_json::from_str::<MFFlow>(r#"{"states":[]}"#).is_err());
    }

    #[test]
    fn flow_average_is_stepwise_mean() {
        let a = MFFlow::constant(&Distribution::dirac(2, 0), 2);
        let b = MFFlow::constant(&Distribution::dirac(2, 1), 2);
        let avg = MFFlow::average(&[&a, &b]).unwrap();
        for d in avg.states() {
            assert_eq!(d.probs(), &[0.5, 0.5]);
        }
        let mixed = a.mix(&b, 0.25).unwrap();
        assert_eq!(mixed.get(1).probs(), &[0.75, 0.25]);
    }
}
