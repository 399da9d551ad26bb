//! Running averages of induced flows, one per training distribution.

use serde::{Deserialize, Serialize};

use crate::distribution::{Distribution, MFFlow};
use crate::envs::DistributionSet;
use crate::error::{check_len, MfgError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBank")]
pub struct AveragedFlowBank {
    names: Vec<String>,
    flows: Vec<MFFlow>,
    iteration: usize,
}

#[derive(Deserialize)]
struct RawBank {
    names: Vec<String>,
    flows: Vec<MFFlow>,
    iteration: usize,
}

impl TryFrom<RawBank> for AveragedFlowBank {
    type Error = MfgError;

    fn try_from(raw: RawBank) -> Result<Self> {
        Self::from_parts(raw.names, raw.flows, raw.iteration)
    }
}

impl AveragedFlowBank {
    /// The iteration-0 bank: every flow is constant at its initial
    /// distribution.
    pub fn new(set: &DistributionSet, horizon: usize) -> Self {
        Self {
            names: set.names().into_iter().map(str::to_string).collect(),
            flows: set
                .distributions()
                .into_iter()
                .map(|d| MFFlow::constant(d, horizon))
                .collect(),
            iteration: 0,
        }
    }

    pub fn from_parts(names: Vec<String>, flows: Vec<MFFlow>, iteration: usize) -> Result<Self> {
        if flows.is_empty() {
            return Err(MfgError::InvalidConfig("empty flow bank".into()));
        }
        check_len("bank names", flows.len(), names.len())?;
        for f in &flows[1..] {
            check_len("bank flow length", flows[0].len(), f.len())?;
            check_len("bank flow states", flows[0].n_states(), f.n_states())?;
        }
        Ok(Self {
            names,
            flows,
            iteration,
        })
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    /// Number of averaging updates applied so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn horizon(&self) -> usize {
        self.flows[0].horizon()
    }

    pub fn n_states(&self) -> usize {
        self.flows[0].n_states()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn flows(&self) -> &[MFFlow] {
        &self.flows
    }

    pub fn flow(&self, i: usize) -> &MFFlow {
        &self.flows[i]
    }

    /// Step 0 of flow `i`; averaging never moves it.
    pub fn initial(&self, i: usize) -> &Distribution {
        self.flows[i].get(0)
    }

    /// Folds in the `k`-th induced flows:
    /// `avg_k = k/(k+1) avg_{k-1} + 1/(k+1) induced_k`.
    pub fn update(&mut self, induced: &[MFFlow]) -> Result<()> {
        check_len("induced flows", self.flows.len(), induced.len())?;
        let k = (self.iteration + 1) as f64;
        let mixed = self
            .flows
            .iter()
            .zip(induced)
            .map(|(avg, new)| avg.mix(new, 1.0 / (k + 1.0)))
            .collect::<Result<Vec<_>>>()?;
        self.flows = mixed;
        self.iteration += 1;
        Ok(())
    }
}
