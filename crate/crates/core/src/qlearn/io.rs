//! Versioned JSON format for network weights.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::qlearn::network::{NetworkSpec, QNetwork};

pub const NETWORK_FORMAT: &str = "mfg-qnetwork";
pub const NETWORK_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Tensor {
    rows: usize,
    cols: usize,
    /// Row-major values.
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format: String,
    version: u32,
    spec: NetworkSpec,
    output_scale: f64,
    output_shift: f64,
    tensors: Vec<Tensor>,
}

impl QNetwork {
    pub fn to_json(&self) -> Result<String> {
        let (output_scale, output_shift) = self.output_affine();
        let file = NetworkFile {
            format: NETWORK_FORMAT.into(),
            version: NETWORK_VERSION,
            spec: self.spec().clone(),
            output_scale,
            output_shift,
            tensors: self
                .params()
                .iter()
                .map(|p| Tensor {
                    rows: p.nrows(),
                    cols: p.ncols(),
                    data: p.iter().copied().collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(s)?;
        if file.format != NETWORK_FORMAT || file.version != NETWORK_VERSION {
            return Err(MfgError::InvalidNetwork(format!(
                "unsupported network file {} v{}",
                file.format, file.version
            )));
        }
        let params = file
            .tensors
            .into_iter()
            .map(|t| {
                Array2::from_shape_vec((t.rows, t.cols), t.data)
                    .map_err(|e| MfgError::InvalidNetwork(format!("bad tensor: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        QNetwork::from_parts(file.spec, params, file.output_scale, file.output_shift)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
