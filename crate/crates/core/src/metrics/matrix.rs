//! Policy-by-initial-distribution performance matrices.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distribution::MFFlow;
use crate::env::Environment;
use crate::envs::DistributionSet;
use crate::error::{check_len, MfgError, Result};
use crate::fp::{mixture_exploitability, rollout_mixture};
use crate::metrics::wasserstein::{flow_distance, GroundMetric};
use crate::policy::PopulationPolicy;

/// Values below this are raised to it before taking `log10`.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Wasserstein,
    Exploitability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMatrix {
    pub kind: MatrixKind,
    /// Whether `values` hold `log10` of the raw numbers.
    pub log10: bool,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl PerformanceMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row][col]
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.rows.iter().position(|r| r == label)
    }

    /// Mean of row `row` over the columns in `cols`.
    pub fn row_mean(&self, row: usize, cols: &[usize]) -> f64 {
        cols.iter().map(|&c| self.values[row][c]).sum::<f64>() / cols.len() as f64
    }

    /// `log10(max(v, LOG_FLOOR))` entrywise.
    pub fn to_log10(&self) -> PerformanceMatrix {
        PerformanceMatrix {
            log10: true,
            values: self
                .values
                .iter()
                .map(|r| r.iter().map(|v| v.max(LOG_FLOOR).log10()).collect())
                .collect(),
            ..self.clone()
        }
    }

    /// RFC-4180 CSV: a header of column labels, then one labelled line per
    /// row. Numbers use the shortest representation that round-trips.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header = std::iter::once("policy").chain(self.columns.iter().map(String::as_str));
        w.write_record(header).map_err(csv_err)?;
        for (label, row) in self.rows.iter().zip(&self.values) {
            let fields = std::iter::once(label.clone()).chain(row.iter().map(|v| format!("{v}")));
            w.write_record(fields).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

fn csv_err(e: csv::Error) -> MfgError {
    MfgError::Io(std::io::Error::other(e))
}

/// One matrix row: a uniform mixture of population-dependent policies (a
/// single policy is a mixture of one).
pub struct BenchmarkRow<'a> {
    pub label: String,
    pub policies: Vec<&'a dyn PopulationPolicy>,
}

impl<'a> BenchmarkRow<'a> {
    pub fn single(label: impl Into<String>, policy: &'a dyn PopulationPolicy) -> Self {
        Self {
            label: label.into(),
            policies: vec![policy],
        }
    }
}

/// `W[i][j]`: flow distance between row `i` started at column `j`'s initial
/// distribution and column `j`'s reference flow. `E[i][j]`: exploitability
/// of row `i` from that distribution.
pub fn performance_matrices(
    env: &dyn Environment,
    rows: &[BenchmarkRow<'_>],
    columns: &DistributionSet,
    reference_flows: &[MFFlow],
    horizon: usize,
    metric: &GroundMetric,
) -> Result<(PerformanceMatrix, PerformanceMatrix)> {
    if reference_flows.len() != columns.len() {
        return Err(MfgError::InvalidConfig(format!(
            "missing reference flow: {} columns but {} flows",
            columns.len(),
            reference_flows.len()
        )));
    }
    for f in reference_flows {
        check_len("reference flow states", env.n_states(), f.n_states())?;
    }
    let mut w = Vec::with_capacity(rows.len());
    let mut e = Vec::with_capacity(rows.len());
    for row in rows {
        let mut w_row = Vec::with_capacity(columns.len());
        let mut e_row = Vec::with_capacity(columns.len());
        for (entry, reference) in columns.entries().iter().zip(reference_flows) {
            let mu0 = &entry.distribution;
            let rollout = rollout_mixture(env, mu0, &row.policies, horizon)?;
            w_row.push(flow_distance(&rollout.average, reference, metric, horizon)?);
            e_row.push(mixture_exploitability(env, mu0, &rollout, horizon)?);
        }
        w.push(w_row);
        e.push(e_row);
    }
    let labels: Vec<String> = rows.iter().map(|r| r.label.clone()).collect();
    let cols: Vec<String> = columns.names().into_iter().map(String::from).collect();
    let make = |kind, values| PerformanceMatrix {
        kind,
        log10: false,
        rows: labels.clone(),
        columns: cols.clone(),
        values,
    };
    Ok((make(MatrixKind::Wasserstein, w), make(MatrixKind::Exploitability, e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_exploration_1d, make_training_set, Exploration1DConfig, TrainingSetParams};
    use crate::fp::solve_specialized_fp;
    use crate::policy::UniformPolicy;

    #[test]
    fn csv_and_log_export() {
        let m = PerformanceMatrix {
            kind: MatrixKind::Exploitability,
            log10: false,
            rows: vec!["a,b".into(), "c".into()],
            columns: vec!["x".into(), "y".into()],
            values: vec![vec![0.0, 0.1], vec![1e-3, 2.5]],
        };
        assert_eq!(m.to_csv_string().unwrap(), "policy,x,y\n\"a,b\",0,0.1\nc,0.001,2.5\n");
        let l = m.to_log10();
        assert_eq!(l.values[0], vec![-12.0, -1.0]);
        assert!(l.log10);
        assert_eq!(m.row_mean(1, &[0, 1]), (1e-3 + 2.5) / 2.0);
    }

    #[test]
    fn specialized_rows_have_zero_diagonal_and_duplicates_match() {
        let env = make_exploration_1d(&Exploration1DConfig {
            size: 12,
            ..Default::default()
        })
        .unwrap();
        let set = make_training_set(env.state_space(), &TrainingSetParams { per_axis: 2, std: None }).unwrap();
        let horizon = 6;
        let sols: Vec<_> = set
            .distributions()
            .iter()
            .map(|mu| solve_specialized_fp(&env, mu, 5, horizon).unwrap())
            .collect();
        let flows: Vec<MFFlow> = sols.iter().map(|s| s.flow.clone()).collect();
        let uniform = UniformPolicy { n_actions: 3 };
        let rows = vec![
            BenchmarkRow::single("s0", &sols[0].policy),
            BenchmarkRow::single("s1", &sols[1].policy),
            BenchmarkRow::single("u", &uniform),
            BenchmarkRow::single("u again", &uniform),
        ];
        let g = GroundMetric::normalized(env.state_space());
        let (w, e) = performance_matrices(&env, &rows, &set, &flows, horizon, &g).unwrap();
        for i in 0..2 {
            assert_eq!(w.get(i, i), 0.0);
            assert!((e.get(i, i) - sols[i].curve[4]).abs() < 1e-12);
        }
        assert_eq!(w.values[2], w.values[3]);
        assert_eq!(e.values[2], e.values[3]);
        assert!(e.values.iter().flatten().all(|&v| v >= -1e-9));
        assert!(performance_matrices(&env, &rows, &set, &flows[..1], horizon, &g).is_err());
    }
}
