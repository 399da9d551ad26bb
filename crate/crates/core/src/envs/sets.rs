//! Initial-distribution generators and the training/testing sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::error::{MfgError, Result};
use crate::space::{Geometry, StateSpace};

/// Gaussian density evaluated at cell centers (cell `i` sits at coordinate
/// `i`) and normalized. Isotropic on grids; `mean` has one coordinate per
/// axis as `(col, row)`.
pub fn gaussian_distribution(space: &StateSpace, mean: &[f64], variance: f64) -> Result<Distribution> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(MfgError::InvalidConfig(format!("variance {variance} must be positive")));
    }
    let dims = match space.geometry() {
        Geometry::Line { .. } => 1,
        Geometry::Grid { .. } => 2,
    };
    if mean.len() != dims {
        return Err(MfgError::Shape {
            what: "gaussian mean",
            expected: dims,
            actual: mean.len(),
        });
    }
    let (w, h) = space.extent();
    let upper = [w as f64 - 1.0, h as f64 - 1.0];
    for (m, hi) in mean.iter().zip(upper) {
        if !(m.is_finite() && *m >= 0.0 && *m <= hi) {
            return Err(MfgError::InvalidConfig(format!("gaussian mean {m} outside domain")));
        }
    }
    // Log-densities shifted by their maximum so tiny variances cannot
    // underflow every weight to zero.
    let log_w: Vec<f64> = (0..space.size())
        .map(|x| {
            let (c, r) = space.coords(x);
            let pos = [c as f64, r as f64];
            let sq: f64 = mean.iter().zip(pos).map(|(m, p)| (p - m).powi(2)).sum();
            -sq / (2.0 * variance)
        })
        .collect();
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Distribution::from_weights(log_w.into_iter().map(|l| (l - top).exp()).collect())
}

/// Independent uniform draws per state, normalized. Exact zero draws are
/// redrawn so every entry is positive.
pub fn random_distribution(space: &StateSpace, seed: u64) -> Distribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..space.size())
        .map(|_| loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        })
        .collect();
    Distribution::from_weights(weights).expect("positive weights")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Training,
    Testing,
}

/// How an entry was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Gaussian { mean: Vec<f64>, variance: f64 },
    Random { seed: u64 },
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetEntry {
    pub name: String,
    pub provenance: Provenance,
    pub distribution: Distribution,
}

/// A named, nonempty list of distributions over one state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSet")]
pub struct DistributionSet {
    kind: SetKind,
    entries: Vec<SetEntry>,
}

#[derive(Deserialize)]
struct RawSet {
    kind: SetKind,
    entries: Vec<SetEntry>,
}

impl TryFrom<RawSet> for DistributionSet {
    type Error = MfgError;

    fn try_from(raw: RawSet) -> Result<Self> {
        DistributionSet::new(raw.kind, raw.entries)
    }
}

impl DistributionSet {
    pub fn new(kind: SetKind, entries: Vec<SetEntry>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(MfgError::InvalidDistribution("empty distribution set".into()));
        };
        let n = first.distribution.len();
        for e in &entries {
            crate::error::check_len("set entry", n, e.distribution.len())?;
        }
        Ok(Self { kind, entries })
    }

    /// Unnamed custom entries, labelled by position.
    pub fn from_distributions(kind: SetKind, dists: Vec<Distribution>) -> Result<Self> {
        let entries = dists
            .into_iter()
            .enumerate()
            .map(|(i, d)| SetEntry {
                name: format!("custom_{i}"),
                provenance: Provenance::Custom,
                distribution: d,
            })
            .collect();
        Self::new(kind, entries)
    }

    pub fn kind(&self) -> SetKind {
        self.kind
    }

    pub fn entries(&self) -> &[SetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.entries[0].distribution.len()
    }

    pub fn distributions(&self) -> Vec<&Distribution> {
        self.entries.iter().map(|e| &e.distribution).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    /// Keeps the entries at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let entries = indices
            .iter()
            .map(|&i| {
                self.entries.get(i).cloned().ok_or_else(|| {
                    MfgError::InvalidConfig(format!("set index {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.kind, entries)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSetParams {
    /// Means per axis; the set has `per_axis` entries on a line and
    /// `per_axis^2` on a grid.
    pub per_axis: usize,
    /// Standard deviation; `None` means `extent / (2 * (per_axis + 1))`.
    pub std: Option<f64>,
}

impl TrainingSetParams {
    pub fn for_space(space: &StateSpace) -> Self {
        let per_axis = match space.geometry() {
            Geometry::Line { .. } => 4,
            Geometry::Grid { .. } => 2,
        };
        Self { per_axis, std: None }
    }
}

impl Default for TrainingSetParams {
    fn default() -> Self {
        Self { per_axis: 4, std: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestingSetParams {
    pub random_count: usize,
    pub seed: u64,
    /// Standard deviations of the in-between Gaussians, as multiples of the
    /// training standard deviation.
    pub std_factors: Vec<f64>,
}

impl Default for TestingSetParams {
    fn default() -> Self {
        Self {
            random_count: 4,
            seed: 7,
            std_factors: vec![0.5, 2.0],
        }
    }
}

/// Evenly spaced means `round(i * len / (k + 1))`, `i = 1..=k`.
fn axis_means(len: usize, k: usize) -> Vec<f64> {
    (1..=k)
        .map(|i| (i as f64 * len as f64 / (k + 1) as f64).round())
        .collect()
}

fn training_std(space: &StateSpace, params: &TrainingSetParams) -> f64 {
    let (w, h) = space.extent();
    params
        .std
        .unwrap_or(w.max(h) as f64 / (2.0 * (params.per_axis + 1) as f64))
}

fn gaussian_entry(space: &StateSpace, name: String, mean: Vec<f64>, std: f64) -> Result<SetEntry> {
    let variance = std * std;
    Ok(SetEntry {
        name,
        distribution: gaussian_distribution(space, &mean, variance)?,
        provenance: Provenance::Gaussian { mean, variance },
    })
}

fn grid_points(space: &StateSpace, xs: &[f64], ys: &[f64]) -> Vec<Vec<f64>> {
    match space.geometry() {
        Geometry::Line { .. } => xs.iter().map(|&m| vec![m]).collect(),
        Geometry::Grid { .. } => ys
            .iter()
            .flat_map(|&r| xs.iter().map(move |&c| vec![c, r]))
            .collect(),
    }
}

/// Gaussians of equal variance centred on an even lattice of means.
pub fn make_training_set(space: &StateSpace, params: &TrainingSetParams) -> Result<DistributionSet> {
    if params.per_axis == 0 {
        return Err(MfgError::InvalidConfig("training set needs at least one mean".into()));
    }
    let (w, h) = space.extent();
    let std = training_std(space, params);
    let xs = axis_means(w, params.per_axis);
    let ys = axis_means(h, params.per_axis);
    let entries = grid_points(space, &xs, &ys)
        .into_iter()
        .enumerate()
        .map(|(i, mean)| gaussian_entry(space, format!("train_gauss_{i}"), mean, std))
        .collect::<Result<Vec<_>>>()?;
    DistributionSet::new(SetKind::Training, entries)
}

fn with_midpoints(means: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let mut all = Vec::new();
    let mut is_mid = Vec::new();
    for (i, &m) in means.iter().enumerate() {
        all.push(m);
        is_mid.push(false);
        if let Some(&next) = means.get(i + 1) {
            all.push(0.5 * (m + next));
            is_mid.push(true);
        }
    }
    (all, is_mid)
}

/// Random distributions plus Gaussians centred between the training means
/// (on a grid: every lattice point with at least one in-between coordinate).
pub fn make_testing_set(
    space: &StateSpace,
    training: &TrainingSetParams,
    params: &TestingSetParams,
) -> Result<DistributionSet> {
    if params.random_count == 0 || params.std_factors.is_empty() || training.per_axis < 2 {
        return Err(MfgError::InvalidConfig(
            "testing set needs random entries, std factors and two training means per axis".into(),
        ));
    }
    let (w, h) = space.extent();
    let std = training_std(space, training);
    let mut entries = Vec::new();
    for i in 0..params.random_count {
        let seed = params.seed.wrapping_add(i as u64);
        entries.push(SetEntry {
            name: format!("test_random_{i}"),
            distribution: random_distribution(space, seed),
            provenance: Provenance::Random { seed },
        });
    }
    let (xs, xmid) = with_midpoints(&axis_means(w, training.per_axis));
    let (ys, ymid) = with_midpoints(&axis_means(h, training.per_axis));
    let mut means = Vec::new();
    match space.geometry() {
        Geometry::Line { .. } => {
            for (m, mid) in xs.iter().zip(&xmid) {
                if *mid {
                    means.push(vec![*m]);
                }
            }
        }
        Geometry::Grid { .. } => {
            for (r, rmid) in ys.iter().zip(&ymid) {
                for (c, cmid) in xs.iter().zip(&xmid) {
                    if *rmid || *cmid {
                        means.push(vec![*c, *r]);
                    }
                }
            }
        }
    }
    let mut idx = 0;
    for factor in &params.std_factors {
        for mean in &means {
            entries.push(gaussian_entry(space, format!("test_gauss_{idx}"), mean.clone(), std * factor)?);
            idx += 1;
        }
    }
    DistributionSet::new(SetKind::Testing, entries)
}
