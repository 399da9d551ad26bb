//! Deterministic alternative to DQN: regress the network on exact
//! backward-induction Q-values computed against every bank flow.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array2};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::distribution::MFFlow;
use crate::env::Environment;
use crate::error::{MfgError, Result};
use crate::fp::AveragedFlowBank;
use crate::mfg::{argmax_first, best_response};
use crate::qlearn::config::RLConfig;
use crate::qlearn::network::{BatchInput, QNetwork};
use crate::qlearn::optim::Optimizer;
use crate::seed::{SeedTree, StreamRng};

/// Regression data: one population per point with the exact Q-table of all
/// states against it.
#[derive(Clone, Debug)]
pub struct QDataset {
    n_states: usize,
    n_actions: usize,
    mus: Vec<Vec<f64>>,
    targets: Vec<Array2<f64>>,
    /// `(flow, step)` each point came from.
    keys: Vec<(usize, usize)>,
}

impl QDataset {
    pub fn from_bank(env: &dyn Environment, bank: &AveragedFlowBank, tail: usize) -> Result<Self> {
        Self::from_bank_excluding(env, bank, tail, &[])
    }

    /// Targets are the backward-induction Q-values against each bank flow
    /// continued for `tail` extra steps at its last state. Leaves out the
    /// listed `(flow, step)` points, for held-out checks.
    pub fn from_bank_excluding(
        env: &dyn Environment,
        bank: &AveragedFlowBank,
        tail: usize,
        exclude: &[(usize, usize)],
    ) -> Result<Self> {
        let (ns, na) = (env.n_states(), env.n_actions());
        let horizon = bank.horizon();
        let mut data = Self {
            n_states: ns,
            n_actions: na,
            mus: Vec::new(),
            targets: Vec::new(),
            keys: Vec::new(),
        };
        for (i, flow) in bank.flows().iter().enumerate() {
            let mut states = flow.states().to_vec();
            states.extend(std::iter::repeat_n(flow.get(horizon).clone(), tail));
            let (_, table) = best_response(env, &MFFlow::new(states)?, horizon + tail)?;
            for n in 0..=horizon {
                if exclude.contains(&(i, n)) {
                    continue;
                }
                let mut q = Array2::zeros((ns, na));
                for x in 0..ns {
                    for (a, v) in table.q_row(n, x).iter().enumerate() {
                        q[[x, a]] = *v;
                    }
                }
                data.mus.push(flow.get(n).probs().to_vec());
                data.targets.push(q);
                data.keys.push((i, n));
            }
        }
        if data.mus.is_empty() {
            return Err(MfgError::InvalidConfig("empty regression dataset".into()));
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }

    pub fn mu(&self, i: usize) -> &[f64] {
        &self.mus[i]
    }

    pub fn target(&self, i: usize) -> &Array2<f64> {
        &self.targets[i]
    }

    pub fn key(&self, i: usize) -> (usize, usize) {
        self.keys[i]
    }

    /// Mean and standard deviation of all target entries.
    pub fn target_stats(&self) -> (f64, f64) {
        let count = (self.len() * self.n_states * self.n_actions) as f64;
        let mean = self.targets.iter().map(|t| t.sum()).sum::<f64>() / count;
        let var = self
            .targets
            .iter()
            .map(|t| t.iter().map(|v| (v - mean).powi(2)).sum::<f64>())
            .sum::<f64>()
            / count;
        (mean, var.sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Mean squared error over every (population, state, action) entry.
    pub loss: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Q-table of every state against every dataset population.
fn predict_all(net: &QNetwork, data: &QDataset) -> Vec<Array2<f64>> {
    let states: Vec<usize> = (0..data.n_states).collect();
    let proj = net.state_projection(&states);
    data.mus
        .iter()
        .map(|mu| net.q_table_with(&proj, mu).expect("dataset matches the network"))
        .collect()
}

/// Mean squared error of the network over the whole dataset.
pub fn dataset_loss(net: &QNetwork, data: &QDataset) -> f64 {
    let count = (data.len() * data.n_states * data.n_actions) as f64;
    predict_all(net, data)
        .iter()
        .zip(&data.targets)
        .map(|(p, t)| (p - t).mapv(|d| d * d).sum())
        .sum::<f64>()
        / count
}

/// Fraction of dataset `(population, state)` points where the network's
/// greedy action is also greedy for the targets, lowest index on ties.
pub fn greedy_agreement(net: &QNetwork, data: &QDataset) -> f64 {
    let preds = predict_all(net, data);
    let mut hits = 0usize;
    for (p, t) in preds.iter().zip(&data.targets) {
        for x in 0..data.n_states {
            let a = argmax_first(p.row(x).as_slice().expect("standard layout"));
            let b = argmax_first(t.row(x).as_slice().expect("standard layout"));
            hits += usize::from(a == b);
        }
    }
    hits as f64 / (data.len() * data.n_states) as f64
}

fn subset(rng: &mut StreamRng, total: usize, want: usize) -> Vec<usize> {
    if want == 0 || want >= total {
        (0..total).collect()
    } else {
        let mut v = index::sample(rng, total, want).into_vec();
        v.sort_unstable();
        v
    }
}

/// Sets the output layer to the least-squares solution given the current
/// hidden features over the whole dataset. Returns false when the network
/// has no hidden layer.
pub fn solve_output_layer(net: &mut QNetwork, data: &QDataset) -> Result<bool> {
    let states: Vec<usize> = (0..data.n_states).collect();
    let proj = net.state_projection(&states);
    let (scale, shift) = net.output_affine();
    let Some(h0) = net.penultimate_with(&proj, &data.mus[0]) else {
        return Ok(false);
    };
    let dim = h0.ncols() + 1;
    let na = data.n_actions;
    // Normal equations with a trailing ones column for the bias.
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DMatrix::<f64>::zeros(dim, na);
    for (mu, target) in data.mus.iter().zip(&data.targets) {
        let h = net.penultimate_with(&proj, mu).expect("hidden layers present");
        let mut ha = Array2::ones((h.nrows(), dim));
        ha.slice_mut(s![.., ..dim - 1]).assign(&h);
        let y = target.mapv(|v| (v - shift) / scale);
        let g = ha.t().dot(&ha);
        let r = ha.t().dot(&y);
        for i in 0..dim {
            for j in 0..dim {
                gram[(i, j)] += g[[i, j]];
            }
            for a in 0..na {
                rhs[(i, a)] += r[[i, a]];
            }
        }
    }
    // Pseudo-inverse through the symmetric eigendecomposition; directions
    // with negligible energy are dropped instead of amplified.
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cutoff = top * 1e-13;
    let qt_r = eig.eigenvectors.transpose() * rhs;
    let mut scaled = qt_r;
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        let f = if l > cutoff { 1.0 / l } else { 0.0 };
        scaled.row_mut(i).scale_mut(f);
    }
    let sol = &eig.eigenvectors * scaled;
    let weight = Array2::from_shape_fn((na, dim - 1), |(a, i)| sol[(i, a)]);
    let bias = Array2::from_shape_fn((1, na), |(_, a)| sol[(dim - 1, a)]);
    net.set_output_layer(weight, bias)?;
    Ok(true)
}

/// Trains `net` in place on `data` with minibatch regression. The output
/// affine map is reset to the target mean and spread first, preserving the
/// current function. If gradient steps stop short of the tolerance, the
/// output layer is finally replaced by its least-squares solution when that
/// lowers the loss.
pub fn fit_network(net: &mut QNetwork, data: &QDataset, cfg: &RLConfig, rng: &mut StreamRng) -> Result<FitReport> {
    cfg.validate()?;
    let (mean, std) = data.target_stats();
    net.rescale_output(std.max(1e-8), mean);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, net.params());
    let mut loss = dataset_loss(net, data);
    let mut steps = 0;
    while loss > cfg.fit_loss_tolerance && steps < cfg.fit_max_steps {
        let mu_idx = subset(rng, data.len(), cfg.fit_batch_mus);
        let states = subset(rng, data.n_states, cfg.fit_batch_states);
        let mus: Vec<&[f64]> = mu_idx.iter().map(|&i| data.mus[i].as_slice()).collect();
        let pairs: Vec<(usize, usize)> = (0..states.len())
            .flat_map(|i| (0..mus.len()).map(move |j| (i, j)))
            .collect();
        let batch = BatchInput {
            states: &states,
            mus: &mus,
            pairs: &pairs,
        };
        let (q, cache) = net.forward_train(&batch)?;
        let scale = 2.0 / (pairs.len() * data.n_actions) as f64;
        let mut dq = q;
        for (s, &(i, j)) in pairs.iter().enumerate() {
            let target = data.targets[mu_idx[j]].row(states[i]);
            let mut row = dq.row_mut(s);
            row -= &target;
            row *= scale;
        }
        let grads = net.backward(&cache, &dq);
        opt.step(net.params_mut(), &grads);
        steps += 1;
        if steps % cfg.fit_eval_every == 0 || steps == cfg.fit_max_steps {
            loss = dataset_loss(net, data);
        }
    }
    if loss > cfg.fit_loss_tolerance {
        let before = net.clone();
        if solve_output_layer(net, data)? {
            let solved = dataset_loss(net, data);
            if solved < loss {
                loss = solved;
            } else {
                *net = before;
            }
        }
    }
    Ok(FitReport {
        loss,
        steps,
        converged: loss <= cfg.fit_loss_tolerance,
    })
}

/// Fits a fresh network (or `warm`, when given) to exact Q-values against
/// every bank flow.
pub fn fit_q_exact(
    env: &dyn Environment,
    bank: &AveragedFlowBank,
    cfg: &RLConfig,
    zero_mu_input: bool,
    warm: Option<&QNetwork>,
) -> Result<(QNetwork, FitReport)> {
    cfg.validate()?;
    let data = QDataset::from_bank(env, bank, cfg.fit_tail_steps)?;
    let seeds = SeedTree::new(cfg.seed);
    let mut net = match warm {
        Some(w) => w.clone(),
        None => QNetwork::init(cfg.network_spec(env, zero_mu_input)?, &mut seeds.rng("init"))?,
    };
    let report = fit_network(&mut net, &data, cfg, &mut seeds.rng("minibatch"))?;
    Ok((net, report))
}
