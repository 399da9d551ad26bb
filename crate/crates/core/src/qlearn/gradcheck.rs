//! Backprop against central finite differences.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::qlearn::network::{BatchInput, QNetwork};
use crate::seed::SeedTree;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Floor on the relative-error denominator, so vanishing gradients compare
/// absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub probes: usize,
    /// Probes dropped because a perturbation crossed a ReLU kink.
    pub skipped: usize,
}

/// Probe loss: a fixed random linear functional of the batch outputs.
struct Probe {
    states: Vec<usize>,
    mus: Vec<Vec<f64>>,
    pairs: Vec<(usize, usize)>,
    weights: Array2<f64>,
}

impl Probe {
    fn batch(&self) -> (Vec<&[f64]>, &[usize], &[(usize, usize)]) {
        (self.mus.iter().map(Vec::as_slice).collect(), &self.states, &self.pairs)
    }

    fn eval(&self, net: &QNetwork) -> (f64, Vec<bool>) {
        let (mus, states, pairs) = self.batch();
        let (q, cache) = net
            .forward_train(&BatchInput { states, mus: &mus, pairs })
            .expect("probe batch matches the network");
        ((&q * &self.weights).sum(), cache.activation_pattern())
    }
}

/// Compares backprop with central differences on `n_probes` random
/// parameters.
pub fn gradient_check(net: &QNetwork, n_probes: usize, seed: u64) -> GradCheckReport {
    gradient_check_scaled(net, n_probes, seed, 1.0)
}

/// Same as [`gradient_check`] with the analytic gradient multiplied by
/// `tamper`; any factor other than 1 must make the check fail.
pub fn gradient_check_scaled(net: &QNetwork, n_probes: usize, seed: u64, tamper: f64) -> GradCheckReport {
    let seeds = SeedTree::new(seed);
    let mut rng = seeds.rng("probe-batch");
    let n = net.spec().n_states;
    let na = net.spec().n_actions;
    let states: Vec<usize> = (0..3).map(|_| rng.random_range(0..n)).collect();
    let mus: Vec<Vec<f64>> = (0..2)
        .map(|_| {
            let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..2).map(move |j| (i, j))).collect();
    let weights = Array2::from_shape_fn((pairs.len(), na), |_| rng.random_range(-1.0..1.0));
    let probe = Probe {
        states,
        mus,
        pairs,
        weights,
    };

    let (mus, states, pairs) = probe.batch();
    let (_, cache) = net
        .forward_train(&BatchInput { states, mus: &mus, pairs })
        .expect("probe batch matches the network");
    let grads = net.backward(&cache, &probe.weights);
    let base_pattern = cache.activation_pattern();

    let sizes: Vec<usize> = net.params().iter().map(Array2::len).collect();
    let total: usize = sizes.iter().sum();
    let mut pick = seeds.rng("probe-params");
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        probes: 0,
        skipped: 0,
    };
    let mut work = net.clone();
    for _ in 0..n_probes {
        let mut flat = pick.random_range(0..total);
        let mut t = 0;
        while flat >= sizes[t] {
            flat -= sizes[t];
            t += 1;
        }
        let cols = net.params()[t].ncols();
        let idx = [flat / cols, flat % cols];
        let orig = net.params()[t][idx];
        work.params_mut()[t][idx] = orig + FD_STEP;
        let (plus, pat_plus) = probe.eval(&work);
        work.params_mut()[t][idx] = orig - FD_STEP;
        let (minus, pat_minus) = probe.eval(&work);
        work.params_mut()[t][idx] = orig;
        if pat_plus != base_pattern || pat_minus != base_pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let analytic = tamper * grads[t][idx];
        let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        report.max_rel_err = report.max_rel_err.max((analytic - numeric).abs() / denom);
        report.probes += 1;
    }
    report
}
