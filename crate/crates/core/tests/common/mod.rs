//! Brute-force oracles shared by the integration tests. Nothing here calls
//! the crate's solvers; only environments and plain data types are used.

#![allow(dead_code)]

use mfg_core::envs::TabularMfg;
use mfg_core::{Distribution, Environment, MFFlow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random game together with a start distribution and horizon.
pub struct Toy {
    pub env: TabularMfg,
    pub mu0: Distribution,
    pub horizon: usize,
}

/// Random toy game with `|X| <= 3`, `|A| <= 2` and horizon `<= 3`.
pub fn toy(seed: u64) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = rng.random_range(1..=3);
    let na = rng.random_range(1..=2);
    let horizon = rng.random_range(0..=3);
    let gamma = rng.random_range(0.5..0.95);
    let mu_dependent = rng.random_bool(0.5);
    let env = TabularMfg::random(ns, na, gamma, mu_dependent, &mut rng).unwrap();
    let mu0 = random_simplex(ns, &mut rng);
    Toy { env, mu0, horizon }
}

pub fn random_simplex<R: Rng>(n: usize, rng: &mut R) -> Distribution {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    Distribution::new(w.into_iter().map(|v| v / total).collect()).unwrap()
}

/// Random stochastic decision rules, one per step, as `[n][x][a]`.
pub fn random_rules<R: Rng>(ns: usize, na: usize, steps: usize, rng: &mut R) -> Vec<Vec<Vec<f64>>> {
    (0..steps)
        .map(|_| (0..ns).map(|_| random_simplex(na, rng).probs().to_vec()).collect())
        .collect()
}

/// One-step push of `rho` through `rule` with the kernel frozen at `mf`.
fn push(env: &dyn Environment, rho: &[f64], rule: &[Vec<f64>], mf: &Distribution) -> Vec<f64> {
    let mut next = vec![0.0; rho.len()];
    for (x, &m) in rho.iter().enumerate() {
        for (a, &p) in rule[x].iter().enumerate() {
            for (y, q) in env.transition(x, a, mf) {
                next[y] += m * p * q;
            }
        }
    }
    next
}

/// Flow of a population that follows `rules` and drives its own kernel.
pub fn naive_flow(env: &dyn Environment, mu0: &Distribution, rules: &[Vec<Vec<f64>>]) -> MFFlow {
    let mut states = vec![mu0.probs().to_vec()];
    for rule in &rules[..rules.len() - 1] {
        let mf = Distribution::new(states.last().unwrap().clone()).unwrap();
        states.push(push(env, mf.probs(), rule, &mf));
    }
    MFFlow::new(states.into_iter().map(|s| Distribution::new(s).unwrap()).collect()).unwrap()
}

/// Discounted return of one agent following `rules` against `flow`.
pub fn naive_value(env: &dyn Environment, mu0: &Distribution, rules: &[Vec<Vec<f64>>], flow: &MFFlow) -> f64 {
    let mut rho = mu0.probs().to_vec();
    let mut total = 0.0;
    for (n, rule) in rules.iter().enumerate() {
        let mf = flow.get(n);
        let mut stage = 0.0;
        for (x, &m) in rho.iter().enumerate() {
            for (a, &p) in rule[x].iter().enumerate() {
                stage += m * p * env.reward(x, a, mf);
            }
        }
        total += env.gamma().powi(n as i32) * stage;
        rho = push(env, &rho, rule, mf);
    }
    total
}

/// Best return over every deterministic non-stationary policy, by
/// enumerating all `|A|^(|X| * steps)` of them.
pub fn enumerate_best(env: &dyn Environment, mu0: &Distribution, flow: &MFFlow, horizon: usize) -> f64 {
    let (ns, na, steps) = (env.n_states(), env.n_actions(), horizon + 1);
    let slots = ns * steps;
    let count = na.pow(slots as u32);
    let mut best = f64::NEG_INFINITY;
    for code in 0..count {
        let mut c = code;
        let rules: Vec<Vec<Vec<f64>>> = (0..steps)
            .map(|_| {
                (0..ns)
                    .map(|_| {
                        let mut row = vec![0.0; na];
                        row[c % na] = 1.0;
                        c /= na;
                        row
                    })
                    .collect()
            })
            .collect();
        best = best.max(naive_value(env, mu0, &rules, flow));
    }
    best
}

/// Exact optimal transport cost between two 8-state histograms, solved as a
/// 64-variable linear program.
pub fn transport_lp(mu: &[f64], nu: &[f64], cost: impl Fn(usize, usize) -> f64) -> f64 {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let n = mu.len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = (0..n)
        .map(|i| (0..n).map(|j| lp.add_var(cost(i, j), (0.0, f64::INFINITY))).collect())
        .collect();
    for i in 0..n {
        let row: Vec<_> = (0..n).map(|j| (vars[i][j], 1.0)).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, mu[i]);
    }
    for j in 0..n {
        let col: Vec<_> = (0..n).map(|i| (vars[i][j], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, nu[j]);
    }
    lp.solve().unwrap().objective()
}
