//! Fictitious play over population-dependent policies, trained jointly on a
//! set of initial distributions.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::{Distribution, MFFlow};
use crate::env::Environment;
use crate::envs::DistributionSet;
use crate::error::{check_len, MfgError, Result};
use crate::fp::bank::AveragedFlowBank;
use crate::fp::mixture::{mixture_exploitability, rollout_mixture};
use crate::mfg::{check_policy, induce_policy, push_forward};
use crate::policy::{PopulationPolicy, UniformPolicy};
use crate::qlearn::{fit_q_exact, train_dqn, FitReport, GreedyPolicy, QNetwork, RLConfig};
use crate::seed::SeedTree;

/// How each iteration's best response is learned.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Dqn,
    /// Regression on exact backward-induction Q-values.
    #[default]
    Exact,
}

/// Which population the new policy sees while its flow is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowInduction {
    /// Condition and move against the current bank flow.
    #[default]
    Bank,
    /// Condition and move against the flow being generated.
    SelfConsistent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MasterConfig {
    pub iterations: usize,
    pub horizon: usize,
    pub mode: SolverMode,
    pub induction: FlowInduction,
    /// Evaluate the mixture after every iteration (costs one mixture
    /// rollout per training distribution per iteration).
    pub track_curve: bool,
}

impl Default for MasterConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            horizon: 30,
            mode: SolverMode::Exact,
            induction: FlowInduction::Bank,
            track_curve: true,
        }
    }
}

/// Per-iteration exploitability, per training distribution and averaged.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExploitabilityCurve {
    pub names: Vec<String>,
    /// `values[k][i]`: after iteration `k + 1`, distribution `i`.
    pub values: Vec<Vec<f64>>,
}

impl ExploitabilityCurve {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        check_len("curve row", self.names.len(), row.len())?;
        self.values.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn averages(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }

    /// `iteration,<name>...,average` with one row per iteration.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("iteration");
        for n in &self.names {
            s.push(',');
            s.push_str(&csv_field(n));
        }
        s.push_str(",average\n");
        for (k, (row, avg)) in self.values.iter().zip(self.averages()).enumerate() {
            write!(s, "{}", k + 1).unwrap();
            for v in row {
                write!(s, ",{v}").unwrap();
            }
            writeln!(s, ",{avg}").unwrap();
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Output of [`master_fictitious_play`]: the trained policies, the final
/// bank and the training history.
#[derive(Clone, Debug)]
pub struct MasterPolicyBundle {
    n_actions: usize,
    initial: UniformPolicy,
    policies: Vec<GreedyPolicy>,
    /// Whether the uniform initial policy counts as a mixture member.
    pub include_initial: bool,
    pub bank: AveragedFlowBank,
    /// Mixture of the trained policies only, after each iteration.
    pub curve: ExploitabilityCurve,
    /// Mixture including the initial policy, after each iteration.
    pub returned_curve: ExploitabilityCurve,
    pub fit_reports: Vec<FitReport>,
    pub zero_mu_input: bool,
}

pub const BUNDLE_FORMAT: &str = "mfg-master-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleManifest {
    format: String,
    version: u32,
    n_actions: usize,
    include_initial: bool,
    zero_mu_input: bool,
    networks: Vec<String>,
    bank: AveragedFlowBank,
    curve: ExploitabilityCurve,
    returned_curve: ExploitabilityCurve,
    fit_reports: Vec<FitReport>,
}

impl MasterPolicyBundle {
    /// Bundle without history, for evaluating hand-built policy lists.
    pub fn from_networks(networks: Vec<QNetwork>, bank: AveragedFlowBank) -> Result<Self> {
        let Some(first) = networks.first() else {
            return Err(MfgError::InvalidPolicy("empty bundle".into()));
        };
        let n_actions = first.spec().n_actions;
        let zero_mu_input = first.spec().zero_mu_input;
        let names = bank.names().to_vec();
        Ok(Self {
            n_actions,
            initial: UniformPolicy { n_actions },
            policies: networks.into_iter().map(GreedyPolicy::new).collect(),
            include_initial: true,
            bank,
            curve: ExploitabilityCurve::new(names.clone()),
            returned_curve: ExploitabilityCurve::new(names),
            fit_reports: Vec::new(),
            zero_mu_input,
        })
    }

    /// Number of trained policies.
    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn trained(&self) -> &[GreedyPolicy] {
        &self.policies
    }

    pub fn networks(&self) -> impl Iterator<Item = &QNetwork> {
        self.policies.iter().map(GreedyPolicy::network)
    }

    /// The uniform mixture's members, with the uniform initial policy first
    /// when `include_initial` is set.
    pub fn members(&self) -> Vec<&dyn PopulationPolicy> {
        let mut out: Vec<&dyn PopulationPolicy> = Vec::new();
        if self.include_initial {
            out.push(&self.initial);
        }
        out.extend(self.policies.iter().map(|p| p as &dyn PopulationPolicy));
        out
    }

    /// The first `k` trained policies, preceded by the initial policy when
    /// `with_initial` is set.
    fn prefix(&self, k: usize, with_initial: bool) -> Vec<&dyn PopulationPolicy> {
        let mut out: Vec<&dyn PopulationPolicy> = Vec::new();
        if with_initial {
            out.push(&self.initial);
        }
        out.extend(self.policies[..k].iter().map(|p| p as &dyn PopulationPolicy));
        out
    }

    /// Writes `bundle.json` plus one weight file per policy into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut networks = Vec::new();
        for (k, net) in self.networks().enumerate() {
            let name = format!("policy_{:03}.json", k + 1);
            net.save(&dir.join(&name))?;
            networks.push(name);
        }
        let manifest = BundleManifest {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            n_actions: self.n_actions,
            include_initial: self.include_initial,
            zero_mu_input: self.zero_mu_input,
            networks,
            bank: self.bank.clone(),
            curve: self.curve.clone(),
            returned_curve: self.returned_curve.clone(),
            fit_reports: self.fit_reports.clone(),
        };
        std::fs::write(dir.join("bundle.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("bundle.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| MfgError::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let m: BundleManifest = serde_json::from_str(&text)?;
        if m.format != BUNDLE_FORMAT || m.version != BUNDLE_VERSION {
            return Err(MfgError::InvalidConfig(format!(
                "unsupported bundle {} v{}",
                m.format, m.version
            )));
        }
        let policies = m
            .networks
            .iter()
            .map(|n| QNetwork::load(&dir.join(n)).map(GreedyPolicy::new))
            .collect::<Result<Vec<_>>>()?;
        if policies.is_empty() {
            return Err(MfgError::InvalidPolicy("empty bundle".into()));
        }
        Ok(Self {
            n_actions: m.n_actions,
            initial: UniformPolicy { n_actions: m.n_actions },
            policies,
            include_initial: m.include_initial,
            bank: m.bank,
            curve: m.curve,
            returned_curve: m.returned_curve,
            fit_reports: m.fit_reports,
            zero_mu_input: m.zero_mu_input,
        })
    }
}

/// Flow from `mu0` under `policy`, conditioned on and moving against
/// `reference` at every step.
pub fn flow_against(
    env: &dyn Environment,
    mu0: &Distribution,
    policy: &dyn PopulationPolicy,
    reference: &MFFlow,
    horizon: usize,
) -> Result<MFFlow> {
    crate::error::check_at_least("reference flow length", horizon + 1, reference.len())?;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut rho = mu0.clone();
    for n in 0..horizon {
        let mf = reference.get(n);
        let rule = policy.decision_rule(n, mf);
        check_policy(env, &rule)?;
        let next = push_forward(env, &rho, &rule, mf);
        states.push(std::mem::replace(&mut rho, next));
    }
    states.push(rho);
    MFFlow::new(states)
}

/// Mixture exploitability of `members` from each distribution of `set`.
pub fn mixture_exploitabilities(
    env: &dyn Environment,
    set: &DistributionSet,
    members: &[&dyn PopulationPolicy],
    horizon: usize,
) -> Result<Vec<f64>> {
    set.distributions()
        .into_iter()
        .map(|mu0| {
            let r = rollout_mixture(env, mu0, members, horizon)?;
            mixture_exploitability(env, mu0, &r, horizon)
        })
        .collect()
}

/// Uniform average over `set` of the bundle's mixture exploitability.
pub fn average_exploitability(
    env: &dyn Environment,
    set: &DistributionSet,
    bundle: &MasterPolicyBundle,
    horizon: usize,
) -> Result<f64> {
    let v = mixture_exploitabilities(env, set, &bundle.members(), horizon)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs `iterations` rounds of: learn a best response to every bank flow at
/// once, compute each training distribution's induced flow, and fold those
/// into the bank.
pub fn master_fictitious_play(
    env: &dyn Environment,
    set: &DistributionSet,
    cfg: &MasterConfig,
    rl: &RLConfig,
    seed: u64,
) -> Result<MasterPolicyBundle> {
    run_master(env, set, cfg, rl, seed, false)
}

/// The same pipeline with the population input of the Q-network zeroed.
pub fn solve_unconditioned(
    env: &dyn Environment,
    set: &DistributionSet,
    cfg: &MasterConfig,
    rl: &RLConfig,
    seed: u64,
) -> Result<MasterPolicyBundle> {
    run_master(env, set, cfg, rl, seed, true)
}

fn run_master(
    env: &dyn Environment,
    set: &DistributionSet,
    cfg: &MasterConfig,
    rl: &RLConfig,
    seed: u64,
    zero_mu_input: bool,
) -> Result<MasterPolicyBundle> {
    if cfg.iterations == 0 {
        return Err(MfgError::InvalidConfig("need at least one iteration".into()));
    }
    if set.is_empty() {
        return Err(MfgError::InvalidConfig("empty training set".into()));
    }
    check_len("training set states", env.n_states(), set.n_states())?;
    rl.validate()?;
    let seeds = SeedTree::new(seed);
    let mut bank = AveragedFlowBank::new(set, cfg.horizon);
    let mut bundle = MasterPolicyBundle {
        n_actions: env.n_actions(),
        initial: UniformPolicy {
            n_actions: env.n_actions(),
        },
        policies: Vec::with_capacity(cfg.iterations),
        include_initial: true,
        bank: bank.clone(),
        curve: ExploitabilityCurve::new(bank.names().to_vec()),
        returned_curve: ExploitabilityCurve::new(bank.names().to_vec()),
        fit_reports: Vec::new(),
        zero_mu_input,
    };
    let mut previous: Option<QNetwork> = None;
    for k in 1..=cfg.iterations {
        let rl_k = RLConfig {
            seed: seeds.seed(&format!("iteration-{k}")),
            ..rl.clone()
        };
        let net = match cfg.mode {
            SolverMode::Exact => {
                let warm = if rl.warm_start { previous.as_ref() } else { None };
                let (net, report) = fit_q_exact(env, &bank, &rl_k, zero_mu_input, warm)?;
                bundle.fit_reports.push(report);
                net
            }
            SolverMode::Dqn => train_dqn(env, &bank, &rl_k, zero_mu_input)?,
        };
        let policy = GreedyPolicy::new(net.clone());
        let induced = (0..bank.len())
            .map(|i| match cfg.induction {
                FlowInduction::Bank => flow_against(env, bank.initial(i), &policy, bank.flow(i), cfg.horizon),
                FlowInduction::SelfConsistent => {
                    induce_policy(&policy, env, bank.initial(i), cfg.horizon).map(|(_, f)| f)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        bank.update(&induced)?;
        bundle.policies.push(policy);
        previous = Some(net);
        if cfg.track_curve {
            let row = mixture_exploitabilities(env, set, &bundle.prefix(k, false), cfg.horizon)?;
            bundle.curve.push(row)?;
            let row = mixture_exploitabilities(env, set, &bundle.prefix(k, true), cfg.horizon)?;
            bundle.returned_curve.push(row)?;
        }
    }
    bundle.bank = bank;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_exploration_1d, Exploration1DConfig, SetKind};
    use crate::mfg::best_response;

    fn env(n: usize) -> impl Environment {
        make_exploration_1d(&Exploration1DConfig {
            size: n,
            ..Default::default()
        })
        .unwrap()
    }

    fn small_rl() -> RLConfig {
        RLConfig {
            hidden: Some(vec![32]),
            learning_rate: 3e-3,
            fit_max_steps: 1500,
            ..Default::default()
        }
    }

    #[test]
    fn single_iteration_reduces_to_best_response() {
        let env = env(5);
        let mu0 = Distribution::new(vec![0.5, 0.2, 0.1, 0.1, 0.1]).unwrap();
        let set = DistributionSet::from_distributions(SetKind::Training, vec![mu0.clone()]).unwrap();
        let cfg = MasterConfig {
            iterations: 1,
            horizon: 4,
            ..Default::default()
        };
        let bundle = master_fictitious_play(&env, &set, &cfg, &small_rl(), 1).unwrap();
        assert_eq!(bundle.len(), 1);
        let constant = MFFlow::constant(&mu0, 4);
        let (br, _) = best_response(&env, &constant, 4).unwrap();
        // The constant bank gives the same input at every step, so the
        // network sees one population; compare on the first step, where the
        // regression averages steps whose greedy actions agree.
        let rule = bundle.trained()[0].decision_rule(0, &mu0);
        let agree = (0..5).filter(|&x| rule.row(x) == br.step(0).row(x)).count();
        assert!(agree >= 4, "{agree}");
        assert_eq!(bundle.curve.len(), 1);
        assert!(bundle.curve.values[0][0] >= -1e-9);
        // The trained-only curve at one iteration is the plain exploitability
        // of the single greedy policy.
        let (reduced, _) = induce_policy(&bundle.trained()[0], &env, &mu0, 4).unwrap();
        let plain = crate::mfg::exploitability(&env, &mu0, &reduced, 4).unwrap();
        assert!((bundle.curve.values[0][0] - plain).abs() < 1e-9);
        assert!(bundle.returned_curve.values[0][0] >= -1e-9);
    }

    #[test]
    fn bank_is_average_of_induced_flows() {
        let env = env(4);
        let set = DistributionSet::from_distributions(
            SetKind::Training,
            vec![Distribution::dirac(4, 0), Distribution::uniform(4)],
        )
        .unwrap();
        let cfg = MasterConfig {
            iterations: 3,
            horizon: 3,
            ..Default::default()
        };
        let rl = RLConfig {
            fit_max_steps: 50,
            hidden: Some(vec![8]),
            ..Default::default()
        };
        let bundle = master_fictitious_play(&env, &set, &cfg, &rl, 2).unwrap();
        // Recompute the bank from scratch with the stored policies.
        let mut bank = AveragedFlowBank::new(&set, 3);
        let mut flows: Vec<Vec<MFFlow>> = vec![vec![bank.flow(0).clone()], vec![bank.flow(1).clone()]];
        for p in bundle.trained() {
            let induced: Vec<MFFlow> = (0..2)
                .map(|i| flow_against(&env, bank.initial(i), p, bank.flow(i), 3).unwrap())
                .collect();
            for i in 0..2 {
                flows[i].push(induced[i].clone());
            }
            bank.update(&induced).unwrap();
        }
        for i in 0..2 {
            let refs: Vec<&MFFlow> = flows[i].iter().collect();
            let avg = MFFlow::average(&refs).unwrap();
            for (a, b) in avg.states().iter().zip(bundle.bank.flow(i).states()) {
                assert!(a.l1_distance(b) < 1e-12);
            }
        }
    }

    #[test]
    fn unconditioned_ignores_population_and_is_deterministic() {
        let env = env(4);
        let set = DistributionSet::from_distributions(SetKind::Training, vec![Distribution::uniform(4)]).unwrap();
        let cfg = MasterConfig {
            iterations: 2,
            horizon: 3,
            ..Default::default()
        };
        let rl = RLConfig {
            fit_max_steps: 40,
            hidden: Some(vec![8]),
            ..Default::default()
        };
        let a = solve_unconditioned(&env, &set, &cfg, &rl, 5).unwrap();
        let b = solve_unconditioned(&env, &set, &cfg, &rl, 5).unwrap();
        for (x, y) in a.networks().zip(b.networks()) {
            assert_eq!(x, y);
            assert_eq!(
                x.q_values(1, &[1.0, 0.0, 0.0, 0.0]).unwrap(),
                x.q_values(1, &[0.1, 0.2, 0.3, 0.4]).unwrap()
            );
        }
    }

    #[test]
    fn dqn_mode_is_deterministic() {
        let env = env(3);
        let set = DistributionSet::from_distributions(SetKind::Training, vec![Distribution::uniform(3)]).unwrap();
        let cfg = MasterConfig {
            iterations: 2,
            horizon: 3,
            mode: SolverMode::Dqn,
            ..Default::default()
        };
        let rl = RLConfig {
            episodes: 30,
            hidden: Some(vec![8]),
            ..Default::default()
        };
        let a = master_fictitious_play(&env, &set, &cfg, &rl, 9).unwrap();
        let b = master_fictitious_play(&env, &set, &cfg, &rl, 9).unwrap();
        assert!(a.networks().eq(b.networks()));
        assert_eq!(a.bank, b.bank);
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn initial_policy_flag_controls_membership() {
        let env = env(3);
        let set = DistributionSet::from_distributions(SetKind::Training, vec![Distribution::uniform(3)]).unwrap();
        let cfg = MasterConfig {
            iterations: 1,
            horizon: 2,
            ..Default::default()
        };
        let rl = RLConfig {
            fit_max_steps: 10,
            hidden: Some(vec![4]),
            ..Default::default()
        };
        let mut bundle = master_fictitious_play(&env, &set, &cfg, &rl, 0).unwrap();
        assert_eq!(bundle.members().len(), 2);
        bundle.include_initial = false;
        assert_eq!(bundle.members().len(), 1);
        let u = UniformPolicy { n_actions: 3 };
        let only_uniform = mixture_exploitabilities(&env, &set, &[&u], 2).unwrap()[0];
        assert!(only_uniform >= -1e-9);
    }

    #[test]
    fn bundle_round_trips_through_a_directory() {
        let env = env(3);
        let set = DistributionSet::from_distributions(SetKind::Training, vec![Distribution::uniform(3)]).unwrap();
        let cfg = MasterConfig {
            iterations: 2,
            horizon: 2,
            ..Default::default()
        };
        let rl = RLConfig {
            fit_max_steps: 10,
            hidden: Some(vec![4]),
            ..Default::default()
        };
        let bundle = master_fictitious_play(&env, &set, &cfg, &rl, 0).unwrap();
        let dir = std::env::temp_dir().join(format!("mfg-bundle-{}", std::process::id()));
        bundle.save(&dir).unwrap();
        let back = MasterPolicyBundle::load(&dir).unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(back.networks().eq(bundle.networks()));
        assert_eq!(back.bank, bundle.bank);
        assert_eq!(back.curve, bundle.curve);
        let a = average_exploitability(&env, &set, &bundle, 2).unwrap();
        let b = average_exploitability(&env, &set, &back, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn curve_csv_layout() {
        let mut c = ExploitabilityCurve::new(vec!["a".into(), "b,c".into()]);
        c.push(vec![1.0, 3.0]).unwrap();
        assert_eq!(c.to_csv_string(), "iteration,a,\"b,c\",average\n1,1,3,2\n");
        assert!(c.push(vec![1.0]).is_err());
    }
}
