//! The five verbs. Each reads the config and earlier outputs under `--out`
//! and writes one fresh subdirectory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mfg_core::envs::{check_monotonicity, DistributionSet, NegatedMeanFieldReward};
use mfg_core::fp::{
    master_fictitious_play, rollout_mixture, solve_specialized_fp, solve_unconditioned, ExploitabilityCurve,
    MasterPolicyBundle, SpecializedSolution,
};
use mfg_core::metrics::{run_benchmark, Benchmark, BenchmarkInputs, PerformanceMatrix, ROW_MASTER, ROW_UNCONDITIONED};
use mfg_core::qlearn::{gradient_check_scaled, QNetwork};
use mfg_core::verify::oracle_equivalence;
use mfg_core::{Environment, MFFlow};
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig};
use crate::run_dir::{verify_manifest, RunDir, MANIFEST_FILE};

pub const EXACT_DIR: &str = "exact";
pub const MASTER_DIR: &str = "master";
pub const BENCHMARK_DIR: &str = "benchmark";
pub const VERIFY_DIR: &str = "verify";
pub const EXPORT_DIR: &str = "export";

/// Gradient check threshold on the relative error.
const GRAD_TOL: f64 = 1e-5;
const GRAD_PROBES: usize = 40;
/// Analytic-gradient factor used by the tampered-gradient injection.
const GRAD_TAMPER: f64 = 1.01;
const MONOTONICITY_PAIRS: usize = 1000;
const ORACLE_GAMES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Injection {
    SignFlippedReward,
    TamperedGradient,
}

#[derive(Serialize, Deserialize)]
struct Sets {
    training: DistributionSet,
    testing: DistributionSet,
}

fn require(path: &Path, producer: &str) -> Result<PathBuf> {
    if !path.exists() {
        bail!("missing prerequisite artifact {}; run `mfg {producer}` first", path.display());
    }
    Ok(path.to_path_buf())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Verifies the manifest of an earlier command and that it ran on the same
/// game, seed and distribution sets.
fn check_prior(dir: &Path, producer: &str, cfg: &ExperimentConfig, files: &[&str]) -> Result<()> {
    require(&dir.join(MANIFEST_FILE), producer)?;
    for f in files {
        require(&dir.join(f), producer)?;
    }
    let prior = verify_manifest(dir)?.config;
    if prior.environment != cfg.environment
        || prior.seed != cfg.seed
        || prior.sets != cfg.sets
        || prior.fp.horizon != cfg.fp.horizon
    {
        bail!(
            "{} was produced with a different environment, seed, sets or horizon",
            dir.display()
        );
    }
    Ok(())
}

fn specialized_curve(set: &DistributionSet, sols: &[SpecializedSolution]) -> Result<ExploitabilityCurve> {
    let mut curve = ExploitabilityCurve::new(set.names().into_iter().map(String::from).collect());
    let iterations = sols.first().map_or(0, |s| s.curve.len());
    for k in 0..iterations {
        curve.push(sols.iter().map(|s| s.curve[k]).collect())?;
    }
    Ok(curve)
}

pub fn solve_exact(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let exp = cfg.build()?;
    let mut run = RunDir::create(out.join(EXACT_DIR), "solve-exact", cfg)?;
    run.write_json(
        "sets.json",
        &Sets {
            training: exp.training.clone(),
            testing: exp.testing.clone(),
        },
    )?;
    for (label, set) in [("training", &exp.training), ("testing", &exp.testing)] {
        let sols = run.timed(&format!("specialized_{label}"), || {
            set.distributions()
                .into_iter()
                .map(|mu0| Ok(solve_specialized_fp(&exp.env, mu0, cfg.fp.specialized_iterations, exp.horizon)?))
                .collect::<Result<Vec<_>>>()
        })?;
        run.write_json(&format!("specialized_{label}.json"), &sols)?;
        run.write(&format!("curves_{label}.csv"), specialized_curve(set, &sols)?.to_csv_string())?;
        println!("solved {} {label} equilibria", sols.len());
    }
    let m = run.finish()?;
    println!("wrote {} artifacts to {}", m.artifacts.len(), out.join(EXACT_DIR).display());
    Ok(())
}

pub fn train_master(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let exp = cfg.build()?;
    let mc = cfg.master_config(exp.horizon);
    let seed = exp.seeds.seed("train-master");
    let mut run = RunDir::create(out.join(MASTER_DIR), "train-master", cfg)?;
    let master = run.timed("master", || {
        Ok(master_fictitious_play(&exp.env, &exp.training, &mc, &cfg.rl, seed)?)
    })?;
    run.write_dir("master", |d| Ok(master.save(d)?))?;
    run.write("master_curve.csv", master.curve.to_csv_string())?;
    run.write("master_returned_curve.csv", master.returned_curve.to_csv_string())?;
    let unconditioned = run.timed("unconditioned", || {
        Ok(solve_unconditioned(&exp.env, &exp.training, &mc, &cfg.rl, seed)?)
    })?;
    run.write_dir("unconditioned", |d| Ok(unconditioned.save(d)?))?;
    run.write("unconditioned_curve.csv", unconditioned.curve.to_csv_string())?;
    for (label, b) in [("master", &master), ("unconditioned", &unconditioned)] {
        if let Some(last) = b.curve.averages().last() {
            println!("{label}: mean training exploitability {last:.6} after {} iterations", b.curve.len());
        }
    }
    run.finish()?;
    Ok(())
}

struct Prior {
    specialized_training: Vec<SpecializedSolution>,
    specialized_testing: Vec<SpecializedSolution>,
    master: MasterPolicyBundle,
    unconditioned: MasterPolicyBundle,
}

fn load_prior(cfg: &ExperimentConfig, exp: &Experiment, out: &Path) -> Result<Prior> {
    let exact = out.join(EXACT_DIR);
    check_prior(
        &exact,
        "solve-exact",
        cfg,
        &["sets.json", "specialized_training.json", "specialized_testing.json"],
    )?;
    let sets: Sets = read_json(&exact.join("sets.json"))?;
    if sets.training != exp.training || sets.testing != exp.testing {
        bail!("{} does not match the configured sets", exact.join("sets.json").display());
    }
    let master_dir = out.join(MASTER_DIR);
    check_prior(
        &master_dir,
        "train-master",
        cfg,
        &["master/bundle.json", "unconditioned/bundle.json"],
    )?;
    Ok(Prior {
        specialized_training: read_json(&exact.join("specialized_training.json"))?,
        specialized_testing: read_json(&exact.join("specialized_testing.json"))?,
        master: MasterPolicyBundle::load(&master_dir.join("master"))?,
        unconditioned: MasterPolicyBundle::load(&master_dir.join("unconditioned"))?,
    })
}

#[derive(Serialize)]
struct RowSummary {
    label: String,
    mean_e_training: f64,
    mean_e_testing: f64,
    mean_w_training: f64,
    mean_w_testing: f64,
}

#[derive(Serialize)]
struct BenchmarkSummary {
    rows: Vec<RowSummary>,
    /// Largest distance of a specialized row from its own column.
    max_diagonal_w: f64,
    master_beats_unconditioned_on_training: bool,
}

fn summarize(b: &Benchmark) -> Result<BenchmarkSummary> {
    let (train, test) = (b.training_columns(), b.testing_columns());
    let rows = b
        .e
        .rows
        .iter()
        .enumerate()
        .map(|(r, label)| RowSummary {
            label: label.clone(),
            mean_e_training: b.e.row_mean(r, &train),
            mean_e_testing: b.e.row_mean(r, &test),
            mean_w_training: b.w.row_mean(r, &train),
            mean_w_testing: b.w.row_mean(r, &test),
        })
        .collect();
    let max_diagonal_w = b
        .specialized_rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| b.w.get(r, i))
        .fold(0.0, f64::max);
    let master = b.e.row_mean(b.row(ROW_MASTER)?, &train);
    let unconditioned = b.e.row_mean(b.row(ROW_UNCONDITIONED)?, &train);
    Ok(BenchmarkSummary {
        rows,
        max_diagonal_w,
        master_beats_unconditioned_on_training: master < unconditioned,
    })
}

fn write_matrix(run: &mut RunDir, stem: &str, m: &PerformanceMatrix) -> Result<()> {
    run.write(&format!("{stem}.csv"), m.to_csv_string()?)?;
    run.write_json(&format!("{stem}.json"), m)?;
    let log = m.to_log10();
    run.write(&format!("{stem}_log10.csv"), log.to_csv_string()?)?;
    run.write_json(&format!("{stem}_log10.json"), &log)
}

pub fn benchmark(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let exp = cfg.build()?;
    let prior = load_prior(cfg, &exp, out)?;
    let mut run = RunDir::create(out.join(BENCHMARK_DIR), "benchmark", cfg)?;
    let inputs = BenchmarkInputs {
        training: &exp.training,
        testing: &exp.testing,
        specialized_training: &prior.specialized_training,
        specialized_testing: &prior.specialized_testing,
        master: &prior.master,
        unconditioned: &prior.unconditioned,
    };
    let b = run.timed("benchmark", || Ok(run_benchmark(&exp.env, &inputs, exp.horizon, &exp.metric)?))?;
    write_matrix(&mut run, "w", &b.w)?;
    write_matrix(&mut run, "e", &b.e)?;
    let summary = summarize(&b)?;
    for r in &summary.rows {
        println!(
            "{:<32} E train {:>10.4} test {:>10.4}   W train {:>8.4} test {:>8.4}",
            r.label, r.mean_e_training, r.mean_e_testing, r.mean_w_training, r.mean_w_testing
        );
    }
    run.write_json("summary.json", &summary)?;
    run.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct CheckResult {
    name: &'static str,
    passed: bool,
    detail: serde_json::Value,
}

/// Runs every self-check and reports whether all passed.
pub fn verify(cfg: &ExperimentConfig, out: Option<&Path>, inject: Option<Injection>) -> Result<bool> {
    let exp = cfg.build()?;
    let mut checks = Vec::new();

    let flipped;
    let env: &dyn Environment = if inject == Some(Injection::SignFlippedReward) {
        flipped = NegatedMeanFieldReward(exp.env.clone());
        &flipped
    } else {
        &exp.env
    };
    let mono = check_monotonicity(env, MONOTONICITY_PAIRS, exp.seeds.seed("monotonicity"));
    checks.push(CheckResult {
        name: "monotonicity",
        passed: mono.passed(),
        detail: serde_json::to_value(&mono)?,
    });

    let spec = cfg.rl.network_spec(&exp.env, false)?;
    let net = QNetwork::init(spec, &mut exp.seeds.rng("init"))?;
    let tamper = if inject == Some(Injection::TamperedGradient) {
        GRAD_TAMPER
    } else {
        1.0
    };
    let grad = gradient_check_scaled(&net, GRAD_PROBES, exp.seeds.seed("gradient-check"), tamper);
    checks.push(CheckResult {
        name: "gradient_check",
        passed: grad.max_rel_err <= GRAD_TOL && grad.skipped < grad.probes,
        detail: serde_json::to_value(grad)?,
    });

    let oracle = oracle_equivalence(ORACLE_GAMES, exp.seeds.seed("oracle"))?;
    checks.push(CheckResult {
        name: "oracle_equivalence",
        passed: oracle.passed(1e-12, 1e-9),
        detail: serde_json::to_value(&oracle)?,
    });

    for c in &checks {
        println!("check {}: {} {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    let all = checks.iter().all(|c| c.passed);
    if let Some(out) = out {
        let mut run = RunDir::create(out.join(VERIFY_DIR), "verify", cfg)?;
        run.write_json("report.json", &checks)?;
        run.finish()?;
    }
    Ok(all)
}

fn flows_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str, &'a MFFlow)>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["set", "name", "step", "state", "mass"])?;
    for (set, name, flow) in rows {
        for (n, mu) in flow.states().iter().enumerate() {
            for (x, m) in mu.probs().iter().enumerate() {
                w.write_record([set, name, &n.to_string(), &x.to_string(), &m.to_string()])?;
            }
        }
    }
    Ok(w.into_inner()?)
}

fn mixture_flows(exp: &Experiment, bundle: &MasterPolicyBundle) -> Result<Vec<MFFlow>> {
    let members = bundle.members();
    exp.training
        .distributions()
        .into_iter()
        .chain(exp.testing.distributions())
        .map(|mu0| Ok(rollout_mixture(&exp.env, mu0, &members, exp.horizon)?.average))
        .collect()
}

/// Long-format flow tables for plotting.
pub fn export(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let exp = cfg.build()?;
    let prior = load_prior(cfg, &exp, out)?;
    let mut run = RunDir::create(out.join(EXPORT_DIR), "export", cfg)?;
    let labels: Vec<(&str, &str)> = exp
        .training
        .names()
        .into_iter()
        .map(|n| ("training", n))
        .chain(exp.testing.names().into_iter().map(|n| ("testing", n)))
        .collect();
    let equilibria: Vec<&MFFlow> = prior
        .specialized_training
        .iter()
        .chain(&prior.specialized_testing)
        .map(|s| &s.flow)
        .collect();
    let rows = labels.iter().zip(&equilibria).map(|(&(s, n), f)| (s, n, *f));
    run.write("equilibrium_flows.csv", flows_csv(rows)?)?;
    for (label, bundle) in [("master", &prior.master), ("unconditioned", &prior.unconditioned)] {
        let flows = run.timed(&format!("{label}_rollouts"), || mixture_flows(&exp, bundle))?;
        let rows = labels.iter().zip(&flows).map(|(&(s, n), f)| (s, n, f));
        run.write(&format!("{label}_flows.csv"), flows_csv(rows)?)?;
    }
    run.finish()?;
    println!("exported flows to {}", out.join(EXPORT_DIR).display());
    Ok(())
}
