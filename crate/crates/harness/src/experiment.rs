//! Seeded multi-trial simulation and aggregation.

use nsbwk_core::algorithms::{
    compute_regret, default_windows, naive_ucb_config, run_lagrange_bwk_with, run_sw_ucb, ConfidenceVariant,
    LagrangeConfig, RunLog, SwUcbConfig,
};
use nsbwk_core::lp::{solve_dynamic_lp, solve_static_lp};
use nsbwk_core::measures::local_budgets;
use nsbwk_core::BwkInstance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, InstanceSpec, LagrangeBenchmark, PolicyKind, PolicySpec, Variant};
use crate::error::Result;

/// Per-trial instance data shared by all policies.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub instance: BwkInstance,
    pub dynamic_value: f64,
    pub static_value: f64,
    pub v1: f64,
    pub v2: f64,
}

impl TrialContext {
    pub fn new(instance: BwkInstance) -> Result<Self> {
        let dynamic_value = solve_dynamic_lp(&instance)?.value;
        let static_value = solve_static_lp(&instance)?.value;
        let (v1, _, v2) = local_budgets(&instance);
        Ok(Self { instance, dynamic_value, static_value, v1, v2 })
    }
}

/// Runs one policy on one trial with the policy RNG seeded by `seed`.
pub fn run_trial(ctx: &TrialContext, policy: &PolicySpec, seed: u64) -> Result<RunLog> {
    let inst = &ctx.instance;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = match &policy.kind {
        PolicyKind::SwUcb { w1, w2, variant, clamp_lcb } => {
            let (d1, d2) = default_windows(inst.num_arms(), inst.num_resources(), inst.horizon(), ctx.v1, ctx.v2);
            let variant = match variant {
                Variant::Hoeffding => ConfidenceVariant::Hoeffding,
                Variant::Rad => ConfidenceVariant::rad_default(inst, ctx.v2),
            };
            let cfg = SwUcbConfig { w1: w1.unwrap_or(d1), w2: w2.unwrap_or(d2), variant, clamp_lcb: *clamp_lcb };
            run_sw_ucb(inst, &cfg, &mut rng)?
        }
        PolicyKind::NaiveUcb => run_sw_ucb(inst, &naive_ucb_config(inst.horizon()), &mut rng)?,
        PolicyKind::Lagrange { benchmark, primal_rate, dual_rate } => {
            let value = match benchmark {
                LagrangeBenchmark::Static => ctx.static_value,
                LagrangeBenchmark::Dynamic => ctx.dynamic_value,
            };
            let cfg = LagrangeConfig { primal_rate: *primal_rate, dual_rate: *dual_rate };
            run_lagrange_bwk_with(inst, value, &cfg, &mut rng)?
        }
    };
    log.seed = Some(seed);
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

/// Downsampled trace of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub tau: usize,
    pub benchmark: f64,
    pub regret: f64,
    /// Recorded 1-based rounds.
    pub rounds: Vec<usize>,
    pub cum_reward: Vec<f64>,
    /// One row of `d` values per recorded round.
    pub cum_consumption: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub policy: String,
    pub sweep_value: Option<f64>,
    pub status: CellStatus,
    /// Mean dynamic LP value over trials.
    pub benchmark: f64,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_tau: f64,
    pub mean_regret: f64,
    pub std_regret: f64,
    /// Per-round mean and standard deviation of cumulative reward, full resolution.
    pub mean_curve: Vec<f64>,
    pub std_curve: Vec<f64>,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub experiment: String,
    pub num_resources: usize,
    pub sweep_parameter: Option<String>,
    pub cells: Vec<CellResult>,
}

impl AggregateTable {
    pub fn failed_cells(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| matches!(c.status, CellStatus::Failed(_)))
    }

    pub fn cell(&self, policy: &str, sweep_value: Option<f64>) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.policy == policy && c.sweep_value == sweep_value)
    }
}

/// Mean and sample standard deviation, accumulated in index order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn record_every(config: &ExperimentConfig, horizon: usize) -> usize {
    config.output.record_every.unwrap_or(if horizon >= 5000 { 10 } else { 1 })
}

fn recorded_rounds(horizon: usize, every: usize) -> Vec<usize> {
    let mut rounds: Vec<usize> = (1..=horizon).filter(|r| r % every == 0).collect();
    if rounds.last() != Some(&horizon) {
        rounds.push(horizon);
    }
    rounds
}

fn failed_cell(policy: String, sweep_value: Option<f64>, msg: String) -> CellResult {
    CellResult {
        policy,
        sweep_value,
        status: CellStatus::Failed(msg),
        benchmark: f64::NAN,
        mean_reward: f64::NAN,
        std_reward: f64::NAN,
        mean_tau: f64::NAN,
        mean_regret: f64::NAN,
        std_regret: f64::NAN,
        mean_curve: Vec::new(),
        std_curve: Vec::new(),
        trials: Vec::new(),
    }
}

fn contexts(spec: &InstanceSpec, trials: usize) -> Result<Vec<TrialContext>> {
    if spec.is_random() {
        (0..trials).into_par_iter().map(|t| TrialContext::new(spec.build(t)?)).collect()
    } else {
        Ok(vec![TrialContext::new(spec.build(0)?)?])
    }
}

/// Runs every (policy, sweep value) cell; trial `k` uses seed `seed + k`.
///
/// Solver failures mark the affected cell as failed and the run continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateTable> {
    config.validate()?;
    let mut cells = Vec::new();
    let mut num_resources = 0;
    for (sweep_value, spec) in config.cells()? {
        let ctxs = match contexts(&spec, config.trials) {
            Ok(c) => c,
            Err(e) => {
                for p in &config.policies {
                    cells.push(failed_cell(p.name(), sweep_value, e.to_string()));
                }
                continue;
            }
        };
        num_resources = ctxs[0].instance.num_resources();
        for policy in &config.policies {
            cells.push(run_cell(config, policy, sweep_value, &ctxs));
        }
    }
    Ok(AggregateTable {
        experiment: config.name.clone(),
        num_resources,
        sweep_parameter: config.sweep.as_ref().map(|s| s.parameter.clone()),
        cells,
    })
}

fn run_cell(config: &ExperimentConfig, policy: &PolicySpec, sweep_value: Option<f64>, ctxs: &[TrialContext]) -> CellResult {
    let outcomes: Vec<Result<(TrialRecord, Vec<f64>)>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let ctx = &ctxs[trial.min(ctxs.len() - 1)];
            let seed = config.seed.wrapping_add(trial as u64);
            let log = run_trial(ctx, policy, seed)?;
            let horizon = log.horizon();
            let rounds = recorded_rounds(horizon, record_every(config, horizon));
            let record = TrialRecord {
                trial,
                seed,
                tau: log.tau,
                benchmark: ctx.dynamic_value,
                regret: compute_regret(&log, ctx.dynamic_value),
                cum_reward: rounds.iter().map(|r| log.cumulative_reward[r - 1]).collect(),
                cum_consumption: rounds.iter().map(|r| log.cumulative_consumption_at(r - 1).to_vec()).collect(),
                rounds,
            };
            Ok((record, log.cumulative_reward))
        })
        .collect();
    let mut records = Vec::with_capacity(outcomes.len());
    let mut curves = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            Ok((r, c)) => {
                records.push(r);
                curves.push(c);
            }
            Err(e) => return failed_cell(policy.name(), sweep_value, e.to_string()),
        }
    }
    let horizon = curves[0].len();
    let (mut mean_curve, mut std_curve) = (Vec::with_capacity(horizon), Vec::with_capacity(horizon));
    let mut column = vec![0.0; curves.len()];
    for t in 0..horizon {
        for (slot, c) in column.iter_mut().zip(&curves) {
            *slot = c[t];
        }
        let (m, s) = mean_std(&column);
        mean_curve.push(m);
        std_curve.push(s);
    }
    let rewards: Vec<f64> = curves.iter().map(|c| c[horizon - 1]).collect();
    let regrets: Vec<f64> = records.iter().map(|r| r.regret).collect();
    let taus: Vec<f64> = records.iter().map(|r| r.tau as f64).collect();
    let benchmarks: Vec<f64> = records.iter().map(|r| r.benchmark).collect();
    let (mean_reward, std_reward) = mean_std(&rewards);
    let (mean_regret, std_regret) = mean_std(&regrets);
    CellResult {
        policy: policy.name(),
        sweep_value,
        status: CellStatus::Ok,
        benchmark: mean_std(&benchmarks).0,
        mean_reward,
        std_reward,
        mean_tau: mean_std(&taus).0,
        mean_regret,
        std_regret,
        mean_curve,
        std_curve,
        trials: records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    #[test]
    fn single_trial_matches_run_log() {
        let cfg = config(
            "name = \"m\"\ntrials = 1\nseed = 3\n[instance]\nbuilder = \"motivating\"\nhorizon = 300\ndelta = 0.2\ndirection = \"down\"\n[[policies]]\nkind = \"sw_ucb\"\n",
        );
        let table = run_experiment(&cfg).unwrap();
        let cell = &table.cells[0];
        let ctx = TrialContext::new(cfg.instance.build(0).unwrap()).unwrap();
        let log = run_trial(&ctx, &cfg.policies[0], 3).unwrap();
        assert_eq!(cell.mean_curve, log.cumulative_reward);
        assert!(cell.std_curve.iter().all(|s| *s == 0.0));
        assert_eq!(cell.mean_tau, log.tau as f64);
        assert_eq!(cell.mean_regret, ctx.dynamic_value - log.total_reward());
        assert_eq!(cell.trials[0].rounds.len(), 300);
    }

    #[test]
    fn downsampling_keeps_last_round() {
        assert_eq!(recorded_rounds(25, 10), vec![10, 20, 25]);
        assert_eq!(recorded_rounds(20, 10), vec![10, 20]);
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn regret_is_benchmark_minus_reward() {
        let cfg = config(
            "name = \"lb\"\ntrials = 4\n[instance]\nbuilder = \"lower_bound\"\n[instance.spec]\nkind = \"v2\"\narms = 2\nhorizon = 200\nepoch = 50\nbudget_rate = 0.25\n",
        );
        let table = run_experiment(&cfg).unwrap();
        for cell in &table.cells {
            assert_eq!(cell.status, CellStatus::Ok);
            for t in &cell.trials {
                assert_eq!(t.regret, t.benchmark - t.cum_reward.last().unwrap());
            }
        }
    }
}
