//! Horizon sweeps of SW-UCB on the lower-bound instance families.

use std::io::Write;

use nsbwk_core::algorithms::compute_regret;
use nsbwk_core::environments::{epoch_length_for_budget, Direction, LowerBoundSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{read_toml, parse_toml, InstanceSpec, OutputSpec, PolicyKind, PolicySpec, Variant};
use crate::error::{config_err, Result};
use crate::experiment::{mean_std, run_trial, TrialContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBoundKind {
    V1,
    V2,
    W,
}

fn default_arms() -> usize {
    2
}
fn default_rate() -> f64 {
    0.25
}
fn default_variation() -> f64 {
    1.0
}
fn default_trials() -> usize {
    50
}
fn default_instance_seed() -> u64 {
    1_000_000
}
fn default_reward() -> f64 {
    0.5
}
fn default_w_delta() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundConfig {
    pub name: String,
    pub kind: LowerBoundKind,
    #[serde(default = "default_arms")]
    pub arms: usize,
    /// Per-round budget of the V2 and W kinds.
    #[serde(default = "default_rate")]
    pub budget_rate: f64,
    /// Target variation budget; sets the epoch length of the V1 and V2 kinds.
    #[serde(default = "default_variation")]
    pub variation: f64,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_reward")]
    pub reward: f64,
    #[serde(default = "default_w_delta")]
    pub delta_reward: f64,
    #[serde(default = "default_w_delta")]
    pub delta_consumption: f64,
    pub horizons: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_instance_seed")]
    pub instance_seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

impl LowerBoundConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = parse_toml(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let c: Self = read_toml(path)?;
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.trials == 0 {
            return Err(config_err("need at least one horizon and one trial"));
        }
        if !(self.variation > 0.0) {
            return Err(config_err("variation must be positive"));
        }
        for &t in &self.horizons {
            self.spec(t).build(0).map_err(|e| config_err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn epoch(&self, horizon: usize) -> usize {
        epoch_length_for_budget(self.arms, self.variation, horizon)
    }

    pub fn spec(&self, horizon: usize) -> InstanceSpec {
        let epoch = self.epoch(horizon);
        let spec = match self.kind {
            LowerBoundKind::V1 => LowerBoundSpec::V1 { arms: self.arms, horizon, epoch, delta: self.delta },
            LowerBoundKind::V2 => {
                LowerBoundSpec::V2 { arms: self.arms, horizon, epoch, budget_rate: self.budget_rate, delta: self.delta }
            }
            LowerBoundKind::W => LowerBoundSpec::W {
                horizon,
                budget_rate: self.budget_rate,
                reward: self.reward,
                delta_reward: self.delta_reward,
                delta_consumption: self.delta_consumption,
                direction: None::<Direction>,
            },
        };
        InstanceSpec::LowerBound { spec, instance_seed: self.instance_seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub horizon: usize,
    pub epoch: usize,
    pub trial: usize,
    pub v1: f64,
    pub v2: f64,
    pub benchmark: f64,
    pub reward: f64,
    pub regret: f64,
    pub tau: usize,
    /// `T + 1 - tau`.
    pub shortfall: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub horizon: usize,
    pub epoch: usize,
    pub mean_v1: f64,
    pub mean_v2: f64,
    pub mean_regret: f64,
    pub mean_shortfall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundSweep {
    pub name: String,
    pub rows: Vec<LowerBoundRow>,
    pub summary: Vec<HorizonSummary>,
    /// Least-squares slope of log mean regret on log T.
    pub regret_slope: f64,
    /// Least-squares slope of log mean shortfall on log T.
    pub shortfall_slope: f64,
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// SW-UCB with the recommended windows of each drawn instance; trial `k`
/// draws its instance from `instance_seed + k` and plays with `seed + k`.
pub fn run_lower_bound_sweep(config: &LowerBoundConfig) -> Result<LowerBoundSweep> {
    let policy = PolicySpec {
        kind: PolicyKind::SwUcb { w1: None, w2: None, variant: Variant::Hoeffding, clamp_lcb: true },
        label: None,
    };
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &horizon in &config.horizons {
        let spec = config.spec(horizon);
        let epoch = config.epoch(horizon);
        let batch: Vec<LowerBoundRow> = (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                let ctx = TrialContext::new(spec.build(trial)?)?;
                let log = run_trial(&ctx, &policy, config.seed.wrapping_add(trial as u64))?;
                Ok(LowerBoundRow {
                    horizon,
                    epoch,
                    trial,
                    v1: ctx.v1,
                    v2: ctx.v2,
                    benchmark: ctx.dynamic_value,
                    reward: log.total_reward(),
                    regret: compute_regret(&log, ctx.dynamic_value),
                    tau: log.tau,
                    shortfall: horizon + 1 - log.tau,
                })
            })
            .collect::<Result<_>>()?;
        let col = |f: &dyn Fn(&LowerBoundRow) -> f64| mean_std(&batch.iter().map(f).collect::<Vec<_>>()).0;
        summary.push(HorizonSummary {
            horizon,
            epoch,
            mean_v1: col(&|r| r.v1),
            mean_v2: col(&|r| r.v2),
            mean_regret: col(&|r| r.regret),
            mean_shortfall: col(&|r| r.shortfall as f64),
        });
        rows.extend(batch);
    }
    let pts = |f: &dyn Fn(&HorizonSummary) -> f64| -> Vec<(f64, f64)> {
        summary.iter().map(|s| (s.horizon as f64, f(s))).collect()
    };
    let regret_slope = log_log_slope(&pts(&|s| s.mean_regret));
    let shortfall_slope = log_log_slope(&pts(&|s| s.mean_shortfall));
    Ok(LowerBoundSweep { name: config.name.clone(), rows, summary, regret_slope, shortfall_slope })
}

pub fn write_lower_bound_csv<W: Write>(sweep: &LowerBoundSweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["horizon", "epoch", "trial", "v1", "v2", "benchmark", "reward", "regret", "tau", "shortfall"])?;
    for r in &sweep.rows {
        w.write_record([
            r.horizon.to_string(),
            r.epoch.to_string(),
            r.trial.to_string(),
            format!("{}", r.v1),
            format!("{}", r.v2),
            format!("{}", r.benchmark),
            format!("{}", r.reward),
            format!("{}", r.regret),
            r.tau.to_string(),
            r.shortfall.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
