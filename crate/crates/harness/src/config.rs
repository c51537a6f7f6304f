//! TOML experiment configs.

use std::path::{Path, PathBuf};

use nsbwk_core::environments::{
    build_lower_bound_instance, build_motivating_instance, build_example, Direction, ExampleParams,
    LowerBoundSpec,
};
use nsbwk_core::{BwkInstance, OutcomeModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, HarnessError, Result};

fn default_trials() -> usize {
    100
}

fn default_instance_seed() -> u64 {
    1_000_000
}

fn default_true() -> bool {
    true
}

fn default_policies() -> Vec<PolicySpec> {
    vec![
        PolicySpec { kind: PolicyKind::SwUcb { w1: None, w2: None, variant: Variant::Hoeffding, clamp_lcb: true }, label: None },
        PolicySpec { kind: PolicyKind::NaiveUcb, label: None },
        PolicySpec {
            kind: PolicyKind::Lagrange { benchmark: LagrangeBenchmark::Static, primal_rate: None, dual_rate: None },
            label: None,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub instance: InstanceSpec,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum InstanceSpec {
    Example {
        id: u32,
        #[serde(flatten)]
        params: ExampleParams,
    },
    Motivating {
        horizon: usize,
        delta: f64,
        direction: Direction,
    },
    /// Drawn afresh for every trial from `instance_seed + trial`.
    LowerBound {
        spec: LowerBoundSpec,
        #[serde(default = "default_instance_seed")]
        instance_seed: u64,
    },
    /// Per-round means of the actual arms; the null arm is appended.
    Inline {
        budgets: Vec<f64>,
        rewards: Vec<Vec<f64>>,
        /// `T x d x (m - 1)`.
        consumption: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        outcome_model: OutcomeModel,
    },
}

impl InstanceSpec {
    /// Whether each trial draws its own instance.
    pub fn is_random(&self) -> bool {
        matches!(self, InstanceSpec::LowerBound { .. })
    }

    pub fn build(&self, trial: usize) -> Result<BwkInstance> {
        let inst = match self {
            InstanceSpec::Example { id, params } => build_example(*id, params)?,
            InstanceSpec::Motivating { horizon, delta, direction } => {
                build_motivating_instance(*horizon, *delta, *direction)?
            }
            InstanceSpec::LowerBound { spec, instance_seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(instance_seed.wrapping_add(trial as u64));
                build_lower_bound_instance(spec, &mut rng)?
            }
            InstanceSpec::Inline { budgets, rewards, consumption, outcome_model } => {
                BwkInstance::from_rounds(budgets.clone(), rewards, consumption, *outcome_model, "inline")?
            }
        };
        Ok(inst)
    }

    /// Copy with one numeric parameter replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        let mut out = self.clone();
        let bad = || config_err(format!("sweep parameter `{name}` is not valid for this instance builder"));
        match &mut out {
            InstanceSpec::Example { params, .. } => match name {
                "alpha" => params.alpha = value,
                "periods" => params.periods = as_count(name, value)?,
                "horizon" => params.horizon = as_count(name, value)?,
                _ => return Err(bad()),
            },
            InstanceSpec::Motivating { horizon, delta, .. } => match name {
                "delta" => *delta = value,
                "horizon" => *horizon = as_count(name, value)?,
                _ => return Err(bad()),
            },
            InstanceSpec::LowerBound { spec, .. } => match (spec, name) {
                (LowerBoundSpec::V1 { horizon, .. }, "horizon")
                | (LowerBoundSpec::V2 { horizon, .. }, "horizon")
                | (LowerBoundSpec::W { horizon, .. }, "horizon") => *horizon = as_count(name, value)?,
                (LowerBoundSpec::V1 { epoch, .. }, "epoch") | (LowerBoundSpec::V2 { epoch, .. }, "epoch") => {
                    *epoch = as_count(name, value)?
                }
                (LowerBoundSpec::V1 { delta, .. }, "delta") | (LowerBoundSpec::V2 { delta, .. }, "delta") => {
                    *delta = Some(value)
                }
                (LowerBoundSpec::V2 { budget_rate, .. }, "budget_rate")
                | (LowerBoundSpec::W { budget_rate, .. }, "budget_rate") => *budget_rate = value,
                _ => return Err(bad()),
            },
            InstanceSpec::Inline { .. } => return Err(bad()),
        }
        Ok(out)
    }
}

fn as_count(name: &str, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value < 1e15 {
        Ok(value as usize)
    } else {
        Err(config_err(format!("sweep parameter `{name}` needs positive integers, got {value}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    #[serde(flatten)]
    pub kind: PolicyKind,
    /// Name in outputs; defaults to the kind.
    #[serde(default)]
    pub label: Option<String>,
}

impl PolicySpec {
    pub fn name(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.kind {
            PolicyKind::SwUcb { .. } => "sw_ucb",
            PolicyKind::NaiveUcb => "naive_ucb",
            PolicyKind::Lagrange { .. } => "lagrange",
        }
        .into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    /// Windows default to the recommended sizes computed from the instance's V1 and V2.
    SwUcb {
        #[serde(default)]
        w1: Option<usize>,
        #[serde(default)]
        w2: Option<usize>,
        #[serde(default)]
        variant: Variant,
        #[serde(default = "default_true")]
        clamp_lcb: bool,
    },
    NaiveUcb,
    Lagrange {
        #[serde(default)]
        benchmark: LagrangeBenchmark,
        #[serde(default)]
        primal_rate: Option<f64>,
        #[serde(default)]
        dual_rate: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Hoeffding,
    Rad,
}

/// Value estimate handed to LagrangeBwK.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagrangeBenchmark {
    #[default]
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Svg,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn svg(self) -> bool {
        matches!(self, OutputFormat::Svg | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Rounds between CSV rows; defaults to 10 when `T >= 5000`, else 1.
    #[serde(default)]
    pub record_every: Option<usize>,
}

/// Parses TOML; errors carry the line and column.
pub fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| config_err(e.to_string()))
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    parse_toml(&text).map_err(|e| match e {
        HarnessError::Config(msg) => config_err(format!("{}: {msg}", path.display())),
        other => other,
    })
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_toml(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Instance specs of every sweep cell, paired with the sweep value.
    pub fn cells(&self) -> Result<Vec<(Option<f64>, InstanceSpec)>> {
        match &self.sweep {
            None => Ok(vec![(None, self.instance.clone())]),
            Some(s) => s.values.iter().map(|&v| Ok((Some(v), self.instance.with_parameter(&s.parameter, v)?))).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(config_err("at least one policy is required"));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(config_err("name must be non-empty and contain no path separators"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(config_err("sweep needs at least one value"));
            }
        }
        for (_, spec) in self.cells()? {
            spec.build(0).map_err(|e| match e {
                HarnessError::Solver(err) => config_err(err.to_string()),
                other => other,
            })?;
        }
        for p in &self.policies {
            if let PolicyKind::SwUcb { w1: Some(0), .. } | PolicyKind::SwUcb { w2: Some(0), .. } = p.kind {
                return Err(config_err("window sizes must be at least 1"));
            }
        }
        let mut names: Vec<String> = self.policies.iter().map(PolicySpec::name).collect();
        names.sort();
        names.dedup();
        if names.len() != self.policies.len() {
            return Err(config_err("policy names must be unique; set `label` to disambiguate"));
        }
        if self.output.record_every == Some(0) {
            return Err(config_err("record_every must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = ExperimentConfig::from_toml(
            r#"
name = "ex3"
trials = 5
seed = 7

[instance]
builder = "example"
id = 3
horizon = 200
outcome_model = "bernoulli"

[[policies]]
kind = "sw_ucb"
w1 = 50

[[policies]]
kind = "lagrange"
benchmark = "dynamic"

[sweep]
parameter = "alpha"
values = [0.25, 0.5]

[output]
format = "csv"
"#,
        )
        .unwrap();
        assert_eq!(cfg.trials, 5);
        assert_eq!(cfg.policies[0].name(), "sw_ucb");
        let cells = cfg.cells().unwrap();
        let InstanceSpec::Example { params, .. } = &cells[1].1 else { panic!() };
        assert_eq!(params.alpha, 0.5);
        assert_eq!(params.outcome_model, OutcomeModel::Bernoulli);
        assert_eq!(params.periods, ExampleParams::default().periods);
    }

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::from_toml("name = \"m\"\n[instance]\nbuilder = \"motivating\"\nhorizon = 100\ndelta = 0.2\ndirection = \"up\"\n").unwrap();
        assert_eq!(cfg.trials, 100);
        assert_eq!(cfg.policies.len(), 3);
        assert_eq!(cfg.output.format, OutputFormat::Both);
    }

    #[test]
    fn lower_bound_and_inline_builders() {
        let cfg = ExperimentConfig::from_toml(
            "name = \"lb\"\n[instance]\nbuilder = \"lower_bound\"\n[instance.spec]\nkind = \"v1\"\narms = 2\nhorizon = 100\nepoch = 25\n",
        )
        .unwrap();
        assert!(cfg.instance.is_random());
        assert_ne!(cfg.instance.build(0).unwrap(), cfg.instance.build(1).unwrap());
        let cfg = ExperimentConfig::from_toml(
            "name = \"i\"\n[instance]\nbuilder = \"inline\"\nbudgets = [1.0]\nrewards = [[0.5], [0.7]]\nconsumption = [[[1.0]], [[0.5]]]\n",
        )
        .unwrap();
        assert_eq!(cfg.instance.build(0).unwrap().num_arms(), 2);
    }

    #[test]
    fn errors_name_the_line() {
        let err = ExperimentConfig::from_toml("name = \"x\"\ntrials = \"many\"\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn rejects_invalid_configs() {
        let base = "name = \"x\"\n[instance]\nbuilder = \"example\"\nid = 4\nhorizon = 1000\n";
        assert!(ExperimentConfig::from_toml(&format!("trials = 0\n{base}")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{base}[sweep]\nparameter = \"periods\"\nvalues = [3.0]\n")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{base}[sweep]\nparameter = \"delta\"\nvalues = [0.1]\n")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{base}[[policies]]\nkind = \"bogus\"\n")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{base}[[policies]]\nkind = \"naive_ucb\"\n[[policies]]\nkind = \"naive_ucb\"\n")).is_err());
        assert!(ExperimentConfig::from_toml("name = \"x\"\n[instance]\nbuilder = \"example\"\nid = 9\n").is_err());
    }
}
