//! The non-stationary BwK problem description.
//!
//! Rounds are indexed from 0 in this API. Arms are indexed `0..m` and the last
//! arm `m - 1` is always the null arm (zero reward, zero consumption). The
//! consumption matrix of a round is stored row-major as `C[j][i]` with resource
//! rows `j` and arm columns `i`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// How realized outcomes are generated from the stored means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeModel {
    /// Realized outcomes equal the means.
    #[default]
    Deterministic,
    /// Every reward and consumption entry is an independent Bernoulli draw.
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BwkInstance {
    horizon: usize,
    num_arms: usize,
    num_resources: usize,
    budgets: Vec<f64>,
    /// `horizon x num_arms`, row-major.
    rewards: Vec<f64>,
    /// `horizon x num_resources x num_arms`, row-major.
    consumption: Vec<f64>,
    #[serde(default)]
    outcome_model: OutcomeModel,
    #[serde(default)]
    label: String,
}

/// Realized reward vector and consumption matrix of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSample {
    pub rewards: Vec<f64>,
    /// `d x m`, row-major.
    pub consumptions: Vec<f64>,
}

impl OutcomeSample {
    pub fn consumption(&self, resource: usize, arm: usize) -> f64 {
        let m = self.rewards.len();
        self.consumptions[resource * m + arm]
    }
}

/// Rounds with bit-identical means, grouped in order of first appearance.
#[derive(Debug, Clone)]
pub struct RoundGroups {
    /// Group index of every round.
    pub group_of: Vec<usize>,
    /// First round of every group.
    pub representative: Vec<usize>,
    /// Number of rounds in every group.
    pub counts: Vec<usize>,
}

impl RoundGroups {
    pub fn len(&self) -> usize {
        self.representative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representative.is_empty()
    }
}

impl BwkInstance {
    /// Builds an instance from explicit mean tensors.
    ///
    /// `rewards` is `T x m` and `consumption` is `T x d x m`, both row-major.
    /// The last arm must be the null arm.
    pub fn new(
        budgets: Vec<f64>,
        num_arms: usize,
        rewards: Vec<f64>,
        consumption: Vec<f64>,
        outcome_model: OutcomeModel,
        label: impl Into<String>,
    ) -> Result<Self> {
        let inst = Self {
            horizon: if num_arms == 0 {
                0
            } else {
                rewards.len() / num_arms
            },
            num_arms,
            num_resources: budgets.len(),
            budgets,
            rewards,
            consumption,
            outcome_model,
            label: label.into(),
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Builds an instance from per-round reward vectors and consumption
    /// matrices, appending the null arm.
    pub fn from_rounds(
        budgets: Vec<f64>,
        rewards: &[Vec<f64>],
        consumption: &[Vec<Vec<f64>>],
        outcome_model: OutcomeModel,
        label: impl Into<String>,
    ) -> Result<Self> {
        if rewards.is_empty() || rewards.len() != consumption.len() {
            return Err(invalid(
                "reward and consumption sequences must be non-empty and of equal length",
            ));
        }
        let actual = rewards[0].len();
        let m = actual + 1;
        let d = budgets.len();
        let t_len = rewards.len();
        let mut mus = Vec::with_capacity(t_len * m);
        let mut cs = Vec::with_capacity(t_len * d * m);
        for (mu, c) in rewards.iter().zip(consumption) {
            if mu.len() != actual || c.len() != d || c.iter().any(|row| row.len() != actual) {
                return Err(invalid("inconsistent per-round dimensions"));
            }
            mus.extend_from_slice(mu);
            mus.push(0.0);
            for row in c {
                cs.extend_from_slice(row);
                cs.push(0.0);
            }
        }
        Self::new(budgets, m, mus, cs, outcome_model, label)
    }

    /// Checks dimensions, ranges and the null-arm convention.
    pub fn validate(&self) -> Result<()> {
        let (t, m, d) = (self.horizon, self.num_arms, self.num_resources);
        if t == 0 || m == 0 {
            return Err(invalid("instance needs at least one round and one arm"));
        }
        if d == 0 {
            return Err(invalid("instance needs at least one resource"));
        }
        if self.rewards.len() != t * m || self.consumption.len() != t * d * m {
            return Err(invalid(format!(
                "tensor sizes do not match T={t}, m={m}, d={d}"
            )));
        }
        if self.budgets.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(invalid("budgets must be finite and nonnegative"));
        }
        let in_unit = |v: &f64| v.is_finite() && (0.0..=1.0).contains(v);
        if !self.rewards.iter().all(in_unit) || !self.consumption.iter().all(in_unit) {
            return Err(invalid(
                "expected rewards and consumptions must lie in [0, 1]",
            ));
        }
        for round in 0..t {
            let null = m - 1;
            if self.mu(round)[null] != 0.0 || (0..d).any(|j| self.c(round, j, null) != 0.0) {
                return Err(invalid(format!(
                    "arm {null} is not a null arm at round {round}"
                )));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of arms including the null arm.
    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn null_arm(&self) -> usize {
        self.num_arms - 1
    }

    pub fn num_resources(&self) -> usize {
        self.num_resources
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    /// Per-round budget `b = B / T`.
    pub fn per_round_budget(&self) -> Vec<f64> {
        self.budgets
            .iter()
            .map(|b| b / self.horizon as f64)
            .collect()
    }

    pub fn outcome_model(&self) -> OutcomeModel {
        self.outcome_model
    }

    pub fn with_outcome_model(mut self, model: OutcomeModel) -> Self {
        self.outcome_model = model;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Copy with every budget replaced.
    pub fn with_budgets(&self, budgets: Vec<f64>) -> Result<Self> {
        if budgets.len() != self.num_resources {
            return Err(invalid("budget vector has the wrong length"));
        }
        let mut out = self.clone();
        out.budgets = budgets;
        out.validate()?;
        Ok(out)
    }

    /// Expected reward vector of a round.
    pub fn mu(&self, round: usize) -> &[f64] {
        let m = self.num_arms;
        &self.rewards[round * m..(round + 1) * m]
    }

    /// Expected consumption matrix of a round, `d x m` row-major.
    pub fn c_matrix(&self, round: usize) -> &[f64] {
        let dm = self.num_resources * self.num_arms;
        &self.consumption[round * dm..(round + 1) * dm]
    }

    pub fn c(&self, round: usize, resource: usize, arm: usize) -> f64 {
        self.consumption[(round * self.num_resources + resource) * self.num_arms + arm]
    }

    pub fn check_round(&self, round: usize) -> Result<()> {
        if round >= self.horizon {
            return Err(Error::RoundOutOfRange {
                round,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Time-averaged reward vector and consumption matrix.
    ///
    /// Accumulated per group of identical rounds; a stationary instance
    /// returns its means exactly.
    pub fn averages(&self) -> (Vec<f64>, Vec<f64>) {
        let groups = self.round_groups();
        if groups.len() == 1 {
            return (self.mu(0).to_vec(), self.c_matrix(0).to_vec());
        }
        let t = self.horizon as f64;
        let mut mu_bar = vec![0.0; self.num_arms];
        let mut c_bar = vec![0.0; self.num_arms * self.num_resources];
        for (g, &round) in groups.representative.iter().enumerate() {
            let n = groups.counts[g] as f64;
            for (acc, v) in mu_bar.iter_mut().zip(self.mu(round)) {
                *acc += n * v;
            }
            for (acc, v) in c_bar.iter_mut().zip(self.c_matrix(round)) {
                *acc += n * v;
            }
        }
        mu_bar.iter_mut().for_each(|v| *v /= t);
        c_bar.iter_mut().for_each(|v| *v /= t);
        (mu_bar, c_bar)
    }

    /// Groups rounds whose means are bit-identical.
    pub fn round_groups(&self) -> RoundGroups {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut groups = RoundGroups {
            group_of: Vec::with_capacity(self.horizon),
            representative: Vec::new(),
            counts: Vec::new(),
        };
        for round in 0..self.horizon {
            let key: Vec<u64> = self
                .mu(round)
                .iter()
                .chain(self.c_matrix(round))
                .map(|v| v.to_bits())
                .collect();
            let next = groups.representative.len();
            let g = *index.entry(key).or_insert(next);
            if g == next {
                groups.representative.push(round);
                groups.counts.push(0);
            }
            groups.counts[g] += 1;
            groups.group_of.push(g);
        }
        groups
    }

    /// Copy with the order of rounds reversed.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        let m = self.num_arms;
        let dm = self.num_arms * self.num_resources;
        for (k, round) in (0..self.horizon).rev().enumerate() {
            out.rewards[k * m..(k + 1) * m].copy_from_slice(self.mu(round));
            out.consumption[k * dm..(k + 1) * dm].copy_from_slice(self.c_matrix(round));
        }
        out
    }

    /// Copy with every expected reward multiplied by `factor`.
    pub fn scaled_rewards(&self, factor: f64) -> Result<Self> {
        let mut out = self.clone();
        out.rewards.iter_mut().for_each(|v| *v *= factor);
        out.validate()?;
        Ok(out)
    }
}
