//! Bandit policies for the non-stationary BwK problem and the shared run loop.

mod lagrange;
mod sw_ucb;
mod window;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environments::sample_outcome;
use crate::error::Result;
use crate::instance::{BwkInstance, OutcomeSample};

pub use lagrange::{run_lagrange_bwk, run_lagrange_bwk_with, LagrangeBwk, LagrangeConfig};
pub use sw_ucb::{
    default_windows, naive_ucb_config, rad, run_sw_ucb, shrink_factor, ConfidenceVariant, SwUcb,
    SwUcbConfig,
};
pub use window::SlidingWindow;

/// A policy driven round by round by [`run_policy`].
pub trait Policy {
    /// Picks the arm of `round` (0-based).
    fn choose(&mut self, round: usize, rng: &mut dyn rand::RngCore) -> Result<usize>;
    /// Feedback for the arm just played.
    fn observe(&mut self, round: usize, arm: usize, outcome: &OutcomeSample);
    fn tag(&self) -> String;
    fn windows(&self) -> Option<(usize, usize)> {
        None
    }
}

/// Execution trace of one policy on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    /// Arm played in each round before stopping.
    pub arms: Vec<usize>,
    /// Realized reward of the played arm, one entry per played round.
    pub rewards: Vec<f64>,
    /// Realized consumption of the played arm, `rounds x d` row-major.
    pub consumptions: Vec<f64>,
    pub num_resources: usize,
    /// 1-based stopping round: the first round whose consumption pushes some
    /// resource over budget, or `T + 1`.
    pub tau: usize,
    /// Reward counted through round `tau - 1`, one entry per round of the
    /// horizon (flat after stopping).
    pub cumulative_reward: Vec<f64>,
    /// Consumption incurred through each round, `T x d` row-major.
    pub cumulative_consumption: Vec<f64>,
    pub windows: Option<(usize, usize)>,
    pub variant: String,
    pub seed: Option<u64>,
}

impl RunLog {
    pub fn horizon(&self) -> usize {
        self.cumulative_reward.len()
    }

    /// Reward collected over rounds `1 .. tau - 1`.
    pub fn total_reward(&self) -> f64 {
        self.cumulative_reward.last().copied().unwrap_or(0.0)
    }

    pub fn cumulative_consumption_at(&self, round: usize) -> &[f64] {
        let d = self.num_resources;
        &self.cumulative_consumption[round * d..(round + 1) * d]
    }
}

/// Inverse-CDF draw from `x` with a single uniform.
pub fn sample_arm<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let total: f64 = x.iter().map(|v| v.max(0.0)).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = x.len() - 1;
    for (i, &p) in x.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_positive = i;
        acc += p;
        if target < acc {
            return i;
        }
    }
    last_positive
}

/// Runs a policy until the horizon ends or a budget is exceeded.
pub fn run_policy<P: Policy, R: rand::RngCore>(
    instance: &BwkInstance,
    policy: &mut P,
    rng: &mut R,
) -> Result<RunLog> {
    run_policy_with(instance, policy, rng, |_, _| {})
}

/// As [`run_policy`], calling `hook(round, policy)` after every choice.
pub fn run_policy_with<P: Policy, R: rand::RngCore>(
    instance: &BwkInstance,
    policy: &mut P,
    rng: &mut R,
    mut hook: impl FnMut(usize, &P),
) -> Result<RunLog> {
    let t_len = instance.horizon();
    let d = instance.num_resources();
    let budgets = instance.budgets();
    let mut log = RunLog {
        arms: Vec::with_capacity(t_len),
        rewards: Vec::with_capacity(t_len),
        consumptions: Vec::with_capacity(t_len * d),
        num_resources: d,
        tau: t_len + 1,
        cumulative_reward: Vec::with_capacity(t_len),
        cumulative_consumption: Vec::with_capacity(t_len * d),
        windows: policy.windows(),
        variant: policy.tag(),
        seed: None,
    };
    let mut reward = 0.0;
    let mut used = vec![0.0; d];
    let mut stopped = false;
    for round in 0..t_len {
        if !stopped {
            let arm = policy.choose(round, rng)?;
            hook(round, policy);
            let outcome = sample_outcome(instance, round, rng)?;
            let r = outcome.rewards[arm];
            log.arms.push(arm);
            log.rewards.push(r);
            for (j, u) in used.iter_mut().enumerate() {
                let c = outcome.consumption(j, arm);
                log.consumptions.push(c);
                *u += c;
            }
            if used.iter().zip(budgets).any(|(u, b)| u > b) {
                stopped = true;
                log.tau = round + 1;
            } else {
                reward += r;
            }
            policy.observe(round, arm, &outcome);
        }
        log.cumulative_reward.push(reward);
        log.cumulative_consumption.extend_from_slice(&used);
    }
    Ok(log)
}

/// `benchmark - reward collected before tau`.
pub fn compute_regret(log: &RunLog, benchmark_value: f64) -> f64 {
    benchmark_value - log.total_reward()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inverse_cdf_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert_eq!(sample_arm(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
        let n = 20_000;
        let hits = (0..n)
            .filter(|_| sample_arm(&[0.25, 0.75], &mut rng) == 0)
            .count();
        assert!((hits as f64 / n as f64 - 0.25).abs() < 0.02);
    }

    #[test]
    fn regret_of_empty_run_is_benchmark() {
        let log = RunLog {
            arms: vec![0],
            rewards: vec![1.0],
            consumptions: vec![2.0],
            num_resources: 1,
            tau: 1,
            cumulative_reward: vec![0.0; 4],
            cumulative_consumption: vec![2.0; 4],
            windows: None,
            variant: String::new(),
            seed: None,
        };
        assert_eq!(compute_regret(&log, 7.5), 7.5);
        let mut full = log.clone();
        full.cumulative_reward = vec![1250.0, 2500.0, 3750.0, 5000.0];
        assert_eq!(compute_regret(&full, 5000.0), 0.0);
    }
}
