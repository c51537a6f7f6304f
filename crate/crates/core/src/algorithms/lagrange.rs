use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instance::{BwkInstance, OutcomeSample};

use super::{run_policy, sample_arm, Policy, RunLog};

/// Learning rates of the two players; `None` picks the defaults
/// `sqrt(ln m / (m T))` and `sqrt(ln(d + 1) / T)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LagrangeConfig {
    pub primal_rate: Option<f64>,
    pub dual_rate: Option<f64>,
}

/// Lagrangian game between an EXP3 arm player and a Hedge resource player.
///
/// The payoff of arm `i` against coordinate `j` is `r_i / v + b_j - c_{j,i}`
/// with `v = benchmark / T` and `b = B / T`; the extra null coordinate has
/// payoff `r_i / v`. Payoffs are mapped affinely onto `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LagrangeBwk {
    num_arms: usize,
    num_resources: usize,
    b: Vec<f64>,
    value_rate: f64,
    low: f64,
    span: f64,
    primal_rate: f64,
    dual_rate: f64,
    /// Cumulative estimated losses of the arm player.
    arm_losses: Vec<f64>,
    /// Cumulative payoffs seen by the resource player.
    dual_losses: Vec<f64>,
    arm_probs: Vec<f64>,
    dual_probs: Vec<f64>,
    idle: bool,
}

fn softmin(losses: &[f64], rate: f64, out: &mut [f64]) {
    let lo = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (o, l) in out.iter_mut().zip(losses) {
        *o = (-rate * (l - lo)).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

impl LagrangeBwk {
    pub fn new(
        instance: &BwkInstance,
        benchmark_value: f64,
        config: &LagrangeConfig,
    ) -> Result<Self> {
        if !(benchmark_value > 0.0) {
            return Err(invalid("benchmark value must be positive"));
        }
        let (m, d, t) = (
            instance.num_arms(),
            instance.num_resources(),
            instance.horizon() as f64,
        );
        let b = instance.per_round_budget();
        let idle = b.iter().any(|v| *v <= 0.0);
        let value_rate = benchmark_value / t;
        let b_min = b.iter().cloned().fold(f64::INFINITY, f64::min);
        let b_max = b.iter().cloned().fold(0.0, f64::max);
        let low = (b_min - 1.0).min(0.0);
        let high = 1.0 / value_rate + b_max;
        let primal_rate = config
            .primal_rate
            .unwrap_or_else(|| ((m as f64).ln() / (m as f64 * t)).sqrt());
        let dual_rate = config
            .dual_rate
            .unwrap_or_else(|| (((d + 1) as f64).ln() / t).sqrt());
        Ok(Self {
            num_arms: m,
            num_resources: d,
            b,
            value_rate,
            low,
            span: high - low,
            primal_rate,
            dual_rate,
            arm_losses: vec![0.0; m],
            dual_losses: vec![0.0; d + 1],
            arm_probs: vec![1.0 / m as f64; m],
            dual_probs: vec![1.0 / (d + 1) as f64; d + 1],
            idle,
        })
    }

    /// Normalized payoff of `arm` against coordinate `j` (`j == d` is the null coordinate).
    fn payoff(&self, arm: usize, j: usize, outcome: &OutcomeSample) -> f64 {
        let r = outcome.rewards[arm] / self.value_rate;
        let raw = if j == self.num_resources {
            r
        } else {
            r + self.b[j] - outcome.consumption(j, arm)
        };
        ((raw - self.low) / self.span).clamp(0.0, 1.0)
    }

    pub fn arm_distribution(&self) -> &[f64] {
        &self.arm_probs
    }

    pub fn dual_distribution(&self) -> &[f64] {
        &self.dual_probs
    }
}

impl Policy for LagrangeBwk {
    fn choose(&mut self, _round: usize, rng: &mut dyn RngCore) -> Result<usize> {
        if self.idle {
            return Ok(self.num_arms - 1);
        }
        softmin(&self.arm_losses, self.primal_rate, &mut self.arm_probs);
        softmin(&self.dual_losses, self.dual_rate, &mut self.dual_probs);
        Ok(sample_arm(&self.arm_probs, rng))
    }

    fn observe(&mut self, _round: usize, arm: usize, outcome: &OutcomeSample) {
        if self.idle {
            return;
        }
        let payoffs: Vec<f64> = (0..=self.num_resources)
            .map(|j| self.payoff(arm, j, outcome))
            .collect();
        let mixed: f64 = payoffs
            .iter()
            .zip(&self.dual_probs)
            .map(|(p, q)| p * q)
            .sum();
        self.arm_losses[arm] += (1.0 - mixed) / self.arm_probs[arm];
        // The resource player minimizes the payoff.
        for (acc, p) in self.dual_losses.iter_mut().zip(&payoffs) {
            *acc += p;
        }
    }

    fn tag(&self) -> String {
        "lagrange_bwk".into()
    }
}

pub fn run_lagrange_bwk<R: RngCore>(
    instance: &BwkInstance,
    benchmark_value: f64,
    rng: &mut R,
) -> Result<RunLog> {
    run_lagrange_bwk_with(instance, benchmark_value, &LagrangeConfig::default(), rng)
}

pub fn run_lagrange_bwk_with<R: RngCore>(
    instance: &BwkInstance,
    benchmark_value: f64,
    config: &LagrangeConfig,
    rng: &mut R,
) -> Result<RunLog> {
    let mut policy = LagrangeBwk::new(instance, benchmark_value, config)?;
    run_policy(instance, &mut policy, rng)
}
