use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instance::{BwkInstance, OutcomeSample};
use crate::lp::solve_single_step_lp;

use super::{run_policy, sample_arm, Policy, RunLog, SlidingWindow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfidenceVariant {
    /// `mu_hat + sqrt(2 log(12 m T^3) / (n + 1))` and the matching LCB.
    Hoeffding,
    /// `mu_hat + 2 rad(mu_hat, n + 1)` with right-hand side `(1 - epsilon) b`.
    RadShrunk { gamma: f64, epsilon: f64 },
}

impl ConfidenceVariant {
    /// Rad variant with `gamma = log(12 m d T^3)` and `epsilon` from [`shrink_factor`].
    pub fn rad_default(instance: &BwkInstance, v2: f64) -> Self {
        let (m, d, t) = (
            instance.num_arms(),
            instance.num_resources(),
            instance.horizon(),
        );
        let gamma = (12.0 * m as f64 * d as f64 * (t as f64).powi(3)).ln();
        let b_min = instance
            .budgets()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        Self::RadShrunk {
            gamma,
            epsilon: shrink_factor(m, d, t, b_min, v2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwUcbConfig {
    pub w1: usize,
    pub w2: usize,
    pub variant: ConfidenceVariant,
    /// Floor consumption LCBs at zero before the LP solve.
    pub clamp_lcb: bool,
}

impl SwUcbConfig {
    pub fn hoeffding(w1: usize, w2: usize) -> Self {
        Self {
            w1,
            w2,
            variant: ConfidenceVariant::Hoeffding,
            clamp_lcb: true,
        }
    }
}

/// Sliding-window UCB with both windows equal to the horizon.
pub fn naive_ucb_config(horizon: usize) -> SwUcbConfig {
    SwUcbConfig::hoeffding(horizon, horizon)
}

pub fn rad(a: f64, n: f64, gamma: f64) -> f64 {
    (gamma * a / n).sqrt() + gamma / n
}

fn window_formula(m: usize, t: usize, v: f64, log_arg: f64) -> usize {
    if v <= 0.0 {
        return t.max(1);
    }
    let w =
        (m as f64).cbrt() * v.powf(-2.0 / 3.0) * (t as f64).powf(2.0 / 3.0) * log_arg.ln().cbrt();
    if !w.is_finite() {
        return t.max(1);
    }
    (w.ceil() as usize).clamp(1, t.max(1))
}

/// Window sizes tuned to the local budgets; zero variation gives the horizon.
pub fn default_windows(m: usize, d: usize, t: usize, v1: f64, v2: f64) -> (usize, usize) {
    let t3 = (t as f64).powi(3);
    (
        window_formula(m, t, v1, 12.0 * m as f64 * t3),
        window_formula(m, t, v2, 12.0 * m as f64 * d as f64 * t3),
    )
}

/// `epsilon = (alpha_2 + beta_2) / B` with unit constants, capped at 1.
///
/// `alpha_2 = sqrt(L m B) + m L`, `beta_2 = sqrt(L B) + m^(1/3) V2^(1/3) T^(2/3) L^(1/3)`,
/// `L = log(m d T^2)`.
pub fn shrink_factor(m: usize, d: usize, t: usize, budget: f64, v2: f64) -> f64 {
    if budget <= 0.0 {
        return 1.0;
    }
    let (mf, tf) = (m as f64, t as f64);
    let l = (mf * d as f64 * tf * tf).ln().max(0.0);
    let alpha = (l * mf * budget).sqrt() + mf * l;
    let beta = (l * budget).sqrt() + mf.cbrt() * v2.max(0.0).cbrt() * tf.powf(2.0 / 3.0) * l.cbrt();
    ((alpha + beta) / budget).min(1.0)
}

/// Sliding-window UCB policy state.
#[derive(Debug, Clone)]
pub struct SwUcb {
    config: SwUcbConfig,
    num_arms: usize,
    num_resources: usize,
    rhs: Vec<f64>,
    log_reward: f64,
    log_consumption: f64,
    reward_window: SlidingWindow,
    consumption_window: SlidingWindow,
    ucb: Vec<f64>,
    lcb: Vec<f64>,
    x: Vec<f64>,
}

impl SwUcb {
    pub fn new(instance: &BwkInstance, config: SwUcbConfig) -> Result<Self> {
        let t = instance.horizon();
        let (m, d) = (instance.num_arms(), instance.num_resources());
        for w in [config.w1, config.w2] {
            if w == 0 || w > t {
                return Err(invalid(format!("window {w} must lie in [1, {t}]")));
            }
        }
        let shrink = match config.variant {
            ConfidenceVariant::Hoeffding => 1.0,
            ConfidenceVariant::RadShrunk { gamma, epsilon } => {
                if !(gamma > 0.0) || !(0.0..=1.0).contains(&epsilon) {
                    return Err(invalid("rad variant needs gamma > 0 and epsilon in [0, 1]"));
                }
                1.0 - epsilon
            }
        };
        let t3 = (t as f64).powi(3);
        Ok(Self {
            num_arms: m,
            num_resources: d,
            rhs: instance
                .per_round_budget()
                .iter()
                .map(|b| b * shrink)
                .collect(),
            log_reward: (12.0 * m as f64 * t3).ln(),
            log_consumption: (12.0 * m as f64 * d as f64 * t3).ln(),
            reward_window: SlidingWindow::new(config.w1, m, d),
            consumption_window: SlidingWindow::new(config.w2, m, d),
            ucb: vec![0.0; m],
            lcb: vec![0.0; d * m],
            x: vec![0.0; m],
            config,
        })
    }

    /// Reward UCBs of the last round, before LP clamping.
    pub fn ucb(&self) -> &[f64] {
        &self.ucb
    }

    /// Consumption LCBs of the last round (`d x m`), after clamping.
    pub fn lcb(&self) -> &[f64] {
        &self.lcb
    }

    pub fn distribution(&self) -> &[f64] {
        &self.x
    }

    pub fn reward_window(&self) -> &SlidingWindow {
        &self.reward_window
    }

    pub fn consumption_window(&self) -> &SlidingWindow {
        &self.consumption_window
    }

    fn compute_bounds(&mut self) {
        let (m, d) = (self.num_arms, self.num_resources);
        let null = m - 1;
        let ucb_cap = 1.0 + (2.0 * self.log_reward).sqrt();
        let lcb_floor = if self.config.clamp_lcb {
            0.0
        } else {
            -(2.0 * self.log_consumption).sqrt()
        };
        for i in 0..null {
            let n1 = (self.reward_window.count(i) + 1) as f64;
            let mu = self.reward_window.reward_estimate(i);
            let n2 = (self.consumption_window.count(i) + 1) as f64;
            self.ucb[i] = match self.config.variant {
                ConfidenceVariant::Hoeffding => mu + (2.0 * self.log_reward / n1).sqrt(),
                ConfidenceVariant::RadShrunk { gamma, .. } => mu + 2.0 * rad(mu, n1, gamma),
            }
            .min(ucb_cap);
            for j in 0..d {
                let c = self.consumption_window.consumption_estimate(j, i);
                let lcb = match self.config.variant {
                    ConfidenceVariant::Hoeffding => c - (2.0 * self.log_consumption / n2).sqrt(),
                    ConfidenceVariant::RadShrunk { gamma, .. } => c - 2.0 * rad(c, n2, gamma),
                };
                self.lcb[j * m + i] = lcb.max(lcb_floor);
            }
        }
        self.ucb[null] = 0.0;
        for j in 0..d {
            self.lcb[j * m + null] = 0.0;
        }
    }
}

impl Policy for SwUcb {
    fn choose(&mut self, _round: usize, rng: &mut dyn RngCore) -> Result<usize> {
        self.compute_bounds();
        if self.rhs.iter().any(|b| *b <= 0.0) {
            // Any play risks a violation of an empty budget.
            self.x.iter_mut().for_each(|v| *v = 0.0);
            self.x[self.num_arms - 1] = 1.0;
            return Ok(self.num_arms - 1);
        }
        let sol = solve_single_step_lp(&self.ucb, &self.lcb, &self.rhs)?;
        self.x = sol.x;
        Ok(sample_arm(&self.x, rng))
    }

    fn observe(&mut self, _round: usize, arm: usize, outcome: &OutcomeSample) {
        let d = self.num_resources;
        let r = outcome.rewards[arm];
        let c: Vec<f64> = (0..d).map(|j| outcome.consumption(j, arm)).collect();
        self.reward_window.push(arm, r, &c);
        self.consumption_window.push(arm, r, &c);
    }

    fn tag(&self) -> String {
        match self.config.variant {
            ConfidenceVariant::Hoeffding => "sw_ucb".into(),
            ConfidenceVariant::RadShrunk { .. } => "sw_ucb_rad".into(),
        }
    }

    fn windows(&self) -> Option<(usize, usize)> {
        Some((self.config.w1, self.config.w2))
    }
}

pub fn run_sw_ucb<R: RngCore>(
    instance: &BwkInstance,
    config: &SwUcbConfig,
    rng: &mut R,
) -> Result<RunLog> {
    let mut policy = SwUcb::new(instance, config.clone())?;
    run_policy(instance, &mut policy, rng)
}
