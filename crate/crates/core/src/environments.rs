//! Instance generators and outcome sampling.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instance::{BwkInstance, OutcomeModel, OutcomeSample};

/// Overrides for [`build_example`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExampleParams {
    /// Change-point fraction of example 3.
    pub alpha: f64,
    /// Number of triangle-wave periods over the second half in example 4.
    pub periods: usize,
    pub horizon: usize,
    pub outcome_model: OutcomeModel,
}

impl Default for ExampleParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            periods: 5,
            horizon: 10_000,
            outcome_model: OutcomeModel::Deterministic,
        }
    }
}

/// Triangle wave on `[0, 1]` sampled at cell midpoints, `len` cells per period.
pub fn triangle_wave(step: usize, len: usize) -> f64 {
    let u = ((step % len) as f64 + 0.5) / len as f64;
    1.0 - (2.0 * u - 1.0).abs()
}

/// The two-armed examples 1 to 4 and the two-resource one-armed example 5.
///
/// Budgets are given per round and scale with the horizon: 0.5 for examples
/// 1 and 2, 0.25 for 3, 0.3125 for 4 and 2/3 per resource for 5.
pub fn build_example(id: u32, params: &ExampleParams) -> Result<BwkInstance> {
    let t = params.horizon;
    if t < 2 || t % 2 != 0 {
        return Err(invalid("horizon must be even and at least 2"));
    }
    let half = t / 2;
    let tf = t as f64;
    let mut mus = Vec::with_capacity(t);
    let mut cs = Vec::with_capacity(t);
    let (budgets, label) = match id {
        1 => {
            for s in 0..t {
                mus.push(vec![0.5, 0.5]);
                cs.push(if s < half {
                    vec![vec![0.5, 1.0]]
                } else {
                    vec![vec![1.0, 0.5]]
                });
            }
            (vec![0.5 * tf], "example-1")
        }
        2 => {
            for s in 0..t {
                if s < half {
                    mus.push(vec![0.5, 0.5]);
                    cs.push(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
                } else {
                    mus.push(vec![0.0, 0.5]);
                    cs.push(vec![vec![1.0, 0.5], vec![1.0, 0.5]]);
                }
            }
            (vec![0.5 * tf; 2], "example-2")
        }
        3 => {
            let alpha = params.alpha;
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(invalid("example 3 needs alpha in (0, 1)"));
            }
            let change = (alpha * tf).floor() as usize;
            for s in 0..t {
                if s < change {
                    mus.push(vec![0.5, 0.5]);
                    cs.push(vec![vec![0.7, 0.3], vec![0.3, 0.7]]);
                } else {
                    mus.push(vec![0.0, 0.7]);
                    cs.push(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
                }
            }
            (vec![0.25 * tf; 2], "example-3")
        }
        4 => {
            let k = params.periods;
            if k == 0 || half % k != 0 {
                return Err(invalid("example 4 needs a period count dividing T/2"));
            }
            let len = half / k;
            for s in 0..t {
                if s < half {
                    mus.push(vec![0.5, 0.5]);
                    cs.push(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
                } else {
                    let c = triangle_wave(s - half, len);
                    mus.push(vec![0.0, 0.5]);
                    cs.push(vec![vec![1.0, c], vec![1.0, c]]);
                }
            }
            (vec![0.3125 * tf; 2], "example-4")
        }
        5 => {
            for s in 0..t {
                mus.push(vec![1.0]);
                cs.push(if s < half {
                    vec![vec![1.0], vec![0.0]]
                } else {
                    vec![vec![0.0], vec![1.0]]
                });
            }
            (vec![2.0 * tf / 3.0; 2], "example-5")
        }
        _ => return Err(invalid(format!("unknown example id {id}"))),
    };
    BwkInstance::from_rounds(budgets, &mus, &cs, params.outcome_model, label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

/// One actual arm with unit consumption and `B = T/2`; the reward is 0.5 in
/// the first half and `0.5 +- delta/2` in the second.
pub fn build_motivating_instance(
    horizon: usize,
    delta: f64,
    direction: Direction,
) -> Result<BwkInstance> {
    if horizon < 2 || horizon % 2 != 0 {
        return Err(invalid("horizon must be even and at least 2"));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(invalid("delta must lie in [0, 1)"));
    }
    let half = horizon / 2;
    let late = match direction {
        Direction::Up => 0.5 + delta / 2.0,
        Direction::Down => 0.5 - delta / 2.0,
    };
    let mus: Vec<Vec<f64>> = (0..horizon)
        .map(|s| vec![if s < half { 0.5 } else { late }])
        .collect();
    let cs = vec![vec![vec![1.0]]; horizon];
    BwkInstance::from_rounds(
        vec![half as f64],
        &mus,
        &cs,
        OutcomeModel::Deterministic,
        "motivating",
    )
}

/// Lower-bound constructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LowerBoundSpec {
    /// Epochs of length `epoch` with a uniformly drawn best arm of mean
    /// `1/2 + delta`, the rest at `1/2`; one resource that is never consumed.
    V1 {
        arms: usize,
        horizon: usize,
        epoch: usize,
        /// Defaults to `sqrt(arms / epoch)`.
        delta: Option<f64>,
    },
    /// Unit reward. First half: epochs with a best arm consuming `b` and the
    /// others `b + delta`. Second half: every arm consumes `b`.
    V2 {
        arms: usize,
        horizon: usize,
        epoch: usize,
        budget_rate: f64,
        delta: Option<f64>,
    },
    /// One arm with reward `r` and consumption `2b` in the first half and
    /// `r +- delta_reward`, `2b -+ delta_consumption` in the second.
    W {
        horizon: usize,
        budget_rate: f64,
        reward: f64,
        delta_reward: f64,
        delta_consumption: f64,
        /// Drawn uniformly when absent.
        direction: Option<Direction>,
    },
}

/// Epoch length `ceil(m^(1/3) V^(-2/3) T^(2/3))`, capped to `[1, T]`.
pub fn epoch_length_for_budget(arms: usize, variation: f64, horizon: usize) -> usize {
    if variation <= 0.0 {
        return horizon.max(1);
    }
    let h = (arms as f64).cbrt() * variation.powf(-2.0 / 3.0) * (horizon as f64).powf(2.0 / 3.0);
    (h.ceil() as usize).clamp(1, horizon.max(1))
}

fn checked_delta(delta: Option<f64>, arms: usize, epoch: usize) -> Result<f64> {
    let delta = delta.unwrap_or_else(|| (arms as f64 / epoch as f64).sqrt());
    if !(0.0..=0.5).contains(&delta) {
        return Err(invalid(format!("delta {delta} must lie in [0, 1/2]")));
    }
    Ok(delta)
}

pub fn build_lower_bound_instance<R: Rng + ?Sized>(
    spec: &LowerBoundSpec,
    rng: &mut R,
) -> Result<BwkInstance> {
    match *spec {
        LowerBoundSpec::V1 {
            arms,
            horizon,
            epoch,
            delta,
        } => {
            if arms == 0 || epoch == 0 || epoch > horizon {
                return Err(invalid("need arms >= 1 and 1 <= epoch <= horizon"));
            }
            let delta = checked_delta(delta, arms, epoch)?;
            let epochs = horizon.div_ceil(epoch);
            let idx: Vec<usize> = (0..arms).collect();
            let best: Vec<usize> = (0..epochs).map(|_| *idx.choose(rng).unwrap()).collect();
            let mus: Vec<Vec<f64>> = (0..horizon)
                .map(|s| {
                    let b = best[s / epoch];
                    (0..arms)
                        .map(|i| if i == b { 0.5 + delta } else { 0.5 })
                        .collect()
                })
                .collect();
            let cs = vec![vec![vec![0.0; arms]]; horizon];
            BwkInstance::from_rounds(
                vec![horizon as f64],
                &mus,
                &cs,
                OutcomeModel::Bernoulli,
                "lower-bound-v1",
            )
        }
        LowerBoundSpec::V2 {
            arms,
            horizon,
            epoch,
            budget_rate,
            delta,
        } => {
            if arms == 0 || epoch == 0 || horizon < 2 || epoch > horizon {
                return Err(invalid(
                    "need arms >= 1, horizon >= 2 and 1 <= epoch <= horizon",
                ));
            }
            let delta = checked_delta(delta, arms, epoch)?;
            if !(budget_rate > 0.0 && budget_rate + delta <= 1.0) {
                return Err(invalid("need 0 < b and b + delta <= 1"));
            }
            let half = horizon / 2;
            let epochs = half.div_ceil(epoch).max(1);
            let idx: Vec<usize> = (0..arms).collect();
            let best: Vec<usize> = (0..epochs).map(|_| *idx.choose(rng).unwrap()).collect();
            let mus = vec![vec![1.0; arms]; horizon];
            let cs: Vec<Vec<Vec<f64>>> = (0..horizon)
                .map(|s| {
                    if s < half {
                        let b = best[s / epoch];
                        vec![(0..arms)
                            .map(|i| {
                                if i == b {
                                    budget_rate
                                } else {
                                    budget_rate + delta
                                }
                            })
                            .collect()]
                    } else {
                        vec![vec![budget_rate; arms]]
                    }
                })
                .collect();
            BwkInstance::from_rounds(
                vec![budget_rate * horizon as f64],
                &mus,
                &cs,
                OutcomeModel::Bernoulli,
                "lower-bound-v2",
            )
        }
        LowerBoundSpec::W {
            horizon,
            budget_rate,
            reward,
            delta_reward,
            delta_consumption,
            direction,
        } => {
            if horizon < 2 || horizon % 2 != 0 {
                return Err(invalid("horizon must be even and at least 2"));
            }
            if !(budget_rate > 0.0 && budget_rate < 0.5) {
                return Err(invalid("need 0 < b < 1/2"));
            }
            if delta_reward < 0.0 || delta_consumption < 0.0 {
                return Err(invalid("deltas must be nonnegative"));
            }
            if reward + delta_reward > 1.0 || reward < delta_reward {
                return Err(invalid("reward +- delta_reward must lie in [0, 1]"));
            }
            if 2.0 * budget_rate + delta_consumption > 1.0 || 2.0 * budget_rate < delta_consumption
            {
                return Err(invalid("2b +- delta_consumption must lie in [0, 1]"));
            }
            let direction = direction.unwrap_or_else(|| {
                if rng.gen::<bool>() {
                    Direction::Up
                } else {
                    Direction::Down
                }
            });
            let (late_r, late_c) = match direction {
                Direction::Up => (reward + delta_reward, 2.0 * budget_rate - delta_consumption),
                Direction::Down => (reward - delta_reward, 2.0 * budget_rate + delta_consumption),
            };
            let half = horizon / 2;
            let mus: Vec<Vec<f64>> = (0..horizon)
                .map(|s| vec![if s < half { reward } else { late_r }])
                .collect();
            let cs: Vec<Vec<Vec<f64>>> = (0..horizon)
                .map(|s| vec![vec![if s < half { 2.0 * budget_rate } else { late_c }]])
                .collect();
            BwkInstance::from_rounds(
                vec![budget_rate * horizon as f64],
                &mus,
                &cs,
                OutcomeModel::Deterministic,
                "lower-bound-w",
            )
        }
    }
}

/// Realized outcomes of round `round` (0-based).
///
/// Bernoulli draws consume one uniform per entry in a fixed order: rewards by
/// arm, then consumption row by row.
pub fn sample_outcome<R: Rng + ?Sized>(
    instance: &BwkInstance,
    round: usize,
    rng: &mut R,
) -> Result<OutcomeSample> {
    instance.check_round(round)?;
    let mu = instance.mu(round);
    let c = instance.c_matrix(round);
    Ok(match instance.outcome_model() {
        OutcomeModel::Deterministic => OutcomeSample {
            rewards: mu.to_vec(),
            consumptions: c.to_vec(),
        },
        OutcomeModel::Bernoulli => {
            let mut draw = |p: f64| if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
            let rewards = mu.iter().map(|&p| draw(p)).collect();
            let consumptions = c.iter().map(|&p| draw(p)).collect();
            OutcomeSample {
                rewards,
                consumptions,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_dynamic_lp, solve_static_lp};
    use crate::measures::{global_budgets, local_budgets};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example_one_layout() {
        let inst = build_example(1, &ExampleParams::default()).unwrap();
        assert_eq!(
            (inst.horizon(), inst.num_arms(), inst.num_resources()),
            (10_000, 3, 1)
        );
        assert_eq!(inst.budgets(), &[5000.0]);
        assert_eq!(inst.mu(0), &[0.5, 0.5, 0.0]);
        assert_eq!(inst.c_matrix(4999), &[0.5, 1.0, 0.0]);
        assert_eq!(inst.c_matrix(5000), &[1.0, 0.5, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_outcome(&inst, 0, &mut rng).unwrap();
        assert_eq!(s.rewards, vec![0.5, 0.5, 0.0]);
        assert_eq!(s.consumptions, vec![0.5, 1.0, 0.0]);
    }

    #[test]
    fn example_three_layout() {
        let inst = build_example(3, &ExampleParams::default()).unwrap();
        assert_eq!(inst.budgets(), &[2500.0, 2500.0]);
        assert_eq!(inst.mu(4999), &[0.5, 0.5, 0.0]);
        assert_eq!(inst.mu(5000), &[0.0, 0.7, 0.0]);
        assert_eq!(inst.c_matrix(5000), &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn example_four_layout() {
        let inst = build_example(4, &ExampleParams::default()).unwrap();
        assert_eq!(inst.budgets(), &[3125.0, 3125.0]);
        let mut lo: f64 = 1.0;
        let mut hi: f64 = 0.0;
        for s in 5000..10_000 {
            let c = inst.c(s, 0, 1);
            assert_eq!(c, inst.c(s, 1, 1));
            lo = lo.min(c);
            hi = hi.max(c);
        }
        assert!(lo > 0.0 && lo < 0.01 && hi > 0.99 && hi < 1.0);
        assert!(build_example(
            4,
            &ExampleParams {
                periods: 3,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_example(0, &ExampleParams::default()).is_err());
        assert!(build_example(
            3,
            &ExampleParams {
                alpha: 1.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(build_motivating_instance(10, 1.0, Direction::Up).is_err());
        assert!(build_motivating_instance(9, 0.1, Direction::Up).is_err());
    }

    #[test]
    fn small_examples_hit_closed_form_values() {
        let p = ExampleParams {
            horizon: 400,
            periods: 2,
            ..Default::default()
        };
        for (id, rate) in [(1, 0.5), (2, 0.5), (3, 0.25), (4, 0.375)] {
            let inst = build_example(id, &p).unwrap();
            let v = solve_dynamic_lp(&inst).unwrap().value;
            assert!((v - rate * 400.0).abs() < 1e-6, "example {id}: {v}");
        }
    }

    #[test]
    fn example_five_has_nonbinding_global_lp() {
        let inst = build_example(
            5,
            &ExampleParams {
                horizon: 60,
                ..Default::default()
            },
        )
        .unwrap();
        let dynamic = solve_dynamic_lp(&inst).unwrap();
        assert!((dynamic.value - 60.0).abs() < 1e-9);
        assert!(dynamic.dual_q.iter().all(|q| q.abs() < 1e-9));
        let round = crate::lp::solve_round_lp(&inst, 0).unwrap();
        assert!((round.value - 2.0 / 3.0).abs() < 1e-9);
        assert!(round.dual_q[0] > 0.0);
        let (v1, _, v2) = local_budgets(&inst);
        assert_eq!(v1, 0.0);
        assert_eq!(v2, 1.0);
    }

    #[test]
    fn motivating_instance() {
        let inst = build_motivating_instance(8, 0.5, Direction::Down).unwrap();
        assert_eq!(inst.mu(7)[0], 0.25);
        assert_eq!(inst.budgets(), &[4.0]);
        let flat = build_motivating_instance(8, 0.0, Direction::Up).unwrap();
        assert_eq!(local_budgets(&flat).0, 0.0);
        assert_eq!(global_budgets(&flat).0, 0.0);
        let up = build_motivating_instance(1000, 0.2, Direction::Up).unwrap();
        assert!((local_budgets(&up).0 - 0.1).abs() < 1e-12);
        // Averaged reward 0.55 with unit consumption and b = 0.5.
        assert!((solve_static_lp(&up).unwrap().value - 275.0).abs() < 1e-9);
        assert!((solve_dynamic_lp(&up).unwrap().value - 300.0).abs() < 1e-9);
    }

    #[test]
    fn lower_bound_v1_shape() {
        let spec = LowerBoundSpec::V1 {
            arms: 2,
            horizon: 1024,
            epoch: 256,
            delta: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = build_lower_bound_instance(&spec, &mut rng).unwrap();
        let delta = (2.0f64 / 256.0).sqrt();
        let mut changes = 0;
        for s in 0..1024 {
            let mu = inst.mu(s);
            let best = mu[..2].iter().cloned().fold(0.0, f64::max);
            assert!((best - 0.5 - delta).abs() < 1e-15);
            if s > 0 && mu != inst.mu(s - 1) {
                assert_eq!(s % 256, 0);
                changes += 1;
            }
        }
        assert!(changes <= 3);
        let again = build_lower_bound_instance(&spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(inst, again);
        let bad = LowerBoundSpec::V1 {
            arms: 4,
            horizon: 100,
            epoch: 4,
            delta: None,
        };
        assert!(build_lower_bound_instance(&bad, &mut rng).is_err());
    }

    #[test]
    fn lower_bound_v2_second_half_is_flat() {
        let spec = LowerBoundSpec::V2 {
            arms: 3,
            horizon: 400,
            epoch: 200,
            budget_rate: 0.25,
            delta: None,
        };
        let inst = build_lower_bound_instance(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for s in 200..400 {
            assert_eq!(inst.c_matrix(s), &[0.25, 0.25, 0.25, 0.0]);
        }
        let row = inst.c_matrix(0);
        assert_eq!(row.iter().filter(|&&c| c == 0.25).count(), 1);
    }

    #[test]
    fn lower_bound_w_without_shift_is_stationary() {
        let spec = LowerBoundSpec::W {
            horizon: 100,
            budget_rate: 0.2,
            reward: 0.5,
            delta_reward: 0.0,
            delta_consumption: 0.0,
            direction: None,
        };
        let inst = build_lower_bound_instance(&spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(global_budgets(&inst), (0.0, 0.0));
    }

    #[test]
    fn bernoulli_draws_match_means() {
        let mus = vec![vec![0.5, 0.0]];
        let cs = vec![vec![vec![1.0, 0.3]]];
        let inst =
            BwkInstance::from_rounds(vec![1.0], &mus, &cs, OutcomeModel::Bernoulli, "").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut sums = [0.0; 4];
        for _ in 0..n {
            let s = sample_outcome(&inst, 0, &mut rng).unwrap();
            sums[0] += s.rewards[0];
            sums[1] += s.rewards[1];
            sums[2] += s.consumption(0, 0);
            sums[3] += s.consumption(0, 1);
        }
        let sigma = |p: f64| 6.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((sums[0] / n as f64 - 0.5).abs() <= sigma(0.5));
        assert_eq!(sums[1], 0.0);
        assert_eq!(sums[2], n as f64);
        assert!((sums[3] / n as f64 - 0.3).abs() <= sigma(0.3));
        assert!(sample_outcome(&inst, 1, &mut rng).is_err());
    }
}
