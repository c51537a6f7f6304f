use std::collections::VecDeque;

/// Per-arm statistics over the most recent `width` rounds.
///
/// Every round contributes one play (possibly of the null arm), so after the
/// plays of rounds `0..k` have been pushed the window covers rounds
/// `max(0, k - width) .. k`.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    width: usize,
    num_arms: usize,
    num_resources: usize,
    arms: VecDeque<usize>,
    rewards: VecDeque<f64>,
    consumptions: VecDeque<f64>,
    counts: Vec<usize>,
    reward_sums: Vec<f64>,
    /// `d x m`, row-major.
    consumption_sums: Vec<f64>,
}

impl SlidingWindow {
    pub fn new(width: usize, num_arms: usize, num_resources: usize) -> Self {
        Self {
            width: width.max(1),
            num_arms,
            num_resources,
            arms: VecDeque::new(),
            rewards: VecDeque::new(),
            consumptions: VecDeque::new(),
            counts: vec![0; num_arms],
            reward_sums: vec![0.0; num_arms],
            consumption_sums: vec![0.0; num_arms * num_resources],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Records a play; `consumption` has one entry per resource.
    pub fn push(&mut self, arm: usize, reward: f64, consumption: &[f64]) {
        let m = self.num_arms;
        self.arms.push_back(arm);
        self.rewards.push_back(reward);
        self.consumptions.extend(consumption.iter().copied());
        self.counts[arm] += 1;
        self.reward_sums[arm] += reward;
        for (j, c) in consumption.iter().enumerate() {
            self.consumption_sums[j * m + arm] += c;
        }
        while self.arms.len() > self.width {
            self.evict();
        }
    }

    fn evict(&mut self) {
        let m = self.num_arms;
        let arm = self.arms.pop_front().unwrap();
        let reward = self.rewards.pop_front().unwrap();
        self.counts[arm] -= 1;
        self.reward_sums[arm] -= reward;
        for j in 0..self.num_resources {
            let c = self.consumptions.pop_front().unwrap();
            self.consumption_sums[j * m + arm] -= c;
        }
        if self.counts[arm] == 0 {
            self.reward_sums[arm] = 0.0;
            for j in 0..self.num_resources {
                self.consumption_sums[j * m + arm] = 0.0;
            }
        }
    }

    pub fn count(&self, arm: usize) -> usize {
        self.counts[arm]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Windowed reward sum over `n + 1`.
    pub fn reward_estimate(&self, arm: usize) -> f64 {
        (self.reward_sums[arm] / (self.counts[arm] + 1) as f64).max(0.0)
    }

    /// Windowed consumption sum over `n + 1`.
    pub fn consumption_estimate(&self, resource: usize, arm: usize) -> f64 {
        (self.consumption_sums[resource * self.num_arms + arm] / (self.counts[arm] + 1) as f64)
            .max(0.0)
    }
}
