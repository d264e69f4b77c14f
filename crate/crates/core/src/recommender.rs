//! Non-stationary epsilon-greedy bandit recommender.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionScheme {
    /// Rejection earns nothing.
    Neutral,
    /// Rejection is penalised.
    Punitive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InteractionSignal {
    pub accepted: bool,
}

pub fn reward_from_interaction(sig: InteractionSignal, scheme: RejectionScheme) -> f64 {
    match (sig.accepted, scheme) {
        (true, _) => 1.0,
        (false, RejectionScheme::Neutral) => 0.0,
        (false, RejectionScheme::Punitive) => -1.0,
    }
}

/// Per-arm value estimates tracked with a constant step size, so older
/// observations fade geometrically.
#[derive(Clone, Debug, PartialEq)]
pub struct Bandit {
    pub q_arms: Vec<f64>,
    pub pull_counts: Vec<u64>,
    pub eta: f64,
    pub epsilon_r: f64,
}

impl Bandit {
    pub fn new(n_arms: usize, eta: f64, epsilon_r: f64, q_init: f64) -> Result<Self> {
        if n_arms == 0 {
            return Err(SimError::Contract("bandit needs at least one arm".into()));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(SimError::Contract(format!("recency weight {eta} outside (0,1]")));
        }
        if !(0.0..=1.0).contains(&epsilon_r) {
            return Err(SimError::Contract(format!(
                "exploration rate {epsilon_r} outside [0,1]"
            )));
        }
        Ok(Bandit {
            q_arms: vec![q_init; n_arms],
            pull_counts: vec![0; n_arms],
            eta,
            epsilon_r,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.q_arms.len()
    }

    pub fn select_arm<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let explore: f64 = rng.gen();
        if explore < self.epsilon_r {
            rng.gen_range(0..self.n_arms())
        } else {
            self.best_arm()
        }
    }

    /// Lowest-index argmax of the estimates.
    pub fn best_arm(&self) -> usize {
        let mut best = 0;
        for (i, &q) in self.q_arms.iter().enumerate().skip(1) {
            if q > self.q_arms[best] {
                best = i;
            }
        }
        best
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        let q = &mut self.q_arms[arm];
        *q += self.eta * (reward - *q);
        self.pull_counts[arm] += 1;
    }
}
