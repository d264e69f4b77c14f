//! The dual-system user: a model-free Q-learner and a model-based planner
//! whose action values are blended by a fixed weight.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::mdp::{bellman_sweep, greedy_set, ActionId, Dynamics, Outcome, QTable, StateId};

/// `beta * q_mb + (1 - beta) * q_mf`, elementwise.
pub fn blend_q(beta: f64, q_mb: &QTable, q_mf: &QTable) -> Result<QTable> {
    if !q_mb.same_shape(q_mf) {
        return Err(SimError::Contract(
            "model-based and model-free tables index different (state, action) spaces".into(),
        ));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(SimError::Contract(format!("blend weight {beta} outside [0,1]")));
    }
    let rows = q_mb
        .rows()
        .iter()
        .zip(q_mf.rows())
        .map(|(mb, mf)| {
            mb.iter()
                .zip(mf)
                .map(|(b, f)| beta * b + (1.0 - beta) * f)
                .collect()
        })
        .collect();
    Ok(QTable::from_rows(rows))
}

/// Habitual learner: one-step Q-learning.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFree {
    pub q: QTable,
    pub alpha: f64,
    pub gamma: f64,
}

impl ModelFree {
    pub fn new(actions_per_state: &[usize], alpha: f64, gamma: f64, q_init: f64) -> Self {
        ModelFree {
            q: QTable::filled(actions_per_state, q_init),
            alpha,
            gamma,
        }
    }

    pub fn update(&mut self, s: StateId, a: ActionId, r: f64, s2: StateId) {
        let old = self.q.get(s, a);
        let target = r + self.gamma * self.q.state_max(s2);
        self.q.set(s, a, old + self.alpha * (target - old));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    /// The planner is handed the true dynamics up front.
    KnownModel,
    /// The planner estimates dynamics from transition counts.
    LearnedModel,
}

/// Goal-directed learner: keeps a tabular model and runs `mbus` full
/// value-iteration sweeps over it after every environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBased {
    pub mode: ModelMode,
    pub q: QTable,
    pub model: Dynamics,
    pub mbus: u32,
    pub gamma: f64,
    counts: Vec<Vec<Vec<u64>>>,
    reward_sums: Vec<Vec<Vec<f64>>>,
    /// Observations landing here are discarded, hiding the state from the
    /// learned model.
    hidden_state: Option<StateId>,
}

impl ModelBased {
    /// A learner whose model starts as zero-reward self-loops everywhere.
    pub fn learned(actions_per_state: &[usize], mbus: u32, gamma: f64, q_init: f64) -> Self {
        let n = actions_per_state.len();
        let model = actions_per_state
            .iter()
            .enumerate()
            .map(|(s, &k)| vec![vec![Outcome::new(s, 1.0, 0.0)]; k])
            .collect();
        ModelBased {
            mode: ModelMode::LearnedModel,
            q: QTable::filled(actions_per_state, q_init),
            model,
            mbus,
            gamma,
            counts: actions_per_state.iter().map(|&k| vec![vec![0; n]; k]).collect(),
            reward_sums: actions_per_state
                .iter()
                .map(|&k| vec![vec![0.0; n]; k])
                .collect(),
            hidden_state: None,
        }
    }

    pub fn known(model: Dynamics, mbus: u32, gamma: f64, q_init: f64) -> Self {
        let shape: Vec<usize> = model.iter().map(Vec::len).collect();
        ModelBased {
            mode: ModelMode::KnownModel,
            q: QTable::filled(&shape, q_init),
            model,
            mbus,
            gamma,
            counts: Vec::new(),
            reward_sums: Vec::new(),
            hidden_state: None,
        }
    }

    pub fn hide_state(&mut self, state: StateId) {
        self.hidden_state = Some(state);
    }

    pub fn transition_count(&self, s: StateId, a: ActionId, s2: StateId) -> u64 {
        self.counts
            .get(s.0)
            .and_then(|acts| acts.get(a.0))
            .map_or(0, |row| row[s2.0])
    }

    /// Records one transition and re-derives the `(s, a)` row of the model.
    /// No-op for a known model.
    pub fn observe(&mut self, s: StateId, a: ActionId, r: f64, s2: StateId) {
        if self.mode == ModelMode::KnownModel || self.hidden_state == Some(s2) {
            return;
        }
        self.counts[s.0][a.0][s2.0] += 1;
        self.reward_sums[s.0][a.0][s2.0] += r;
        self.rederive(s, a);
    }

    fn rederive(&mut self, s: StateId, a: ActionId) {
        let counts = &self.counts[s.0][a.0];
        let sums = &self.reward_sums[s.0][a.0];
        let total: u64 = counts.iter().sum();
        self.model[s.0][a.0] = if total == 0 {
            vec![Outcome::new(s.0, 1.0, 0.0)]
        } else {
            counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(s2, &c)| Outcome::new(s2, c as f64 / total as f64, sums[s2] / c as f64))
                .collect()
        };
    }

    /// Runs exactly `mbus` synchronous sweeps from the current table.
    pub fn plan(&mut self) {
        self.plan_sweeps(self.mbus);
    }

    pub fn plan_sweeps(&mut self, sweeps: u32) {
        for _ in 0..sweeps {
            self.q = bellman_sweep(&self.model, &self.q, self.gamma);
        }
    }
}

/// Exploration and blending parameters of a [`DualAgent`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualConfig {
    pub beta: f64,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub tie_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualAgent {
    pub mf: ModelFree,
    pub mb: ModelBased,
    pub cfg: DualConfig,
}

impl DualAgent {
    pub fn new(mf: ModelFree, mb: ModelBased, cfg: DualConfig) -> Result<Self> {
        if !mf.q.same_shape(&mb.q) {
            return Err(SimError::Contract(
                "model-free and model-based tables index different spaces".into(),
            ));
        }
        if mf.gamma != mb.gamma {
            return Err(SimError::Contract("learners must share one discount".into()));
        }
        Ok(DualAgent { mf, mb, cfg })
    }

    pub fn blended(&self) -> QTable {
        blend_q(self.cfg.beta, &self.mb.q, &self.mf.q).expect("shapes checked at construction")
    }

    fn blended_row(&self, s: StateId) -> Vec<f64> {
        let beta = self.cfg.beta;
        self.mb
            .q
            .row(s)
            .iter()
            .zip(self.mf.q.row(s))
            .map(|(b, f)| beta * b + (1.0 - beta) * f)
            .collect()
    }

    /// Epsilon-greedy over the blended values; ties go to the lowest index.
    pub fn select_action<R: Rng + ?Sized>(&self, s: StateId, rng: &mut R) -> ActionId {
        let n = self.mf.q.row(s).len();
        let explore: f64 = rng.gen();
        if explore < self.cfg.epsilon {
            ActionId(rng.gen_range(0..n))
        } else {
            greedy_set(&self.blended_row(s), self.cfg.tie_tol)[0]
        }
    }

    /// Model-free update, model observation, then planning.
    pub fn learn(&mut self, s: StateId, a: ActionId, r: f64, s2: StateId) {
        self.mf.update(s, a, r, s2);
        self.mb.observe(s, a, r, s2);
        self.mb.plan();
    }

    pub fn decay_epsilon(&mut self) {
        self.cfg.epsilon = (self.cfg.epsilon * self.cfg.epsilon_decay).max(self.cfg.epsilon_min);
    }

    pub fn is_addicted(&self, reference: &QTable) -> bool {
        (0..reference.n_states())
            .map(StateId)
            .any(|s| deviates(reference.row(s), &self.blended_row(s), self.cfg.tie_tol))
    }
}

/// An agent is addicted when, at some state with a unique optimal action,
/// its own greedy set is anything other than that action. Where the reference
/// has ties, any agent choice inside the tied set is fine.
pub fn is_addicted(blended: &QTable, reference: &QTable, tie_tol: f64) -> bool {
    (0..reference.n_states())
        .map(StateId)
        .any(|s| deviates(reference.row(s), blended.row(s), tie_tol))
}

fn deviates(reference: &[f64], agent: &[f64], tie_tol: f64) -> bool {
    let optimal = greedy_set(reference, tie_tol);
    let chosen = greedy_set(agent, tie_tol);
    if optimal.len() == 1 {
        chosen != optimal
    } else {
        !optimal.contains(&chosen[0])
    }
}
