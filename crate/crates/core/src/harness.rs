//! Replication loop, seeded batches and parameter sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use crate::agent::{DualAgent, DualConfig, ModelBased, ModelFree, ModelMode};
use crate::config::{ArmRefresh, ExperimentConfig, MisrepresentationTarget};
use crate::environments::apply_misrepresentation;
use crate::error::{Result, SimError};
use crate::mdp::{
    optimal_q, sample_row, ActionId, EnvironmentSpec, QTable, StateId, DEFAULT_REFERENCE_TOL,
    HEALTHY_LABEL,
};
use crate::recommender::{reward_from_interaction, Bandit, InteractionSignal};
use crate::seed::derive_seed;

/// Environment variable capping worker threads; 0 or unset means automatic.
pub const THREADS_ENV: &str = "SIM_THREADS";

/// Everything a replication needs that does not depend on its seed.
#[derive(Clone, Debug)]
pub struct Scenario {
    /// Unmodified environment; defines healthy behaviour.
    pub base: EnvironmentSpec,
    /// Dynamics the user actually experiences.
    pub world: EnvironmentSpec,
    /// Optimal Q of `base` at its reference discount.
    pub reference: QTable,
    /// Dynamics handed to a known-model planner.
    pub known_model: EnvironmentSpec,
    /// State whose observations a learned model discards.
    pub hidden_from_model: Option<StateId>,
}

impl Scenario {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let base = cfg.base_environment()?;
        let reference = optimal_q(&base, base.gamma_reference, DEFAULT_REFERENCE_TOL)?;
        let mis = &cfg.misrepresentation;
        let (world, known_model, hidden_from_model) = if !mis.enabled {
            (base.clone(), base.clone(), None)
        } else {
            let rewired = apply_misrepresentation(&base)?;
            match mis.target {
                MisrepresentationTarget::Environment => (rewired.clone(), rewired, None),
                MisrepresentationTarget::MbModel => {
                    (base.clone(), rewired, base.state_by_label(HEALTHY_LABEL))
                }
            }
        };
        Ok(Scenario {
            base,
            world,
            reference,
            known_model,
            hidden_from_model,
        })
    }

    fn new_agent(&self, cfg: &ExperimentConfig) -> DualAgent {
        let a = &cfg.agent;
        let shape = self.base.actions_per_state();
        let mf = ModelFree::new(&shape, a.alpha, a.gamma, a.q_init);
        let mut mb = match a.model_mode {
            ModelMode::KnownModel => {
                ModelBased::known(self.known_model.transitions.clone(), a.mbus, a.gamma, a.q_init)
            }
            ModelMode::LearnedModel => ModelBased::learned(&shape, a.mbus, a.gamma, a.q_init),
        };
        if let Some(hidden) = self.hidden_from_model {
            mb.hide_state(hidden);
        }
        let dual = DualConfig {
            beta: a.beta,
            epsilon: a.epsilon,
            epsilon_decay: a.epsilon_decay,
            epsilon_min: a.epsilon_min,
            tie_tol: a.tie_tol,
        };
        DualAgent::new(mf, mb, dual).expect("agent tables share the environment shape")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub state: StateId,
    pub arm: Option<usize>,
    pub action: ActionId,
    pub next_state: StateId,
    pub user_reward: f64,
    pub recommender_reward: Option<f64>,
    /// Evaluated after all of step `t`'s updates.
    pub addicted: bool,
}

#[derive(Clone, Debug)]
pub struct ReplicationTrace {
    pub records: Vec<StepRecord>,
    /// Bandit estimates after each step; empty rows when the environment has
    /// no arms.
    pub q_arms: Vec<Vec<f64>>,
    pub final_agent: DualAgent,
    pub final_bandit: Option<Bandit>,
}

pub fn run_replication(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicationTrace> {
    let scenario = Scenario::from_config(cfg)?;
    Ok(replicate(&scenario, cfg, seed))
}

/// One user/recommender pair over the full horizon. Pure in `(scenario, cfg, seed)`.
pub fn replicate(scenario: &Scenario, cfg: &ExperimentConfig, seed: u64) -> ReplicationTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = &scenario.world;
    let arms = world.arm_modulation.as_ref();
    let rc = &cfg.recommender;
    let mut agent = scenario.new_agent(cfg);
    let mut bandit = arms.map(|m| {
        Bandit::new(m.n_arms(), rc.eta, rc.epsilon_r, rc.q_init).expect("validated config")
    });

    let mut records = Vec::with_capacity(cfg.horizon);
    let mut q_history = Vec::with_capacity(cfg.horizon);
    let mut state = world.start_state;
    let mut current_arm: Option<usize> = None;

    for t in 0..cfg.horizon {
        let interacting = world.is_interaction(state);
        current_arm = match (&bandit, interacting) {
            (Some(b), true) => match (rc.arm_refresh, current_arm) {
                (ArmRefresh::PerEntry, Some(arm)) => Some(arm),
                _ => Some(b.select_arm(&mut rng)),
            },
            _ => None,
        };

        let action = agent.select_action(state, &mut rng);
        let u: f64 = rng.gen();
        let outcome = match (current_arm, arms) {
            (Some(arm), Some(m)) if m.targets_state(state) => {
                *sample_row(&m.modulated_rows(world, state, arm)[action.0], u)
            }
            _ => *sample_row(world.row(state, action), u),
        };

        agent.learn(state, action, outcome.reward, outcome.next);

        let mut recommender_reward = None;
        if let (Some(arm), Some(b), Some(m)) = (current_arm, bandit.as_mut(), arms) {
            let kept = action.0 == m.accept_action;
            let engaged = kept && rng.gen::<f64>() < m.arms.accept_probability[arm];
            let r = reward_from_interaction(InteractionSignal { accepted: engaged }, rc.rejection_scheme);
            b.update(arm, r);
            recommender_reward = Some(r);
        }

        let addicted = agent.is_addicted(&scenario.reference);
        records.push(StepRecord {
            t,
            state,
            arm: current_arm,
            action,
            next_state: outcome.next,
            user_reward: outcome.reward,
            recommender_reward,
            addicted,
        });
        q_history.push(bandit.as_ref().map_or_else(Vec::new, |b| b.q_arms.clone()));

        agent.decay_epsilon();
        state = outcome.next;
    }

    ReplicationTrace {
        records,
        q_arms: q_history,
        final_agent: agent,
        final_bandit: bandit,
    }
}

/// Aggregates of one batch of replications.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchResult {
    pub config: ExperimentConfig,
    pub n_replications: usize,
    /// Replications not addicted after step `t`.
    pub non_addicted: Vec<usize>,
    /// Mean bandit estimate per arm after step `t`.
    pub mean_q_arms: Vec<Vec<f64>>,
    /// Each replication's bandit estimates at the end of the horizon.
    pub final_q_arms: Vec<Vec<f64>>,
}

impl BatchResult {
    pub fn horizon(&self) -> usize {
        self.non_addicted.len()
    }

    pub fn n_arms(&self) -> usize {
        self.mean_q_arms.first().map_or(0, Vec::len)
    }

    pub fn addicted(&self, t: usize) -> usize {
        self.n_replications - self.non_addicted[t]
    }

    pub fn final_non_addicted(&self) -> usize {
        *self.non_addicted.last().expect("horizon is at least 1")
    }

    pub fn final_addicted(&self) -> usize {
        self.n_replications - self.final_non_addicted()
    }

    /// First step at which at least `count` replications are non-addicted.
    pub fn first_reaching(&self, count: usize) -> Option<usize> {
        self.non_addicted.iter().position(|&n| n >= count)
    }
}

struct Summary {
    addicted: Vec<bool>,
    q_arms: Vec<Vec<f64>>,
}

fn summarize(trace: ReplicationTrace) -> Summary {
    Summary {
        addicted: trace.records.iter().map(|r| r.addicted).collect(),
        q_arms: trace.q_arms,
    }
}

/// Thread count from `SIM_THREADS`; 0 when unset or unparsable.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

fn in_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SimError::Contract(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

pub fn run_batch(cfg: &ExperimentConfig) -> Result<BatchResult> {
    run_batch_with_threads(cfg, threads_from_env())
}

pub fn run_batch_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<BatchResult> {
    let scenario = Scenario::from_config(cfg)?;
    let summaries = in_pool(threads, || {
        (0..cfg.n_replications)
            .into_par_iter()
            .map(|i| summarize(replicate(&scenario, cfg, derive_seed(cfg.base_seed, i as u64))))
            .collect::<Vec<_>>()
    })?;
    Ok(aggregate(cfg, summaries))
}

/// Like [`run_batch_with_threads`] but also returns every full trace, in
/// replication-index order.
pub fn run_batch_traced(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<(BatchResult, Vec<ReplicationTrace>)> {
    let scenario = Scenario::from_config(cfg)?;
    let traces = in_pool(threads, || {
        (0..cfg.n_replications)
            .into_par_iter()
            .map(|i| replicate(&scenario, cfg, derive_seed(cfg.base_seed, i as u64)))
            .collect::<Vec<_>>()
    })?;
    let summaries = traces.iter().cloned().map(summarize).collect();
    Ok((aggregate(cfg, summaries), traces))
}

/// Index-ordered reduction, so the result never depends on the schedule.
fn aggregate(cfg: &ExperimentConfig, summaries: Vec<Summary>) -> BatchResult {
    let horizon = cfg.horizon;
    let n = summaries.len();
    let n_arms = summaries
        .first()
        .and_then(|s| s.q_arms.first())
        .map_or(0, Vec::len);
    let mut non_addicted = vec![0usize; horizon];
    let mut sums = vec![vec![0.0f64; n_arms]; horizon];
    let mut final_q_arms = Vec::with_capacity(n);
    for s in &summaries {
        for t in 0..horizon {
            if !s.addicted[t] {
                non_addicted[t] += 1;
            }
            for (acc, q) in sums[t].iter_mut().zip(&s.q_arms[t]) {
                *acc += q;
            }
        }
        final_q_arms.push(s.q_arms.last().cloned().unwrap_or_default());
    }
    let mean_q_arms = sums
        .into_iter()
        .map(|row| row.into_iter().map(|v| v / n as f64).collect())
        .collect();
    BatchResult {
        config: cfg.clone(),
        n_replications: n,
        non_addicted,
        mean_q_arms,
        final_q_arms,
    }
}

/// One point of a parameter sweep.
#[derive(Clone, Debug)]
pub struct SweepRun {
    /// `(name, value)` pairs in sorted name order.
    pub params: Vec<(String, Value)>,
    pub result: BatchResult,
}

impl SweepRun {
    /// Directory name: sorted `key=value` pairs joined by `_`.
    pub fn label(&self) -> String {
        sweep_label(&self.params)
    }
}

pub fn sweep_label(params: &[(String, Value)]) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join("_")
}

/// Cartesian product of the sweep values, each run as a batch with the same
/// base seed.
pub fn sweep_points(cfg: &ExperimentConfig) -> Result<Vec<Vec<(String, Value)>>> {
    if cfg.sweep.is_empty() {
        return Err(SimError::config("sweep", "sweep needs at least one parameter"));
    }
    let mut points: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for (key, values) in &cfg.sweep {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut next = p.clone();
                    next.push((key.clone(), v.clone()));
                    next
                })
            })
            .collect();
    }
    Ok(points)
}

pub fn resolve_point(cfg: &ExperimentConfig, point: &[(String, Value)]) -> Result<ExperimentConfig> {
    let mut out = cfg.clone();
    out.sweep.clear();
    for (k, v) in point {
        out = out.with_parameter(k, v)?;
    }
    Ok(out)
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRun>> {
    run_sweep_with_threads(cfg, threads_from_env())
}

pub fn run_sweep_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<SweepRun>> {
    cfg.validate()?;
    sweep_points(cfg)?
        .into_iter()
        .map(|params| {
            let resolved = resolve_point(cfg, &params)?;
            let result = run_batch_with_threads(&resolved, threads)?;
            Ok(SweepRun { params, result })
        })
        .collect()
}
