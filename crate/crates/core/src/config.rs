//! Experiment configuration: JSON schema, defaults, and validation.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::agent::ModelMode;
use crate::environments::{self, ArmTable, EnvironmentLevel};
use crate::error::{Result, SimError};
use crate::mdp::EnvironmentSpec;
use crate::recommender::RejectionScheme;

pub const DEFAULT_REPLICATIONS: usize = 900;
pub const DEFAULT_HORIZON: usize = 1000;
pub const DEFAULT_BASE_SEED: u64 = 20_250_101;

/// Names accepted as keys of `sweep`.
pub const SWEEP_PARAMETERS: [&str; 2] = ["beta", "mbus"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MisrepresentationTarget {
    /// Rewire the true dynamics.
    #[default]
    Environment,
    /// Hide Healthy from the user's internal model only.
    MbModel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MisrepresentationConfig {
    pub enabled: bool,
    pub target: MisrepresentationTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub mbus: u32,
    pub model_mode: ModelMode,
    pub tie_tol: f64,
    pub q_init: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            alpha: 0.1,
            gamma: 0.9,
            beta: 0.5,
            epsilon: 0.3,
            epsilon_decay: 0.999,
            epsilon_min: 0.01,
            mbus: 1,
            model_mode: ModelMode::LearnedModel,
            tie_tol: 1e-9,
            q_init: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmRefresh {
    /// Pick a fresh arm on every step spent in an interaction state.
    #[default]
    PerStep,
    /// Pick once on entering the interaction states and keep it until leaving.
    PerEntry,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecommenderConfig {
    pub n_arms: usize,
    pub eta: f64,
    pub epsilon_r: f64,
    pub rejection_scheme: RejectionScheme,
    pub q_init: f64,
    pub arm_refresh: ArmRefresh,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        RecommenderConfig {
            n_arms: 4,
            eta: 0.05,
            epsilon_r: 0.1,
            rejection_scheme: RejectionScheme::Neutral,
            q_init: 0.0,
            arm_refresh: ArmRefresh::PerStep,
        }
    }
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_seed() -> u64 {
    DEFAULT_BASE_SEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub level: EnvironmentLevel,
    #[serde(default)]
    pub misrepresentation: MisrepresentationConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub recommender: RecommenderConfig,
    /// Top-level keys of the environment JSON document that replace those of
    /// the built-in environment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment_overrides: Option<Map<String, Value>>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_replications")]
    pub n_replications: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sweep: BTreeMap<String, Vec<Value>>,
}

impl ExperimentConfig {
    pub fn new(level: EnvironmentLevel) -> Self {
        ExperimentConfig {
            level,
            misrepresentation: MisrepresentationConfig::default(),
            agent: AgentConfig::default(),
            recommender: RecommenderConfig::default(),
            environment_overrides: None,
            horizon: DEFAULT_HORIZON,
            n_replications: DEFAULT_REPLICATIONS,
            base_seed: DEFAULT_BASE_SEED,
            sweep: BTreeMap::new(),
        }
    }

    /// The environment before any misrepresentation: built-in tables for the
    /// level with `environment_overrides` applied.
    pub fn base_environment(&self) -> Result<EnvironmentSpec> {
        let built = environments::build(self.level, ArmTable::with_arms(self.recommender.n_arms))
            .map_err(|e| SimError::config("level", e.to_string()))?;
        let Some(overrides) = &self.environment_overrides else {
            return Ok(built);
        };
        let mut doc = match serde_json::to_value(&built)? {
            Value::Object(map) => map,
            _ => unreachable!("specs serialize as objects"),
        };
        for (k, v) in overrides {
            doc.insert(k.clone(), v.clone());
        }
        serde_json::from_value(Value::Object(doc))
            .map_err(|e| SimError::config("environment_overrides", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.agent;
        check_range("agent.alpha", a.alpha, a.alpha > 0.0 && a.alpha <= 1.0, "(0,1]")?;
        check_range("agent.gamma", a.gamma, (0.0..1.0).contains(&a.gamma), "[0,1)")?;
        check_range("agent.beta", a.beta, (0.0..=1.0).contains(&a.beta), "[0,1]")?;
        check_range(
            "agent.epsilon_min",
            a.epsilon_min,
            (0.0..=1.0).contains(&a.epsilon_min),
            "[0,1]",
        )?;
        if !(a.epsilon >= a.epsilon_min && a.epsilon <= 1.0) {
            return Err(SimError::config(
                "agent.epsilon",
                format!("out of range [epsilon_min={},1]", a.epsilon_min),
            ));
        }
        check_range(
            "agent.epsilon_decay",
            a.epsilon_decay,
            a.epsilon_decay > 0.0 && a.epsilon_decay <= 1.0,
            "(0,1]",
        )?;
        check_range("agent.tie_tol", a.tie_tol, a.tie_tol >= 0.0 && a.tie_tol.is_finite(), "[0,inf)")?;
        check_range("agent.q_init", a.q_init, a.q_init.is_finite(), "finite values")?;

        let r = &self.recommender;
        if r.n_arms == 0 {
            return Err(SimError::config("recommender.n_arms", "must be at least 1"));
        }
        check_range("recommender.eta", r.eta, r.eta > 0.0 && r.eta <= 1.0, "(0,1]")?;
        check_range(
            "recommender.epsilon_r",
            r.epsilon_r,
            (0.0..=1.0).contains(&r.epsilon_r),
            "[0,1]",
        )?;
        check_range("recommender.q_init", r.q_init, r.q_init.is_finite(), "finite values")?;

        if self.horizon == 0 {
            return Err(SimError::config("horizon", "must be at least 1"));
        }
        if self.n_replications == 0 {
            return Err(SimError::config("n_replications", "must be at least 1"));
        }
        for (key, values) in &self.sweep {
            if !SWEEP_PARAMETERS.contains(&key.as_str()) {
                return Err(SimError::config(
                    format!("sweep.{key}"),
                    format!("unknown sweep parameter (supported: {})", SWEEP_PARAMETERS.join(", ")),
                ));
            }
            if values.is_empty() {
                return Err(SimError::config(format!("sweep.{key}"), "needs at least one value"));
            }
            for (i, v) in values.iter().enumerate() {
                self.with_parameter(key, v)
                    .map_err(|e| match e {
                        SimError::Config { rule, .. } => {
                            SimError::config(format!("sweep.{key}[{i}]"), rule)
                        }
                        other => other,
                    })?
                    .validate_without_sweep()?;
            }
        }
        self.validate_without_sweep()
    }

    fn validate_without_sweep(&self) -> Result<()> {
        let base = self.base_environment()?;
        if let Some(m) = &base.arm_modulation {
            if m.n_arms() != self.recommender.n_arms {
                return Err(SimError::config(
                    "recommender.n_arms",
                    format!("environment defines {} arms", m.n_arms()),
                ));
            }
        }
        if self.misrepresentation.enabled && base.state_by_label(crate::mdp::HEALTHY_LABEL).is_none() {
            return Err(SimError::config(
                "misrepresentation.enabled",
                "environment has no Healthy state",
            ));
        }
        Ok(())
    }

    /// Copy of this config with one sweep parameter set and the sweep cleared.
    pub fn with_parameter(&self, key: &str, value: &Value) -> Result<ExperimentConfig> {
        let mut out = self.clone();
        out.sweep.clear();
        let path = format!("sweep.{key}");
        match key {
            "beta" => {
                let beta = value
                    .as_f64()
                    .ok_or_else(|| SimError::config(&path, "expected a number"))?;
                out.agent.beta = beta;
                check_range(&path, beta, (0.0..=1.0).contains(&beta), "[0,1]")?;
            }
            "mbus" => {
                let mbus = value
                    .as_u64()
                    .and_then(|v| u32::try_from(v).ok())
                    .ok_or_else(|| SimError::config(&path, "expected a non-negative integer"))?;
                out.agent.mbus = mbus;
            }
            other => {
                return Err(SimError::config(
                    format!("sweep.{other}"),
                    format!("unknown sweep parameter (supported: {})", SWEEP_PARAMETERS.join(", ")),
                ))
            }
        }
        Ok(out)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }
}

fn check_range(path: &str, value: f64, ok: bool, range: &str) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(SimError::config(path, format!("out of range {range} (got {value})")))
    }
}

/// Parses and validates a config document, filling in every default.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SimError::config(path, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_config(&text)
}

/// Writes `resolved_config.json` into `out_dir`.
pub fn write_resolved_config(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<std::path::PathBuf> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| SimError::io(out_dir, e))?;
    let path = out_dir.join("resolved_config.json");
    let mut text = cfg.to_json_pretty();
    text.push('\n');
    fs::write(&path, text).map_err(|e| SimError::io(&path, e))?;
    Ok(path)
}
