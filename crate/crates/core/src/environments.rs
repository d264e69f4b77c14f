//! Built-in environments (simplified, advanced, refined recommender), the
//! recommender arm table, and the misrepresentation transform.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::mdp::{
    validate_spec, ActionId, EnvironmentSpec, Outcome, StateId, ValidationReport, HEALTHY_LABEL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentLevel {
    Simplified,
    Advanced,
    #[serde(alias = "refined")]
    RefinedRecommender,
}

impl EnvironmentLevel {
    pub fn name(self) -> &'static str {
        match self {
            EnvironmentLevel::Simplified => "simplified",
            EnvironmentLevel::Advanced => "advanced",
            EnvironmentLevel::RefinedRecommender => "refined_recommender",
        }
    }
}

/// Per-arm content parameters of the recommender.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmTable {
    pub n_arms: usize,
    /// Reward the user gets for keep-scrolling in heavy use under this arm.
    pub user_reward_mean: Vec<f64>,
    /// Chance that a keep-scrolling step counts as engagement with the content.
    pub accept_probability: Vec<f64>,
    /// Added to the probability of entering Aftereffects from modulated rows.
    pub aftereffect_shift: Vec<f64>,
}

impl Default for ArmTable {
    fn default() -> Self {
        ArmTable {
            n_arms: 4,
            user_reward_mean: vec![0.2, 0.4, 0.6, 0.8],
            accept_probability: vec![0.4, 0.55, 0.7, 0.85],
            aftereffect_shift: vec![0.0, 0.05, 0.10, 0.15],
        }
    }
}

impl ArmTable {
    /// The default table for four arms; other counts interpolate linearly
    /// between the default table's first and last arm.
    pub fn with_arms(n_arms: usize) -> Self {
        let default = ArmTable::default();
        if n_arms == default.n_arms {
            return default;
        }
        let lerp = |lo: f64, hi: f64, i: usize| {
            if n_arms <= 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n_arms - 1) as f64
            }
        };
        ArmTable {
            n_arms,
            user_reward_mean: (0..n_arms).map(|i| lerp(0.2, 0.8, i)).collect(),
            accept_probability: (0..n_arms).map(|i| lerp(0.4, 0.85, i)).collect(),
            aftereffect_shift: (0..n_arms).map(|i| lerp(0.0, 0.15, i)).collect(),
        }
    }

    /// Expected engagement signal per arm for a user who always keeps scrolling,
    /// weighted by the content reward. The recommender should learn this order.
    pub fn effective_reward(&self) -> Vec<f64> {
        self.accept_probability
            .iter()
            .zip(&self.user_reward_mean)
            .map(|(p, r)| p * r)
            .collect()
    }

    /// Arm indices sorted by decreasing effective reward (ties by index).
    pub fn effective_order(&self) -> Vec<usize> {
        let eff = self.effective_reward();
        let mut order: Vec<usize> = (0..self.n_arms).collect();
        order.sort_by(|&a, &b| eff[b].total_cmp(&eff[a]).then(a.cmp(&b)));
        order
    }

    pub fn validate(&self, report: &mut ValidationReport) {
        if self.n_arms == 0 {
            report.push("arm_modulation.arms.n_arms", "need at least one arm", Some(0.0));
        }
        for (name, col) in [
            ("user_reward_mean", &self.user_reward_mean),
            ("accept_probability", &self.accept_probability),
            ("aftereffect_shift", &self.aftereffect_shift),
        ] {
            if col.len() != self.n_arms {
                report.push(
                    format!("arm_modulation.arms.{name}"),
                    format!("expected {} entries", self.n_arms),
                    Some(col.len() as f64),
                );
            }
            if let Some(bad) = col.iter().find(|v| !v.is_finite()) {
                report.push(format!("arm_modulation.arms.{name}"), "non-finite value", Some(*bad));
            }
        }
        for (i, p) in self.accept_probability.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                report.push(
                    format!("arm_modulation.arms.accept_probability[{i}]"),
                    "out of range [0,1]",
                    Some(*p),
                );
            }
        }
    }
}

/// A `(state, action)` row whose reward and Aftereffects risk depend on the
/// recommender's current arm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatedRow {
    pub s: usize,
    pub a: usize,
    pub aftereffects: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmModulation {
    pub arms: ArmTable,
    /// The keep-scrolling action; choosing it in an interaction state accepts
    /// the recommendation.
    pub accept_action: usize,
    pub targets: Vec<ModulatedRow>,
}

impl ArmModulation {
    pub fn n_arms(&self) -> usize {
        self.arms.n_arms
    }

    pub(crate) fn validate_against(&self, spec: &EnvironmentSpec, report: &mut ValidationReport) {
        self.arms.validate(report);
        for &st in &spec.interaction_states {
            if st.0 < spec.n_states() && self.accept_action >= spec.n_actions(st) {
                report.push(
                    "arm_modulation.accept_action",
                    format!("interaction state {st} has no such action"),
                    Some(self.accept_action as f64),
                );
            }
        }
        for (i, t) in self.targets.iter().enumerate() {
            let loc = format!("arm_modulation.targets[{i}]");
            if !spec.contains_pair(StateId(t.s), ActionId(t.a)) {
                report.push(loc, format!("unknown pair (s={},a={})", t.s, t.a), None);
            } else if !spec.transitions[t.s][t.a]
                .iter()
                .any(|o| o.next.0 == t.aftereffects)
            {
                report.push(loc, "aftereffects state is not an outcome of the row", None);
            }
        }
    }

    pub fn targets_state(&self, state: StateId) -> bool {
        self.targets.iter().any(|t| t.s == state.0)
    }

    /// Rows of `state` as experienced under `arm`: targeted rows get the arm's
    /// reward on every non-Aftereffects outcome and the shifted, clamped
    /// Aftereffects probability, with the other outcomes rescaled to keep the
    /// row stochastic.
    pub fn modulated_rows(&self, spec: &EnvironmentSpec, state: StateId, arm: usize) -> Vec<Vec<Outcome>> {
        let mut rows = spec.transitions[state.0].clone();
        for t in self.targets.iter().filter(|t| t.s == state.0) {
            modulate_row(
                &mut rows[t.a],
                StateId(t.aftereffects),
                self.arms.user_reward_mean[arm],
                self.arms.aftereffect_shift[arm],
            );
        }
        rows
    }
}

fn modulate_row(row: &mut [Outcome], aftereffects: StateId, reward: f64, shift: f64) {
    let base = row
        .iter()
        .find(|o| o.next == aftereffects)
        .map_or(0.0, |o| o.prob);
    let shifted = (base + shift).clamp(0.0, 1.0);
    let rest = 1.0 - base;
    let scale = if rest > 0.0 { (1.0 - shifted) / rest } else { 0.0 };
    for o in row.iter_mut() {
        if o.next == aftereffects {
            o.prob = if rest > 0.0 { shifted } else { o.prob };
        } else {
            o.prob *= scale;
            o.reward = reward;
        }
    }
}

mod simplified {
    pub const NEUTRAL: usize = 0;
    pub const HEALTHY: usize = 1;
    pub const INTERACTION: usize = 2;
    pub const AFTEREFFECTS: usize = 3;
}

mod advanced {
    pub const NEUTRAL: usize = 0;
    pub const HEALTHY: usize = 1;
    pub const INTERACTION: usize = 2;
    pub const ENGAGED: usize = 3;
    pub const AFTEREFFECTS: usize = 4;
    pub const RECOVERY: usize = 5;
}

/// State indices of the refined-recommender environment.
pub mod refined {
    pub const NEUTRAL: usize = 0;
    pub const HEALTHY: usize = 1;
    pub const LIGHT_USE: usize = 2;
    pub const HEAVY_USE: usize = 3;
    pub const AFTEREFFECTS: usize = 4;
    pub const RECOVERY: usize = 5;
}

/// Action indices shared by all built-in environments.
pub mod actions {
    /// Neutral: go do something healthy.
    pub const DO_HEALTHY: usize = 0;
    /// Neutral: open social media.
    pub const OPEN_SOCIAL: usize = 1;
    /// Interaction states: keep scrolling.
    pub const KEEP_SCROLLING: usize = 0;
    /// Interaction states: quit back to Neutral.
    pub const QUIT: usize = 1;
    /// Single-action states.
    pub const CONTINUE: usize = 0;
}

const GAMMA_REFERENCE: f64 = 0.9;

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn build_simplified() -> EnvironmentSpec {
    use simplified::*;
    let o = Outcome::new;
    EnvironmentSpec {
        state_labels: labels(&["Neutral", "Healthy", "Interaction", "Aftereffects"]),
        transitions: vec![
            vec![vec![o(HEALTHY, 1.0, 1.0)], vec![o(INTERACTION, 1.0, 0.3)]],
            vec![vec![o(NEUTRAL, 1.0, 0.0)]],
            vec![
                vec![o(INTERACTION, 0.7, 0.4), o(AFTEREFFECTS, 0.3, -2.0)],
                vec![o(NEUTRAL, 1.0, 0.0)],
            ],
            vec![vec![o(NEUTRAL, 1.0, -0.5)]],
        ],
        start_state: StateId(NEUTRAL),
        interaction_states: vec![StateId(INTERACTION)],
        gamma_reference: GAMMA_REFERENCE,
        arm_modulation: None,
        misrepresented: false,
    }
}

pub fn build_advanced() -> EnvironmentSpec {
    use advanced::*;
    let o = Outcome::new;
    EnvironmentSpec {
        state_labels: labels(&[
            "Neutral",
            "Healthy",
            "Interaction",
            "EngagedBrowsing",
            "Aftereffects",
            "Recovery",
        ]),
        transitions: vec![
            vec![
                vec![o(HEALTHY, 0.9, 1.0), o(NEUTRAL, 0.1, 0.0)],
                vec![o(INTERACTION, 1.0, 0.3)],
            ],
            vec![vec![o(NEUTRAL, 1.0, 0.0)]],
            vec![
                vec![
                    o(ENGAGED, 0.5, 0.5),
                    o(INTERACTION, 0.3, 0.4),
                    o(AFTEREFFECTS, 0.2, -2.0),
                ],
                vec![o(NEUTRAL, 1.0, 0.0)],
            ],
            vec![
                vec![o(AFTEREFFECTS, 0.6, -2.5), o(ENGAGED, 0.4, 0.5)],
                vec![o(NEUTRAL, 1.0, 0.0)],
            ],
            vec![vec![o(RECOVERY, 1.0, -0.5)]],
            vec![vec![o(NEUTRAL, 1.0, -0.2)]],
        ],
        start_state: StateId(NEUTRAL),
        interaction_states: vec![StateId(INTERACTION), StateId(ENGAGED)],
        gamma_reference: GAMMA_REFERENCE,
        arm_modulation: None,
        misrepresented: false,
    }
}

/// Base Aftereffects probability of heavy-use scrolling before the arm shift.
pub const HEAVY_USE_AFTEREFFECTS: f64 = 0.35;
/// Aftereffects probability of light-use scrolling.
pub const LIGHT_USE_AFTEREFFECTS: f64 = 0.05;

pub fn build_refined(arms: ArmTable) -> Result<EnvironmentSpec> {
    use refined::*;
    let mut report = ValidationReport::default();
    arms.validate(&mut report);
    if !report.is_ok() {
        return Err(SimError::InvalidSpec(report));
    }
    // The stored heavy-use reward is the arm average; the simulation
    // overwrites it with the current arm's value every step.
    let base_reward = arms.user_reward_mean.iter().sum::<f64>() / arms.n_arms as f64;
    let o = Outcome::new;
    let spec = EnvironmentSpec {
        state_labels: labels(&[
            "Neutral",
            "Healthy",
            "LightUse",
            "HeavyUse",
            "Aftereffects",
            "Recovery",
        ]),
        transitions: vec![
            vec![
                vec![o(HEALTHY, 0.9, 1.0), o(NEUTRAL, 0.1, 0.0)],
                vec![o(LIGHT_USE, 1.0, 0.3)],
            ],
            vec![vec![o(NEUTRAL, 1.0, 0.0)]],
            vec![
                vec![
                    o(HEAVY_USE, 0.8, 0.4),
                    o(AFTEREFFECTS, LIGHT_USE_AFTEREFFECTS, -1.0),
                    o(LIGHT_USE, 0.15, 0.4),
                ],
                vec![o(NEUTRAL, 1.0, 0.0)],
            ],
            vec![
                vec![
                    o(AFTEREFFECTS, HEAVY_USE_AFTEREFFECTS, -3.0),
                    o(HEAVY_USE, 1.0 - HEAVY_USE_AFTEREFFECTS, base_reward),
                ],
                vec![o(NEUTRAL, 1.0, 0.0)],
            ],
            vec![vec![o(RECOVERY, 1.0, -0.5)]],
            vec![vec![o(NEUTRAL, 1.0, -0.2)]],
        ],
        start_state: StateId(NEUTRAL),
        interaction_states: vec![StateId(LIGHT_USE), StateId(HEAVY_USE)],
        gamma_reference: GAMMA_REFERENCE,
        arm_modulation: Some(ArmModulation {
            arms,
            accept_action: actions::KEEP_SCROLLING,
            targets: vec![ModulatedRow {
                s: HEAVY_USE,
                a: actions::KEEP_SCROLLING,
                aftereffects: AFTEREFFECTS,
            }],
        }),
        misrepresented: false,
    };
    validate_spec(&spec).into_result()?;
    Ok(spec)
}

pub fn build(level: EnvironmentLevel, arms: ArmTable) -> Result<EnvironmentSpec> {
    match level {
        EnvironmentLevel::Simplified => Ok(build_simplified()),
        EnvironmentLevel::Advanced => Ok(build_advanced()),
        EnvironmentLevel::RefinedRecommender => build_refined(arms),
    }
}

/// Removes every transition into Healthy, renormalising each affected row over
/// its remaining outcomes. A row left with no mass becomes a zero-reward
/// self-loop.
pub fn apply_misrepresentation(spec: &EnvironmentSpec) -> Result<EnvironmentSpec> {
    let healthy = spec.state_by_label(HEALTHY_LABEL).ok_or_else(|| {
        SimError::Contract(format!("no state labelled {HEALTHY_LABEL}"))
    })?;
    let mut out = spec.clone();
    for (s, actions) in out.transitions.iter_mut().enumerate() {
        for row in actions.iter_mut() {
            if !row.iter().any(|o| o.next == healthy && o.prob > 0.0) {
                continue;
            }
            row.retain(|o| o.next != healthy);
            let mass: f64 = row.iter().map(|o| o.prob).sum();
            if mass > 0.0 {
                for o in row.iter_mut() {
                    o.prob /= mass;
                }
            } else {
                row.clear();
                row.push(Outcome::new(s, 1.0, 0.0));
            }
        }
    }
    out.misrepresented = true;
    validate_spec(&out).into_result()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{greedy_policy, optimal_q};

    fn prob_into(spec: &EnvironmentSpec, target: usize) -> f64 {
        spec.transitions
            .iter()
            .flatten()
            .flatten()
            .filter(|o| o.next.0 == target)
            .map(|o| o.prob)
            .sum()
    }

    #[test]
    fn builders_validate() {
        assert!(validate_spec(&build_simplified()).is_ok());
        assert!(validate_spec(&build_advanced()).is_ok());
        assert!(validate_spec(&build_refined(ArmTable::default()).unwrap()).is_ok());
    }

    #[test]
    fn state_counts() {
        assert_eq!(build_simplified().n_states(), 4);
        assert_eq!(build_advanced().n_states(), 6);
        assert_eq!(build_refined(ArmTable::default()).unwrap().n_states(), 6);
    }

    #[test]
    fn default_arm_table() {
        let arms = ArmTable::default();
        assert_eq!(arms.n_arms, 4);
        let best = arms
            .user_reward_mean
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(best, 3);
        assert_eq!(arms.effective_order(), vec![3, 2, 1, 0]);
        assert_eq!(ArmTable::with_arms(4), arms);
    }

    #[test]
    fn interpolated_arm_tables() {
        let one = ArmTable::with_arms(1);
        assert_eq!(one.user_reward_mean, vec![0.2]);
        let seven = ArmTable::with_arms(7);
        assert_eq!(seven.accept_probability.len(), 7);
        assert!((seven.aftereffect_shift[6] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn refined_rejects_bad_arms() {
        let mut arms = ArmTable::default();
        arms.accept_probability[2] = 1.5;
        assert!(build_refined(arms).is_err());
        let mut arms = ArmTable::default();
        arms.n_arms = 0;
        arms.user_reward_mean.clear();
        arms.accept_probability.clear();
        arms.aftereffect_shift.clear();
        assert!(build_refined(arms).is_err());
    }

    #[test]
    fn heavy_use_is_riskier_than_light_use_for_every_arm() {
        let spec = build_refined(ArmTable::default()).unwrap();
        let m = spec.arm_modulation.as_ref().unwrap();
        let ae = StateId(refined::AFTEREFFECTS);
        let light: f64 = spec.transitions[refined::LIGHT_USE][actions::KEEP_SCROLLING]
            .iter()
            .filter(|o| o.next == ae)
            .map(|o| o.prob)
            .sum();
        for arm in 0..m.n_arms() {
            let rows = m.modulated_rows(&spec, StateId(refined::HEAVY_USE), arm);
            let keep = &rows[actions::KEEP_SCROLLING];
            let heavy: f64 = keep.iter().filter(|o| o.next == ae).map(|o| o.prob).sum();
            assert!(heavy > light, "arm {arm}: {heavy} <= {light}");
            let sum: f64 = keep.iter().map(|o| o.prob).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            let stay = keep.iter().find(|o| o.next.0 == refined::HEAVY_USE).unwrap();
            assert_eq!(stay.reward, m.arms.user_reward_mean[arm]);
        }
    }

    #[test]
    fn modulation_clamps_and_renormalises() {
        let mut arms = ArmTable::default();
        arms.aftereffect_shift[0] = 0.9;
        arms.aftereffect_shift[1] = -0.9;
        let spec = build_refined(arms).unwrap();
        let m = spec.arm_modulation.as_ref().unwrap();
        let heavy = StateId(refined::HEAVY_USE);
        let up = &m.modulated_rows(&spec, heavy, 0)[0];
        assert_eq!(up[0].prob, 1.0);
        assert_eq!(up[1].prob, 0.0);
        let down = &m.modulated_rows(&spec, heavy, 1)[0];
        assert_eq!(down[0].prob, 0.0);
        assert!((down[1].prob - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_arm_table_gives_arm_independent_dynamics() {
        let arms = ArmTable {
            n_arms: 3,
            user_reward_mean: vec![0.5; 3],
            accept_probability: vec![0.5; 3],
            aftereffect_shift: vec![0.0; 3],
        };
        let spec = build_refined(arms).unwrap();
        let m = spec.arm_modulation.as_ref().unwrap();
        for s in 0..spec.n_states() {
            for arm in 0..3 {
                assert_eq!(m.modulated_rows(&spec, StateId(s), arm), spec.transitions[s]);
            }
        }
    }

    #[test]
    fn reference_policy_prefers_healthy_at_neutral() {
        for spec in [
            build_simplified(),
            build_advanced(),
            build_refined(ArmTable::default()).unwrap(),
        ] {
            let q = optimal_q(&spec, 0.9, 1e-8).unwrap();
            let policy = greedy_policy(&q, 1e-9);
            assert_eq!(policy[0], vec![ActionId(actions::DO_HEALTHY)], "{:?}", spec.state_labels);
        }
    }

    #[test]
    fn misrepresentation_removes_healthy_mass() {
        for spec in [
            build_simplified(),
            build_advanced(),
            build_refined(ArmTable::default()).unwrap(),
        ] {
            let healthy = spec.state_by_label("Healthy").unwrap().0;
            assert!(prob_into(&spec, healthy) > 0.0);
            let m = apply_misrepresentation(&spec).unwrap();
            assert_eq!(prob_into(&m, healthy), 0.0);
            assert!(m.misrepresented);
            assert!(validate_spec(&m).is_ok());
            assert_eq!(apply_misrepresentation(&m).unwrap(), m);
        }
    }

    #[test]
    fn misrepresentation_renormalises_rows() {
        let mut spec = build_simplified();
        spec.transitions[0][0] = vec![
            Outcome::new(simplified::HEALTHY, 0.5, 1.0),
            Outcome::new(simplified::NEUTRAL, 0.5, 0.25),
        ];
        let m = apply_misrepresentation(&spec).unwrap();
        assert_eq!(m.transitions[0][0], vec![Outcome::new(simplified::NEUTRAL, 1.0, 0.25)]);
        // the simplified healthy action only led to Healthy: becomes a self-loop
        let m = apply_misrepresentation(&build_simplified()).unwrap();
        assert_eq!(m.transitions[0][0], vec![Outcome::new(simplified::NEUTRAL, 1.0, 0.0)]);
    }

    #[test]
    fn misrepresentation_requires_healthy_state() {
        let mut spec = build_simplified();
        spec.state_labels[1] = "Gym".into();
        assert!(matches!(apply_misrepresentation(&spec), Err(SimError::Contract(_))));
    }
}
