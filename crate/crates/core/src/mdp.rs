//! Tabular MDP data model: environment specifications, validation,
//! stochastic stepping and the optimal-Q reference.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environments::ArmModulation;
use crate::error::{Result, SimError};

/// Row sums must hit 1 within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Default convergence tolerance for [`optimal_q`].
pub const DEFAULT_REFERENCE_TOL: f64 = 1e-8;

/// Label that identifies the healthy state for the misrepresentation rules.
pub const HEALTHY_LABEL: &str = "Healthy";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One entry of a transition row: where the step lands, how likely it is and
/// the reward attached to the `(s, a, s')` triple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub next: StateId,
    pub prob: f64,
    pub reward: f64,
}

impl Outcome {
    pub fn new(next: usize, prob: f64, reward: f64) -> Self {
        Outcome {
            next: StateId(next),
            prob,
            reward,
        }
    }
}

/// Transition rows indexed `[state][action]`, each a list of outcomes in
/// stored (sampling) order.
pub type Dynamics = Vec<Vec<Vec<Outcome>>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDocument", into = "SpecDocument")]
pub struct EnvironmentSpec {
    pub state_labels: Vec<String>,
    pub transitions: Dynamics,
    pub start_state: StateId,
    pub interaction_states: Vec<StateId>,
    pub gamma_reference: f64,
    pub arm_modulation: Option<ArmModulation>,
    pub misrepresented: bool,
}

impl EnvironmentSpec {
    pub fn n_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn n_actions(&self, state: StateId) -> usize {
        self.transitions[state.0].len()
    }

    pub fn actions_per_state(&self) -> Vec<usize> {
        self.transitions.iter().map(Vec::len).collect()
    }

    pub fn row(&self, state: StateId, action: ActionId) -> &[Outcome] {
        &self.transitions[state.0][action.0]
    }

    pub fn state_by_label(&self, label: &str) -> Option<StateId> {
        self.state_labels
            .iter()
            .position(|l| l == label)
            .map(StateId)
    }

    pub fn is_interaction(&self, state: StateId) -> bool {
        self.interaction_states.contains(&state)
    }

    pub fn contains_pair(&self, state: StateId, action: ActionId) -> bool {
        state.0 < self.n_states() && action.0 < self.n_actions(state)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization is infallible")
    }
}

/// A single broken invariant found by [`validate_spec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub location: String,
    pub rule: String,
    pub measured: Option<f64>,
}

impl Violation {
    fn new(location: impl Into<String>, rule: impl Into<String>, measured: Option<f64>) -> Self {
        Violation {
            location: location.into(),
            rule: rule.into(),
            measured,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.rule)?;
        if let Some(v) = self.measured {
            write!(f, " (measured {v})")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn push(
        &mut self,
        location: impl Into<String>,
        rule: impl Into<String>,
        measured: Option<f64>,
    ) {
        self.violations
            .push(Violation::new(location, rule, measured));
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(SimError::InvalidSpec(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of `spec`. Violations are returned as
/// data; this never fails.
pub fn validate_spec(spec: &EnvironmentSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = spec.n_states();
    if n == 0 {
        report.push("n_states", "environment has no states", Some(0.0));
        return report;
    }
    if spec.transitions.len() != n {
        report.push(
            "transitions",
            format!("expected rows for {n} states"),
            Some(spec.transitions.len() as f64),
        );
        return report;
    }

    for (s, actions) in spec.transitions.iter().enumerate() {
        if actions.is_empty() {
            report.push(format!("state {s}"), "state has no actions", Some(0.0));
        }
        for (a, row) in actions.iter().enumerate() {
            validate_row(row, n, &format!("row (s={s},a={a})"), &mut report);
        }
    }

    if spec.start_state.0 >= n {
        report.push(
            "start_state",
            "start state out of range",
            Some(spec.start_state.0 as f64),
        );
    }
    for st in &spec.interaction_states {
        if st.0 >= n {
            report.push(
                "interaction_states",
                "interaction state out of range",
                Some(st.0 as f64),
            );
        }
    }
    if !(0.0..1.0).contains(&spec.gamma_reference) {
        report.push(
            "gamma_reference",
            "discount must lie in [0,1)",
            Some(spec.gamma_reference),
        );
    }
    if let Some(arms) = &spec.arm_modulation {
        arms.validate_against(spec, &mut report);
    }

    if report.is_ok() {
        let reachable = reachable_states(spec);
        let exempt = if spec.misrepresented {
            spec.state_by_label(HEALTHY_LABEL)
        } else {
            None
        };
        for s in 0..n {
            if !reachable[s] && exempt != Some(StateId(s)) {
                report.push(
                    format!("state {s} ({})", spec.state_labels[s]),
                    "unreachable from start state",
                    None,
                );
            }
        }
    }
    report
}

fn validate_row(row: &[Outcome], n_states: usize, location: &str, report: &mut ValidationReport) {
    if row.is_empty() {
        report.push(location, "row has no outcomes", None);
        return;
    }
    let mut seen = BTreeSet::new();
    let mut sum = 0.0;
    for o in row {
        if o.next.0 >= n_states {
            report.push(location, "next state out of range", Some(o.next.0 as f64));
        } else if !seen.insert(o.next) {
            report.push(location, "duplicate next state", Some(o.next.0 as f64));
        }
        if !o.prob.is_finite() {
            report.push(location, "non-finite probability", Some(o.prob));
        } else if o.prob < 0.0 {
            report.push(location, "negative probability", Some(o.prob));
        } else if o.prob > 1.0 {
            report.push(location, "probability above 1", Some(o.prob));
        }
        if !o.reward.is_finite() {
            report.push(location, "non-finite reward", Some(o.reward));
        }
        sum += o.prob;
    }
    if sum.is_finite() && (sum - 1.0).abs() > ROW_SUM_TOL {
        report.push(location, format!("row sums to {sum}"), Some(sum));
    }
}

/// Breadth-first closure over nonzero-probability edges from the start state.
fn reachable_states(spec: &EnvironmentSpec) -> Vec<bool> {
    let mut seen = vec![false; spec.n_states()];
    let mut queue = VecDeque::from([spec.start_state]);
    seen[spec.start_state.0] = true;
    while let Some(s) = queue.pop_front() {
        for row in &spec.transitions[s.0] {
            for o in row.iter().filter(|o| o.prob > 0.0) {
                if !seen[o.next.0] {
                    seen[o.next.0] = true;
                    queue.push_back(o.next);
                }
            }
        }
    }
    seen
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: StateId,
    pub reward: f64,
    /// Dynamics are continuing; this is always `false`.
    pub terminal: bool,
}

/// Inverse-CDF pick over the stored entry order for a uniform draw `u` in
/// `[0, 1)`. Falls back to the last entry with positive mass when rounding
/// leaves the cumulative sum just below `u`.
pub fn sample_row(row: &[Outcome], u: f64) -> &Outcome {
    let mut cumulative = 0.0;
    for o in row {
        cumulative += o.prob;
        if u < cumulative {
            return o;
        }
    }
    row.iter()
        .rev()
        .find(|o| o.prob > 0.0)
        .unwrap_or(&row[row.len() - 1])
}

pub fn step<R: Rng + ?Sized>(
    spec: &EnvironmentSpec,
    state: StateId,
    action: ActionId,
    rng: &mut R,
) -> Result<StepOutcome> {
    if !spec.contains_pair(state, action) {
        return Err(SimError::Contract(format!(
            "no action {action} in state {state}"
        )));
    }
    let u: f64 = rng.gen();
    let o = sample_row(spec.row(state, action), u);
    Ok(StepOutcome {
        next_state: o.next,
        reward: o.reward,
        terminal: false,
    })
}

/// Action values indexed `[state][action]`. Rows may have different lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    rows: Vec<Vec<f64>>,
}

impl QTable {
    pub fn filled(actions_per_state: &[usize], value: f64) -> Self {
        QTable {
            rows: actions_per_state.iter().map(|&n| vec![value; n]).collect(),
        }
    }

    pub fn zeros(actions_per_state: &[usize]) -> Self {
        Self::filled(actions_per_state, 0.0)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        QTable { rows }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    pub fn same_shape(&self, other: &QTable) -> bool {
        self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len())
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.rows[s.0][a.0]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, value: f64) {
        self.rows[s.0][a.0] = value;
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.rows[s.0]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn state_max(&self, s: StateId) -> f64 {
        self.rows[s.0]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> QTable {
        QTable {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    /// Max-norm distance. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        assert!(self.same_shape(other), "Q-table shape mismatch");
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One synchronous Bellman-optimality backup of `q` against `dynamics`.
pub fn bellman_sweep(dynamics: &Dynamics, q: &QTable, gamma: f64) -> QTable {
    let values: Vec<f64> = (0..q.n_states()).map(|s| q.state_max(StateId(s))).collect();
    let rows = dynamics
        .iter()
        .map(|actions| {
            actions
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|o| o.prob * (o.reward + gamma * values[o.next.0]))
                        .sum()
                })
                .collect()
        })
        .collect();
    QTable { rows }
}

/// Synchronous value iteration from Q = 0 until successive sweeps differ by
/// less than `tol` in max-norm.
pub fn optimal_q(spec: &EnvironmentSpec, gamma: f64, tol: f64) -> Result<QTable> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(SimError::Contract(format!(
            "discount {gamma} outside [0,1)"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(SimError::Contract(format!("tolerance {tol} must be positive")));
    }
    let mut q = QTable::zeros(&spec.actions_per_state());
    loop {
        let next = bellman_sweep(&spec.transitions, &q, gamma);
        let delta = next.max_abs_diff(&q);
        q = next;
        if delta < tol {
            return Ok(q);
        }
    }
}

/// Per state, every action whose value is within `tie_tol` of the state max,
/// in ascending index order.
pub fn greedy_policy(q: &QTable, tie_tol: f64) -> Vec<Vec<ActionId>> {
    (0..q.n_states())
        .map(|s| greedy_set(q.row(StateId(s)), tie_tol))
        .collect()
}

pub(crate) fn greedy_set(values: &[f64], tie_tol: f64) -> Vec<ActionId> {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= best - tie_tol)
        .map(|(a, _)| ActionId(a))
        .collect()
}

/// Lowest-index maximiser of a state's row.
pub fn greedy_action(q: &QTable, s: StateId, tie_tol: f64) -> ActionId {
    greedy_set(q.row(s), tie_tol)[0]
}

// JSON document form.

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    s: usize,
    a: usize,
    next: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardEntry {
    s: usize,
    a: usize,
    s2: usize,
    r: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    n_states: usize,
    state_labels: Vec<String>,
    actions_per_state: Vec<usize>,
    transitions: Vec<TransitionEntry>,
    #[serde(default)]
    rewards: Vec<RewardEntry>,
    start_state: usize,
    #[serde(default)]
    interaction_states: Vec<usize>,
    gamma_reference: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arm_modulation: Option<ArmModulation>,
    #[serde(default)]
    misrepresented: bool,
}

impl From<EnvironmentSpec> for SpecDocument {
    fn from(spec: EnvironmentSpec) -> Self {
        let mut transitions = Vec::new();
        let mut rewards = Vec::new();
        for (s, actions) in spec.transitions.iter().enumerate() {
            for (a, row) in actions.iter().enumerate() {
                transitions.push(TransitionEntry {
                    s,
                    a,
                    next: row.iter().map(|o| (o.next.0, o.prob)).collect(),
                });
                rewards.extend(row.iter().map(|o| RewardEntry {
                    s,
                    a,
                    s2: o.next.0,
                    r: o.reward,
                }));
            }
        }
        SpecDocument {
            n_states: spec.state_labels.len(),
            actions_per_state: spec.actions_per_state(),
            state_labels: spec.state_labels,
            transitions,
            rewards,
            start_state: spec.start_state.0,
            interaction_states: spec.interaction_states.iter().map(|s| s.0).collect(),
            gamma_reference: spec.gamma_reference,
            arm_modulation: spec.arm_modulation,
            misrepresented: spec.misrepresented,
        }
    }
}

impl TryFrom<SpecDocument> for EnvironmentSpec {
    type Error = SimError;

    fn try_from(doc: SpecDocument) -> Result<Self> {
        let mut report = ValidationReport::default();
        let n = doc.n_states;
        if doc.state_labels.len() != n {
            report.push(
                "state_labels",
                format!("expected {n} labels"),
                Some(doc.state_labels.len() as f64),
            );
        }
        if doc.actions_per_state.len() != n {
            report.push(
                "actions_per_state",
                format!("expected {n} counts"),
                Some(doc.actions_per_state.len() as f64),
            );
        }
        if !report.is_ok() {
            return Err(SimError::InvalidSpec(report));
        }

        let mut rows: Vec<Vec<Option<Vec<Outcome>>>> = doc
            .actions_per_state
            .iter()
            .map(|&k| vec![None; k])
            .collect();
        for (i, t) in doc.transitions.iter().enumerate() {
            let loc = format!("transitions[{i}]");
            if t.s >= n || t.a >= doc.actions_per_state[t.s] {
                report.push(loc, format!("unknown pair (s={},a={})", t.s, t.a), None);
                continue;
            }
            if rows[t.s][t.a].is_some() {
                report.push(loc, format!("duplicate row (s={},a={})", t.s, t.a), None);
                continue;
            }
            rows[t.s][t.a] = Some(
                t.next
                    .iter()
                    .map(|&(s2, p)| Outcome::new(s2, p, 0.0))
                    .collect(),
            );
        }
        for (i, r) in doc.rewards.iter().enumerate() {
            let slot = rows
                .get_mut(r.s)
                .and_then(|acts| acts.get_mut(r.a))
                .and_then(Option::as_mut)
                .and_then(|row| row.iter_mut().find(|o| o.next.0 == r.s2));
            match slot {
                Some(o) => o.reward = r.r,
                None => report.push(
                    format!("rewards[{i}]"),
                    format!("no transition (s={},a={},s2={})", r.s, r.a, r.s2),
                    None,
                ),
            }
        }
        let mut transitions = Vec::with_capacity(n);
        for (s, acts) in rows.into_iter().enumerate() {
            let mut out = Vec::with_capacity(acts.len());
            for (a, row) in acts.into_iter().enumerate() {
                match row {
                    Some(row) => out.push(row),
                    None => {
                        report.push(format!("row (s={s},a={a})"), "missing transition row", None);
                        out.push(Vec::new());
                    }
                }
            }
            transitions.push(out);
        }
        if !report.is_ok() {
            return Err(SimError::InvalidSpec(report));
        }

        let spec = EnvironmentSpec {
            state_labels: doc.state_labels,
            transitions,
            start_state: StateId(doc.start_state),
            interaction_states: doc.interaction_states.into_iter().map(StateId).collect(),
            gamma_reference: doc.gamma_reference,
            arm_modulation: doc.arm_modulation,
            misrepresented: doc.misrepresented,
        };
        validate_spec(&spec).into_result()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec_from_rows(transitions: Dynamics) -> EnvironmentSpec {
        EnvironmentSpec {
            state_labels: (0..transitions.len()).map(|i| format!("s{i}")).collect(),
            transitions,
            start_state: StateId(0),
            interaction_states: vec![],
            gamma_reference: 0.9,
            arm_modulation: None,
            misrepresented: false,
        }
    }

    fn two_state() -> EnvironmentSpec {
        spec_from_rows(vec![
            vec![
                vec![Outcome::new(1, 1.0, 1.0)],
                vec![Outcome::new(0, 0.5, 0.0), Outcome::new(1, 0.5, 2.0)],
            ],
            vec![vec![Outcome::new(0, 1.0, 0.0)]],
        ])
    }

    #[test]
    fn two_state_spec_is_valid() {
        assert!(validate_spec(&two_state()).is_ok());
    }

    #[test]
    fn short_row_is_reported() {
        let mut spec = two_state();
        spec.transitions[0][1][1].prob = 0.4;
        let report = validate_spec(&spec);
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!(v.location, "row (s=0,a=1)");
        assert_eq!(v.rule, "row sums to 0.9");
        assert_eq!(v.measured, Some(0.9));
    }

    #[test]
    fn negative_probability_is_reported() {
        let mut spec = two_state();
        spec.transitions[0][1] = vec![Outcome::new(0, -0.1, 0.0), Outcome::new(1, 1.1, 0.0)];
        let report = validate_spec(&spec);
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == "negative probability" && v.measured == Some(-0.1)));
    }

    #[test]
    fn unreachable_state_is_reported() {
        let mut spec = two_state();
        spec.state_labels.push("orphan".into());
        spec.transitions.push(vec![vec![Outcome::new(2, 1.0, 0.0)]]);
        let report = validate_spec(&spec);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].rule.contains("unreachable"));
    }

    #[test]
    fn stateless_action_and_bad_gamma_are_reported() {
        let mut spec = two_state();
        spec.transitions[1].clear();
        spec.gamma_reference = 1.0;
        let report = validate_spec(&spec);
        let rules: Vec<_> = report.violations.iter().map(|v| v.rule.as_str()).collect();
        assert!(rules.contains(&"state has no actions"));
        assert!(rules.contains(&"discount must lie in [0,1)"));
    }

    #[test]
    fn deterministic_step_always_lands_on_target() {
        let spec = two_state();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let out = step(&spec, StateId(0), ActionId(0), &mut rng).unwrap();
            assert_eq!(out.next_state, StateId(1));
            assert_eq!(out.reward, 1.0);
            assert!(!out.terminal);
        }
    }

    #[test]
    fn step_frequency_matches_row() {
        let spec = spec_from_rows(vec![
            vec![vec![Outcome::new(1, 0.3, -1.0), Outcome::new(2, 0.7, 4.0)]],
            vec![vec![Outcome::new(0, 1.0, 0.0)]],
            vec![vec![Outcome::new(0, 1.0, 0.0)]],
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut hits = 0;
        for _ in 0..n {
            let out = step(&spec, StateId(0), ActionId(0), &mut rng).unwrap();
            // reward must be the exact table entry for the sampled successor
            match out.next_state.0 {
                1 => {
                    hits += 1;
                    assert_eq!(out.reward, -1.0);
                }
                2 => assert_eq!(out.reward, 4.0),
                other => panic!("impossible successor {other}"),
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn step_rejects_unknown_pair() {
        let spec = two_state();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            step(&spec, StateId(1), ActionId(1), &mut rng),
            Err(SimError::Contract(_))
        ));
        assert!(step(&spec, StateId(7), ActionId(0), &mut rng).is_err());
    }

    #[test]
    fn step_is_reproducible() {
        let spec = two_state();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64)
                .map(|_| step(&spec, StateId(0), ActionId(1), &mut rng).unwrap().next_state)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(99), draw(99));
    }

    #[test]
    fn sample_row_skips_zero_mass_tail_on_rounding() {
        let row = [Outcome::new(0, 0.6, 0.0), Outcome::new(1, 0.4 - 1e-12, 0.0), Outcome::new(2, 0.0, 0.0)];
        assert_eq!(sample_row(&row, 0.999_999_999_999_9).next, StateId(1));
    }

    #[test]
    fn self_loop_value_is_geometric_series() {
        let spec = spec_from_rows(vec![vec![vec![Outcome::new(0, 1.0, 1.0)]]]);
        let q = optimal_q(&spec, 0.9, 1e-8).unwrap();
        assert!((q.get(StateId(0), ActionId(0)) - 10.0).abs() < 1e-6);
    }

    #[test]
    fn zero_discount_gives_expected_one_step_reward() {
        let spec = two_state();
        let q = optimal_q(&spec, 0.0, 1e-12).unwrap();
        assert_eq!(q.get(StateId(0), ActionId(0)), 1.0);
        assert_eq!(q.get(StateId(0), ActionId(1)), 1.0);
        assert_eq!(q.get(StateId(1), ActionId(0)), 0.0);
    }

    #[test]
    fn optimal_q_rejects_bad_parameters() {
        let spec = two_state();
        assert!(optimal_q(&spec, 1.0, 1e-8).is_err());
        assert!(optimal_q(&spec, 0.5, 0.0).is_err());
    }

    #[test]
    fn greedy_policy_examples() {
        let q = QTable::from_rows(vec![
            vec![1.0, 2.0],
            vec![2.0, 2.0],
            vec![2.0, 2.0 - 1e-12],
        ]);
        let p = greedy_policy(&q, 1e-9);
        assert_eq!(p[0], vec![ActionId(1)]);
        assert_eq!(p[1], vec![ActionId(0), ActionId(1)]);
        assert_eq!(p[2], vec![ActionId(0), ActionId(1)]);
        assert_eq!(greedy_action(&q, StateId(1), 1e-9), ActionId(0));
    }

    #[test]
    fn json_round_trip_preserves_spec() {
        let spec = two_state();
        let text = spec.to_json_pretty();
        let back = EnvironmentSpec::from_json_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn json_load_applies_validation() {
        let text = r#"{
            "n_states": 1, "state_labels": ["only"], "actions_per_state": [1],
            "transitions": [{"s": 0, "a": 0, "next": [[0, 0.9]]}],
            "start_state": 0, "gamma_reference": 0.9
        }"#;
        let err = EnvironmentSpec::from_json_str(text).unwrap_err();
        assert!(err.to_string().contains("row (s=0,a=0)"), "{err}");
    }

    #[test]
    fn json_missing_rewards_default_to_zero() {
        let text = r#"{
            "n_states": 1, "state_labels": ["only"], "actions_per_state": [1],
            "transitions": [{"s": 0, "a": 0, "next": [[0, 1.0]]}],
            "start_state": 0, "gamma_reference": 0.5
        }"#;
        let spec = EnvironmentSpec::from_json_str(text).unwrap();
        assert_eq!(spec.transitions[0][0][0].reward, 0.0);
    }

    #[test]
    fn json_reports_structural_problems() {
        let text = r#"{
            "n_states": 2, "state_labels": ["a", "b"], "actions_per_state": [1, 1],
            "transitions": [{"s": 0, "a": 0, "next": [[1, 1.0]]}, {"s": 0, "a": 0, "next": [[1, 1.0]]}],
            "rewards": [{"s": 0, "a": 0, "s2": 0, "r": 1.0}],
            "start_state": 0, "gamma_reference": 0.5
        }"#;
        let err = EnvironmentSpec::from_json_str(text).unwrap_err().to_string();
        assert!(err.contains("duplicate row"), "{err}");
        assert!(err.contains("no transition (s=0,a=0,s2=0)"), "{err}");
        assert!(err.contains("missing transition row"), "{err}");
    }
}
