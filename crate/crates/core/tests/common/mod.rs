//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use overuse_sim::mdp::{EnvironmentSpec, Outcome, QTable, StateId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Exact action values of a fixed deterministic policy.
pub fn policy_q(spec: &EnvironmentSpec, policy: &[usize], gamma: f64) -> Vec<Vec<f64>> {
    let n = spec.n_states();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        a[s][s] += 1.0;
        for o in &spec.transitions[s][policy[s]] {
            a[s][o.next.0] -= gamma * o.prob;
            b[s] += o.prob * o.reward;
        }
    }
    let v = solve(a, b);
    spec.transitions
        .iter()
        .map(|acts| {
            acts.iter()
                .map(|row| row.iter().map(|o| o.prob * (o.reward + gamma * v[o.next.0])).sum())
                .collect()
        })
        .collect()
}

/// Optimal action values by enumerating every deterministic policy: the
/// optimal policy's Q dominates all others elementwise, so the elementwise
/// maximum over policies is Q*.
pub fn enumerate_optimal_q(spec: &EnvironmentSpec, gamma: f64) -> Vec<Vec<f64>> {
    let shape = spec.actions_per_state();
    let mut best: Vec<Vec<f64>> = shape.iter().map(|&k| vec![f64::NEG_INFINITY; k]).collect();
    let mut policy = vec![0usize; shape.len()];
    loop {
        let q = policy_q(spec, &policy, gamma);
        for (b, row) in best.iter_mut().zip(&q) {
            for (x, &y) in b.iter_mut().zip(row) {
                *x = x.max(y);
            }
        }
        // Odometer increment over the policy space.
        let mut i = 0;
        loop {
            if i == policy.len() {
                return best;
            }
            policy[i] += 1;
            if policy[i] < shape[i] {
                break;
            }
            policy[i] = 0;
            i += 1;
        }
    }
}

pub fn max_norm(a: &QTable, b: &[Vec<f64>]) -> f64 {
    a.rows()
        .iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn spec_from_transitions(transitions: Vec<Vec<Vec<Outcome>>>) -> EnvironmentSpec {
    let n = transitions.len();
    let mut labels: Vec<String> = (0..n).map(|s| format!("S{s}")).collect();
    if n > 1 {
        labels[1] = "Healthy".into();
    }
    EnvironmentSpec {
        state_labels: labels,
        transitions,
        start_state: StateId(0),
        interaction_states: Vec::new(),
        gamma_reference: 0.9,
        arm_modulation: None,
        misrepresented: false,
    }
}

/// A random MDP with `1..=max_states` states and `1..=max_actions` actions
/// per state. Sparse rows drop next states at random; dense rows keep every
/// next state with positive probability.
pub fn random_mdp(seed: u64, max_states: usize, max_actions: usize, dense: bool) -> EnvironmentSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_states);
    let transitions = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=max_actions);
            (0..k)
                .map(|_| {
                    let mut weights: Vec<f64> = (0..n)
                        .map(|_| {
                            if !dense && rng.gen_bool(0.4) {
                                0.0
                            } else {
                                rng.gen_range(0.05..1.0)
                            }
                        })
                        .collect();
                    if weights.iter().all(|&w| w == 0.0) {
                        let i = rng.gen_range(0..n);
                        weights[i] = 1.0;
                    }
                    let total: f64 = weights.iter().sum();
                    weights
                        .iter()
                        .enumerate()
                        .filter(|(_, &w)| w > 0.0)
                        .map(|(s2, &w)| Outcome::new(s2, w / total, rng.gen_range(-1.0..1.0)))
                        .collect()
                })
                .collect()
        })
        .collect();
    spec_from_transitions(transitions)
}

/// Deterministic three-state cycle: action 0 advances `s -> s+1 mod 3`
/// (reward 1 when wrapping from the last state), action 1 stays put
/// (reward 0.1).
pub fn chain3() -> EnvironmentSpec {
    let transitions = (0..3)
        .map(|s| {
            let wrap = if s == 2 { 1.0 } else { 0.0 };
            vec![
                vec![Outcome::new((s + 1) % 3, 1.0, wrap)],
                vec![Outcome::new(s, 1.0, 0.1)],
            ]
        })
        .collect();
    spec_from_transitions(transitions)
}
