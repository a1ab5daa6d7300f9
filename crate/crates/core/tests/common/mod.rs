//! Shared fixtures and independent oracles for the integration tests.
//!
//! The evaluators here are deliberately separate implementations (plain
//! recursion over branches, mixed-radix policy enumeration) so they can serve
//! as ground truth for the crate's backward-induction solvers.

#![allow(dead_code)]

use ndarray::{array, Array3, Array4};
use poisonbench_core::mdp::{MdpSpec, Policy, RewardNoise};

/// Fixture F1: S=2, A=2, H=2, deterministic transitions (action 0 stays,
/// action 1 switches states), hand-set rewards, uniform start.
pub fn fixture_f1() -> MdpSpec {
    let transitions = Array4::from_shape_fn((2, 2, 2, 2), |(_, s, a, sp)| {
        let next = if a == 0 { s } else { 1 - s };
        if sp == next {
            1.0
        } else {
            0.0
        }
    });
    let mean_rewards = Array3::from_shape_vec(
        (2, 2, 2),
        vec![
            0.2, 0.7, // h=0, s=0
            0.55, 0.1, // h=0, s=1
            0.8, 0.3, // h=1, s=0
            0.45, 0.9, // h=1, s=1
        ],
    )
    .unwrap();
    MdpSpec {
        num_states: 2,
        num_actions: 2,
        horizon: 2,
        transitions,
        mean_rewards,
        initial_dist: array![0.5, 0.5],
        reward_noise: RewardNoise::Bernoulli,
    }
}

pub fn fixture_f1_deterministic() -> MdpSpec {
    MdpSpec { reward_noise: RewardNoise::Deterministic, ..fixture_f1() }
}

/// The unique optimal policy of F1 (also the fixture target policy; with two
/// actions the only admissible targets are optimal ones).
pub fn f1_pi_star() -> Policy {
    Policy::deterministic(vec![vec![1, 0], vec![0, 1]])
}

/// A suboptimal (and inadmissible) policy on F1.
pub fn f1_all_a0() -> Policy {
    Policy::deterministic(vec![vec![0, 0], vec![0, 0]])
}

/// Stochastic evaluation fixture on F1.
pub fn f1_stochastic() -> Policy {
    Policy::Stochastic {
        probs: vec![
            vec![vec![0.25, 0.75], vec![0.5, 0.5]],
            vec![vec![1.0, 0.0], vec![0.1, 0.9]],
        ],
    }
}

pub fn det_to_probs(actions: &[Vec<usize>], num_actions: usize) -> Vec<Vec<Vec<f64>>> {
    actions
        .iter()
        .map(|row| {
            row.iter()
                .map(|&a| (0..num_actions).map(|i| if i == a { 1.0 } else { 0.0 }).collect())
                .collect()
        })
        .collect()
}

/// Policy value by plain recursion over every action/next-state branch.
pub fn recursive_value(spec: &MdpSpec, probs: &[Vec<Vec<f64>>], s: usize, h: usize) -> f64 {
    if h == spec.horizon {
        return 0.0;
    }
    let mut total = 0.0;
    for a in 0..spec.num_actions {
        let pa = probs[h][s][a];
        if pa == 0.0 {
            continue;
        }
        let mut branch = spec.mean_rewards[[h, s, a]];
        for sp in 0..spec.num_states {
            let p = spec.transitions[[h, s, a, sp]];
            if p > 0.0 {
                branch += p * recursive_value(spec, probs, sp, h + 1);
            }
        }
        total += pa * branch;
    }
    total
}

/// Q-value by recursion: immediate reward plus the recursive policy value of
/// every successor.
pub fn recursive_q(spec: &MdpSpec, probs: &[Vec<Vec<f64>>], s: usize, a: usize, h: usize) -> f64 {
    let mut q = spec.mean_rewards[[h, s, a]];
    for sp in 0..spec.num_states {
        let p = spec.transitions[[h, s, a, sp]];
        if p > 0.0 {
            q += p * recursive_value(spec, probs, sp, h + 1);
        }
    }
    q
}

/// V table (`[h][s]`, `h` in `0..=H`) of a deterministic policy, computed by
/// a test-local backward pass.
pub fn oracle_eval_det(spec: &MdpSpec, actions: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let (h_n, s_n) = (spec.horizon, spec.num_states);
    let mut v = vec![vec![0.0; s_n]; h_n + 1];
    for h in (0..h_n).rev() {
        for s in 0..s_n {
            let a = actions[h][s];
            let mut val = spec.mean_rewards[[h, s, a]];
            for sp in 0..s_n {
                val += spec.transitions[[h, s, a, sp]] * v[h + 1][sp];
            }
            v[h][s] = val;
        }
    }
    v
}

/// Visits every deterministic policy (mixed-radix counter over the S*H cells)
/// and calls `visit` with its action table.
pub fn for_each_det_policy(spec: &MdpSpec, mut visit: impl FnMut(&[Vec<usize>])) {
    let cells = spec.num_states * spec.horizon;
    let mut digits = vec![0usize; cells];
    let mut actions = vec![vec![0usize; spec.num_states]; spec.horizon];
    loop {
        for h in 0..spec.horizon {
            for s in 0..spec.num_states {
                actions[h][s] = digits[h * spec.num_states + s];
            }
        }
        visit(&actions);
        let mut i = 0;
        loop {
            if i == cells {
                return;
            }
            digits[i] += 1;
            if digits[i] < spec.num_actions {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Pointwise maximum of `V^pi[h][s]` over every deterministic policy.
pub fn brute_force_optimal_values(spec: &MdpSpec) -> Vec<Vec<f64>> {
    let mut best = vec![vec![f64::NEG_INFINITY; spec.num_states]; spec.horizon + 1];
    for row in best[spec.horizon].iter_mut() {
        *row = 0.0;
    }
    for_each_det_policy(spec, |actions| {
        let v = oracle_eval_det(spec, actions);
        for h in 0..spec.horizon {
            for s in 0..spec.num_states {
                if v[h][s] > best[h][s] {
                    best[h][s] = v[h][s];
                }
            }
        }
    });
    best
}
