//! Exact-solver checks against the fixture F1 oracles: frozen hand-computed
//! rationals, branch-recursion evaluation, and exhaustive policy enumeration.

mod common;

use common::*;
use poisonbench_core::mdp::{
    build_alpha_attacked_mdp, check_target_admissible, evaluate_policy, minimum_gap,
    solve_optimal, worst_action_policy, Policy,
};

const TOL: f64 = 1e-12;

#[test]
fn f1_deterministic_policy_evaluation_matches_recursion_and_frozen_values() {
    let spec = fixture_f1();
    let pi = f1_pi_star();
    let tables = evaluate_policy(&spec, &pi).unwrap();

    let probs = det_to_probs(pi.action_table().unwrap(), 2);
    for h in 0..2 {
        for s in 0..2 {
            let oracle = recursive_value(&spec, &probs, s, h);
            assert!((tables.v[[h, s]] - oracle).abs() < TOL, "(h={h}, s={s})");
            for a in 0..2 {
                let oracle_q = recursive_q(&spec, &probs, s, a, h);
                assert!((tables.q[[h, s, a]] - oracle_q).abs() < TOL);
            }
        }
    }
    // Hand-computed: V* = [[8/5, 29/20], [4/5, 9/10]].
    assert!((tables.v[[0, 0]] - 1.6).abs() < TOL);
    assert!((tables.v[[0, 1]] - 1.45).abs() < TOL);
    assert!((tables.v[[1, 0]] - 0.8).abs() < TOL);
    assert!((tables.v[[1, 1]] - 0.9).abs() < TOL);
    assert_eq!(tables.v[[2, 0]], 0.0);
    assert_eq!(tables.v[[2, 1]], 0.0);
}

#[test]
fn f1_stochastic_policy_evaluation_matches_recursion_and_frozen_values() {
    let spec = fixture_f1();
    let pi = f1_stochastic();
    let tables = evaluate_policy(&spec, &pi).unwrap();
    let Policy::Stochastic { probs } = &pi else { unreachable!() };
    for h in 0..2 {
        for s in 0..2 {
            let oracle = recursive_value(&spec, probs, s, h);
            assert!((tables.v[[h, s]] - oracle).abs() < TOL, "(h={h}, s={s})");
        }
    }
    // Hand-computed rationals: 1133/800, 461/400, 4/5, 171/200.
    assert!((tables.v[[0, 0]] - 1.41625).abs() < TOL);
    assert!((tables.v[[0, 1]] - 1.1525).abs() < TOL);
    assert!((tables.v[[1, 0]] - 0.8).abs() < TOL);
    assert!((tables.v[[1, 1]] - 0.855).abs() < TOL);
    assert!((tables.q[[0, 0, 1]] - 1.555).abs() < TOL);
    assert!((tables.q[[0, 1, 0]] - 1.405).abs() < TOL);
}

#[test]
fn f1_optimal_solution_matches_exhaustive_enumeration() {
    let spec = fixture_f1();
    let (tables, pi) = solve_optimal(&spec);
    assert_eq!(pi, f1_pi_star());
    let brute = brute_force_optimal_values(&spec);
    for h in 0..=2 {
        for s in 0..2 {
            assert!((tables.v[[h, s]] - brute[h][s]).abs() < TOL, "(h={h}, s={s})");
        }
    }
}

#[test]
fn f1_minimum_gap_and_admissibility() {
    let spec = fixture_f1();
    let target = f1_pi_star();
    let gap = minimum_gap(&spec, &target).unwrap();
    assert!((gap - 0.45).abs() < TOL); // 9/20, attained at (h=1, s=1)
    assert!(check_target_admissible(&spec, &target).unwrap());

    // The all-a0 policy ties with the per-state minimum at (h=0, s=0) and
    // (h=1, s=1): not strictly better than the worst action there.
    let bad = f1_all_a0();
    assert!(!check_target_admissible(&spec, &bad).unwrap());
    assert!(minimum_gap(&spec, &bad).unwrap().abs() < TOL);
}

#[test]
fn admissibility_is_equivalent_to_positive_gap() {
    let spec = fixture_f1();
    for policy in [f1_pi_star(), f1_all_a0()] {
        let admissible = check_target_admissible(&spec, &policy).unwrap();
        let gap = minimum_gap(&spec, &policy).unwrap();
        assert_eq!(admissible, gap > 0.0);
    }
}

#[test]
fn f1_worst_action_policy_is_q_argmin() {
    let spec = fixture_f1();
    let worst = worst_action_policy(&spec, &f1_pi_star()).unwrap();
    // Hand-computed from the Q table of pi*: argmin flips pi* at h=0 and h=1.
    assert_eq!(worst.action_table().unwrap(), &vec![vec![0, 1], vec![1, 0]]);
}

#[test]
fn f1_alpha_half_attacked_mdp_makes_target_optimal_with_strict_separation() {
    let spec = fixture_f1();
    let target = f1_pi_star();
    let attacked = build_alpha_attacked_mdp(&spec, &target, 0.5).unwrap();
    attacked.validate().unwrap();
    let (tables, pi) = solve_optimal(&attacked);
    assert_eq!(&pi, &target);

    let target_actions = target.action_table().unwrap();
    for h in 0..2 {
        for s in 0..2 {
            let at = target_actions[h][s];
            for a in 0..2 {
                if a != at {
                    assert!(tables.q[[h, s, a]] < tables.q[[h, s, at]], "(h={h}, s={s}, a={a})");
                }
            }
        }
    }
    // Frozen mixed Q-values: 13/10, 47/40, 11/20, 27/40 at the attacked cells.
    assert!((tables.q[[0, 0, 0]] - 1.3).abs() < TOL);
    assert!((tables.q[[0, 1, 1]] - 1.175).abs() < TOL);
    assert!((tables.q[[1, 0, 1]] - 0.55).abs() < TOL);
    assert!((tables.q[[1, 1, 0]] - 0.675).abs() < TOL);

    // The attacked MDP agrees with the brute-force enumeration too.
    let brute = brute_force_optimal_values(&attacked);
    for h in 0..2 {
        for s in 0..2 {
            assert!((tables.v[[h, s]] - brute[h][s]).abs() < TOL);
        }
    }
}

#[test]
fn with_two_actions_only_optimal_targets_are_admissible() {
    // A=2 corner: "not the worst" forces the target to be greedy with respect
    // to its own Q, which makes it optimal.
    let spec = fixture_f1();
    let mut admissible = Vec::new();
    for_each_det_policy(&spec, |actions| {
        let pi = Policy::deterministic(actions.to_vec());
        if check_target_admissible(&spec, &pi).unwrap() {
            admissible.push(pi);
        }
    });
    assert_eq!(admissible, vec![f1_pi_star()]);
}
