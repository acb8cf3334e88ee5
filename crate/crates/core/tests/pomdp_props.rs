mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wirehead::pomdp::{
    certify_dominance, check_assumption, enumerate_policy_return, expected_observed_reward,
    q_value_iteration, q_value_iteration_traced, DominanceSpec, FinitePomdp, RewardMaps,
    SolverOptions, DEFAULT_NODE_BUDGET,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn near_stochastic_rows_are_renormalised(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let raw: Vec<f64> = (0..n).map(|_| r.gen::<f64>() + 1e-3).collect();
        let sum: f64 = raw.iter().sum();
        let drift = r.gen_range(-9e-7..9e-7);
        let mut row: Vec<f64> = raw.iter().map(|x| x / sum).collect();
        row[0] = (row[0] + drift).max(0.0);
        let row_sum: f64 = row.iter().sum();
        let p = FinitePomdp::new(vec![vec![vec![1.0]]], vec![vec![row.clone()]], 0.5);
        if (row_sum - 1.0).abs() <= 1e-6 {
            let p = p.unwrap();
            let out = p.observation_row(0, 0);
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in out.iter().zip(&row) {
                prop_assert!((a - b / row_sum).abs() < 1e-15);
            }
        } else {
            prop_assert!(p.is_err());
        }
    }

    #[test]
    fn rows_off_by_more_than_tolerance_are_rejected(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let mut row: Vec<f64> = (0..n).map(|_| r.gen::<f64>() + 1e-3).collect();
        let sum: f64 = row.iter().sum();
        let scale = if r.gen_bool(0.5) { 1.0 + 2e-6 } else { 1.0 - 2e-6 };
        row.iter_mut().for_each(|x| *x = *x / sum * scale);
        prop_assert!(FinitePomdp::new(vec![vec![row]], vec![vec![vec![1.0]]], 0.5).is_err());
    }

    #[test]
    fn bellman_residuals_contract(seed in any::<u64>(), g in 0usize..2) {
        let gamma = [0.5, 0.9][g];
        let (p, rw) = common::random_pomdp(&mut rng(seed), gamma);
        let mut trace = Vec::new();
        let opts = SolverOptions { tolerance: 1e-12, max_iterations: 60 };
        q_value_iteration_traced(&p, &rw, opts, |_, res| trace.push(res)).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] <= gamma * w[0] + 1e-13, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn values_stay_in_the_reward_range(seed in any::<u64>(), g in 0usize..2) {
        let gamma = [0.5, 0.9][g];
        let (p, rw) = common::random_pomdp(&mut rng(seed), gamma);
        let q = q_value_iteration(&p, &rw, SolverOptions::default()).unwrap();
        prop_assert!(q.converged);
        for s in 0..p.n_states() {
            for &x in q.row(s) {
                prop_assert!((-1e-12..=1.0 / (1.0 - gamma) + 1e-9).contains(&x));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn greedy_value_matches_enumeration(seed in any::<u64>(), g in 0usize..3) {
        let gamma = [0.0, 0.25, 0.5][g];
        let (p, rw) = common::random_pomdp(&mut rng(seed), gamma);
        let q = q_value_iteration(&p, &rw, SolverOptions::default()).unwrap();
        let policy = q.greedy_policy();
        let bound = gamma.powi(40) / (1.0 - gamma) + 1e-9;
        for s in 0..p.n_states() {
            let brute = enumerate_policy_return(&p, &rw, &policy, s, 40, DEFAULT_NODE_BUDGET).unwrap();
            prop_assert!((q.value(s) - brute).abs() <= bound, "state {s}: {} vs {brute}", q.value(s));
        }
    }

    #[test]
    fn myopic_values_are_one_step_rewards(seed in any::<u64>()) {
        let (p, rw) = common::random_pomdp(&mut rng(seed), 0.0);
        let q = q_value_iteration(&p, &rw, SolverOptions::default()).unwrap();
        for s in 0..p.n_states() {
            for a in 0..p.n_actions() {
                let expect: f64 = p.transition_row(s, a).iter().enumerate()
                    .map(|(sp, t)| t * expected_observed_reward(&p, &rw, sp, a).unwrap())
                    .sum();
                prop_assert!((q.get(s, a) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn premises_imply_a_passing_certificate(seed in any::<u64>(), g in 0usize..3, r in 0usize..3) {
        let gamma = [0.5, 0.9, 0.99][g];
        let r_task = [0.3, 0.6, 0.8][r];
        let m = common::dominance_pomdp(&mut rng(seed), gamma, r_task);
        let report = check_assumption(&m.pomdp, &m.rewards, &m.spec).unwrap();
        prop_assert!(report.holds());
        let q = q_value_iteration(&m.pomdp, &m.rewards, SolverOptions::default()).unwrap();
        let cert = certify_dominance(&q, &m.spec, &report, 1e-9).unwrap();
        prop_assert!(cert.passed, "{cert:?}");
        prop_assert!(cert.min_gap >= cert.gap_bound - cert.slack);
        prop_assert!(q.greedy_policy().iter().all(|&a| a == m.spec.wirehead_action()));
    }

    #[test]
    fn gap_bound_is_attained_by_a_saturating_task_action(seed in any::<u64>()) {
        let mut r = rng(seed);
        let gamma = r.gen_range(0.0..0.99);
        let r_task = r.gen_range(0.0..0.95);
        // Observations pay {0, r_task, 1}; task action 0 emits r_task surely.
        let p = FinitePomdp::new(
            vec![vec![vec![1.0], vec![1.0], vec![1.0]]],
            vec![vec![vec![0.0, 1.0, 0.0], vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]]],
            gamma,
        ).unwrap();
        let rw = RewardMaps::new(vec![0.0, r_task, 1.0], vec![0.0]).unwrap();
        let spec = DominanceSpec::new(vec![0, 1], 2, r_task).unwrap();
        let report = check_assumption(&p, &rw, &spec).unwrap();
        let q = q_value_iteration(&p, &rw, SolverOptions::default()).unwrap();
        let cert = certify_dominance(&q, &spec, &report, 1e-9).unwrap();
        prop_assert!(cert.passed);
        prop_assert!((cert.min_gap - (1.0 - r_task)).abs() <= cert.slack);
        prop_assert_eq!(cert.witness_action, 0);
    }
}

#[test]
fn chain_fixture_gap_is_tight() {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/chain3_dominance.json"
    );
    let fx = wirehead::pomdp::PomdpFixture::load(std::path::Path::new(path)).unwrap();
    let (p, rw, spec) = fx.build().unwrap();
    let spec = spec.unwrap();
    let report = check_assumption(&p, &rw, &spec).unwrap();
    let q = q_value_iteration(&p, &rw, SolverOptions::default()).unwrap();
    let cert = certify_dominance(&q, &spec, &report, 1e-9).unwrap();
    // Hand values: Q(., tamper) = 2; Q(s0, work) = 0.35 + 1, Q(s1, work) = Q(s2, work) = 0.7 + 1.
    for s in 0..3 {
        assert!((q.get(s, 1) - 2.0).abs() <= cert.slack);
    }
    assert!((q.get(0, 0) - 1.35).abs() <= cert.slack);
    assert!((q.get(1, 0) - 1.7).abs() <= cert.slack);
    assert!((q.get(2, 0) - 1.7).abs() <= cert.slack);
    assert!(cert.passed);
    assert!((cert.min_gap - 0.3).abs() <= cert.slack);
    assert_eq!((cert.witness_state, cert.witness_action), (1, 0));
}

#[test]
fn unconstrained_chain_matches_enumeration() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/chain3.json");
    let fx = wirehead::pomdp::PomdpFixture::load(std::path::Path::new(path)).unwrap();
    let (p, rw, spec) = fx.build().unwrap();
    assert!(spec.is_none());
    let q = q_value_iteration(&p, &rw, SolverOptions::default()).unwrap();
    let policy = q.greedy_policy();
    for s in 0..3 {
        let brute = enumerate_policy_return(&p, &rw, &policy, s, 40, DEFAULT_NODE_BUDGET).unwrap();
        assert!((q.value(s) - brute).abs() <= 0.5f64.powi(40) / 0.5 + 1e-9);
    }
}
