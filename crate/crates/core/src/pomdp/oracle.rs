use super::solve::observed_reward_table;
use super::{FinitePomdp, RewardMaps};
use crate::error::{Error, Result};

/// Default cap on `horizon * |S|^2` propagation steps.
pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;

/// Expected discounted implemented return of a fixed deterministic policy
/// over exactly `horizon` steps.
///
/// Brute-force reference for value iteration: the state distribution is
/// pushed forward step by step and each step's expected observed reward is
/// accumulated. No maximisation and no bootstrapping are involved, so this
/// shares nothing with the Bellman backup beyond the model itself.
pub fn enumerate_policy_return(
    pomdp: &FinitePomdp,
    rewards: &RewardMaps,
    policy: &[usize],
    start_state: usize,
    horizon: usize,
    node_budget: u64,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::usage("horizon must be at least 1"));
    }
    if policy.len() != pomdp.n_states() {
        return Err(Error::usage(format!(
            "policy covers {} states, model has {}",
            policy.len(),
            pomdp.n_states()
        )));
    }
    for &a in policy {
        pomdp.check_action(a)?;
    }
    pomdp.check_state(start_state)?;
    rewards.check_shape(pomdp)?;

    let ns = pomdp.n_states();
    let work = (horizon as u64)
        .saturating_mul(ns as u64)
        .saturating_mul(ns as u64);
    if work > node_budget {
        return Err(Error::Resource(format!(
            "enumeration needs {work} node expansions, budget is {node_budget}"
        )));
    }

    let na = pomdp.n_actions();
    let observed = observed_reward_table(pomdp, rewards);
    let mut dist = vec![0.0; ns];
    dist[start_state] = 1.0;
    let mut next = vec![0.0; ns];
    let mut total = 0.0;
    let mut weight = 1.0;

    for _ in 0..horizon {
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut step_reward = 0.0;
        for (s, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let a = policy[s];
            for (sp, &p) in pomdp.transition_row(s, a).iter().enumerate() {
                let flow = mass * p;
                step_reward += flow * observed[sp * na + a];
                next[sp] += flow;
            }
        }
        total += weight * step_reward;
        weight *= pomdp.discount();
        std::mem::swap(&mut dist, &mut next);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_geometric_sum() {
        let p = FinitePomdp::new(vec![vec![vec![1.0]]], vec![vec![vec![1.0]]], 0.9).unwrap();
        let r = RewardMaps::new(vec![1.0], vec![1.0]).unwrap();
        let v = enumerate_policy_return(&p, &r, &[0], 0, 2, DEFAULT_NODE_BUDGET).unwrap();
        assert!((v - 1.9).abs() < 1e-15);
    }

    #[test]
    fn myopic_horizon_one() {
        let p = FinitePomdp::new(
            vec![vec![vec![0.25, 0.75]], vec![vec![1.0, 0.0]]],
            vec![vec![vec![0.5, 0.5]], vec![vec![0.0, 1.0]]],
            0.0,
        )
        .unwrap();
        let r = RewardMaps::new(vec![0.2, 1.0], vec![0.0, 0.0]).unwrap();
        let v = enumerate_policy_return(&p, &r, &[0, 0], 0, 1, DEFAULT_NODE_BUDGET).unwrap();
        // 0.25 * 0.6 + 0.75 * 1.0
        assert!((v - 0.9).abs() < 1e-15);
    }

    #[test]
    fn budget_and_horizon_errors() {
        let p = FinitePomdp::new(vec![vec![vec![1.0]]], vec![vec![vec![1.0]]], 0.9).unwrap();
        let r = RewardMaps::new(vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(
            enumerate_policy_return(&p, &r, &[0], 0, 0, DEFAULT_NODE_BUDGET),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            enumerate_policy_return(&p, &r, &[0], 0, 1000, 10),
            Err(Error::Resource(_))
        ));
    }
}
