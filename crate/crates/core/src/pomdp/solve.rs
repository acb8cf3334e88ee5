use serde::{Deserialize, Serialize};

use super::{FinitePomdp, RewardMaps};
use crate::error::{Error, Result};

/// `E_{o ~ O(. | s', a)}[R~(o)]`.
pub fn expected_observed_reward(
    pomdp: &FinitePomdp,
    rewards: &RewardMaps,
    next_state: usize,
    action: usize,
) -> Result<f64> {
    pomdp.check_state(next_state)?;
    pomdp.check_action(action)?;
    rewards.check_shape(pomdp)?;
    Ok(dot(
        pomdp.observation_row(next_state, action),
        rewards.implemented(),
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `[s'][a]` table of expected observed rewards.
pub(crate) fn observed_reward_table(pomdp: &FinitePomdp, rewards: &RewardMaps) -> Vec<f64> {
    let (ns, na) = (pomdp.n_states(), pomdp.n_actions());
    let mut out = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            out.push(dot(pomdp.observation_row(s, a), rewards.implemented()));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 1_000_000,
        }
    }
}

/// Optimal action values for the implemented reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    /// Sup-norm distance between the last two iterates.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub discount: f64,
}

impl QTable {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn value(&self, state: usize) -> f64 {
        self.row(state)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax per state; ties go to the lowest action index.
    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.n_states).map(|s| argmax(self.row(s))).collect()
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Value iteration on `Q(s,a) <- sum_s' T(s'|s,a) (r(s',a) + gamma max_a' Q(s',a'))`.
pub fn q_value_iteration(
    pomdp: &FinitePomdp,
    rewards: &RewardMaps,
    options: SolverOptions,
) -> Result<QTable> {
    q_value_iteration_traced(pomdp, rewards, options, |_, _| {})
}

/// As [`q_value_iteration`], reporting `(iteration, residual)` after every sweep.
pub fn q_value_iteration_traced(
    pomdp: &FinitePomdp,
    rewards: &RewardMaps,
    options: SolverOptions,
    mut on_sweep: impl FnMut(usize, f64),
) -> Result<QTable> {
    if !(options.tolerance > 0.0) {
        return Err(Error::usage(format!(
            "tolerance must be positive, got {}",
            options.tolerance
        )));
    }
    rewards.check_shape(pomdp)?;

    let (ns, na) = (pomdp.n_states(), pomdp.n_actions());
    let gamma = pomdp.discount();
    let observed = observed_reward_table(pomdp, rewards);
    let mut q = vec![0.0; ns * na];
    let mut next = vec![0.0; ns * na];
    let mut v = vec![0.0; ns];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        for (s, vs) in v.iter_mut().enumerate() {
            *vs = q[s * na..(s + 1) * na]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
        }
        residual = 0.0;
        for s in 0..ns {
            for a in 0..na {
                let backup: f64 = pomdp
                    .transition_row(s, a)
                    .iter()
                    .enumerate()
                    .map(|(sp, p)| p * (observed[sp * na + a] + gamma * v[sp]))
                    .sum();
                if !backup.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite backup at (s={s}, a={a}) in sweep {}",
                        iterations + 1
                    )));
                }
                let idx = s * na + a;
                residual = residual.max((backup - q[idx]).abs());
                next[idx] = backup;
            }
        }
        std::mem::swap(&mut q, &mut next);
        iterations += 1;
        on_sweep(iterations, residual);
        if residual <= options.tolerance {
            break;
        }
    }

    Ok(QTable {
        n_states: ns,
        n_actions: na,
        values: q,
        residual,
        iterations,
        converged: residual <= options.tolerance,
        discount: gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_obs_pomdp(kernel: Vec<f64>, gamma: f64) -> FinitePomdp {
        FinitePomdp::new(vec![vec![vec![1.0]]], vec![vec![kernel]], gamma).unwrap()
    }

    #[test]
    fn degenerate_kernel() {
        let p = single_obs_pomdp(vec![1.0], 0.0);
        let r = RewardMaps::new(vec![0.5], vec![0.0]).unwrap();
        assert_eq!(expected_observed_reward(&p, &r, 0, 0).unwrap(), 0.5);
    }

    #[test]
    fn symmetric_kernel() {
        let p = single_obs_pomdp(vec![0.5, 0.5], 0.0);
        let r = RewardMaps::new(vec![0.0, 1.0], vec![0.0]).unwrap();
        assert_eq!(expected_observed_reward(&p, &r, 0, 0).unwrap(), 0.5);
    }

    #[test]
    fn three_observation_kernel_matches_sampling() {
        let p = single_obs_pomdp(vec![0.2, 0.3, 0.5], 0.0);
        let r = RewardMaps::new(vec![0.0, 0.5, 1.0], vec![0.0]).unwrap();
        let exact = expected_observed_reward(&p, &r, 0, 0).unwrap();
        assert!((exact - 0.65).abs() < 1e-12);

        // Monte Carlo over the kernel, 10^6 draws, within 3 sigma.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let u: f64 = rng.gen();
            let x = if u < 0.2 {
                0.0
            } else if u < 0.5 {
                0.5
            } else {
                1.0
            };
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let sd = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!((mean - 0.65).abs() <= 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn out_of_range_indices() {
        let p = single_obs_pomdp(vec![1.0], 0.0);
        let r = RewardMaps::new(vec![0.5], vec![0.0]).unwrap();
        assert!(matches!(
            expected_observed_reward(&p, &r, 1, 0),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            expected_observed_reward(&p, &r, 0, 3),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn self_loop_geometric_sum() {
        let p = single_obs_pomdp(vec![1.0], 0.9);
        let r = RewardMaps::new(vec![1.0], vec![1.0]).unwrap();
        let q = q_value_iteration(&p, &r, SolverOptions::default()).unwrap();
        assert!(q.converged);
        assert!((q.get(0, 0) - 10.0).abs() < 1e-7);
    }

    #[test]
    fn myopic_case_is_one_step_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (ns, na, no) = (3, 2, 3);
        let rows = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        };
        let t = (0..ns)
            .map(|_| (0..na).map(|_| rows(ns, &mut rng)).collect())
            .collect();
        let o = (0..ns)
            .map(|_| (0..na).map(|_| rows(no, &mut rng)).collect())
            .collect();
        let p = FinitePomdp::new(t, o, 0.0).unwrap();
        let r = RewardMaps::new(vec![0.1, 0.7, 0.4], vec![0.0; 3]).unwrap();
        let q = q_value_iteration(&p, &r, SolverOptions::default()).unwrap();
        for s in 0..ns {
            for a in 0..na {
                let expect: f64 = p
                    .transition_row(s, a)
                    .iter()
                    .enumerate()
                    .map(|(sp, pr)| pr * expected_observed_reward(&p, &r, sp, a).unwrap())
                    .sum();
                assert_eq!(q.get(s, a), expect);
            }
        }
    }

    #[test]
    fn greedy_ties_break_low() {
        assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let p = single_obs_pomdp(vec![1.0], 0.99);
        let r = RewardMaps::new(vec![1.0], vec![1.0]).unwrap();
        let q = q_value_iteration(
            &p,
            &r,
            SolverOptions {
                tolerance: 1e-12,
                max_iterations: 5,
            },
        )
        .unwrap();
        assert_eq!(q.iterations, 5);
        assert!(!q.converged);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let p = single_obs_pomdp(vec![1.0], 0.5);
        let r = RewardMaps::new(vec![1.0], vec![1.0]).unwrap();
        let opts = SolverOptions {
            tolerance: 0.0,
            max_iterations: 10,
        };
        assert!(q_value_iteration(&p, &r, opts).is_err());
    }
}
