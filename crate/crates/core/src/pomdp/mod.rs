//! Finite POMDPs whose reward is a function of the emitted observation.
//!
//! The planning problem is stated over latent states: `Q(s, a)` sums the
//! transition into `s'`, the expected implemented reward of the observation
//! drawn from `O(. | s', a)`, and the discounted successor value. Intended
//! rewards travel alongside for evaluation only and never enter a backup.

mod dominance;
mod fixture;
mod oracle;
mod solve;

pub use dominance::{
    certify_dominance, check_assumption, AssumptionReport, Certificate, ConditionCheck, Violation,
};
pub use fixture::{DominanceFixture, PomdpFixture};
pub use oracle::{enumerate_policy_return, DEFAULT_NODE_BUDGET};
pub(crate) use solve::argmax;
pub use solve::{
    expected_observed_reward, q_value_iteration, q_value_iteration_traced, QTable, SolverOptions,
};

use crate::error::{Error, Result};

/// Tolerance on a probability row sum before normalisation.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FinitePomdp {
    n_states: usize,
    n_actions: usize,
    n_observations: usize,
    /// `[s][a][s']`, flattened.
    transition: Vec<f64>,
    /// `[s'][a][o]`, flattened.
    obs_kernel: Vec<f64>,
    discount: f64,
}

impl FinitePomdp {
    /// Builds a POMDP from nested rows, normalising every row to sum to one.
    ///
    /// Rows that are negative, non-finite, or whose sum is further than
    /// [`ROW_SUM_TOLERANCE`] from one are rejected.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        obs_kernel: Vec<Vec<Vec<f64>>>,
        discount: f64,
    ) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 {
            return Err(Error::usage("transition: need at least one state"));
        }
        let n_actions = transition[0].len();
        if n_actions == 0 {
            return Err(Error::usage("transition: need at least one action"));
        }
        if obs_kernel.len() != n_states {
            return Err(Error::usage(format!(
                "observation_kernel: expected {n_states} successor-state blocks, got {}",
                obs_kernel.len()
            )));
        }
        let n_observations = obs_kernel
            .first()
            .and_then(|b| b.first())
            .map(Vec::len)
            .unwrap_or(0);
        if n_observations == 0 {
            return Err(Error::usage(
                "observation_kernel: need at least one observation",
            ));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::usage(format!(
                "discount must lie in [0, 1), got {discount}"
            )));
        }

        let mut flat_t = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, block) in transition.iter().enumerate() {
            if block.len() != n_actions {
                return Err(Error::usage(format!(
                    "transition[{s}]: expected {n_actions} actions, got {}",
                    block.len()
                )));
            }
            for (a, row) in block.iter().enumerate() {
                let row = normalized_row(row, n_states, || format!("transition[{s}][{a}]"))?;
                flat_t.extend(row);
            }
        }

        let mut flat_o = Vec::with_capacity(n_states * n_actions * n_observations);
        for (s, block) in obs_kernel.iter().enumerate() {
            if block.len() != n_actions {
                return Err(Error::usage(format!(
                    "observation_kernel[{s}]: expected {n_actions} actions, got {}",
                    block.len()
                )));
            }
            for (a, row) in block.iter().enumerate() {
                let row = normalized_row(row, n_observations, || {
                    format!("observation_kernel[{s}][{a}]")
                })?;
                flat_o.extend(row);
            }
        }

        Ok(Self {
            n_states,
            n_actions,
            n_observations,
            transition: flat_t,
            obs_kernel: flat_o,
            discount,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Same model with a different discount.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::usage(format!(
                "discount must lie in [0, 1), got {discount}"
            )));
        }
        Ok(Self {
            discount,
            ..self.clone()
        })
    }

    /// `T(. | s, a)`.
    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.n_actions + action) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// `O(. | s', a)`.
    pub fn observation_row(&self, next_state: usize, action: usize) -> &[f64] {
        let start = (next_state * self.n_actions + action) * self.n_observations;
        &self.obs_kernel[start..start + self.n_observations]
    }

    pub(crate) fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::usage(format!(
                "state index {s} out of range (|S| = {})",
                self.n_states
            )));
        }
        Ok(())
    }

    pub(crate) fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.n_actions {
            return Err(Error::usage(format!(
                "action index {a} out of range (|A| = {})",
                self.n_actions
            )));
        }
        Ok(())
    }

    /// Nested `[s][a][s']` copy of the transition kernel.
    pub fn transition_rows(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| self.transition_row(s, a).to_vec())
                    .collect()
            })
            .collect()
    }

    /// Nested `[s'][a][o]` copy of the observation kernel.
    pub fn observation_rows(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| self.observation_row(s, a).to_vec())
                    .collect()
            })
            .collect()
    }
}

fn normalized_row(row: &[f64], len: usize, label: impl Fn() -> String) -> Result<Vec<f64>> {
    if row.len() != len {
        return Err(Error::usage(format!(
            "{}: expected {len} entries, got {}",
            label(),
            row.len()
        )));
    }
    if let Some(bad) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::usage(format!(
            "{}: entries must be finite and non-negative, found {bad}",
            label()
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::usage(format!(
            "{}: row sums to {sum}, expected 1 within {ROW_SUM_TOLERANCE}",
            label()
        )));
    }
    Ok(row.iter().map(|p| p / sum).collect())
}

/// Implemented reward per observation and intended reward per state.
///
/// The intended map is carried for evaluation; no solver or agent reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMaps {
    implemented: Vec<f64>,
    intended: Vec<f64>,
}

impl RewardMaps {
    pub fn new(implemented: Vec<f64>, intended: Vec<f64>) -> Result<Self> {
        for (name, values) in [
            ("implemented_reward", &implemented),
            ("intended_reward", &intended),
        ] {
            if let Some((i, v)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| !(0.0..=1.0).contains(*v))
            {
                return Err(Error::usage(format!(
                    "{name}[{i}] = {v} lies outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            implemented,
            intended,
        })
    }

    pub fn implemented(&self) -> &[f64] {
        &self.implemented
    }

    pub fn intended(&self) -> &[f64] {
        &self.intended
    }

    pub(crate) fn check_shape(&self, pomdp: &FinitePomdp) -> Result<()> {
        if self.implemented.len() != pomdp.n_observations() {
            return Err(Error::usage(format!(
                "implemented_reward has {} entries, expected |O| = {}",
                self.implemented.len(),
                pomdp.n_observations()
            )));
        }
        if self.intended.len() != pomdp.n_states() {
            return Err(Error::usage(format!(
                "intended_reward has {} entries, expected |S| = {}",
                self.intended.len(),
                pomdp.n_states()
            )));
        }
        Ok(())
    }
}

/// Partition of the action set into task actions and one wireheading action.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceSpec {
    task_actions: Vec<usize>,
    wirehead_action: usize,
    r_task: f64,
}

impl DominanceSpec {
    pub fn new(task_actions: Vec<usize>, wirehead_action: usize, r_task: f64) -> Result<Self> {
        if task_actions.is_empty() {
            return Err(Error::usage(
                "dominance spec needs at least one task action",
            ));
        }
        if task_actions.contains(&wirehead_action) {
            return Err(Error::usage(format!(
                "wirehead action {wirehead_action} is also listed as a task action"
            )));
        }
        if !(0.0..1.0).contains(&r_task) {
            return Err(Error::usage(format!(
                "r_task must lie in [0, 1), got {r_task}"
            )));
        }
        Ok(Self {
            task_actions,
            wirehead_action,
            r_task,
        })
    }

    pub fn task_actions(&self) -> &[usize] {
        &self.task_actions
    }

    pub fn wirehead_action(&self) -> usize {
        self.wirehead_action
    }

    pub fn r_task(&self) -> f64 {
        self.r_task
    }

    pub(crate) fn check_indices(&self, pomdp: &FinitePomdp) -> Result<()> {
        for &a in &self.task_actions {
            pomdp.check_action(a)?;
        }
        Ok(())
    }
}
