use serde::{Deserialize, Serialize};

use super::solve::observed_reward_table;
use super::{DominanceSpec, FinitePomdp, QTable, RewardMaps};
use crate::error::{Error, Result};

const CONDITION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub state: usize,
    pub action: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub holds: bool,
    pub violations: Vec<Violation>,
}

impl ConditionCheck {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            holds: violations.is_empty(),
            violations,
        }
    }
}

/// Outcome of checking the three dominance premises against a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// The wirehead action yields expected observed reward 1 in every successor state.
    pub manipulation: ConditionCheck,
    /// Every task action's expected observed reward stays at or below `r_task`.
    pub task_limit: ConditionCheck,
    /// The wirehead action exists in every state.
    pub availability: ConditionCheck,
    pub wirehead_action: usize,
    pub r_task: f64,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.manipulation.holds && self.task_limit.holds && self.availability.holds
    }
}

pub fn check_assumption(
    pomdp: &FinitePomdp,
    rewards: &RewardMaps,
    spec: &DominanceSpec,
) -> Result<AssumptionReport> {
    spec.check_indices(pomdp)?;
    rewards.check_shape(pomdp)?;
    let na = pomdp.n_actions();
    let aw = spec.wirehead_action();

    // The action set is global, so availability only asks whether a_w indexes it.
    let availability = if aw < na {
        ConditionCheck::from_violations(Vec::new())
    } else {
        ConditionCheck::from_violations(
            (0..pomdp.n_states())
                .map(|state| Violation {
                    state,
                    action: aw,
                    value: f64::NAN,
                })
                .collect(),
        )
    };

    let observed = observed_reward_table(pomdp, rewards);
    let mut manipulation = Vec::new();
    let mut task_limit = Vec::new();
    for state in 0..pomdp.n_states() {
        if aw < na {
            let value = observed[state * na + aw];
            if (value - 1.0).abs() > CONDITION_TOLERANCE {
                manipulation.push(Violation {
                    state,
                    action: aw,
                    value,
                });
            }
        }
        for &action in spec.task_actions() {
            let value = observed[state * na + action];
            if value > spec.r_task() + CONDITION_TOLERANCE {
                task_limit.push(Violation {
                    state,
                    action,
                    value,
                });
            }
        }
    }

    Ok(AssumptionReport {
        manipulation: if aw < na {
            ConditionCheck::from_violations(manipulation)
        } else {
            ConditionCheck {
                holds: false,
                violations: Vec::new(),
            }
        },
        task_limit: ConditionCheck::from_violations(task_limit),
        availability,
        wirehead_action: aw,
        r_task: spec.r_task(),
    })
}

/// Numeric witness that the wirehead action beats every task action by at
/// least `1 - r_task`, up to the stated slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub passed: bool,
    pub min_gap: f64,
    pub witness_state: usize,
    pub witness_action: usize,
    /// `1 - r_task`.
    pub gap_bound: f64,
    /// `tolerance + 2 * residual / (1 - gamma)`.
    pub slack: f64,
    pub residual: f64,
    pub iterations: usize,
    pub discount: f64,
    pub r_task: f64,
    /// `max_s |Q(s, a_w) - 1 / (1 - gamma)|`.
    pub wirehead_value_error: f64,
    pub wirehead_value_ok: bool,
}

pub fn certify_dominance(
    qtable: &QTable,
    spec: &DominanceSpec,
    report: &AssumptionReport,
    tolerance: f64,
) -> Result<Certificate> {
    if !report.holds() {
        return Err(Error::usage(
            "dominance premises do not hold for this model; a certificate would be vacuous",
        ));
    }
    if report.wirehead_action != spec.wirehead_action() || report.r_task != spec.r_task() {
        return Err(Error::usage(
            "assumption report was produced for a different spec",
        ));
    }
    let aw = spec.wirehead_action();
    if aw >= qtable.n_actions() || spec.task_actions().iter().any(|&a| a >= qtable.n_actions()) {
        return Err(Error::usage(
            "spec indices exceed the Q-table's action count",
        ));
    }

    let gamma = qtable.discount;
    let slack = tolerance + 2.0 * qtable.residual / (1.0 - gamma);
    let ceiling = 1.0 / (1.0 - gamma);
    let gap_bound = 1.0 - spec.r_task();

    let mut min_gap = f64::INFINITY;
    let mut witness = (0, spec.task_actions()[0]);
    let mut wirehead_value_error: f64 = 0.0;
    for s in 0..qtable.n_states() {
        let qw = qtable.get(s, aw);
        wirehead_value_error = wirehead_value_error.max((qw - ceiling).abs());
        for &a in spec.task_actions() {
            let gap = qw - qtable.get(s, a);
            if gap < min_gap {
                min_gap = gap;
                witness = (s, a);
            }
        }
    }
    let wirehead_value_ok = wirehead_value_error <= slack;

    Ok(Certificate {
        passed: min_gap >= gap_bound - slack && wirehead_value_ok,
        min_gap,
        witness_state: witness.0,
        witness_action: witness.1,
        gap_bound,
        slack,
        residual: qtable.residual,
        iterations: qtable.iterations,
        discount: gamma,
        r_task: spec.r_task(),
        wirehead_value_error,
        wirehead_value_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::{q_value_iteration, SolverOptions};

    /// One state, observations {0, r, 1}; action 0 is a task action that
    /// emits the middle observation, action 1 emits `wire_kernel`.
    fn fixture(mid: f64, wire_kernel: Vec<f64>, gamma: f64) -> (FinitePomdp, RewardMaps) {
        let p = FinitePomdp::new(
            vec![vec![vec![1.0], vec![1.0]]],
            vec![vec![vec![0.0, 1.0, 0.0], wire_kernel]],
            gamma,
        )
        .unwrap();
        let r = RewardMaps::new(vec![0.0, mid, 1.0], vec![0.5]).unwrap();
        (p, r)
    }

    #[test]
    fn task_limit_violation_is_witnessed() {
        let (p, r) = fixture(0.3, vec![0.0, 0.0, 1.0], 0.9);
        let spec = DominanceSpec::new(vec![0], 1, 0.0).unwrap();
        let rep = check_assumption(&p, &r, &spec).unwrap();
        assert!(rep.manipulation.holds);
        assert!(!rep.task_limit.holds);
        assert_eq!(rep.task_limit.violations.len(), 1);
        assert!((rep.task_limit.violations[0].value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn manipulation_violation_is_witnessed() {
        let (p, r) = fixture(0.3, vec![0.1, 0.0, 0.9], 0.9);
        let spec = DominanceSpec::new(vec![0], 1, 0.5).unwrap();
        let rep = check_assumption(&p, &r, &spec).unwrap();
        assert!(!rep.manipulation.holds);
        let v = &rep.manipulation.violations[0];
        assert_eq!((v.state, v.action), (0, 1));
        let expect = crate::pomdp::expected_observed_reward(&p, &r, 0, 1).unwrap();
        assert_eq!(v.value, expect);
        assert!((v.value - 0.9).abs() < 1e-12);
    }

    #[test]
    fn certificate_requires_premises() {
        let (p, r) = fixture(0.3, vec![0.1, 0.0, 0.9], 0.9);
        let spec = DominanceSpec::new(vec![0], 1, 0.5).unwrap();
        let rep = check_assumption(&p, &r, &spec).unwrap();
        let q = q_value_iteration(&p, &r, SolverOptions::default()).unwrap();
        assert!(matches!(
            certify_dominance(&q, &spec, &rep, 1e-9),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn gap_meets_task_bound() {
        let (p, r) = fixture(0.6, vec![0.0, 0.0, 1.0], 0.9);
        let spec = DominanceSpec::new(vec![0], 1, 0.6).unwrap();
        let rep = check_assumption(&p, &r, &spec).unwrap();
        let q = q_value_iteration(&p, &r, SolverOptions::default()).unwrap();
        let cert = certify_dominance(&q, &spec, &rep, 1e-9).unwrap();
        assert!(cert.passed);
        assert!(cert.min_gap >= 0.4 - cert.slack);
        assert!((cert.min_gap - 0.4).abs() <= cert.slack);
    }

    #[test]
    fn zero_task_reward_gives_unit_gap() {
        let (p, r) = fixture(0.0, vec![0.0, 0.0, 1.0], 0.5);
        let spec = DominanceSpec::new(vec![0], 1, 0.0).unwrap();
        let rep = check_assumption(&p, &r, &spec).unwrap();
        let q = q_value_iteration(&p, &r, SolverOptions::default()).unwrap();
        let cert = certify_dominance(&q, &spec, &rep, 1e-9).unwrap();
        assert!(cert.passed);
        assert!(cert.min_gap >= 1.0 - cert.slack);
    }
}
