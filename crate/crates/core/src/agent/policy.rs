use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::ActionPair;
use crate::error::{Error, Result};

/// What the grade head sees when picking a grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradeConditioning {
    /// One grade row per (context, sampled answer).
    #[default]
    ContextAndAnswer,
    /// One grade row per context.
    ContextOnly,
}

/// Two-head tabular softmax policy: answer given context, then grade given
/// context (and, by default, the answer just produced).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySnapshot {
    pub context_count: usize,
    pub answer_count: usize,
    pub grade_count: usize,
    pub conditioning: GradeConditioning,
    pub temperature: f64,
    /// `[context][answer]`, row-major.
    pub answer_logits: Vec<f64>,
    /// `[grade row][grade]`, row-major.
    pub grade_logits: Vec<f64>,
}

/// Gradient with the same layout as the logits of a [`PolicySnapshot`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradient {
    pub answer: Vec<f64>,
    pub grade: Vec<f64>,
}

impl PolicyGradient {
    pub fn zeros_like(policy: &PolicySnapshot) -> Self {
        Self {
            answer: vec![0.0; policy.answer_logits.len()],
            grade: vec![0.0; policy.grade_logits.len()],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.answer.iter().chain(self.grade.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.answer.iter_mut().chain(self.grade.iter_mut())
    }

    pub fn l2_norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    pub action: ActionPair,
    pub log_prob_answer: f64,
    pub log_prob_grade: Option<f64>,
}

impl PolicySnapshot {
    /// All-zero logits, i.e. uniform over answers and grades.
    pub fn uniform(
        context_count: usize,
        answer_count: usize,
        grade_count: usize,
        conditioning: GradeConditioning,
        temperature: f64,
    ) -> Result<Self> {
        if context_count == 0 || answer_count == 0 || grade_count == 0 {
            return Err(Error::usage("policy dimensions must be positive"));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::usage(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        let grade_rows = match conditioning {
            GradeConditioning::ContextAndAnswer => context_count * answer_count,
            GradeConditioning::ContextOnly => context_count,
        };
        Ok(Self {
            context_count,
            answer_count,
            grade_count,
            conditioning,
            temperature,
            answer_logits: vec![0.0; context_count * answer_count],
            grade_logits: vec![0.0; grade_rows * grade_count],
        })
    }

    pub fn answer_row(&self, context: usize) -> &[f64] {
        let n = self.answer_count;
        &self.answer_logits[context * n..(context + 1) * n]
    }

    pub fn grade_row_index(&self, context: usize, answer: usize) -> usize {
        match self.conditioning {
            GradeConditioning::ContextAndAnswer => context * self.answer_count + answer,
            GradeConditioning::ContextOnly => context,
        }
    }

    pub fn grade_row(&self, context: usize, answer: usize) -> &[f64] {
        let n = self.grade_count;
        let r = self.grade_row_index(context, answer);
        &self.grade_logits[r * n..(r + 1) * n]
    }

    pub fn answer_probs(&self, context: usize) -> Vec<f64> {
        softmax(self.answer_row(context), self.temperature)
    }

    pub fn grade_probs(&self, context: usize, answer: usize) -> Vec<f64> {
        softmax(self.grade_row(context, answer), self.temperature)
    }

    /// Highest-logit answer; ties go to the lowest index.
    pub fn greedy_answer(&self, context: usize) -> usize {
        crate::pomdp::argmax(self.answer_row(context))
    }

    fn check_action(&self, context: usize, action: ActionPair) -> Result<()> {
        if context >= self.context_count {
            return Err(Error::usage(format!(
                "context {context} out of range ({} contexts)",
                self.context_count
            )));
        }
        if action.answer >= self.answer_count {
            return Err(Error::usage(format!(
                "answer {} out of range",
                action.answer
            )));
        }
        if matches!(action.grade, Some(g) if g >= self.grade_count) {
            return Err(Error::usage("grade index out of range"));
        }
        Ok(())
    }

    /// `log pi(y | c) + log pi(g | c, y)`; the grade term is skipped when no
    /// grade is present.
    pub fn log_prob(&self, context: usize, action: ActionPair) -> Result<f64> {
        self.check_action(context, action)?;
        let mut lp = log_softmax_at(self.answer_row(context), self.temperature, action.answer);
        if let Some(g) = action.grade {
            lp += log_softmax_at(self.grade_row(context, action.answer), self.temperature, g);
        }
        Ok(lp)
    }

    pub fn is_finite(&self) -> bool {
        self.answer_logits
            .iter()
            .chain(&self.grade_logits)
            .all(|x| x.is_finite())
    }
}

pub(crate) fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|l| ((l - max) / temperature).exp())
        .collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn log_softmax_at(logits: &[f64], temperature: f64, index: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits
        .iter()
        .map(|l| ((l - max) / temperature).exp())
        .sum::<f64>()
        .ln();
    (logits[index] - max) / temperature - lse
}

/// Shannon entropy in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

fn param_mut(policy: &mut PolicySnapshot, k: usize) -> &mut f64 {
    let n_answer = policy.answer_logits.len();
    if k < n_answer {
        &mut policy.answer_logits[k]
    } else {
        &mut policy.grade_logits[k - n_answer]
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left the cumulative sum a hair under one.
    probs
        .iter()
        .rposition(|p| *p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Samples an answer, then (if `with_grade`) a grade conditioned on it.
///
/// Always consumes one uniform for the answer and, when grading, one for the
/// grade.
pub fn sample_action<R: Rng + ?Sized>(
    policy: &PolicySnapshot,
    context: usize,
    with_grade: bool,
    rng: &mut R,
) -> Result<SampledAction> {
    if context >= policy.context_count {
        return Err(Error::usage(format!("context {context} out of range")));
    }
    let answer = sample_index(&policy.answer_probs(context), rng);
    let log_prob_answer = log_softmax_at(policy.answer_row(context), policy.temperature, answer);
    let (grade, log_prob_grade) = if with_grade {
        let g = sample_index(&policy.grade_probs(context, answer), rng);
        let lp = log_softmax_at(policy.grade_row(context, answer), policy.temperature, g);
        (Some(g), Some(lp))
    } else {
        (None, None)
    };
    Ok(SampledAction {
        action: ActionPair { answer, grade },
        log_prob_answer,
        log_prob_grade,
    })
}

/// Ascent direction of `advantage * log pi(action | context)`.
///
/// Per touched row this is `advantage * (one_hot - softmax) / temperature`;
/// all other entries are zero.
pub fn policy_gradient(
    policy: &PolicySnapshot,
    context: usize,
    action: ActionPair,
    advantage: f64,
) -> Result<PolicyGradient> {
    policy.check_action(context, action)?;
    let mut grad = PolicyGradient::zeros_like(policy);
    let scale = advantage / policy.temperature;

    let na = policy.answer_count;
    let probs = policy.answer_probs(context);
    for (i, p) in probs.iter().enumerate() {
        let hot = if i == action.answer { 1.0 } else { 0.0 };
        grad.answer[context * na + i] = scale * (hot - p);
    }

    if let Some(g) = action.grade {
        let ng = policy.grade_count;
        let row = policy.grade_row_index(context, action.answer);
        let probs = policy.grade_probs(context, action.answer);
        for (i, p) in probs.iter().enumerate() {
            let hot = if i == g { 1.0 } else { 0.0 };
            grad.grade[row * ng + i] = scale * (hot - p);
        }
    }
    Ok(grad)
}

/// Largest relative error between [`policy_gradient`] and central
/// differences of `advantage * log pi(action | context)`.
///
/// Parameters whose analytic derivative is at most `1e-8` in magnitude are
/// excluded from the relative comparison; if one of them shows a numeric
/// derivative above `1e-6` the check reports an error of 1.
pub fn finite_difference_check(
    policy: &PolicySnapshot,
    context: usize,
    action: ActionPair,
    advantage: f64,
    step: f64,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&step) {
        return Err(Error::usage(format!(
            "step must lie in [1e-7, 1e-3], got {step}"
        )));
    }
    let analytic = policy_gradient(policy, context, action, advantage)?;
    let objective =
        |p: &PolicySnapshot| -> Result<f64> { Ok(advantage * p.log_prob(context, action)?) };

    let mut probe = policy.clone();
    let mut worst: f64 = 0.0;
    let n_answer = policy.answer_logits.len();
    let total = n_answer + policy.grade_logits.len();
    for k in 0..total {
        let exact = if k < n_answer {
            analytic.answer[k]
        } else {
            analytic.grade[k - n_answer]
        };
        let original = *param_mut(&mut probe, k);
        *param_mut(&mut probe, k) = original + step;
        let up = objective(&probe)?;
        *param_mut(&mut probe, k) = original - step;
        let down = objective(&probe)?;
        *param_mut(&mut probe, k) = original;
        let numeric = (up - down) / (2.0 * step);
        let err = if exact.abs() > 1e-8 {
            (exact - numeric).abs() / exact.abs().max(numeric.abs())
        } else if (exact - numeric).abs() > 1e-6 {
            // A parameter the analytic gradient leaves alone moved the objective.
            1.0
        } else {
            0.0
        };
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_policy(rng: &mut ChaCha8Rng, temperature: f64) -> PolicySnapshot {
        let mut p =
            PolicySnapshot::uniform(3, 4, 5, GradeConditioning::ContextAndAnswer, temperature)
                .unwrap();
        for x in p.answer_logits.iter_mut().chain(p.grade_logits.iter_mut()) {
            *x = rng.gen_range(-3.0..3.0);
        }
        p
    }

    #[test]
    fn uniform_log_probs() {
        let p = PolicySnapshot::uniform(2, 10, 11, GradeConditioning::default(), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let s = sample_action(&p, 1, true, &mut rng).unwrap();
            assert!((s.log_prob_answer - (0.1f64).ln()).abs() < 1e-12);
            assert!((s.log_prob_grade.unwrap() - (1.0f64 / 11.0).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_logit_dominates_sampling() {
        let mut p = PolicySnapshot::uniform(1, 5, 2, GradeConditioning::default(), 1.0).unwrap();
        p.answer_logits[3] = 30.0;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hits = (0..10_000)
            .filter(|_| sample_action(&p, 0, false, &mut rng).unwrap().action.answer == 3)
            .count();
        assert!(hits as f64 / 10_000.0 > 0.999);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_policy(&mut rng, 1.0);
        let run = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|i| sample_action(&p, i % 3, true, &mut r).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(17), run(17));
    }

    #[test]
    fn zero_advantage_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_policy(&mut rng, 1.0);
        let g = policy_gradient(
            &p,
            1,
            ActionPair {
                answer: 2,
                grade: Some(1),
            },
            0.0,
        )
        .unwrap();
        assert!(g.iter().all(|x| *x == 0.0));
        let err = finite_difference_check(
            &p,
            1,
            ActionPair {
                answer: 2,
                grade: Some(1),
            },
            0.0,
            1e-5,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn uniform_two_answer_gradient() {
        let p = PolicySnapshot::uniform(1, 2, 3, GradeConditioning::default(), 1.0).unwrap();
        let g = policy_gradient(
            &p,
            0,
            ActionPair {
                answer: 0,
                grade: None,
            },
            1.0,
        )
        .unwrap();
        assert_eq!(g.answer, vec![0.5, -0.5]);
        assert!(g.grade.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn finite_differences_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for temperature in [1.0, 2.0] {
            for _ in 0..20 {
                let p = random_policy(&mut rng, temperature);
                let action = ActionPair {
                    answer: rng.gen_range(0..4),
                    grade: Some(rng.gen_range(0..5)),
                };
                let adv = rng.gen_range(-1.0..1.0);
                let err =
                    finite_difference_check(&p, rng.gen_range(0..3), action, adv, 1e-5).unwrap();
                assert!(err <= 1e-4, "temperature {temperature}: {err}");
            }
        }
    }

    #[test]
    fn context_only_grade_rows() {
        let p = PolicySnapshot::uniform(3, 4, 5, GradeConditioning::ContextOnly, 1.0).unwrap();
        assert_eq!(p.grade_logits.len(), 15);
        assert_eq!(p.grade_row_index(2, 3), 2);
    }

    #[test]
    fn entropy_of_uniform() {
        assert!((entropy(&[0.25; 4]) - (4.0f64).ln()).abs() < 1e-12);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
    }
}
