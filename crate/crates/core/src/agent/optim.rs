use serde::{Deserialize, Serialize};

use super::policy::{PolicyGradient, PolicySnapshot};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    /// Adam-style moment scaling; plain gradient ascent when false.
    pub adaptive: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.2,
            weight_decay: 0.01,
            clip_norm: 1.0,
            adaptive: true,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage("learning_rate must be positive"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::usage("weight_decay must be non-negative"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::usage("clip_norm must be positive"));
        }
        Ok(())
    }
}

/// First and second moment accumulators, laid out like the logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new(policy: &PolicySnapshot) -> Self {
        let n = policy.answer_logits.len() + policy.grade_logits.len();
        Self {
            step: 0,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub grad_norm: f64,
    pub clipped_norm: f64,
}

/// Scales `grad` in place so its global L2 norm is at most `clip_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grad: &mut PolicyGradient, clip_norm: f64) -> f64 {
    let norm = grad.l2_norm();
    if norm > clip_norm {
        let scale = clip_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

/// One ascent step: clip, optionally rescale by the moments, move the
/// logits, and shrink them by `learning_rate * weight_decay` independently
/// of the gradient.
///
/// A non-finite gradient leaves `policy` and `state` untouched.
pub fn apply_update(
    policy: &mut PolicySnapshot,
    mut grad: PolicyGradient,
    config: &OptimizerConfig,
    state: &mut OptimizerState,
) -> Result<UpdateStats> {
    if grad.answer.len() != policy.answer_logits.len()
        || grad.grade.len() != policy.grade_logits.len()
    {
        return Err(Error::usage("gradient shape does not match the policy"));
    }
    if state.first_moment.len() != grad.answer.len() + grad.grade.len() {
        return Err(Error::usage(
            "optimizer state shape does not match the policy",
        ));
    }
    if !grad.is_finite() {
        return Err(Error::Numerical("non-finite policy gradient".into()));
    }

    let grad_norm = clip_global_norm(&mut grad, config.clip_norm);
    let clipped_norm = grad.l2_norm();
    let decay = 1.0 - config.learning_rate * config.weight_decay;

    state.step += 1;
    let t = state.step as i32;
    let (bc1, bc2) = (1.0 - config.beta1.powi(t), 1.0 - config.beta2.powi(t));
    let params = policy
        .answer_logits
        .iter_mut()
        .chain(policy.grade_logits.iter_mut());
    for (k, (theta, g)) in params.zip(grad.iter()).enumerate() {
        let direction = if config.adaptive {
            let m = &mut state.first_moment[k];
            let v = &mut state.second_moment[k];
            *m = config.beta1 * *m + (1.0 - config.beta1) * g;
            *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
            (*m / bc1) / ((*v / bc2).sqrt() + config.epsilon)
        } else {
            *g
        };
        *theta = *theta * decay + config.learning_rate * direction;
    }

    Ok(UpdateStats {
        grad_norm,
        clipped_norm,
    })
}
