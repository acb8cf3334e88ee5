use serde::{Deserialize, Serialize};

pub const DEFAULT_ALPHA: f64 = 0.9;

/// Exponential moving average of past rewards.
///
/// The first reward initialises the average outright; afterwards
/// `b <- alpha * b + (1 - alpha) * r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineState {
    pub value: f64,
    pub alpha: f64,
    pub initialized: bool,
}

impl BaselineState {
    pub fn new(alpha: f64) -> Self {
        Self {
            value: 0.0,
            alpha,
            initialized: false,
        }
    }

    #[must_use]
    pub fn update(self, reward: f64) -> Self {
        let value = if self.initialized {
            self.alpha * self.value + (1.0 - self.alpha) * reward
        } else {
            reward
        };
        Self {
            value,
            alpha: self.alpha,
            initialized: true,
        }
    }
}

impl Default for BaselineState {
    fn default() -> Self {
        Self::new(DEFAULT_ALPHA)
    }
}

/// `reward - baseline`, with an uninitialised baseline read as zero.
pub fn compute_advantage(reward: f64, baseline: &BaselineState) -> f64 {
    if baseline.initialized {
        reward - baseline.value
    } else {
        reward
    }
}
