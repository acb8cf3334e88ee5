//! Tabular REINFORCE over factorised (answer, grade) actions.

mod baseline;
mod optim;
mod policy;

pub use baseline::{compute_advantage, BaselineState, DEFAULT_ALPHA};
pub use optim::{apply_update, clip_global_norm, OptimizerConfig, OptimizerState, UpdateStats};
pub use policy::{
    entropy, finite_difference_check, policy_gradient, sample_action, GradeConditioning,
    PolicyGradient, PolicySnapshot, SampledAction,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Everything needed to resume or inspect a trained agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub round: usize,
    pub policy: PolicySnapshot,
    pub baseline: BaselineState,
    pub optimizer: OptimizerConfig,
    pub optimizer_state: OptimizerState,
}

impl AgentCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("checkpoint serialises");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
