//! JSON fixture format for POMDPs.
//!
//! ```json
//! {
//!   "states": ["s0", "s1"],
//!   "actions": ["left", "right"],
//!   "observations": ["lo", "hi"],
//!   "transition": [[[...|S|...], ...|A|...], ...|S|...],
//!   "observation_kernel": [[[...|O|...], ...|A|...], ...|S|...],
//!   "discount": 0.9,
//!   "implemented_reward": [...|O|...],
//!   "intended_reward": [...|S|...],
//!   "dominance": { "task_actions": [0], "wirehead_action": 1, "r_task": 0.6 }
//! }
//! ```
//!
//! `transition[s][a][s']` is `T(s' | s, a)` and
//! `observation_kernel[s'][a][o]` is `O(o | s', a)`. The `dominance` block
//! is optional.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DominanceSpec, FinitePomdp, RewardMaps};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DominanceFixture {
    pub task_actions: Vec<usize>,
    pub wirehead_action: usize,
    pub r_task: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PomdpFixture {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub observation_kernel: Vec<Vec<Vec<f64>>>,
    pub discount: f64,
    pub implemented_reward: Vec<f64>,
    pub intended_reward: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominance: Option<DominanceFixture>,
}

impl PomdpFixture {
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let fixture: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Ok(fixture)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let fixture = Self::from_json(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        // Surface shape problems with the file name attached.
        fixture.build().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(fixture)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json();
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fixture serialises");
        s.push('\n');
        s
    }

    /// Validates and builds the model, rewards, and optional dominance spec.
    pub fn build(&self) -> Result<(FinitePomdp, RewardMaps, Option<DominanceSpec>)> {
        let named = [
            ("states", self.states.len(), self.transition.len()),
            (
                "observations",
                self.observations.len(),
                self.implemented_reward.len(),
            ),
            ("states", self.states.len(), self.intended_reward.len()),
        ];
        for (field, declared, found) in named {
            if declared != found {
                return Err(Error::usage(format!(
                    "{field}: {declared} declared but {found} rows supplied"
                )));
            }
        }
        if let Some(block) = self.transition.first() {
            if block.len() != self.actions.len() {
                return Err(Error::usage(format!(
                    "actions: {} declared but transition[0] has {} rows",
                    self.actions.len(),
                    block.len()
                )));
            }
        }
        let pomdp = FinitePomdp::new(
            self.transition.clone(),
            self.observation_kernel.clone(),
            self.discount,
        )?;
        let rewards = RewardMaps::new(
            self.implemented_reward.clone(),
            self.intended_reward.clone(),
        )?;
        rewards.check_shape(&pomdp)?;
        let spec = match &self.dominance {
            Some(d) => {
                let spec = DominanceSpec::new(d.task_actions.clone(), d.wirehead_action, d.r_task)
                    .map_err(|e| Error::usage(format!("dominance: {e}")))?;
                spec.check_indices(&pomdp)
                    .map_err(|e| Error::usage(format!("dominance.task_actions: {e}")))?;
                Some(spec)
            }
            None => None,
        };
        Ok((pomdp, rewards, spec))
    }

    pub fn from_model(
        pomdp: &FinitePomdp,
        rewards: &RewardMaps,
        spec: Option<&DominanceSpec>,
    ) -> Self {
        let names = |prefix: &str, n: usize| (0..n).map(|i| format!("{prefix}{i}")).collect();
        Self {
            states: names("s", pomdp.n_states()),
            actions: names("a", pomdp.n_actions()),
            observations: names("o", pomdp.n_observations()),
            transition: pomdp.transition_rows(),
            observation_kernel: pomdp.observation_rows(),
            discount: pomdp.discount(),
            implemented_reward: rewards.implemented().to_vec(),
            intended_reward: rewards.intended().to_vec(),
            dominance: spec.map(|d| DominanceFixture {
                task_actions: d.task_actions().to_vec(),
                wirehead_action: d.wirehead_action(),
                r_task: d.r_task(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "states": ["s"],
        "actions": ["task", "wire"],
        "observations": ["lo", "hi"],
        "transition": [[[1.0], [1.0]]],
        "observation_kernel": [[[1.0, 0.0], [0.0, 1.0]]],
        "discount": 0.9,
        "implemented_reward": [0.4, 1.0],
        "intended_reward": [0.4],
        "dominance": {"task_actions": [0], "wirehead_action": 1, "r_task": 0.4}
    }"#;

    #[test]
    fn parses_and_builds() {
        let f = PomdpFixture::from_json(SMALL).unwrap();
        let (p, r, spec) = f.build().unwrap();
        assert_eq!(p.n_actions(), 2);
        assert_eq!(r.implemented(), &[0.4, 1.0]);
        assert_eq!(spec.unwrap().wirehead_action(), 1);
        let again = PomdpFixture::from_model(&p, &r, None);
        assert_eq!(again.transition, f.transition);
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = PomdpFixture::from_json("{\n  \"states\": [\"s\",\n}").unwrap_err();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn shape_errors_name_the_field() {
        let bad = SMALL.replace(
            "\"intended_reward\": [0.4]",
            "\"intended_reward\": [0.4, 0.1]",
        );
        let err = PomdpFixture::from_json(&bad).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("states"), "{err}");

        let bad = SMALL.replace("[[[1.0, 0.0], [0.0, 1.0]]]", "[[[0.7, 0.0], [0.0, 1.0]]]");
        let err = PomdpFixture::from_json(&bad).unwrap().build().unwrap_err();
        assert!(
            err.to_string().contains("observation_kernel[0][0]"),
            "{err}"
        );
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = SMALL.replace("\"discount\"", "\"gamma\": 0.5, \"discount\"");
        assert!(PomdpFixture::from_json(&bad).is_err());
    }
}
