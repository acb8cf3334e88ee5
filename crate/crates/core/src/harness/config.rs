use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{GradeConditioning, OptimizerConfig, DEFAULT_ALPHA};
use crate::env::{
    Condition, TaskFamily, TaskKind, DEFAULT_CONTEXT_COUNT, DEFAULT_EXAMPLE_COUNT,
    DEFAULT_GRID_SIZE,
};
use crate::error::{Error, Result};
use crate::metrics::MetricsSettings;

/// One task family entry in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub name: String,
    pub kind: TaskKind,
    #[serde(default)]
    pub answer_count: Option<usize>,
    #[serde(default)]
    pub ambiguity: f64,
    #[serde(default)]
    pub score_ceiling: Option<f64>,
    #[serde(default = "default_contexts")]
    pub context_count: usize,
}

fn default_contexts() -> usize {
    DEFAULT_CONTEXT_COUNT
}

impl FamilyConfig {
    pub fn family(&self) -> Result<TaskFamily> {
        let family = match self.kind {
            TaskKind::ExactBinary => TaskFamily::exact_binary(),
            TaskKind::ExactMulti => TaskFamily::exact_multi(self.answer_count.unwrap_or(10)),
            TaskKind::GradedAmbiguous => TaskFamily::graded_ambiguous(
                self.answer_count.unwrap_or(10),
                self.ambiguity,
                self.score_ceiling.unwrap_or(0.8),
            ),
        }
        .with_contexts(self.context_count);
        let family = TaskFamily {
            answer_count: self.answer_count.unwrap_or(family.answer_count),
            ..family
        };
        family
            .validate()
            .map_err(|e| Error::usage(format!("family {:?}: {e}", self.name)))?;
        Ok(family)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSettings {
    pub optimizer: OptimizerConfig,
    pub alpha: f64,
    pub temperature: f64,
    pub grade_conditioning: GradeConditioning,
    pub grade_grid_size: usize,
}

impl Default for AgentSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            alpha: DEFAULT_ALPHA,
            temperature: 1.0,
            grade_conditioning: GradeConditioning::default(),
            grade_grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSettings {
    pub enabled: bool,
    /// Moving-average window for learning curves.
    pub smoothing: usize,
}

impl Default for PlotSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            smoothing: 25,
        }
    }
}

/// Everything a sweep needs; see `configs/default.toml` for the annotated
/// file form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub rounds_per_episode: usize,
    pub examples_per_dataset: usize,
    pub seeds: Vec<u64>,
    pub conditions: Vec<Condition>,
    pub families: Vec<FamilyConfig>,
    pub agent: AgentSettings,
    pub metrics: MetricsSettings,
    pub output_dir: PathBuf,
    pub plots: PlotSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            rounds_per_episode: 500,
            examples_per_dataset: DEFAULT_EXAMPLE_COUNT,
            seeds: (0..5).collect(),
            conditions: Condition::ALL.to_vec(),
            families: vec![
                FamilyConfig {
                    name: "sentiment".into(),
                    kind: TaskKind::ExactBinary,
                    answer_count: None,
                    ambiguity: 0.0,
                    score_ceiling: None,
                    context_count: DEFAULT_CONTEXT_COUNT,
                },
                FamilyConfig {
                    name: "arithmetic".into(),
                    kind: TaskKind::ExactMulti,
                    answer_count: Some(10),
                    ambiguity: 0.0,
                    score_ceiling: None,
                    context_count: DEFAULT_CONTEXT_COUNT,
                },
                FamilyConfig {
                    name: "summarization".into(),
                    kind: TaskKind::GradedAmbiguous,
                    answer_count: Some(10),
                    ambiguity: 0.5,
                    score_ceiling: Some(0.8),
                    context_count: DEFAULT_CONTEXT_COUNT,
                },
            ],
            agent: AgentSettings::default(),
            metrics: MetricsSettings::default(),
            output_dir: PathBuf::from("runs/default"),
            plots: PlotSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        cfg.validate().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds_per_episode == 0 {
            return Err(Error::usage("rounds_per_episode must be at least 1"));
        }
        if self.examples_per_dataset == 0 {
            return Err(Error::usage("examples_per_dataset must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::usage("seeds must not be empty"));
        }
        if self.conditions.is_empty() {
            return Err(Error::usage("conditions must not be empty"));
        }
        if self.families.is_empty() {
            return Err(Error::usage("families must not be empty"));
        }
        let mut names: Vec<&str> = self.families.iter().map(|f| f.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::usage("family names must be unique"));
        }
        if let Some(bad) = names.iter().find(|n| {
            n.is_empty()
                || !n
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        }) {
            return Err(Error::usage(format!(
                "family name {bad:?} must be non-empty and use only [A-Za-z0-9_-]"
            )));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::usage("seeds must be unique"));
        }
        let mut conds = self.conditions.clone();
        conds.sort_by_key(|c| *c as u8);
        if conds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::usage("conditions must be unique"));
        }
        for f in &self.families {
            f.family()?;
        }
        self.agent.optimizer.validate()?;
        if !(0.0..=1.0).contains(&self.agent.alpha) {
            return Err(Error::usage("alpha must lie in [0, 1]"));
        }
        if !(self.agent.temperature > 0.0) {
            return Err(Error::usage("temperature must be positive"));
        }
        if self.agent.grade_grid_size < 2 {
            return Err(Error::usage("grade_grid_size must be at least 2"));
        }
        if self.metrics.window == 0 {
            return Err(Error::usage("metrics.window must be at least 1"));
        }
        Ok(())
    }

    pub fn family_index(&self, name: &str) -> Result<usize> {
        self.families
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::usage(format!("no family named {name:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn sparse_file_takes_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            seeds = [1, 2]
            conditions = ["selfgrade"]
            [[families]]
            name = "summ"
            kind = "graded_ambiguous"
            ambiguity = 0.25
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.rounds_per_episode, 500);
        assert_eq!(cfg.examples_per_dataset, 100);
        let fam = cfg.families[0].family().unwrap();
        assert_eq!(fam.answer_count, 10);
        assert_eq!(fam.score_ceiling, 0.8);
        assert_eq!(cfg.agent.optimizer.clip_norm, 1.0);
        assert_eq!(cfg.agent.optimizer.weight_decay, 0.01);
    }

    #[test]
    fn shipped_default_file_matches_builtin_defaults() {
        let text = include_str!("../../../../configs/default.toml");
        assert_eq!(
            ExperimentConfig::from_toml(text).unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ExperimentConfig::default();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            rounds_per_episode: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.families[1].name = "sentiment".into();
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml("unknown_key = 3").is_err());
    }
}
