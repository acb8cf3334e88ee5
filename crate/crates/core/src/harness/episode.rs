use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::seed::{cell_seed, CellStreams};
use crate::agent::{
    apply_update, compute_advantage, entropy, policy_gradient, sample_action, AgentCheckpoint,
    BaselineState, OptimizerState, PolicySnapshot,
};
use crate::env::{build_dataset, step, Condition, GradeGrid};
use crate::error::{Error, Result};
use crate::metrics::RoundRecord;

/// One (family, condition, seed) unit of a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub family_index: usize,
    pub family: String,
    pub condition: Condition,
    pub seed: u64,
}

impl Cell {
    pub fn new(
        config: &ExperimentConfig,
        family_index: usize,
        condition: Condition,
        seed: u64,
    ) -> Result<Self> {
        let family = config
            .families
            .get(family_index)
            .ok_or_else(|| Error::usage(format!("family index {family_index} out of range")))?
            .name
            .clone();
        Ok(Self {
            family_index,
            family,
            condition,
            seed,
        })
    }

    /// File stem shared by this cell's log and summary.
    pub fn stem(&self) -> String {
        format!("{}__{}__seed{}", self.family, self.condition, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutput {
    pub records: Vec<RoundRecord>,
    pub checkpoint: AgentCheckpoint,
}

/// Trains one agent for `rounds_per_episode` rounds.
///
/// Round `t` uses dataset instance `t mod |dataset|`. Control samples only an
/// answer and updates only the answer head; the other conditions sample an
/// answer and then a grade, and update both heads from the summed
/// log-probabilities. The baseline absorbs the reward before the advantage
/// is taken. A round whose gradient is non-finite keeps its record, is
/// flagged degenerate, and leaves the policy unchanged.
pub fn run_episode(config: &ExperimentConfig, cell: &Cell) -> Result<EpisodeOutput> {
    let mut records = Vec::with_capacity(config.rounds_per_episode);
    let checkpoint = run_episode_with(config, cell, |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok(EpisodeOutput {
        records,
        checkpoint,
    })
}

/// Same loop as [`run_episode`], handing each record to `sink` as soon as
/// the round finishes. An error from the sink stops the episode.
pub fn run_episode_with(
    config: &ExperimentConfig,
    cell: &Cell,
    mut sink: impl FnMut(&RoundRecord) -> Result<()>,
) -> Result<AgentCheckpoint> {
    config.validate()?;
    let family_cfg = config
        .families
        .get(cell.family_index)
        .ok_or_else(|| Error::usage("cell family index out of range"))?;
    let family = family_cfg.family()?;
    let grid = GradeGrid::uniform(config.agent.grade_grid_size)?;
    let mut streams = CellStreams::new(cell_seed(config.master_seed, cell.family_index, cell.seed));
    let dataset = build_dataset(&family, config.examples_per_dataset, streams.dataset_seed)?;

    let mut policy = PolicySnapshot::uniform(
        family.context_count,
        family.answer_count,
        grid.len(),
        config.agent.grade_conditioning,
        config.agent.temperature,
    )?;
    let optimizer = config.agent.optimizer;
    let mut opt_state = OptimizerState::new(&policy);
    let mut baseline = BaselineState::new(config.agent.alpha);
    let grading = cell.condition.emits_grade();

    for round in 0..config.rounds_per_episode {
        let instance = &dataset[round % dataset.len()];
        let ctx = instance.context_id;
        let answer_entropy = entropy(&policy.answer_probs(ctx));
        let sampled = sample_action(&policy, ctx, grading, &mut streams.agent)?;
        let action = sampled.action;
        let grade_entropy = grading.then(|| entropy(&policy.grade_probs(ctx, action.answer)));

        let outcome = step(
            &family,
            &grid,
            instance,
            action,
            cell.condition,
            &mut streams.env,
        )?;
        baseline = baseline.update(outcome.reward);
        let advantage = compute_advantage(outcome.reward, &baseline);

        let degenerate = match policy_gradient(&policy, ctx, action, advantage)
            .and_then(|g| apply_update(&mut policy, g, &optimizer, &mut opt_state))
        {
            Ok(_) => false,
            Err(Error::Numerical(_)) => true,
            Err(e) => return Err(e),
        };

        sink(&RoundRecord {
            round,
            family: cell.family.clone(),
            task_kind: family.kind,
            condition: cell.condition,
            seed: cell.seed,
            instance_id: instance.instance_id,
            context_id: ctx,
            answer: action.answer,
            grade_index: action.grade,
            reward: outcome.reward,
            accuracy: outcome.accuracy,
            grade: outcome.grade,
            baseline: baseline.value,
            advantage,
            answer_entropy,
            grade_entropy,
            degenerate,
        })?;
    }

    Ok(AgentCheckpoint {
        round: config.rounds_per_episode,
        policy,
        baseline,
        optimizer,
        optimizer_state: opt_state,
    })
}
