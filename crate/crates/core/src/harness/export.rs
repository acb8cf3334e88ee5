use crate::env::{to_pomdp, ExportOptions, GradeGrid, TaskFamily, TaskInstance};
use crate::error::Result;
use crate::pomdp::PomdpFixture;

/// Selfgrade fixture for a single prompt whose gold answer is `gold`.
///
/// Actions are named `y<answer>_g<grade>` and observations by their grade
/// value, so the file reads without the index arithmetic.
pub fn export_fixture(
    family: &TaskFamily,
    grid: &GradeGrid,
    gold: usize,
    options: ExportOptions,
) -> Result<PomdpFixture> {
    let instance = TaskInstance {
        instance_id: 0,
        context_id: 0,
        gold,
        difficulty: 0.0,
    };
    let ex = to_pomdp(family, grid, &instance, options)?;
    let mut fixture = PomdpFixture::from_model(&ex.pomdp, &ex.rewards, Some(&ex.spec));
    fixture.states = vec!["prompt".into()];
    fixture.observations = grid.values().iter().map(|g| format!("grade_{g}")).collect();
    fixture.actions = (0..family.answer_count)
        .flat_map(|y| grid.values().iter().map(move |g| format!("y{y}_g{g}")))
        .collect();
    Ok(fixture)
}
