//! Condition x family x seed sweeps and their on-disk layout.
//!
//! ```text
//! <out>/config.toml            resolved config the sweep ran with
//! <out>/manifest.json          cells, paths, status
//! <out>/logs/<stem>.jsonl      one RoundRecord per line
//! <out>/summaries/<stem>.json  RunSummary
//! <out>/summary.csv            one row per completed cell
//! <out>/aggregate.csv          per (condition, family) means over seeds
//! <out>/inflation.csv          condition x family matrix of mean inflation
//! ```

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::episode::{run_episode_with, Cell};
use crate::env::{Condition, TaskKind};
use crate::error::{Error, Result};
use crate::metrics::{summarize, RoundRecord, RunSummary};
use crate::par::{self, Execution};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const LOG_DIR: &str = "logs";
pub const SUMMARY_DIR: &str = "summaries";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Pending,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub family: String,
    pub family_index: usize,
    pub condition: Condition,
    pub seed: u64,
    /// Relative to the sweep directory.
    pub log_path: PathBuf,
    pub summary_path: PathBuf,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ManifestCell {
    pub fn cell(&self) -> Cell {
        Cell {
            family_index: self.family_index,
            family: self.family.clone(),
            condition: self.condition,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub master_seed: u64,
    pub rounds_per_episode: usize,
    pub cells: Vec<ManifestCell>,
}

impl SweepManifest {
    /// Every (family, condition, seed) cell of `config`, all pending.
    pub fn plan(config: &ExperimentConfig) -> Result<Self> {
        let mut cells = Vec::new();
        for (fi, _) in config.families.iter().enumerate() {
            for &condition in &config.conditions {
                for &seed in &config.seeds {
                    let cell = Cell::new(config, fi, condition, seed)?;
                    let stem = cell.stem();
                    cells.push(ManifestCell {
                        family: cell.family,
                        family_index: fi,
                        condition,
                        seed,
                        log_path: Path::new(LOG_DIR).join(format!("{stem}.jsonl")),
                        summary_path: Path::new(SUMMARY_DIR).join(format!("{stem}.json")),
                        status: CellStatus::Pending,
                        error: None,
                    });
                }
            }
        }
        Ok(Self {
            master_seed: config.master_seed,
            rounds_per_episode: config.rounds_per_episode,
            cells,
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path,
            message: e.to_string(),
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn failed(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.status == CellStatus::Failed)
            .count()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    pub execution: Execution,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Keep cells a previous run of the same config already completed.
    pub resume: bool,
}

/// Means over the completed seeds of one (condition, family) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub condition: Condition,
    pub family: String,
    pub task_kind: TaskKind,
    pub seeds: usize,
    pub mean_reward: f64,
    pub mean_accuracy: f64,
    pub mean_grade: Option<f64>,
    pub mean_inflation: Option<f64>,
    pub saturated_seeds: usize,
    pub wirehead_seeds: usize,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub manifest: SweepManifest,
    /// Summaries of completed cells, in manifest order.
    pub summaries: Vec<RunSummary>,
    pub aggregates: Vec<AggregateRow>,
    pub executed: usize,
    pub skipped: usize,
}

/// Runs every cell of `config` into `config.output_dir`.
///
/// A failing cell is recorded in the manifest and the rest of the sweep
/// carries on; the caller decides what a non-zero `manifest.failed()` means.
pub fn run_sweep(config: &ExperimentConfig, options: SweepOptions) -> Result<SweepReport> {
    config.validate()?;
    let out = config.output_dir.clone();
    for dir in [out.clone(), out.join(LOG_DIR), out.join(SUMMARY_DIR)] {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let mut manifest = SweepManifest::plan(config)?;
    if options.resume && out.join(MANIFEST_FILE).exists() {
        let previous = SweepManifest::load(&out)?;
        let stored = ExperimentConfig::load(&out.join(CONFIG_FILE))?;
        if !same_experiment(&stored, config) {
            return Err(Error::usage(format!(
                "{} was written by a different config; rerun without resume",
                out.display()
            )));
        }
        for cell in &mut manifest.cells {
            let done = previous.cells.iter().any(|p| {
                p.status == CellStatus::Completed
                    && p.log_path == cell.log_path
                    && out.join(&p.log_path).is_file()
                    && out.join(&p.summary_path).is_file()
            });
            if done {
                cell.status = CellStatus::Completed;
            }
        }
    }
    write_atomic(&out.join(CONFIG_FILE), config.to_toml().as_bytes())?;
    manifest.save(&out)?;

    let todo: Vec<usize> = (0..manifest.cells.len())
        .filter(|&i| manifest.cells[i].status != CellStatus::Completed)
        .collect();
    let skipped = manifest.cells.len() - todo.len();
    let shared = Mutex::new(manifest);
    let jobs: Vec<ManifestCell> = {
        let m = shared.lock().expect("manifest lock");
        todo.iter().map(|&i| m.cells[i].clone()).collect()
    };

    let outcomes = par::with_workers(options.workers, || {
        par::map_indexed(options.execution, &jobs, |j, cell| {
            let result = run_cell(config, &out, cell);
            let mut m = shared.lock().expect("manifest lock");
            let entry = &mut m.cells[todo[j]];
            match &result {
                Ok(_) => {
                    entry.status = CellStatus::Completed;
                    entry.error = None;
                }
                Err(e) => {
                    entry.status = CellStatus::Failed;
                    entry.error = Some(e.to_string());
                }
            }
            m.save(&out)
        })
    });
    for o in outcomes {
        o?;
    }
    let manifest = shared.into_inner().expect("manifest lock");

    let mut summaries = Vec::new();
    for cell in manifest
        .cells
        .iter()
        .filter(|c| c.status == CellStatus::Completed)
    {
        summaries.push(load_summary(&out.join(&cell.summary_path))?);
    }
    let aggregates = aggregate(config, &summaries);
    write_atomic(&out.join("summary.csv"), summary_csv(&summaries).as_bytes())?;
    write_atomic(
        &out.join("aggregate.csv"),
        aggregate_csv(&aggregates).as_bytes(),
    )?;
    write_atomic(
        &out.join("inflation.csv"),
        inflation_csv(config, &aggregates).as_bytes(),
    )?;

    Ok(SweepReport {
        manifest,
        summaries,
        aggregates,
        executed: jobs.len(),
        skipped,
    })
}

fn same_experiment(a: &ExperimentConfig, b: &ExperimentConfig) -> bool {
    let strip = |c: &ExperimentConfig| ExperimentConfig {
        output_dir: PathBuf::new(),
        plots: Default::default(),
        ..c.clone()
    };
    strip(a) == strip(b)
}

/// Runs one cell, streaming its log. On failure the lines written so far
/// stay on disk.
fn run_cell(config: &ExperimentConfig, out: &Path, cell: &ManifestCell) -> Result<RunSummary> {
    let log_path = out.join(&cell.log_path);
    let file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut writer = BufWriter::new(file);
    let mut records = Vec::with_capacity(config.rounds_per_episode);
    let run = run_episode_with(config, &cell.cell(), |r| {
        write_record(&mut writer, r).map_err(|e| Error::io(&log_path, e))?;
        records.push(r.clone());
        Ok(())
    });
    let flushed = writer.flush().map_err(|e| Error::io(&log_path, e));
    run?;
    flushed?;

    let summary = summarize(&records, &config.metrics)?;
    let path = out.join(&cell.summary_path);
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(summary)
}

fn write_record(w: &mut impl Write, record: &RoundRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, record)?;
    w.write_all(b"\n")
}

/// Reads a JSONL round log.
pub fn read_log(path: &Path) -> Result<Vec<RoundRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

pub fn load_summary(path: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Groups summaries by (condition, family) in config order.
pub fn aggregate(config: &ExperimentConfig, summaries: &[RunSummary]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &condition in &config.conditions {
        for fam in &config.families {
            let group: Vec<&RunSummary> = summaries
                .iter()
                .filter(|s| s.condition == condition && s.family == fam.name)
                .collect();
            let Some(first) = group.first() else { continue };
            let n = group.len() as f64;
            let mean = |f: &dyn Fn(&RunSummary) -> f64| group.iter().map(|s| f(s)).sum::<f64>() / n;
            let mean_opt = |f: &dyn Fn(&RunSummary) -> Option<f64>| {
                group
                    .iter()
                    .map(|s| f(s))
                    .sum::<Option<f64>>()
                    .map(|total| total / n)
            };
            rows.push(AggregateRow {
                condition,
                family: fam.name.clone(),
                task_kind: first.task_kind,
                seeds: group.len(),
                mean_reward: mean(&|s| s.final_reward),
                mean_accuracy: mean(&|s| s.final_accuracy),
                mean_grade: mean_opt(&|s| s.final_grade),
                mean_inflation: mean_opt(&|s| s.grade_inflation),
                saturated_seeds: group.iter().filter(|s| s.saturated).count(),
                wirehead_seeds: group.iter().filter(|s| s.wirehead_flag).count(),
            });
        }
    }
    rows
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn summary_csv(summaries: &[RunSummary]) -> String {
    let mut s = String::from(
        "family,task_kind,condition,seed,rounds,degenerate_rounds,window,final_reward,\
         final_accuracy,final_grade,grade_inflation,saturated,wirehead_flag\n",
    );
    for r in summaries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.family,
            r.task_kind,
            r.condition,
            r.seed,
            r.rounds,
            r.degenerate_rounds,
            r.window,
            r.final_reward,
            r.final_accuracy,
            opt(r.final_grade),
            opt(r.grade_inflation),
            r.saturated,
            r.wirehead_flag
        );
    }
    s
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = String::from(
        "condition,family,task_kind,seeds,mean_reward,mean_accuracy,mean_grade,\
         mean_inflation,saturated_seeds,wirehead_seeds\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.condition,
            r.family,
            r.task_kind,
            r.seeds,
            r.mean_reward,
            r.mean_accuracy,
            opt(r.mean_grade),
            opt(r.mean_inflation),
            r.saturated_seeds,
            r.wirehead_seeds
        );
    }
    s
}

/// Conditions down, families across; empty where no grade exists.
pub fn inflation_csv(config: &ExperimentConfig, rows: &[AggregateRow]) -> String {
    let mut s = String::from("condition");
    for f in &config.families {
        s.push(',');
        s.push_str(&f.name);
    }
    s.push('\n');
    for &c in &config.conditions {
        s.push_str(c.as_str());
        for f in &config.families {
            s.push(',');
            let cell = rows
                .iter()
                .find(|r| r.condition == c && r.family == f.name)
                .and_then(|r| r.mean_inflation);
            s.push_str(&opt(cell));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(out: &Path) -> ExperimentConfig {
        ExperimentConfig {
            rounds_per_episode: 60,
            examples_per_dataset: 20,
            seeds: vec![0, 1],
            output_dir: out.to_path_buf(),
            ..Default::default()
        }
    }

    #[test]
    fn plan_has_unique_cells_and_paths() {
        let m = SweepManifest::plan(&ExperimentConfig::default()).unwrap();
        assert_eq!(m.cells.len(), 45);
        let mut logs: Vec<_> = m.cells.iter().map(|c| c.log_path.clone()).collect();
        logs.sort();
        logs.dedup();
        assert_eq!(logs.len(), 45);
    }

    #[test]
    fn sweep_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        let rep = run_sweep(&cfg, SweepOptions::default()).unwrap();
        assert_eq!(rep.executed, 18);
        assert_eq!(rep.manifest.failed(), 0);
        assert_eq!(rep.summaries.len(), 18);
        for c in &rep.manifest.cells {
            assert_eq!(read_log(&dir.path().join(&c.log_path)).unwrap().len(), 60);
        }
        let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(csv.lines().count(), 19);
        let matrix = fs::read_to_string(dir.path().join("inflation.csv")).unwrap();
        assert!(matrix.starts_with("condition,sentiment,arithmetic,summarization\ncontrol,,,\n"));
    }

    #[test]
    fn resume_skips_completed_cells() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        run_sweep(&cfg, SweepOptions::default()).unwrap();
        let again = run_sweep(
            &cfg,
            SweepOptions {
                resume: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((again.executed, again.skipped), (0, 18));

        let mut other = cfg.clone();
        other.rounds_per_episode = 61;
        assert!(run_sweep(
            &other,
            SweepOptions {
                resume: true,
                ..Default::default()
            }
        )
        .is_err());
    }
}
