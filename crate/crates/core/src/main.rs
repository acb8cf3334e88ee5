use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wirehead::env::{Condition, ExportOptions, GradeGrid, TaskKind};
use wirehead::harness::{
    certify_fixture, export_fixture, plot, run_episode_with, run_sweep, Cell, CertificateStatus,
    ExperimentConfig, FamilyConfig, FigureKind, SweepOptions,
};
use wirehead::metrics::summarize;
use wirehead::par::Execution;
use wirehead::pomdp::SolverOptions;
use wirehead::Error;

#[derive(Parser)]
#[command(
    name = "wirehead",
    version,
    about = "Self-grading wireheading experiments and dominance certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every (family, condition, seed) cell of a config.
    Run {
        #[command(flatten)]
        common: RunArgs,
        /// Worker threads for the cell pool.
        #[arg(long)]
        workers: Option<usize>,
        /// Skip cells a previous run of the same config completed.
        #[arg(long)]
        resume: bool,
        /// Run cells one at a time on the calling thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Run one cell and write its log, summary and final policy.
    Episode {
        #[command(flatten)]
        common: RunArgs,
        #[arg(long)]
        family: String,
        #[arg(long)]
        condition: Condition,
        /// Seed value of the cell (one of the config's `seeds`, or any other).
        #[arg(long)]
        cell_seed: u64,
    },
    /// Check the dominance premises of a POMDP fixture and certify it.
    Certify {
        fixture: PathBuf,
        /// Replace the fixture's discount.
        #[arg(long)]
        discount: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        /// Certificate path; defaults to `<fixture stem>.certificate.json` beside the fixture.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw figures from a sweep directory.
    Plot {
        dir: PathBuf,
        /// learning_curves, inflation_bars, reward_vs_accuracy, or all.
        #[arg(long, default_value = "all")]
        figure: String,
    },
    /// Write the single-prompt Selfgrade POMDP of a task family as a fixture.
    ExportPomdp {
        #[arg(long)]
        kind: TaskKind,
        #[arg(long)]
        answers: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        ambiguity: f64,
        #[arg(long)]
        ceiling: Option<f64>,
        #[arg(long, default_value_t = 0)]
        gold: usize,
        #[arg(long, default_value_t = 11)]
        grid: usize,
        #[arg(long, default_value_t = 0.9)]
        discount: f64,
        /// Cap the gold answer's honest grade below the top grade.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run {
            common,
            workers,
            resume,
            sequential,
        } => {
            let cfg = common.resolve()?;
            let options = SweepOptions {
                execution: if sequential {
                    Execution::Sequential
                } else {
                    Execution::Parallel
                },
                workers,
                resume,
            };
            let report = run_sweep(&cfg, options)?;
            println!(
                "{} cells: {} run, {} resumed, {} failed -> {}",
                report.manifest.cells.len(),
                report.executed,
                report.skipped,
                report.manifest.failed(),
                cfg.output_dir.display()
            );
            println!("condition  family           reward  accuracy  inflation");
            for r in &report.aggregates {
                let infl = r
                    .mean_inflation
                    .map(|v| format!("{v:+.3}"))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{:<10} {:<16} {:>6.3}  {:>8.3}  {:>9}",
                    r.condition.as_str(),
                    r.family,
                    r.mean_reward,
                    r.mean_accuracy,
                    infl
                );
            }
            for c in report.manifest.cells.iter().filter(|c| c.error.is_some()) {
                eprintln!(
                    "failed: {}: {}",
                    c.cell().stem(),
                    c.error.as_deref().unwrap_or("")
                );
            }
            if cfg.plots.enabled && !report.summaries.is_empty() {
                for kind in FigureKind::ALL {
                    let out = plot(&cfg.output_dir, kind)?;
                    for w in out.warnings {
                        eprintln!("plot {}: {w}", kind.as_str());
                    }
                }
            }
            Ok(if report.manifest.failed() > 0 {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Episode {
            common,
            family,
            condition,
            cell_seed,
        } => {
            let cfg = common.resolve()?;
            let fi = cfg.family_index(&family)?;
            let cell = Cell::new(&cfg, fi, condition, cell_seed)?;
            episode(&cfg, &cell)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Certify {
            fixture,
            discount,
            tolerance,
            out,
        } => {
            let options = SolverOptions {
                tolerance,
                ..Default::default()
            };
            let cert = certify_fixture(&fixture, discount, options)?;
            let out = out.unwrap_or_else(|| default_certificate_path(&fixture));
            cert.save(&out)?;
            print!("{}", cert.render());
            println!("certificate: {}", out.display());
            Ok(if cert.status == CertificateStatus::Pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Plot { dir, figure } => {
            let kinds = if figure == "all" {
                FigureKind::ALL.to_vec()
            } else {
                vec![figure.parse::<FigureKind>()?]
            };
            for kind in kinds {
                let out = plot(&dir, kind)?;
                for f in &out.files {
                    println!("{}", f.display());
                }
                for w in &out.warnings {
                    eprintln!("warning: {w}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportPomdp {
            kind,
            answers,
            ambiguity,
            ceiling,
            gold,
            grid,
            discount,
            strict,
            out,
        } => {
            let family = FamilyConfig {
                name: "export".into(),
                kind,
                answer_count: answers,
                ambiguity,
                score_ceiling: ceiling,
                context_count: 1,
            }
            .family()?;
            let grid = GradeGrid::uniform(grid)?;
            let options = ExportOptions {
                discount,
                strict,
                ..Default::default()
            };
            export_fixture(&family, &grid, gold, options)?.save(&out)?;
            println!("{}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn default_certificate_path(fixture: &Path) -> PathBuf {
    let stem = fixture
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "fixture".into());
    fixture.with_file_name(format!("{stem}.certificate.json"))
}

fn episode(cfg: &ExperimentConfig, cell: &Cell) -> Result<(), Error> {
    use std::io::Write;

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = cell.stem();
    let log_path = dir.join(format!("{stem}.jsonl"));
    let file = std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    let mut records = Vec::new();
    let run = run_episode_with(cfg, cell, |r| {
        serde_json::to_writer(&mut writer, r)
            .map_err(std::io::Error::from)
            .and_then(|_| writer.write_all(b"\n"))
            .map_err(|e| Error::io(&log_path, e))?;
        records.push(r.clone());
        Ok(())
    });
    writer.flush().map_err(|e| Error::io(&log_path, e))?;
    let checkpoint = run?;
    checkpoint.save(&dir.join(format!("{stem}.policy.json")))?;

    let summary = summarize(&records, &cfg.metrics)?;
    let summary_path = dir.join(format!("{stem}.summary.json"));
    let text = serde_json::to_string_pretty(&summary).expect("summary serialises") + "\n";
    std::fs::write(&summary_path, text).map_err(|e| Error::io(&summary_path, e))?;
    println!(
        "{stem}: reward {:.3}, accuracy {:.3}{}",
        summary.final_reward,
        summary.final_accuracy,
        summary
            .grade_inflation
            .map(|v| format!(", inflation {v:+.3}"))
            .unwrap_or_default()
    );
    println!("{}", log_path.display());
    Ok(())
}
