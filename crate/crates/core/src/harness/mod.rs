//! Experiment orchestration: config, episodes, sweeps, certification, plots.

mod certify;
mod config;
mod episode;
mod export;
pub mod plot;
pub mod seed;
pub mod sweep;

pub use certify::{certify_fixture, CertificateFile, CertificateStatus};
pub use config::{AgentSettings, ExperimentConfig, FamilyConfig, PlotSettings};
pub use episode::{run_episode, run_episode_with, Cell, EpisodeOutput};
pub use export::export_fixture;
pub use plot::{plot, FigureKind, PlotOutput};
pub use sweep::{run_sweep, SweepManifest, SweepOptions, SweepReport};
