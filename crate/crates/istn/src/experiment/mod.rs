//! Config-driven experiment orchestration: dataset synthesis, baseline
//! training, adversarial adaptation, evaluation tables, grid search, and
//! figures, with idempotent stage resume.

mod config;
mod figures;
mod grid;
mod run;

pub use config::{DatasetParams, ExperimentConfig, GridAxes, VariantSpec};
pub use figures::{render_figures, FigureKind, FigureRequest};
pub use grid::{config_hash, grid_points, grid_search, proxy_score, GridEntry, GridOutcome, GridPoint};
pub use run::{
    fit_and_save, load_istn_checkpoint, run_experiment, stage_baseline, stage_synth,
    ExperimentSummary, RunSummary,
};
