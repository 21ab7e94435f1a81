//! Experiment loop, metrics, significance testing and result files.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod report;
pub mod result;
pub mod train;
pub mod wilcoxon;

pub use config::ExperimentConfig;
pub use experiment::{
    baseline_config, compare_on_dataset, compare_runs, compare_to_random, load_or_generate, network_for,
    run_active_learning, run_on_dataset, Comparison,
};
pub use metrics::{accuracy, weighted_f1, F1Report};
pub use report::{occurrence_report, render_tables, Tables};
pub use result::{Checkpoint, Occurrence, RunResult, SelectedItem, SignificanceReport, RESULT_VERSION};
pub use train::{
    train_frames, train_sequences, ClassWeighting, LabeledSequence, StopReason, TrainConfig, TrainOutcome,
};
pub use wilcoxon::{wilcoxon_signed_rank, Band, WilcoxonTest};
