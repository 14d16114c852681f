//! Experiment plumbing: seeded random instances, multi-trial studies, the
//! built-in discrete-time example and plot data files.

mod discrete;
mod plots;
pub mod rng;
mod study;
mod synthetic;

pub use discrete::{discrete_example, DiscreteExample};
pub use plots::{emit_plot_data, read_history_csv, read_points_csv, PlotFiles};
pub use study::{
    run_init, run_study, run_study_detailed, stat_rows_to_csv, ExperimentConfig, InitKind, StatRow,
    StudyOutcome, TrialRecord, SEED_ENV,
};
pub use synthetic::{
    gen_synthetic, random_feasible_triple, random_stable_matrix, random_unstable_matrix,
    SyntheticInstance, SYNTHETIC_P_FLOOR,
};
