//! Desk-scale simulation of the tuning protocols: DP-SGD on a synthetic
//! two-class task, random search with a Poisson number of candidates, and
//! the subset variants with hyperparameter extrapolation.

pub mod rng;
pub mod search;
pub mod sgd;
pub mod summary;
pub mod task;

pub use search::{
    poisson_sample, protocol_epsilon, run_experiment, run_replications, run_tuning, Candidate, CandidateGrid,
    ExperimentConfig, ExperimentReport, GridConfig, NoiseConfig, Replication, RunOptions,
};
pub use sgd::{clip_gradient, dp_sgd_step, train_candidate, Logistic, Objective, TrialRecord};
pub use summary::{mean_and_stderr, summarize, VariantSummary};
pub use task::{make_task, Dataset, Sample, SyntheticTask};
