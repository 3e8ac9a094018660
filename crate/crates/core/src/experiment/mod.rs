//! Experiment protocol: dataset split, training loop with evaluation curve,
//! fit diagnosis, learning-rate sweeps and the synthetic corpus.

mod config;
mod curve;
mod dataset;
mod diagnose;
mod split;
pub mod sweep;
pub mod synthetic;
mod train;

pub use config::{FitThresholds, SplitSpec, TrainConfig, DESK_LR_SCALE, REFERENCE_LR};
pub use curve::CurvePoint;
pub use dataset::Dataset;
pub use diagnose::{diagnose_fit, stable_tail, Verdict};
pub use split::{apportion, split_dataset};
pub use sweep::{sweep, write_curve, write_sweep, SummaryRow, SweepOutcome};
pub use synthetic::{make_synthetic_corpus, SyntheticCorpus, SyntheticImage};
pub use train::{
    effective_spec, eval_schedule, evaluate_network, initial_loss, train, train_with, Evaluation, RunRecord,
    TrainOutcome,
};
