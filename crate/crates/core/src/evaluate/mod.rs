//! Fold planning, cross-validated evaluation, `t_d` tuning, sweeps and the
//! two-component PCA projection.

pub mod crossval;
pub mod folds;
pub mod metrics;
pub mod pca;
pub mod sweep;
pub mod tune;

pub use crossval::{crossval_evaluate, crossval_with, evaluate_with_consensus, fold_consensus, CvReport, FoldOutcome};
pub use folds::{make_folds, FoldAssignment, FoldScheme};
pub use metrics::{compute_metrics, Confusion, MeanStd, Metrics};
pub use pca::{pca_project, PcaProjection};
pub use sweep::{td_sweep, SweepRow, SweepSettings, SweepTable};
pub use tune::{average_td, tune_td, FeatureSource, TdDatasets, TdTuningResult, TD_RANGE};

/// Stream tags mixed into [`crate::seed::derive`] so that every random
/// choice draws from its own generator.
pub mod streams {
    pub const FOLDS: u64 = 0xF0;
    pub const MODEL: u64 = 0x70;
    pub const HOLDOUT: u64 = 0x80;
    pub const TUNE_CNCV: u64 = 0x7D;
    pub const TUNE_MODEL: u64 = 0x7E;
    pub const BALANCE: u64 = 0xBA;
}
