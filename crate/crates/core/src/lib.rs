//! Symbolic-transfer-entropy connectivity features for multimodal eSports
//! sensor recordings, consensus nested cross-validation feature selection,
//! and player skill classification.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`ingest`]: manifest loading, sensor/event CSV parsing, outlier removal,
//!    EMA smoothing and resampling onto a 1-second grid.
//! 2. [`windowing`]: fixed windows of `2S + 1` samples around every moment of
//!    interest, grouped into event subsequences of 4 to 10 events.
//! 3. [`ste`]: ordinal-pattern symbolization and the 12 x 12 directed STE
//!    connectivity matrix per event group.
//! 4. [`selection`]: mRMR ranking and consensus nested cross-validation.
//! 5. [`classify`]: SVM, random forest and KNN behind one fit/predict surface.
//! 6. [`evaluate`]: fold planning, cross-validation, `t_d` tuning, metrics,
//!    sweeps and the PCA projection.
//!
//! [`pipeline`] glues the first three stages into a [`dataset::Dataset`], and
//! [`cli`] exposes everything as the `ste-skill` command.

pub mod classify;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod pipeline;
pub mod seed;
pub mod selection;
pub mod sensor;
pub mod ste;
pub mod synthetic;
pub mod windowing;

pub use dataset::{Dataset, LabeledSample, Provenance};
pub use error::{Error, Result};
pub use sensor::{Label, SensorId, N_FEATURES, N_SENSORS};
