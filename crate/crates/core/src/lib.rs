//! Ranking users by incremental value per incremental cost.
//!
//! The crate trains scoring functions that order users so that treating the
//! top of the list buys the most incremental value for the incremental cost
//! spent, and evaluates any ranking with cost curves.
//!
//! - [`drm`]: direct ranking on per-cohort softmax probabilities.
//! - [`barrier`]: the same objective under a percentage or budget cutoff.
//! - [`rlearner`]: the two-model R-learner baseline and its Lagrangian combination.
//! - [`eval`]: cost curves, AUCC and slope metrics.
//! - [`sim`]: explore/exploit cycles on synthetic populations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod data;
pub mod drm;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod nn;
pub mod rlearner;
pub mod sim;
pub mod train;
pub mod util;

pub use data::{split_cohorts, Cohorts, Dataset, DatasetMeta, RngSeed, Strategy, UserSample};
pub use drm::{EffectivenessProbs, ObjectiveForm, PropensityWeights, TauEstimate};
pub use error::{Error, Result};
pub use eval::{CostCurve, Grid};
pub use model::{ModelFile, RankingModel, Scorer};
pub use nn::ScorerParams;
pub use train::{TrainConfig, TrainOutcome};
