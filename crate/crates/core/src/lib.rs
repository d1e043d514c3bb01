//! Causally-aware refinement of missing-data imputations.
//!
//! A seed imputation (mean, kNN, chained regressions) is refined by a
//! two-headed network whose input-layer weights double as a causal graph,
//! regularized to be acyclic and to reproduce inverse-probability weighted
//! moments of the observed data.

// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod acyclicity;
pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod losses;
pub mod network;
pub mod synth;
pub mod trainer;
mod util;

pub use baselines::BaselineKind;
pub use data::{merge_imputation, Dataset, ImputedMatrix, Standardizer};
pub use error::{Error, Result};
pub use network::{AdjacencyEstimate, NetworkParams};
pub use synth::{AmputeSpec, Mechanism, ScmSpec};
pub use trainer::{train, TrainConfig, TrainOutput};
