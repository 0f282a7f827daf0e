//! Interchangeable continuation-value regressors.
//!
//! Two families share one fitting-and-prediction surface: polynomial
//! ordinary least squares over hand-picked basis sets, and a small
//! feed-forward network on the post-decision state. The backward solvers in
//! [`crate::lsmc`] treat both uniformly; the network trades the manual
//! feature engineering of the polynomial bases for training time.

pub mod basis;
pub mod mlp;
pub mod ols;

pub use basis::{BasisKind, BasisSpec, BasisTerm};
pub use mlp::{mlp_fit, silu, MlpFit, MlpModel, TrainConfig};
pub use ols::{ols_fit, OlsFit, OlsModel};

use serde::{Deserialize, Serialize};

/// Which regressor family a solver should fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    Ols,
    Mlp,
}

impl std::fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegressorKind::Ols => write!(f, "ols"),
            RegressorKind::Mlp => write!(f, "mlp"),
        }
    }
}
