//! Simultaneous estimation of k Gaussian mean vectors under quadratic loss.
//!
//! The crate covers the canonical model
//!
//! ```text
//! X_i ~ N_p(mu_i, sigma^2 V_i),  i = 1..k,     S / sigma^2 ~ chi^2_n,
//! ```
//!
//! with loss `(1/sigma^2) sum_i (d_i - mu_i)' Q_i (d_i - mu_i)`, and provides:
//!
//! - [`model`]: the canonical data model, its reductions from raw k-sample and
//!   regression data, and the pooled statistics `nu_hat`, `F` and `G`;
//! - [`numerics`]: incomplete beta/gamma functions, F quantiles, adaptive
//!   quadrature and the hierarchical Bayes shrinkage factors;
//! - [`estimators`]: James-Stein, preliminary-test, empirical Bayes and
//!   hierarchical Bayes estimators, plus the general plug-in class;
//! - [`risk`]: loss, the unbiased risk estimate of the general class,
//!   minimaxity condition checks and PRIAL;
//! - [`montecarlo`]: reproducible simulation of risk tables, paired
//!   domination tests and Monte Carlo checks of the risk identities.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod risk;

pub use error::{Error, Result};
pub use estimators::{EstimateSet, EstimatorKind, ShrinkageFunctions};
pub use model::{
    CanonicalModel, Hyperparameters, LossGeometry, LossSpec, MatrixSpec, PooledSummary,
    Tolerances, TrueParameters,
};
pub use montecarlo::{ExperimentConfig, MeanConfig, QSpec, RiskTable};

/// Re-exported so downstream crates build vectors and matrices with the same version.
pub use nalgebra::{DMatrix, DVector};
