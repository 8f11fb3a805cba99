//! Evaluation of learned representations against known ground-truth factors
//! of variation.
//!
//! The crate is organised along the evaluation pipeline:
//!
//! * [`factors`]: factor spaces, i.i.d./interventional sampling and oracle
//!   encoders with known structure.
//! * [`impossibility`]: the Householder family of entangling bijections that
//!   preserve every marginal while mixing all coordinates.
//! * [`learners`]: discretization, plug-in mutual information, classifiers
//!   (logistic, linear SVM, boosted trees, majority vote) and small statistics.
//! * [`estimation`]: factor-code relation matrices (MI, GBT importance, SVM
//!   accuracy) and unsupervised dependence scores.
//! * [`metrics`]: interventional scores and the matrix aggregations, plus
//!   every estimator × aggregation blend.
//! * [`analysis`]: study-level statistics over score tables.
//! * [`svg`]: deterministic SVG figures.

pub mod analysis;
pub mod error;
pub mod estimation;
pub mod factors;
pub mod impossibility;
pub mod learners;
pub mod metrics;
pub mod normal;
pub mod seed;
pub mod svg;

pub use error::{Error, Result};
