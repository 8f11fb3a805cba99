//! Statistical and learning primitives used by the estimators and metrics.
//!
//! Everything here is deterministic given identical data order (and seed,
//! where a learner shuffles).

mod discretize;
mod gbt;
mod info;
mod logistic;
mod stats;
mod svm;
mod vote;

pub use discretize::{discretize, discretize_column, DiscretizedBatch, DEFAULT_BINS};
pub use gbt::{fit_gbt, GbtConfig, GbtModel};
pub use info::{entropy, mutual_information};
pub use logistic::{fit_logistic, fit_logistic_cv, LogisticConfig, LogisticModel};
pub use stats::{fit_gaussian, gaussian_tc, gaussian_tc_with_jitter, ols_r2, pearson, ranks, spearman, GaussianFit};
pub use svm::{fit_linear_svm, LinearSvmModel, MulticlassScheme, SvmConfig};
pub use vote::MajorityVote;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::{Error, Result};

/// A fitted classifier over real feature vectors.
pub trait Classifier {
    fn predict_row(&self, x: ArrayView1<f64>) -> usize;

    fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }

    fn accuracy(&self, x: ArrayView2<f64>, y: &[usize]) -> f64 {
        accuracy(&self.predict(x), y)
    }
}

/// Any of the fitted classifiers, tagged by kind.
#[derive(Debug, Clone)]
pub enum ClassifierModel {
    Logistic(LogisticModel),
    LinearSvm(LinearSvmModel),
    Gbt(GbtModel),
    MajorityClass(MajorityClass),
}

impl Classifier for ClassifierModel {
    fn predict_row(&self, x: ArrayView1<f64>) -> usize {
        match self {
            ClassifierModel::Logistic(m) => m.predict_row(x),
            ClassifierModel::LinearSvm(m) => m.predict_row(x),
            ClassifierModel::Gbt(m) => m.predict_row(x),
            ClassifierModel::MajorityClass(m) => m.predict_row(x),
        }
    }
}

/// Predicts a single class regardless of input.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorityClass {
    pub label: usize,
}

impl MajorityClass {
    /// Most frequent label, ties toward the smaller label.
    pub fn fit(y: &[usize]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Data("no labels".into()));
        }
        let counts = class_counts(y);
        Ok(Self { label: argmax_first(counts.iter().map(|&c| c as f64)) })
    }
}

impl Classifier for MajorityClass {
    fn predict_row(&self, _: ArrayView1<f64>) -> usize {
        self.label
    }
}

pub fn accuracy(pred: &[usize], y: &[usize]) -> f64 {
    assert_eq!(pred.len(), y.len());
    if y.is_empty() {
        return 0.0;
    }
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// Counts indexed by label, length `max(y) + 1`.
pub(crate) fn class_counts(y: &[usize]) -> Vec<usize> {
    let n = y.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0; n];
    for &v in y {
        counts[v] += 1;
    }
    counts
}

/// Validates a training set and returns the number of classes (`max + 1`).
pub(crate) fn check_training(x: ArrayView2<f64>, y: &[usize]) -> Result<usize> {
    if x.nrows() != y.len() {
        return Err(Error::arg(format!("{} feature rows but {} labels", x.nrows(), y.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("features contain non-finite values".into()));
    }
    let counts = class_counts(y);
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegenerateLabels(format!("need at least 2 classes among {} labels", y.len())));
    }
    Ok(counts.len())
}

/// Index of the maximum, lowest index on ties. NaN never wins.
pub(crate) fn argmax_first(xs: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in xs.into_iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}

/// Column means and standard deviations (population), with zero scale
/// replaced by one.
pub(crate) fn standardizer(x: ArrayView2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows().max(1) as f64;
    x.columns()
        .into_iter()
        .map(|c| {
            let m = c.sum() / n;
            let v = c.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n;
            let s = v.sqrt();
            (m, if s > 1e-12 { s } else { 1.0 })
        })
        .unzip()
}

pub(crate) fn standardize(x: ArrayView2<f64>, mean: &[f64], scale: &[f64]) -> Array2<f64> {
    let mut out = x.to_owned();
    for (mut c, (m, s)) in out.columns_mut().into_iter().zip(mean.iter().zip(scale)) {
        c.mapv_inplace(|a| (a - m) / s);
    }
    out
}
