//! Factor-code relation matrices and unsupervised representation statistics.
//!
//! Every matrix is `K × d` with rows indexed by factors and columns by code
//! dimensions, and larger entries always mean a stronger relation. The SVM
//! matrix therefore stores test *accuracy*, not prediction error.

use std::fmt;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::factors::{sample_factors, CodeBatch, CodeMode, FactorBatch, FactorSpace, OracleEncoder};
use crate::learners::{
    self, discretize, entropy, fit_gaussian, fit_gbt, fit_linear_svm, gaussian_tc, mutual_information, Classifier,
    GbtConfig, SvmConfig,
};
use crate::seed::Rng;
use crate::{Error, Result};

/// Which estimator produced a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "MI")]
    Mi,
    #[serde(rename = "GBT")]
    Gbt,
    #[serde(rename = "SVM")]
    Svm,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Mi, Estimator::Gbt, Estimator::Svm];

    pub fn tag(self) -> &'static str {
        match self {
            Estimator::Mi => "MI",
            Estimator::Gbt => "GBT",
            Estimator::Svm => "SVM",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.tag().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A `K × d` nonnegative relation matrix between factors and code dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorCodeMatrix {
    pub values: Array2<f64>,
    pub estimator: Estimator,
    pub factor_names: Vec<String>,
    pub code_names: Vec<String>,
    /// Per-factor test accuracy of the full-representation predictor (GBT).
    pub row_accuracy: Option<Vec<f64>>,
    /// Per-factor plug-in entropy in nats (MI).
    pub factor_entropy: Option<Vec<f64>>,
}

pub fn code_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("code_{i}")).collect()
}

impl FactorCodeMatrix {
    /// A bare matrix, for aggregations of externally supplied values.
    pub fn new(values: Array2<f64>, estimator: Estimator) -> Result<Self> {
        let (k, d) = values.dim();
        if k == 0 || d == 0 {
            return Err(Error::arg("factor-code matrix must be nonempty"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Data("factor-code matrix entries must be finite and nonnegative".into()));
        }
        Ok(Self {
            values,
            estimator,
            factor_names: (0..k).map(|i| format!("factor_{i}")).collect(),
            code_names: code_names(d),
            row_accuracy: None,
            factor_entropy: None,
        })
    }

    pub fn num_factors(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_codes(&self) -> usize {
        self.values.ncols()
    }

    /// Same matrix with columns reordered by `order`.
    pub fn select_columns(&self, order: &[usize]) -> Self {
        let mut out = self.clone();
        out.values = self.values.select(Axis(1), order);
        out.code_names = order.iter().map(|&i| self.code_names[i].clone()).collect();
        out
    }

    /// Same matrix divided by its largest entry (unchanged if all zero).
    pub fn normalized_by_max(&self) -> Self {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        let mut out = self.clone();
        if max > 0.0 {
            out.values.mapv_inplace(|v| v / max);
        }
        out
    }
}

fn check_pair(factors: &FactorBatch, codes: &CodeBatch) -> Result<()> {
    if factors.len() != codes.len() {
        return Err(Error::arg(format!("{} factor rows but {} code rows", factors.len(), codes.len())));
    }
    Ok(())
}

/// Entry `(k, i)` = plug-in MI between factor `k` and binned code `i`.
pub fn mi_matrix(factors: &FactorBatch, codes: &CodeBatch, bins: usize) -> Result<FactorCodeMatrix> {
    check_pair(factors, codes)?;
    if factors.len() < 2 {
        return Err(Error::arg("mi_matrix needs at least 2 rows"));
    }
    let binned = discretize(codes, bins)?;
    let k = factors.space().num_factors();
    let columns: Vec<Vec<usize>> = (0..codes.dim()).map(|i| binned.column(i)).collect();
    let mut values = Array2::zeros((k, codes.dim()));
    let mut entropies = Vec::with_capacity(k);
    for f in 0..k {
        let z = factors.column(f);
        entropies.push(entropy(&z));
        for (i, c) in columns.iter().enumerate() {
            values[[f, i]] = mutual_information(&z, c)?;
        }
    }
    Ok(FactorCodeMatrix {
        values,
        estimator: Estimator::Mi,
        factor_names: factors.space().names(),
        code_names: code_names(codes.dim()),
        row_accuracy: None,
        factor_entropy: Some(entropies),
    })
}

/// Train rows `[0, n_train)` and test rows `[n_train, n_train + n_test)`.
fn split(factors: &FactorBatch, codes: &CodeBatch, n_train: usize, n_test: usize) -> Result<(FactorBatch, CodeBatch, FactorBatch, CodeBatch)> {
    check_pair(factors, codes)?;
    if n_train == 0 || n_test == 0 {
        return Err(Error::arg("n_train and n_test must be positive"));
    }
    if factors.len() < n_train + n_test {
        return Err(Error::arg(format!("need {} rows, got {}", n_train + n_test, factors.len())));
    }
    Ok((
        factors.slice(0, n_train),
        codes.slice(0, n_train),
        factors.slice(n_train, n_train + n_test),
        codes.slice(n_train, n_train + n_test),
    ))
}

fn labelled(what: &str, k: usize, e: Error) -> Error {
    match e {
        Error::DegenerateLabels(m) => Error::DegenerateLabels(format!("{what} for factor {k}: {m}")),
        other => other,
    }
}

/// Row `k` = boosted-tree importances for predicting factor `k` from all
/// codes; per-row test accuracies are kept for informativeness.
pub fn gbt_matrix(
    factors: &FactorBatch,
    codes: &CodeBatch,
    n_train: usize,
    n_test: usize,
    config: &GbtConfig,
) -> Result<FactorCodeMatrix> {
    let (ftr, ctr, fte, cte) = split(factors, codes, n_train, n_test)?;
    let k = factors.space().num_factors();
    let mut values = Array2::zeros((k, codes.dim()));
    let mut acc = Vec::with_capacity(k);
    for f in 0..k {
        let model = fit_gbt(ctr.values().view(), &ftr.column(f), config).map_err(|e| labelled("gbt", f, e))?;
        values.row_mut(f).assign(&ndarray::ArrayView1::from(model.importances()));
        acc.push(model.accuracy(cte.values().view(), &fte.column(f)));
    }
    Ok(FactorCodeMatrix {
        values,
        estimator: Estimator::Gbt,
        factor_names: factors.space().names(),
        code_names: code_names(codes.dim()),
        row_accuracy: Some(acc),
        factor_entropy: None,
    })
}

/// Entry `(k, i)` = test accuracy of a linear SVM predicting factor `k` from
/// code dimension `i` alone.
pub fn svm_matrix(
    factors: &FactorBatch,
    codes: &CodeBatch,
    n_train: usize,
    n_test: usize,
    config: &SvmConfig,
) -> Result<FactorCodeMatrix> {
    let (ftr, ctr, fte, cte) = split(factors, codes, n_train, n_test)?;
    let k = factors.space().num_factors();
    let d = codes.dim();
    let mut values = Array2::zeros((k, d));
    for f in 0..k {
        let ytr = ftr.column(f);
        let yte = fte.column(f);
        for i in 0..d {
            let xtr = ctr.values().slice(s![.., i..i + 1]);
            let xte = cte.values().slice(s![.., i..i + 1]);
            let model = fit_linear_svm(xtr, &ytr, config).map_err(|e| labelled("svm", f, e))?;
            values[[f, i]] = model.accuracy(xte, &yte);
        }
    }
    Ok(FactorCodeMatrix {
        values,
        estimator: Estimator::Svm,
        factor_names: factors.space().names(),
        code_names: code_names(d),
        row_accuracy: None,
        factor_entropy: None,
    })
}

/// Dependence statistics of one code batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationStats {
    /// Total correlation of the fitted Gaussian, nats.
    pub tc: f64,
    /// Mean plug-in MI over distinct dimension pairs, nats (0 when `d = 1`).
    pub avg_mi: f64,
    /// Symmetric `d × d` pairwise MI with binned-code entropies on the diagonal.
    pub mi: Array2<f64>,
}

pub fn representation_stats(codes: &CodeBatch, bins: usize) -> Result<RepresentationStats> {
    let d = codes.dim();
    if codes.len() < d + 1 {
        return Err(Error::arg(format!("need at least d + 1 = {} rows, got {}", d + 1, codes.len())));
    }
    let tc = gaussian_tc(&fit_gaussian(codes.values().view())?)?;
    let binned = discretize(codes, bins)?;
    let cols: Vec<Vec<usize>> = (0..d).map(|i| binned.column(i)).collect();
    let mut mi = Array2::zeros((d, d));
    let mut total = 0.0;
    for i in 0..d {
        mi[[i, i]] = entropy(&cols[i]);
        for j in i + 1..d {
            let v = mutual_information(&cols[i], &cols[j])?;
            mi[[i, j]] = v;
            mi[[j, i]] = v;
            total += v;
        }
    }
    let pairs = d * (d - 1) / 2;
    let avg_mi = if pairs > 0 { total / pairs as f64 } else { 0.0 };
    Ok(RepresentationStats { tc, avg_mi, mi })
}

/// Gaussian total correlation and average pairwise MI of the mean and the
/// sampled representation of one factor draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsupervisedScores {
    pub tc_mean: f64,
    pub tc_sampled: f64,
    pub avg_mi_mean: f64,
    pub avg_mi_sampled: f64,
}

pub fn unsupervised_scores(
    encoder: &OracleEncoder,
    space: &FactorSpace,
    n: usize,
    bins: usize,
    rng: &mut Rng,
) -> Result<(UnsupervisedScores, RepresentationStats, RepresentationStats)> {
    let factors = sample_factors(space, n, rng)?;
    let mean = encoder.encode(&factors, CodeMode::Mean, rng)?;
    let sampled = encoder.sample_around(&mean, rng)?;
    let m = representation_stats(&mean, bins)?;
    let s = representation_stats(&sampled, bins)?;
    let scores = UnsupervisedScores { tc_mean: m.tc, tc_sampled: s.tc, avg_mi_mean: m.avg_mi, avg_mi_sampled: s.avg_mi };
    Ok((scores, m, s))
}

/// Chance accuracy of always predicting the most frequent label.
pub fn majority_frequency(labels: &[usize]) -> f64 {
    match learners::MajorityClass::fit(labels) {
        Ok(m) => labels.iter().filter(|&&l| l == m.label).count() as f64 / labels.len() as f64,
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::{EncoderKind, FactorBatch};
    use crate::seed::rng_from_seed;

    fn space(cards: &[usize]) -> FactorSpace {
        FactorSpace::from_cardinalities(cards).unwrap()
    }

    fn mean_codes(enc: &OracleEncoder, f: &FactorBatch) -> CodeBatch {
        enc.encode(f, CodeMode::Mean, &mut rng_from_seed(0)).unwrap()
    }

    #[test]
    fn identity_enumeration_is_diagonal_entropy() {
        let sp = space(&[3, 4, 5]);
        let f = FactorBatch::enumerate(&sp);
        let m = mi_matrix(&f, &mean_codes(&OracleEncoder::identity(), &f), 20).unwrap();
        let h = sp.entropies();
        for k in 0..3 {
            for i in 0..3 {
                let want = if k == i { h[k] } else { 0.0 };
                assert!((m.values[[k, i]] - want).abs() < 1e-12, "{:?}", m.values);
            }
        }
        assert_eq!(m.factor_entropy.as_deref().unwrap().len(), 3);
    }

    #[test]
    fn merge_keeps_both_entropies() {
        let sp = space(&[4, 4]);
        let f = FactorBatch::enumerate(&sp);
        let enc = OracleEncoder::new(EncoderKind::Merge { groups: vec![vec![0, 1]] }, 0.0).unwrap();
        let m = mi_matrix(&f, &mean_codes(&enc, &f), 20).unwrap();
        assert_eq!(m.values.dim(), (2, 1));
        let h = 4f64.ln();
        assert!((m.values[[0, 0]] - h).abs() < 1e-12 && (m.values[[1, 0]] - h).abs() < 1e-12);
    }

    #[test]
    fn svm_constant_dim_is_majority_frequency() {
        let sp = space(&[2, 3]);
        let mut rng = rng_from_seed(3);
        let f = sample_factors(&sp, 3000, &mut rng).unwrap();
        let enc = OracleEncoder::identity().append([EncoderKind::Collapsed { dims: 1, value: 0.5 }]);
        let c = enc.encode(&f, CodeMode::Mean, &mut rng).unwrap();
        let m = svm_matrix(&f, &c, 2000, 1000, &SvmConfig::default()).unwrap();
        let test = f.slice(2000, 3000);
        for k in 0..2 {
            let col = test.column(k);
            let train_major = learners::MajorityClass::fit(&f.slice(0, 2000).column(k)).unwrap().label;
            let want = col.iter().filter(|&&v| v == train_major).count() as f64 / col.len() as f64;
            assert_eq!(m.values[[k, 2]], want);
        }
        assert!(m.values[[0, 0]] >= 0.95 && m.values[[1, 1]] >= 0.95);
    }

    #[test]
    fn constant_factor_is_degenerate() {
        let sp = space(&[2, 2]);
        let values = Array2::from_shape_fn((40, 2), |(i, j)| if j == 0 { 0 } else { i % 2 });
        let f = FactorBatch::new(sp, values).unwrap();
        let c = mean_codes(&OracleEncoder::identity(), &f);
        assert!(matches!(gbt_matrix(&f, &c, 20, 20, &GbtConfig::default()), Err(Error::DegenerateLabels(_))));
        assert!(matches!(svm_matrix(&f, &c, 20, 20, &SvmConfig::default()), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn split_needs_enough_rows() {
        let sp = space(&[2, 2]);
        let f = FactorBatch::enumerate(&sp);
        let c = mean_codes(&OracleEncoder::identity(), &f);
        assert!(matches!(gbt_matrix(&f, &c, 3, 2, &GbtConfig::default()), Err(Error::Argument(_))));
    }
}
