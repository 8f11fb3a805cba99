use serde::{Deserialize, Serialize};

use crate::factors::{sample_factors, CodeMode, FactorSpace, OracleEncoder};
use crate::learners::{fit_gbt, fit_logistic_cv, Classifier, ClassifierModel, GbtConfig, MajorityClass};
use crate::seed::Rng;
use crate::{Error, Result};

pub const DEFAULT_SIZES: [usize; 4] = [10, 100, 1000, 10000];
pub const DEFAULT_TEST_SIZE: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownstreamLearner {
    /// Multinomial logistic regression, `C` chosen by 5-fold cross-validation.
    LogisticCv,
    Gbt,
}

impl DownstreamLearner {
    pub fn name(self) -> &'static str {
        match self {
            DownstreamLearner::LogisticCv => "logistic",
            DownstreamLearner::Gbt => "gbt",
        }
    }

    fn fit(self, x: ndarray::ArrayView2<f64>, y: &[usize]) -> Result<ClassifierModel> {
        match self {
            DownstreamLearner::LogisticCv => fit_logistic_cv(x, y, 5, 10),
            DownstreamLearner::Gbt => fit_gbt(x, y, &GbtConfig::default()).map(ClassifierModel::Gbt),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeAccuracy {
    pub size: usize,
    pub mean_accuracy: f64,
    pub per_factor: Vec<f64>,
    /// Factors whose training labels had a single class and were predicted
    /// by the majority class.
    pub fallbacks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamResult {
    pub learner: DownstreamLearner,
    pub n_test: usize,
    pub sizes: Vec<SizeAccuracy>,
}

impl DownstreamResult {
    pub fn accuracy_at(&self, size: usize) -> Option<f64> {
        self.sizes.iter().find(|s| s.size == size).map(|s| s.mean_accuracy)
    }
}

/// Per-factor test accuracy of `learner` trained on mean codes. Training sets
/// are nested prefixes of one draw; the test set is a separate draw.
pub fn downstream(
    space: &FactorSpace,
    encoder: &OracleEncoder,
    sizes: &[usize],
    n_test: usize,
    learner: DownstreamLearner,
    rng: &mut Rng,
) -> Result<DownstreamResult> {
    if sizes.is_empty() || sizes.contains(&0) || n_test == 0 {
        return Err(Error::arg("training sizes and test size must be positive"));
    }
    encoder.validate(space)?;
    let max = *sizes.iter().max().unwrap_or(&1);
    let test_f = sample_factors(space, n_test, rng)?;
    let test_c = encoder.encode(&test_f, CodeMode::Mean, rng)?;
    let train_f = sample_factors(space, max, rng)?;
    let train_c = encoder.encode(&train_f, CodeMode::Mean, rng)?;
    let k = space.num_factors();
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let x = train_c.values().slice(ndarray::s![..n, ..]);
        let mut per_factor = Vec::with_capacity(k);
        let mut fallbacks = Vec::new();
        for f in 0..k {
            let y = &train_f.column(f)[..n];
            let model = match learner.fit(x, y) {
                Ok(m) => m,
                Err(Error::DegenerateLabels(_)) => {
                    fallbacks.push(f);
                    ClassifierModel::MajorityClass(MajorityClass::fit(y)?)
                }
                Err(e) => return Err(e),
            };
            per_factor.push(model.accuracy(test_c.values().view(), &test_f.column(f)));
        }
        let mean_accuracy = per_factor.iter().sum::<f64>() / k as f64;
        out.push(SizeAccuracy { size: n, mean_accuracy, per_factor, fallbacks });
    }
    Ok(DownstreamResult { learner, n_test, sizes: out })
}

/// `accuracy(100) / accuracy(10000)`.
pub fn statistical_efficiency(result: &DownstreamResult) -> Result<f64> {
    let small = result.accuracy_at(100).ok_or_else(|| Error::arg("no accuracy at 100 samples"))?;
    let large = result.accuracy_at(10000).ok_or_else(|| Error::arg("no accuracy at 10000 samples"))?;
    efficiency_ratio(small, large)
}

pub fn efficiency_ratio(small: f64, large: f64) -> Result<f64> {
    if large <= 0.0 {
        return Err(Error::Degenerate("accuracy with the large training set is zero".into()));
    }
    Ok(small / large)
}
