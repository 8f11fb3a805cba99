//! Disentanglement scores.
//!
//! Three interventional scores sample their own data from the factor space;
//! the observational ones reduce a [`FactorCodeMatrix`] with an
//! [`Aggregation`]. Any estimator can be paired with any aggregation
//! ("blends", named `<ESTIMATOR>-<aggregation>`).

mod aggregate;
mod interventional;

pub use aggregate::{
    aggregate_dci_c, aggregate_dci_d, aggregate_mig, aggregate_modularity, aggregate_modularity_with, aggregate_sap,
    dci_informativeness, Aggregation, AggregationOptions,
};
pub use interventional::{beta_vae_score, factor_vae_score, irs_score};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::estimation::{gbt_matrix, mi_matrix, svm_matrix, Estimator, FactorCodeMatrix};
use crate::factors::{sample_factors, CodeBatch, CodeMode, FactorBatch, FactorSpace, OracleEncoder};
use crate::learners::{GbtConfig, SvmConfig};
use crate::seed::{derive_seed, rng_from_seed};
use crate::{Error, Result};

/// Tag used in place of an estimator for interventional scores.
pub const INTERVENTIONAL: &str = "interventional";

/// One score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: String,
    /// Estimator tag, or [`INTERVENTIONAL`].
    pub estimator: String,
    pub aggregation: String,
    pub value: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Per-factor or per-dimension contributions, where meaningful.
    pub per_unit: Vec<f64>,
}

impl MetricResult {
    pub fn new(name: impl Into<String>, estimator: &str, aggregation: &str, value: f64, per_unit: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            estimator: estimator.to_string(),
            aggregation: aggregation.to_string(),
            value,
            n_samples: 0,
            seed: 0,
            per_unit,
        }
    }

    fn interventional(name: &str, value: f64, per_unit: Vec<f64>) -> Self {
        Self::new(name, INTERVENTIONAL, name, value, per_unit)
    }

    pub fn with_provenance(mut self, n_samples: usize, seed: u64) -> Self {
        self.n_samples = n_samples;
        self.seed = seed;
        self
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

/// Sample sizes of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalBudget {
    pub n_train: usize,
    pub n_test: usize,
    pub batch: usize,
    pub bins: usize,
    pub variance_threshold: f64,
}

impl Default for EvalBudget {
    fn default() -> Self {
        Self { n_train: 10_000, n_test: 5_000, batch: 64, bins: 20, variance_threshold: 0.05 }
    }
}

impl EvalBudget {
    /// Budget with `n` training and `n / 2` test points.
    pub fn with_samples(n: usize) -> Self {
        Self { n_train: n, n_test: (n / 2).max(1), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 || self.batch == 0 || self.bins < 2 {
            return Err(Error::arg("budget sizes must be positive and bins >= 2"));
        }
        if !(self.variance_threshold > 0.0) {
            return Err(Error::arg("variance_threshold must be positive"));
        }
        Ok(())
    }
}

/// The named scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    BetaVae,
    FactorVae,
    Irs,
    Mig,
    Modularity,
    DciDisentanglement,
    DciCompleteness,
    DciInformativeness,
    Sap,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::BetaVae,
        Metric::FactorVae,
        Metric::Irs,
        Metric::Mig,
        Metric::Modularity,
        Metric::DciDisentanglement,
        Metric::DciCompleteness,
        Metric::DciInformativeness,
        Metric::Sap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::BetaVae => "beta_vae",
            Metric::FactorVae => "factor_vae",
            Metric::Irs => "irs",
            Metric::Mig => "mig",
            Metric::Modularity => "modularity",
            Metric::DciDisentanglement => "dci_disentanglement",
            Metric::DciCompleteness => "dci_completeness",
            Metric::DciInformativeness => "dci_informativeness",
            Metric::Sap => "sap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn is_interventional(self) -> bool {
        matches!(self, Metric::BetaVae | Metric::FactorVae | Metric::Irs)
    }

    /// Estimator and aggregation behind an observational score.
    pub fn recipe(self) -> Option<(Estimator, Option<Aggregation>)> {
        match self {
            Metric::Mig => Some((Estimator::Mi, Some(Aggregation::Mig))),
            Metric::Modularity => Some((Estimator::Mi, Some(Aggregation::Modularity))),
            Metric::DciDisentanglement => Some((Estimator::Gbt, Some(Aggregation::DciDisentanglement))),
            Metric::DciCompleteness => Some((Estimator::Gbt, Some(Aggregation::DciCompleteness))),
            Metric::DciInformativeness => Some((Estimator::Gbt, None)),
            Metric::Sap => Some((Estimator::Svm, Some(Aggregation::Sap))),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything that parameterizes an evaluation besides the data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalSettings {
    pub budget: EvalBudget,
    pub gbt: GbtConfig,
    pub svm: SvmConfig,
    pub aggregation: AggregationOptions,
}

/// One cell of an estimator × aggregation blend.
#[derive(Debug)]
pub struct BlendCell {
    pub name: String,
    pub estimator: Estimator,
    pub aggregation: Aggregation,
    pub result: Result<MetricResult>,
}

/// Every matrix paired with every aggregation, in input order. Failed cells
/// keep their error.
pub fn blend_scores(matrices: &[FactorCodeMatrix], aggregations: &[Aggregation], options: &AggregationOptions) -> Result<Vec<BlendCell>> {
    if matrices.is_empty() || aggregations.is_empty() {
        return Err(Error::arg("blend needs at least one matrix and one aggregation"));
    }
    Ok(matrices
        .iter()
        .flat_map(|m| {
            aggregations.iter().map(move |&a| BlendCell {
                name: format!("{}-{}", m.estimator, a.name()),
                estimator: m.estimator,
                aggregation: a,
                result: a.apply(m, options),
            })
        })
        .collect())
}

/// Matrices of one observational data draw, computed on demand.
pub struct ObservationalData<'a> {
    pub factors: &'a FactorBatch,
    pub codes: &'a CodeBatch,
    matrices: BTreeMap<Estimator, Result<FactorCodeMatrix>>,
}

impl<'a> ObservationalData<'a> {
    pub fn new(factors: &'a FactorBatch, codes: &'a CodeBatch) -> Self {
        Self { factors, codes, matrices: BTreeMap::new() }
    }

    pub fn matrix(&mut self, estimator: Estimator, settings: &EvalSettings) -> Result<&FactorCodeMatrix> {
        let b = &settings.budget;
        let (factors, codes) = (self.factors, self.codes);
        let entry = self.matrices.entry(estimator).or_insert_with(|| match estimator {
            Estimator::Mi => mi_matrix(&factors.slice(0, b.n_train.min(factors.len())), &codes.slice(0, b.n_train.min(codes.len())), b.bins),
            Estimator::Gbt => gbt_matrix(factors, codes, b.n_train, b.n_test, &settings.gbt),
            Estimator::Svm => svm_matrix(factors, codes, b.n_train, b.n_test, &settings.svm),
        });
        entry.as_ref().map_err(Clone::clone)
    }

    /// Matrices computed so far.
    pub fn computed(&self) -> impl Iterator<Item = &FactorCodeMatrix> {
        self.matrices.values().filter_map(|r| r.as_ref().ok())
    }

    pub fn observational(&mut self, metric: Metric, settings: &EvalSettings) -> Result<MetricResult> {
        let (estimator, aggregation) =
            metric.recipe().ok_or_else(|| Error::arg(format!("{metric} is not an observational metric")))?;
        let m = self.matrix(estimator, settings)?;
        let r = match aggregation {
            Some(a) => a.apply(m, &settings.aggregation)?,
            None => dci_informativeness(m)?,
        };
        Ok(r.renamed(metric.name()))
    }
}

/// Seed of the task computing `what` from evaluation seed `seed`.
pub fn task_seed(seed: u64, what: &str) -> u64 {
    derive_seed(seed, what)
}

/// Observational draw of `n` points used by evaluation seed `seed`.
pub fn observational_draw(space: &FactorSpace, encoder: &OracleEncoder, n: usize, seed: u64) -> Result<(FactorBatch, CodeBatch)> {
    let mut rng = rng_from_seed(task_seed(seed, "observational"));
    let f = sample_factors(space, n, &mut rng)?;
    let c = encoder.encode(&f, CodeMode::Mean, &mut rng)?;
    Ok((f, c))
}

/// Scores plus the factor-code matrices behind them.
#[derive(Debug)]
pub struct Evaluation {
    pub results: Vec<(Metric, Result<MetricResult>)>,
    /// Every matrix computed, requested or needed by a metric, by estimator.
    pub matrices: Vec<(Estimator, Result<FactorCodeMatrix>)>,
}

/// Observational metrics and the requested matrices of a fixed data set.
/// The first `n_train` rows train, the next `n_test` test. Interventional
/// metrics are rejected.
pub fn evaluate_observed(
    factors: &FactorBatch,
    codes: &CodeBatch,
    metrics: &[Metric],
    estimators: &[Estimator],
    settings: &EvalSettings,
    seed: u64,
) -> Evaluation {
    let mut data = ObservationalData::new(factors, codes);
    let results = metrics
        .iter()
        .map(|&m| {
            let r = if m.is_interventional() {
                Err(Error::arg(format!("{m} needs a generative encoder")))
            } else {
                data.observational(m, settings).map(|r| r.with_provenance(settings.budget.n_train, seed))
            };
            (m, r)
        })
        .collect();
    for &e in estimators {
        let _ = data.matrix(e, settings);
    }
    Evaluation { results, matrices: data.matrices.into_iter().collect() }
}

/// Every requested metric of one encoder, each with its own derived seed;
/// observational metrics share one draw of `n_train + n_test` points.
pub fn evaluate_model(
    space: &FactorSpace,
    encoder: &OracleEncoder,
    metrics: &[Metric],
    estimators: &[Estimator],
    settings: &EvalSettings,
    seed: u64,
) -> Evaluation {
    let b = &settings.budget;
    let observational: Vec<Metric> = metrics.iter().copied().filter(|m| !m.is_interventional()).collect();
    let mut eval = if observational.is_empty() && estimators.is_empty() {
        Evaluation { results: Vec::new(), matrices: Vec::new() }
    } else {
        match observational_draw(space, encoder, b.n_train + b.n_test, seed) {
            Ok((f, c)) => evaluate_observed(&f, &c, &observational, estimators, settings, task_seed(seed, "observational")),
            Err(e) => Evaluation {
                results: observational.iter().map(|&m| (m, Err(e.clone()))).collect(),
                matrices: estimators.iter().map(|&s| (s, Err(e.clone()))).collect(),
            },
        }
    };
    let mut observed = std::mem::take(&mut eval.results).into_iter();
    eval.results = metrics
        .iter()
        .map(|&m| {
            if !m.is_interventional() {
                return observed.next().expect("one result per observational metric");
            }
            let s = task_seed(seed, m.name());
            let mut rng = rng_from_seed(s);
            let f = match m {
                Metric::BetaVae => beta_vae_score,
                Metric::FactorVae => factor_vae_score,
                _ => irs_score,
            };
            (m, f(space, encoder, b, &mut rng).map(|r| r.with_provenance(b.n_train, s)))
        })
        .collect();
    eval
}

/// [`evaluate_model`] without extra matrices.
pub fn evaluate_encoder(
    space: &FactorSpace,
    encoder: &OracleEncoder,
    metrics: &[Metric],
    settings: &EvalSettings,
    seed: u64,
) -> Vec<(Metric, Result<MetricResult>)> {
    evaluate_model(space, encoder, metrics, &[], settings, seed).results
}
