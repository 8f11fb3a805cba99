use serde::{Deserialize, Serialize};

use super::MetricResult;
use crate::estimation::{Estimator, FactorCodeMatrix};
use crate::{Error, Result};

/// Reductions of a factor-code matrix to one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mig,
    Sap,
    Modularity,
    DciDisentanglement,
    DciCompleteness,
}

impl Aggregation {
    pub const ALL: [Aggregation; 5] = [
        Aggregation::Mig,
        Aggregation::Sap,
        Aggregation::Modularity,
        Aggregation::DciDisentanglement,
        Aggregation::DciCompleteness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Mig => "mig",
            Aggregation::Sap => "sap",
            Aggregation::Modularity => "modularity",
            Aggregation::DciDisentanglement => "dci_disentanglement",
            Aggregation::DciCompleteness => "dci_completeness",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn apply(self, m: &FactorCodeMatrix, options: &AggregationOptions) -> Result<MetricResult> {
        match self {
            Aggregation::Mig => aggregate_mig(m, None),
            Aggregation::Sap => aggregate_sap(m),
            Aggregation::Modularity => aggregate_modularity_with(m, options.unrelated_dim_is_modular),
            Aggregation::DciDisentanglement => aggregate_dci_d(m),
            Aggregation::DciCompleteness => aggregate_dci_c(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationOptions {
    /// Modularity of a code dimension unrelated to every factor: 1 when
    /// true, 0 otherwise.
    pub unrelated_dim_is_modular: bool,
}

impl Default for AggregationOptions {
    fn default() -> Self {
        Self { unrelated_dim_is_modular: true }
    }
}

fn check_not_all_zero(m: &FactorCodeMatrix) -> Result<()> {
    if m.values.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate(format!("{} matrix is all zero", m.estimator)));
    }
    Ok(())
}

fn result(m: &FactorCodeMatrix, agg: Aggregation, value: f64, per_unit: Vec<f64>) -> MetricResult {
    MetricResult::new(format!("{}-{}", m.estimator, agg.name()), m.estimator.tag(), agg.name(), value, per_unit)
}

/// Largest and second-largest entries of a row.
fn top_two(row: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut a = f64::NEG_INFINITY;
    let mut b = f64::NEG_INFINITY;
    for v in row {
        if v > a {
            b = a;
            a = v;
        } else if v > b {
            b = v;
        }
    }
    (a, b)
}

/// Mean over factors of the normalized gap between the two largest entries of
/// the factor's row. MI matrices normalize by the factor entropy (taken from
/// `entropies`, else from the matrix); other matrices by the row maximum.
pub fn aggregate_mig(m: &FactorCodeMatrix, entropies: Option<&[f64]>) -> Result<MetricResult> {
    let (k, d) = m.values.dim();
    if d < 2 {
        return Err(Error::arg(format!("mig needs at least 2 code dimensions, got {d}")));
    }
    check_not_all_zero(m)?;
    let norms: Vec<f64> = if m.estimator == Estimator::Mi {
        let h = entropies
            .or(m.factor_entropy.as_deref())
            .ok_or_else(|| Error::arg("mig on an MI matrix needs factor entropies"))?;
        if h.len() != k {
            return Err(Error::arg(format!("{} entropies for {k} factors", h.len())));
        }
        if let Some(i) = h.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Degenerate(format!("factor {i} has zero entropy")));
        }
        h.to_vec()
    } else {
        m.values.rows().into_iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect()
    };
    let per: Vec<f64> = m
        .values
        .rows()
        .into_iter()
        .zip(&norms)
        .map(|(row, &norm)| {
            if norm == 0.0 {
                return 0.0;
            }
            let (a, b) = top_two(row.iter().copied());
            ((a - b) / norm).clamp(0.0, 1.0)
        })
        .collect();
    let value = per.iter().sum::<f64>() / k as f64;
    Ok(result(m, Aggregation::Mig, value, per))
}

/// Mean over factors of the difference between the two largest row entries.
pub fn aggregate_sap(m: &FactorCodeMatrix) -> Result<MetricResult> {
    let (k, d) = m.values.dim();
    if d < 2 {
        return Err(Error::arg(format!("sap needs at least 2 code dimensions, got {d}")));
    }
    let per: Vec<f64> = m
        .values
        .rows()
        .into_iter()
        .map(|row| {
            let (a, b) = top_two(row.iter().copied());
            a - b
        })
        .collect();
    let value = per.iter().sum::<f64>() / k as f64;
    Ok(result(m, Aggregation::Sap, value, per))
}

pub fn aggregate_modularity(m: &FactorCodeMatrix) -> Result<MetricResult> {
    aggregate_modularity_with(m, true)
}

/// Mean over code dimensions of `1 − δ_i`, where `δ_i` is the squared mass of
/// the non-maximal factors relative to `θ_i² (K − 1)`.
pub fn aggregate_modularity_with(m: &FactorCodeMatrix, unrelated_dim_is_modular: bool) -> Result<MetricResult> {
    let (k, d) = m.values.dim();
    if k < 2 {
        return Err(Error::arg(format!("modularity needs at least 2 factors, got {k}")));
    }
    let per: Vec<f64> = m
        .values
        .columns()
        .into_iter()
        .map(|col| {
            let best = crate::learners::argmax_first(col.iter().copied());
            let theta = col[best];
            if theta == 0.0 {
                return if unrelated_dim_is_modular { 1.0 } else { 0.0 };
            }
            let off: f64 = col.iter().enumerate().filter(|&(f, _)| f != best).map(|(_, v)| v * v).sum();
            let delta = off / (theta * theta * (k - 1) as f64);
            1.0 - delta
        })
        .collect();
    let value = per.iter().sum::<f64>() / d as f64;
    Ok(result(m, Aggregation::Modularity, value, per))
}

/// `1 − H(p)` with `p` the normalized vector and `H` in base `base`.
fn purity(v: impl Iterator<Item = f64> + Clone, base: usize) -> f64 {
    let total: f64 = v.clone().sum();
    if total <= 0.0 || base < 2 {
        return 1.0;
    }
    let h: f64 = v
        .filter(|&x| x > 0.0)
        .map(|x| {
            let p = x / total;
            -p * p.ln()
        })
        .sum();
    (1.0 - h / (base as f64).ln()).clamp(0.0, 1.0)
}

/// Mass-weighted mean over code dimensions of the column purity (entropy base K).
pub fn aggregate_dci_d(m: &FactorCodeMatrix) -> Result<MetricResult> {
    check_not_all_zero(m)?;
    let k = m.num_factors();
    let total: f64 = m.values.sum();
    let per: Vec<f64> = m.values.columns().into_iter().map(|c| purity(c.iter().copied(), k)).collect();
    let value = m
        .values
        .columns()
        .into_iter()
        .zip(&per)
        .map(|(c, &p)| c.sum() / total * p)
        .sum::<f64>();
    Ok(result(m, Aggregation::DciDisentanglement, value.clamp(0.0, 1.0), per))
}

/// Unweighted mean over factors of the row purity (entropy base d); an
/// all-zero row scores 0.
pub fn aggregate_dci_c(m: &FactorCodeMatrix) -> Result<MetricResult> {
    check_not_all_zero(m)?;
    let d = m.num_codes();
    let per: Vec<f64> = m
        .values
        .rows()
        .into_iter()
        .map(|r| if r.sum() > 0.0 { purity(r.iter().copied(), d) } else { 0.0 })
        .collect();
    let value = per.iter().sum::<f64>() / per.len() as f64;
    Ok(result(m, Aggregation::DciCompleteness, value, per))
}

/// Mean test accuracy of the boosted-tree predictors (1 − error).
pub fn dci_informativeness(m: &FactorCodeMatrix) -> Result<MetricResult> {
    let acc = m
        .row_accuracy
        .as_ref()
        .ok_or_else(|| Error::arg("informativeness needs a matrix with cached per-factor accuracies"))?;
    if acc.is_empty() {
        return Err(Error::arg("no per-factor accuracies"));
    }
    let value = acc.iter().sum::<f64>() / acc.len() as f64;
    Ok(MetricResult::new(
        format!("{}-informativeness", m.estimator),
        m.estimator.tag(),
        "informativeness",
        value,
        acc.clone(),
    ))
}
