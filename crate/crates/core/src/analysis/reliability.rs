use serde::{Deserialize, Serialize};

use crate::factors::{EncoderKind, FactorSpace, OracleEncoder};
use crate::impossibility::{Entangler, Marginal};
use crate::learners::spearman;
use crate::metrics::{evaluate_encoder, EvalSettings, Metric};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderScores {
    pub metrics: Vec<Metric>,
    /// `values[e][m]`; `None` where the metric failed.
    pub values: Vec<Vec<Option<f64>>>,
}

impl EncoderScores {
    fn column(&self, m: usize) -> Option<Vec<f64>> {
        self.values.iter().map(|row| row[m]).collect()
    }
}

/// Every metric of every encoder under evaluation seed `seed`.
pub fn score_encoders(
    space: &FactorSpace,
    encoders: &[OracleEncoder],
    metrics: &[Metric],
    settings: &EvalSettings,
    seed: u64,
) -> EncoderScores {
    let run = |e: &OracleEncoder| -> Vec<Option<f64>> {
        evaluate_encoder(space, e, metrics, settings, seed).into_iter().map(|(_, r)| r.ok().map(|r| r.value)).collect()
    };
    #[cfg(feature = "parallel")]
    let values = {
        use rayon::prelude::*;
        encoders.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values = encoders.iter().map(run).collect();
    EncoderScores { metrics: metrics.to_vec(), values }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reliability {
    pub metric: Metric,
    pub rho: Result<f64>,
}

/// Spearman correlation of each metric between two scorings of the same
/// encoders.
pub fn reliability_between(a: &EncoderScores, b: &EncoderScores) -> Result<Vec<Reliability>> {
    if a.metrics != b.metrics || a.values.len() != b.values.len() {
        return Err(Error::arg("score runs cover different encoders or metrics"));
    }
    Ok(a.metrics
        .iter()
        .enumerate()
        .map(|(i, &metric)| {
            let rho = match (a.column(i), b.column(i)) {
                (Some(x), Some(y)) => spearman(&x, &y),
                _ => Err(Error::Data(format!("{} failed on at least one encoder", metric.name()))),
            };
            Reliability { metric, rho }
        })
        .collect())
}

/// Scores every encoder twice, with evaluation seeds `seeds.0` and `seeds.1`,
/// and correlates the two runs per metric.
pub fn reliability(
    space: &FactorSpace,
    encoders: &[OracleEncoder],
    metrics: &[Metric],
    settings: &EvalSettings,
    seeds: (u64, u64),
) -> Result<Vec<Reliability>> {
    if encoders.len() < 10 {
        return Err(Error::arg(format!("reliability needs at least 10 encoders, got {}", encoders.len())));
    }
    settings.budget.validate()?;
    let a = score_encoders(space, encoders, metrics, settings, seeds.0);
    let b = if seeds.1 == seeds.0 { a.clone() } else { score_encoders(space, encoders, metrics, settings, seeds.1) };
    reliability_between(&a, &b)
}

fn rotation(space: &FactorSpace, factors: Vec<usize>, alpha: f64) -> Result<OracleEncoder> {
    let d = if factors.is_empty() { space.num_factors() } else { factors.len() };
    OracleEncoder::new(EncoderKind::Rotation { entangler: Entangler::new(d, alpha, Marginal::Uniform01)?, factors }, 0.0)
}

/// Twenty encoders graded from the identity to a full rotation: the identity,
/// then rotations of the first 2, 3, 4 and all factors at increasing angles.
/// Needs at least 4 factors.
pub fn entanglement_family(space: &FactorSpace) -> Result<Vec<OracleEncoder>> {
    let k = space.num_factors();
    if k < 4 {
        return Err(Error::arg(format!("entanglement family needs at least 4 factors, got {k}")));
    }
    let mut out = vec![OracleEncoder::identity()];
    let plan: [(usize, &[f64]); 4] = [
        (2, &[0.04, 0.1, 0.18, 0.3, 0.45]),
        (3, &[0.06, 0.14, 0.25, 0.4, 0.48]),
        (4, &[0.08, 0.2, 0.35, 0.46]),
        (k, &[0.05, 0.12, 0.22, 0.33, 0.42]),
    ];
    for (m, alphas) in plan {
        let factors = if m == k { Vec::new() } else { (0..m).collect() };
        for &a in alphas {
            out.push(rotation(space, factors.clone(), a)?);
        }
    }
    Ok(out)
}
