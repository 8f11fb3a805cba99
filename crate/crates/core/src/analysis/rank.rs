use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::table::{ScoreKind, ScoreTable};
use crate::learners::spearman;

/// Which score columns are correlated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankAxis {
    /// Supervised metrics against each other, one matrix per dataset.
    MetricVsMetric,
    /// One metric across datasets, one matrix per metric; models are matched
    /// by `(method, hyperparam, seed)`.
    MetricVsDataset,
    /// Unsupervised scores (rows) against supervised metrics, per dataset.
    UnsupervisedVsMetric,
    /// Supervised metrics (rows) against downstream scores, per dataset.
    MetricVsDownstream,
}

impl RankAxis {
    pub fn name(self) -> &'static str {
        match self {
            RankAxis::MetricVsMetric => "metric_vs_metric",
            RankAxis::MetricVsDataset => "metric_vs_dataset",
            RankAxis::UnsupervisedVsMetric => "unsupervised_vs_metric",
            RankAxis::MetricVsDownstream => "metric_vs_downstream",
        }
    }
}

/// Labeled correlation matrix; `None` marks cells with fewer than two
/// matched observations or an undefined correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    /// Dataset or metric the matrix belongs to.
    pub scope: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

type Column = BTreeMap<String, f64>;

fn correlate(a: &Column, b: &Column) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = a.iter().filter_map(|(k, v)| b.get(k).map(|w| (*v, *w))).unzip();
    if x.len() < 2 {
        return None;
    }
    spearman(&x, &y).ok()
}

fn matrix(scope: &str, rows: &BTreeMap<String, Column>, cols: &BTreeMap<String, Column>) -> CorrelationMatrix {
    CorrelationMatrix {
        scope: scope.to_string(),
        rows: rows.keys().cloned().collect(),
        cols: cols.keys().cloned().collect(),
        values: rows.values().map(|r| cols.values().map(|c| correlate(r, c)).collect()).collect(),
    }
}

pub fn rank_corr_table(table: &ScoreTable, axis: RankAxis) -> Vec<CorrelationMatrix> {
    let key = |enc: &str, seed: u64| format!("{enc}\u{1f}{seed}");
    match axis {
        RankAxis::MetricVsDataset => {
            let mut per_metric: BTreeMap<String, BTreeMap<String, Column>> = BTreeMap::new();
            for r in table.records().iter().filter(|r| ScoreKind::of(&r.metric) == ScoreKind::Supervised) {
                per_metric
                    .entry(r.metric.clone())
                    .or_default()
                    .entry(r.dataset_id.clone())
                    .or_default()
                    .insert(format!("{}\u{1f}{}\u{1f}{}", r.method, r.hyperparam, r.seed), r.value);
            }
            per_metric.iter().map(|(m, cols)| matrix(m, cols, cols)).collect()
        }
        _ => table
            .datasets()
            .iter()
            .map(|d| {
                let mut by_kind: BTreeMap<u8, BTreeMap<String, Column>> = BTreeMap::new();
                for r in table.records().iter().filter(|r| &r.dataset_id == d) {
                    let kind = match ScoreKind::of(&r.metric) {
                        ScoreKind::Supervised => 0,
                        ScoreKind::Unsupervised => 1,
                        ScoreKind::Downstream => 2,
                    };
                    by_kind
                        .entry(kind)
                        .or_default()
                        .entry(r.metric.clone())
                        .or_default()
                        .insert(key(&r.encoder_id, r.seed), r.value);
                }
                let empty = BTreeMap::new();
                let get = |k: u8| by_kind.get(&k).unwrap_or(&empty);
                match axis {
                    RankAxis::MetricVsMetric => matrix(d, get(0), get(0)),
                    RankAxis::UnsupervisedVsMetric => matrix(d, get(1), get(0)),
                    _ => matrix(d, get(0), get(2)),
                }
            })
            .collect(),
    }
}
