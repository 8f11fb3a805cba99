use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::table::ScoreTable;
use crate::learners::ols_r2;
use crate::{Error, Result};

/// Categorical design of the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictors {
    Method,
    MethodHyperparam,
}

impl Predictors {
    pub fn name(self) -> &'static str {
        match self {
            Predictors::Method => "method",
            Predictors::MethodHyperparam => "method_hyperparam",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceExplained {
    pub dataset: String,
    pub metric: String,
    pub r2: Result<f64>,
}

/// OLS R² of each (dataset, metric) score column on one-hot design labels.
pub fn variance_explained(table: &ScoreTable, predictors: Predictors) -> Vec<VarianceExplained> {
    let mut cells: BTreeMap<(String, String), (Vec<Vec<String>>, Vec<f64>)> = BTreeMap::new();
    for r in table.sorted() {
        let (labels, y) = cells.entry((r.dataset_id.clone(), r.metric.clone())).or_default();
        labels.push(match predictors {
            Predictors::Method => vec![r.method.clone()],
            Predictors::MethodHyperparam => vec![r.method.clone(), r.hyperparam.clone()],
        });
        y.push(r.value);
    }
    cells
        .into_iter()
        .map(|((dataset, metric), (labels, y))| {
            let groups: BTreeSet<&Vec<String>> = labels.iter().collect();
            let r2 = if groups.len() < 2 {
                Err(Error::Degenerate(format!("{dataset}/{metric}: a single {} group", predictors.name())))
            } else {
                let columns: Vec<Vec<String>> =
                    (0..labels[0].len()).map(|j| labels.iter().map(|l| l[j].clone()).collect()).collect();
                ols_r2(&columns, &y)
            };
            VarianceExplained { dataset, metric, r2 }
        })
        .collect()
}
