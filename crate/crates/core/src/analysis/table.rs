use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One score of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub encoder_id: String,
    pub dataset_id: String,
    pub method: String,
    pub hyperparam: String,
    pub seed: u64,
    pub metric: String,
    pub n_samples: usize,
    pub value: f64,
}

impl ScoreRecord {
    /// Sort and uniqueness key.
    pub fn key(&self) -> (&str, &str, &str, u64, usize) {
        (&self.dataset_id, &self.encoder_id, &self.metric, self.seed, self.n_samples)
    }
}

/// Long-format scores; at most one record per
/// `(dataset, encoder, metric, seed, n_samples)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    records: Vec<ScoreRecord>,
}

/// Coarse role of a score column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Supervised,
    Unsupervised,
    Downstream,
}

impl ScoreKind {
    pub fn of(metric: &str) -> Self {
        if metric.starts_with("tc_") || metric.starts_with("avg_mi_") {
            ScoreKind::Unsupervised
        } else if metric.starts_with("downstream_") || metric.starts_with("efficiency_") {
            ScoreKind::Downstream
        } else {
            ScoreKind::Supervised
        }
    }
}

impl ScoreTable {
    pub fn new(records: Vec<ScoreRecord>) -> Result<Self> {
        let mut t = Self::default();
        for r in records {
            t.push(r)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, r: ScoreRecord) -> Result<()> {
        if !r.value.is_finite() {
            return Err(Error::Data(format!("non-finite score for {} / {}", r.encoder_id, r.metric)));
        }
        if self.records.iter().any(|q| q.key() == r.key()) {
            return Err(Error::Data(format!(
                "duplicate score for dataset {}, encoder {}, metric {}, seed {}, n {}",
                r.dataset_id, r.encoder_id, r.metric, r.seed, r.n_samples
            )));
        }
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in lexicographic key order.
    pub fn sorted(&self) -> Vec<&ScoreRecord> {
        let mut v: Vec<&ScoreRecord> = self.records.iter().collect();
        v.sort_by(|a, b| a.key().cmp(&b.key()));
        v
    }

    pub fn datasets(&self) -> Vec<String> {
        self.distinct(|r| &r.dataset_id)
    }

    pub fn metrics(&self) -> Vec<String> {
        self.distinct(|r| &r.metric)
    }

    fn distinct(&self, f: impl Fn(&ScoreRecord) -> &String) -> Vec<String> {
        self.records.iter().map(f).cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn filter(&self, keep: impl Fn(&ScoreRecord) -> bool) -> Self {
        Self { records: self.records.iter().filter(|r| keep(r)).cloned().collect() }
    }

    /// `metric → (model key → value)` for one dataset, where the model key is
    /// `(encoder_id, seed)`.
    pub fn by_metric(&self, dataset: &str) -> BTreeMap<String, BTreeMap<(String, u64), f64>> {
        let mut out: BTreeMap<String, BTreeMap<(String, u64), f64>> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.dataset_id == dataset) {
            out.entry(r.metric.clone()).or_default().insert((r.encoder_id.clone(), r.seed), r.value);
        }
        out
    }
}
