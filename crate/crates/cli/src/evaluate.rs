use disent_core::analysis::{downstream, statistical_efficiency, ScoreRecord};
use disent_core::estimation::{
    representation_stats, unsupervised_scores, Estimator, FactorCodeMatrix,
};
use disent_core::metrics::{
    blend_scores, evaluate_model, evaluate_observed, task_seed, Aggregation, AggregationOptions,
    EvalSettings, Evaluation, Metric,
};
use disent_core::seed::{derive_seed, rng_from_seed};
use serde::{Deserialize, Serialize};

use crate::config::{AnalysisKind, LoadedConfig, ModelSource, ModelSpec};
use crate::csvio::ingest_external;

/// Outcome of one unit of work, as listed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub seed: u64,
    pub status: TaskStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Ok,
    Failed,
    /// Not applicable, e.g. interventional metrics of external data.
    Skipped,
    /// Completed with a finding worth reading, e.g. gaps in ingested factors.
    Warning,
}

impl TaskRecord {
    pub fn ok(id: impl Into<String>, seed: u64) -> Self {
        Self {
            id: id.into(),
            seed,
            status: TaskStatus::Ok,
            message: None,
        }
    }

    pub fn failed(id: impl Into<String>, seed: u64, message: impl ToString) -> Self {
        Self {
            id: id.into(),
            seed,
            status: TaskStatus::Failed,
            message: Some(message.to_string()),
        }
    }

    pub fn skipped(id: impl Into<String>, seed: u64, message: impl ToString) -> Self {
        Self {
            id: id.into(),
            seed,
            status: TaskStatus::Skipped,
            message: Some(message.to_string()),
        }
    }

    pub fn warning(id: impl Into<String>, seed: u64, message: impl ToString) -> Self {
        Self {
            id: id.into(),
            seed,
            status: TaskStatus::Warning,
            message: Some(message.to_string()),
        }
    }
}

pub struct ModelOutput {
    pub model: ModelSpec,
    pub records: Vec<ScoreRecord>,
    pub matrices: Vec<FactorCodeMatrix>,
    pub tasks: Vec<TaskRecord>,
}

pub fn settings(cfg: &LoadedConfig) -> EvalSettings {
    let m = &cfg.config.metrics;
    EvalSettings {
        budget: m.budget.clone(),
        aggregation: AggregationOptions {
            unrelated_dim_is_modular: m.unrelated_dim_is_modular,
        },
        ..Default::default()
    }
}

struct Recorder<'a> {
    model: &'a ModelSpec,
    records: Vec<ScoreRecord>,
    tasks: Vec<TaskRecord>,
}

impl Recorder<'_> {
    fn score(&mut self, metric: &str, n_samples: usize, value: f64) {
        self.records.push(ScoreRecord {
            encoder_id: self.model.encoder.clone(),
            dataset_id: self.model.dataset.clone(),
            method: self.model.method.clone(),
            hyperparam: self.model.hyperparam.clone(),
            seed: self.model.seed,
            metric: metric.to_string(),
            n_samples,
            value,
        });
    }

    fn result(
        &mut self,
        id: String,
        seed: u64,
        metric: &str,
        n: usize,
        r: disent_core::Result<f64>,
    ) {
        match r {
            Ok(v) if v.is_finite() => {
                self.score(metric, n, v);
                self.tasks.push(TaskRecord::ok(id, seed));
            }
            Ok(v) => self.tasks.push(TaskRecord::failed(
                id,
                seed,
                format!("non-finite value {v}"),
            )),
            Err(e) => self.tasks.push(TaskRecord::failed(id, seed, e)),
        }
    }
}

/// Every configured score of one model. Each sub-task draws from its own seed
/// derived from the model's task id, so models can run in any order.
pub fn evaluate(cfg: &LoadedConfig, master: u64, model: &ModelSpec) -> ModelOutput {
    let c = &cfg.config;
    let task = model.task_id();
    let seed = derive_seed(master, &task);
    let mut settings = settings(cfg);
    let metrics = c.metrics.parsed();
    let estimators: Vec<Estimator> =
        if c.metrics.blends || c.analyses.contains(&AnalysisKind::Groups) {
            Estimator::ALL.to_vec()
        } else {
            Vec::new()
        };
    let mut rec = Recorder {
        model,
        records: Vec::new(),
        tasks: Vec::new(),
    };

    let eval: Evaluation = match &model.source {
        ModelSource::Oracle { space, encoder } => {
            evaluate_model(space, encoder, &metrics, &estimators, &settings, seed)
        }
        ModelSource::External {
            factors_csv,
            codes_csv,
        } => match ingest_external(factors_csv, codes_csv) {
            Ok(data) => {
                for w in &data.warnings {
                    rec.tasks
                        .push(TaskRecord::warning(format!("{task}/ingest"), seed, w));
                }
                let n = data.codes.len();
                let b = &mut settings.budget;
                if n < b.n_train + b.n_test {
                    b.n_train = 2 * n / 3;
                    b.n_test = n - b.n_train;
                }
                let observational: Vec<Metric> = metrics
                    .iter()
                    .copied()
                    .filter(|m| !m.is_interventional())
                    .collect();
                for m in metrics.iter().filter(|m| m.is_interventional()) {
                    rec.tasks.push(TaskRecord::skipped(
                        format!("{task}/{m}"),
                        seed,
                        "needs a generative encoder",
                    ));
                }
                if c.metrics.unsupervised {
                    let r = representation_stats(&data.codes, settings.budget.bins);
                    let id = format!("{task}/unsupervised");
                    rec.result(
                        id.clone(),
                        seed,
                        "tc_mean",
                        n,
                        r.as_ref().map(|s| s.tc).map_err(Clone::clone),
                    );
                    rec.result(id, seed, "avg_mi_mean", n, r.map(|s| s.avg_mi));
                }
                evaluate_observed(
                    &data.factors,
                    &data.codes,
                    &observational,
                    &estimators,
                    &settings,
                    seed,
                )
            }
            Err(e) => {
                rec.tasks
                    .push(TaskRecord::failed(format!("{task}/ingest"), seed, e));
                return ModelOutput {
                    model: model.clone(),
                    records: rec.records,
                    matrices: Vec::new(),
                    tasks: rec.tasks,
                };
            }
        },
    };

    for (m, r) in eval.results {
        let (s, n) = r
            .as_ref()
            .map_or((seed, settings.budget.n_train), |r| (r.seed, r.n_samples));
        rec.result(format!("{task}/{m}"), s, m.name(), n, r.map(|r| r.value));
    }
    let mut matrices = Vec::new();
    for (e, r) in eval.matrices {
        match r {
            Ok(m) => matrices.push(m),
            Err(err) => rec
                .tasks
                .push(TaskRecord::failed(format!("{task}/matrix/{e}"), seed, err)),
        }
    }
    if c.metrics.blends && !matrices.is_empty() {
        if let Ok(cells) = blend_scores(&matrices, &Aggregation::ALL, &settings.aggregation) {
            for cell in cells {
                rec.result(
                    format!("{task}/{}", cell.name),
                    seed,
                    &cell.name,
                    settings.budget.n_train,
                    cell.result.map(|r| r.value),
                );
            }
        }
    }
    if let ModelSource::Oracle { space, encoder } = &model.source {
        if c.metrics.unsupervised {
            let s = task_seed(seed, "unsupervised");
            let n = settings.budget.n_train;
            let id = format!("{task}/unsupervised");
            match unsupervised_scores(
                encoder,
                space,
                n,
                settings.budget.bins,
                &mut rng_from_seed(s),
            ) {
                Ok((u, _, _)) => {
                    for (name, v) in [
                        ("tc_mean", u.tc_mean),
                        ("tc_sampled", u.tc_sampled),
                        ("avg_mi_mean", u.avg_mi_mean),
                        ("avg_mi_sampled", u.avg_mi_sampled),
                    ] {
                        rec.score(name, n, v);
                    }
                    rec.tasks.push(TaskRecord::ok(id, s));
                }
                Err(e) => rec.tasks.push(TaskRecord::failed(id, s, e)),
            }
        }
        if let Some(d) = &c.downstream {
            for &learner in &d.learners {
                let id = format!("{task}/downstream/{}", learner.name());
                let s = task_seed(seed, &format!("downstream/{}", learner.name()));
                match downstream(
                    space,
                    encoder,
                    &d.sizes,
                    d.n_test,
                    learner,
                    &mut rng_from_seed(s),
                ) {
                    Ok(res) => {
                        for size in &res.sizes {
                            rec.score(
                                &format!("downstream_{}_{}", learner.name(), size.size),
                                size.size,
                                size.mean_accuracy,
                            );
                        }
                        let mut task = TaskRecord::ok(id.clone(), s);
                        let fallbacks: Vec<String> = res
                            .sizes
                            .iter()
                            .filter(|x| !x.fallbacks.is_empty())
                            .map(|x| format!("n={}: factors {:?}", x.size, x.fallbacks))
                            .collect();
                        if !fallbacks.is_empty() {
                            task.message = Some(format!(
                                "majority-class fallback at {}",
                                fallbacks.join("; ")
                            ));
                        }
                        rec.tasks.push(task);
                        if d.sizes.contains(&100) && d.sizes.contains(&10000) {
                            let eff = statistical_efficiency(&res);
                            rec.result(
                                format!("{id}/efficiency"),
                                s,
                                &format!("efficiency_{}", learner.name()),
                                10000,
                                eff,
                            );
                        }
                    }
                    Err(e) => rec.tasks.push(TaskRecord::failed(id, s, e)),
                }
            }
        }
    }
    ModelOutput {
        model: model.clone(),
        records: rec.records,
        matrices,
        tasks: rec.tasks,
    }
}
