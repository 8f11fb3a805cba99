use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use disent_core::analysis::{
    confusion_thresholds, dendrogram, entanglement_family, independent_groups_curve,
    rank_corr_table, reliability, threshold_grid, transfer_protocol, variance_explained,
    CorrelationMatrix, Dendrogram, GroupCount, Predictors, RankAxis, ScoreKind, ScoreRecord,
    ScoreTable, TransferResult,
};
use disent_core::metrics::{EvalBudget, EvalSettings, Metric};
use disent_core::seed::derive_seed;
use serde::{Deserialize, Serialize};

use crate::artifacts::{files_with_extension, read_json, write_json, MatrixFile};
use crate::config::{AnalysisKind, LoadedConfig};
use crate::csvio::{fmt_f64, write_csv};
use crate::error::Result;
use crate::evaluate::{settings, TaskRecord};

pub const RANK_AXES: [RankAxis; 4] = [
    RankAxis::MetricVsMetric,
    RankAxis::MetricVsDataset,
    RankAxis::UnsupervisedVsMetric,
    RankAxis::MetricVsDownstream,
];

/// Independent-groups curve and dendrogram of one model's matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupsFile {
    pub dataset: String,
    pub encoder: String,
    pub seed: u64,
    pub estimator: String,
    pub curve: Vec<GroupCount>,
    pub dendrogram: Dendrogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionFile {
    pub dataset: String,
    pub encoder: String,
    pub models: usize,
    pub factor_names: Vec<String>,
    pub thresholds: Vec<Vec<f64>>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_f64)
}

fn write_correlation(path: &Path, m: &CorrelationMatrix) -> Result<()> {
    let mut header = vec![""];
    header.extend(m.cols.iter().map(String::as_str));
    write_csv(
        path,
        &header,
        m.rows.iter().zip(&m.values).map(|(r, vals)| {
            std::iter::once(r.clone())
                .chain(vals.iter().map(|&v| opt(v)))
                .collect()
        }),
    )
}

fn rank_correlation(out: &Path, table: &ScoreTable) -> Result<()> {
    let mut all = BTreeMap::new();
    for axis in RANK_AXES {
        let mats = rank_corr_table(table, axis);
        for m in &mats {
            write_correlation(
                &out.join("analysis/rank")
                    .join(format!("{}__{}.csv", axis.name(), m.scope)),
                m,
            )?;
        }
        all.insert(axis.name(), mats);
    }
    write_json(&out.join("analysis/rank_correlation.json"), &all)
}

fn variance(out: &Path, table: &ScoreTable) -> Result<Vec<TaskRecord>> {
    let mut rows = Vec::new();
    let mut tasks = Vec::new();
    for p in [Predictors::Method, Predictors::MethodHyperparam] {
        for v in variance_explained(table, p) {
            let (r2, err) = match &v.r2 {
                Ok(r) => (fmt_f64(*r), String::new()),
                Err(e) => ("NA".into(), e.to_string()),
            };
            if let Err(e) = &v.r2 {
                tasks.push(TaskRecord::skipped(
                    format!("analysis/variance/{}/{}/{}", p.name(), v.dataset, v.metric),
                    0,
                    e,
                ));
            }
            rows.push(vec![v.dataset, v.metric, p.name().to_string(), r2, err]);
        }
    }
    write_csv(
        &out.join("analysis/variance_explained.csv"),
        &["dataset", "metric", "predictors", "r2", "error"],
        rows,
    )?;
    Ok(tasks)
}

fn transfer(cfg: &LoadedConfig, master: u64, out: &Path, table: &ScoreTable) -> Result<TaskRecord> {
    let seed = derive_seed(master, "analysis/transfer");
    let datasets: Vec<&str> = cfg.config.datasets.iter().map(|d| d.id.as_str()).collect();
    let t = table.filter(|r| {
        ScoreKind::of(&r.metric) == ScoreKind::Supervised
            && datasets.contains(&r.dataset_id.as_str())
    });
    let (t, dropped) = complete_settings(&t);
    match transfer_protocol(&t, cfg.config.analysis_settings.transfer_trials, seed) {
        Ok(r) if !dropped.is_empty() => {
            write_transfer(out, &r)?;
            let msg = format!(
                "settings without a full score grid left out: {}",
                dropped.join(", ")
            );
            Ok(TaskRecord::warning("analysis/transfer", seed, msg))
        }
        Ok(r) => {
            write_transfer(out, &r)?;
            Ok(TaskRecord::ok("analysis/transfer", seed))
        }
        Err(e) => Ok(TaskRecord::failed("analysis/transfer", seed, e)),
    }
}

/// Keeps the settings (method, hyperparam) scored on every dataset, metric
/// and seed present in `table`; returns the names of the others.
fn complete_settings(table: &ScoreTable) -> (ScoreTable, Vec<String>) {
    let recs = table.records();
    let count =
        |f: &dyn Fn(&ScoreRecord) -> String| recs.iter().map(f).collect::<BTreeSet<_>>().len();
    let full = count(&|r| r.dataset_id.clone())
        * count(&|r| r.metric.clone())
        * count(&|r| r.seed.to_string());
    let mut per: BTreeMap<(String, String), usize> = BTreeMap::new();
    for r in recs {
        *per.entry((r.method.clone(), r.hyperparam.clone()))
            .or_default() += 1;
    }
    let dropped: Vec<(String, String)> = per
        .into_iter()
        .filter(|&(_, n)| n < full)
        .map(|(k, _)| k)
        .collect();
    let kept = table.filter(|r| {
        !dropped
            .iter()
            .any(|(m, h)| *m == r.method && *h == r.hyperparam)
    });
    (
        kept,
        dropped
            .into_iter()
            .map(|(m, h)| format!("{m}/{h}"))
            .collect(),
    )
}

fn write_transfer(out: &Path, r: &TransferResult) -> Result<()> {
    write_json(&out.join("analysis/transfer.json"), r)?;
    let labels = ["same", "different"];
    write_csv(
        &out.join("analysis/transfer.csv"),
        &["metric", "dataset", "win_rate"],
        (0..2)
            .flat_map(|a| (0..2).map(move |b| (a, b)))
            .map(|(a, b)| {
                vec![
                    labels[a].to_string(),
                    labels[b].to_string(),
                    fmt_f64(r.cells[a][b]),
                ]
            }),
    )
}

fn groups(cfg: &LoadedConfig, out: &Path) -> Result<Vec<TaskRecord>> {
    let s = &cfg.config.analysis_settings;
    let est = s.groups_estimator;
    let grid = threshold_grid(s.groups_thresholds);
    let mut tasks = Vec::new();
    let mut by_encoder: BTreeMap<(String, String), Vec<Dendrogram>> = BTreeMap::new();
    let files: Vec<_> = files_with_extension(&out.join("matrices"), "json")
        .into_iter()
        .filter(|p| p.file_stem().is_some_and(|s| s == est.tag()))
        .collect();
    for path in files {
        let mf: MatrixFile = read_json(&path)?;
        let id = format!("analysis/groups/{}/{}/{}", mf.dataset, mf.encoder, mf.seed);
        let result = mf.matrix().map_err(|e| e.to_string()).and_then(|m| {
            let m = m.normalized_by_max();
            let curve = independent_groups_curve(&m, &grid).map_err(|e| e.to_string())?;
            let tree = dendrogram(&m).map_err(|e| e.to_string())?;
            Ok((curve, tree))
        });
        match result {
            Ok((curve, tree)) => {
                let dir = out
                    .join("analysis/groups")
                    .join(&mf.dataset)
                    .join(&mf.encoder);
                write_csv(
                    &dir.join(format!("seed{}_curve.csv", mf.seed)),
                    &["threshold", "components", "factors_connected"],
                    curve.iter().map(|g| {
                        vec![
                            fmt_f64(g.threshold),
                            g.components.to_string(),
                            g.factors_connected.to_string(),
                        ]
                    }),
                )?;
                by_encoder
                    .entry((mf.dataset.clone(), mf.encoder.clone()))
                    .or_default()
                    .push(tree.clone());
                let file = GroupsFile {
                    dataset: mf.dataset,
                    encoder: mf.encoder,
                    seed: mf.seed,
                    estimator: est.tag().into(),
                    curve,
                    dendrogram: tree,
                };
                write_json(&dir.join(format!("seed{}.json", file.seed)), &file)?;
                tasks.push(TaskRecord::ok(id, file.seed));
            }
            Err(e) => tasks.push(TaskRecord::failed(id, mf.seed, e)),
        }
    }
    for ((dataset, encoder), trees) in by_encoder {
        let id = format!("analysis/confusion/{dataset}/{encoder}");
        match confusion_thresholds(&trees) {
            Ok(t) => {
                let names = trees[0].factor_names.clone();
                let file = ConfusionFile {
                    dataset,
                    encoder,
                    models: trees.len(),
                    factor_names: names.clone(),
                    thresholds: t,
                };
                let stem = out
                    .join("analysis/confusion")
                    .join(format!("{}__{}", file.dataset, file.encoder));
                let mut header = vec![""];
                header.extend(names.iter().map(String::as_str));
                write_csv(
                    &stem.with_extension("csv"),
                    &header,
                    names.iter().zip(&file.thresholds).map(|(n, r)| {
                        std::iter::once(n.clone())
                            .chain(r.iter().map(|&v| fmt_f64(v)))
                            .collect()
                    }),
                )?;
                write_json(&stem.with_extension("json"), &file)?;
                tasks.push(TaskRecord::ok(id, 0));
            }
            Err(e) => tasks.push(TaskRecord::failed(id, 0, e)),
        }
    }
    Ok(tasks)
}

fn reliability_analysis(cfg: &LoadedConfig, master: u64, out: &Path) -> Result<Vec<TaskRecord>> {
    let s = &cfg.config.analysis_settings;
    let dataset = match &s.reliability_dataset {
        Some(d) => cfg.config.datasets.iter().find(|x| &x.id == d),
        None => cfg.config.datasets.first(),
    };
    let Some(dataset) = dataset else {
        return Ok(vec![TaskRecord::failed(
            "analysis/reliability",
            0,
            "no dataset",
        )]);
    };
    let space = dataset.space()?;
    let family = match entanglement_family(&space) {
        Ok(f) => f,
        Err(e) => return Ok(vec![TaskRecord::failed("analysis/reliability", 0, e)]),
    };
    let metrics: Vec<Metric> = s
        .reliability_metrics
        .iter()
        .filter_map(|m| Metric::parse(m))
        .collect();
    let base = settings(cfg);
    let mut rows = Vec::new();
    let mut tasks = Vec::new();
    for &n in &s.reliability_sizes {
        let id = format!("analysis/reliability/{n}");
        let seeds = (
            derive_seed(master, &format!("{id}/a")),
            derive_seed(master, &format!("{id}/b")),
        );
        let budget = EvalBudget {
            n_train: n,
            n_test: (n / 2).max(1),
            ..base.budget.clone()
        };
        let settings = EvalSettings {
            budget,
            ..base.clone()
        };
        match reliability(&space, &family, &metrics, &settings, seeds) {
            Ok(rs) => {
                for r in rs {
                    let (rho, err) = match &r.rho {
                        Ok(v) => (fmt_f64(*v), String::new()),
                        Err(e) => ("NA".into(), e.to_string()),
                    };
                    rows.push(vec![r.metric.name().to_string(), n.to_string(), rho, err]);
                }
                tasks.push(TaskRecord::ok(id, seeds.0));
            }
            Err(e) => tasks.push(TaskRecord::failed(id, seeds.0, e)),
        }
    }
    write_csv(
        &out.join("analysis/reliability.csv"),
        &["metric", "n", "rho", "error"],
        rows,
    )?;
    Ok(tasks)
}

/// Runs the configured analyses over `scores.csv` and the matrix sidecars in `out`.
pub fn analyze(
    cfg: &LoadedConfig,
    master: u64,
    out: &Path,
    table: &ScoreTable,
) -> Result<Vec<TaskRecord>> {
    let mut tasks = Vec::new();
    for &a in &cfg.config.analyses {
        match a {
            AnalysisKind::RankCorrelation => {
                rank_correlation(out, table)?;
                tasks.push(TaskRecord::ok("analysis/rank_correlation", 0));
            }
            AnalysisKind::VarianceExplained => {
                tasks.extend(variance(out, table)?);
                tasks.push(TaskRecord::ok("analysis/variance_explained", 0));
            }
            AnalysisKind::Transfer => tasks.push(transfer(cfg, master, out, table)?),
            AnalysisKind::Groups => tasks.extend(groups(cfg, out)?),
            AnalysisKind::Reliability => tasks.extend(reliability_analysis(cfg, master, out)?),
        }
    }
    Ok(tasks)
}
