use std::collections::BTreeMap;
use std::path::Path;

use disent_core::analysis::{CorrelationMatrix, ScoreTable};
use disent_core::metrics::Metric;
use disent_core::svg;
use serde::{Deserialize, Serialize};

use crate::analyze::{ConfusionFile, GroupsFile};
use crate::artifacts::{files_with_extension, read_json, write_json, MatrixFile};
use crate::csvio::{read_scores, write_file};
use crate::error::Result;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub figures: Vec<String>,
    /// Inputs that were expected but absent or unreadable.
    pub missing: Vec<String>,
}

struct Writer<'a> {
    out: &'a Path,
    summary: ReportSummary,
}

impl Writer<'_> {
    fn figure(&mut self, name: String, body: String) -> Result<()> {
        write_file(&self.out.join("figures").join(&name), body.as_bytes())?;
        self.summary.figures.push(name);
        Ok(())
    }

    fn missing(&mut self, what: impl Into<String>) {
        self.summary.missing.push(what.into());
    }
}

fn scatter(w: &mut Writer, table: &ScoreTable) -> Result<()> {
    for dataset in table.datasets() {
        let mut cols: BTreeMap<&str, BTreeMap<(String, u64), f64>> = BTreeMap::new();
        for r in table.records().iter().filter(|r| r.dataset_id == dataset) {
            if let Some(m) = Metric::parse(&r.metric) {
                cols.entry(m.name())
                    .or_default()
                    .insert((r.encoder_id.clone(), r.seed), r.value);
            }
        }
        if cols.len() < 2 {
            continue;
        }
        // Models scored on every metric.
        let keys: Vec<(String, u64)> = cols
            .values()
            .next()
            .map(|c| {
                c.keys()
                    .filter(|k| cols.values().all(|c| c.contains_key(*k)))
                    .cloned()
                    .collect()
            })
            .unwrap_or_default();
        let names: Vec<String> = cols.keys().map(|s| s.to_string()).collect();
        let columns: Vec<Vec<f64>> = cols
            .values()
            .map(|c| keys.iter().map(|k| c[k]).collect())
            .collect();
        w.figure(
            format!("scatter__{dataset}.svg"),
            svg::scatter_grid(&format!("metrics on {dataset}"), &names, &columns),
        )?;
    }
    Ok(())
}

/// Renders every figure that the artifacts in `out` support. Absent inputs
/// are listed in `figures/report.json` rather than failing the report.
pub fn render_report(out: &Path) -> Result<ReportSummary> {
    let mut w = Writer {
        out,
        summary: ReportSummary::default(),
    };

    match read_scores(&out.join("scores.csv")) {
        Ok(t) => scatter(&mut w, &t)?,
        Err(e) => w.missing(format!("scores.csv ({e})")),
    }

    let matrices = files_with_extension(&out.join("matrices"), "json");
    if matrices.is_empty() {
        w.missing("matrices/");
    }
    for p in matrices {
        match read_json::<MatrixFile>(&p) {
            Ok(m) => {
                let body = svg::heatmap_dense(&m.stem(), &m.factor_names, &m.code_names, &m.values);
                w.figure(format!("matrix__{}.svg", m.stem()), body)?;
            }
            Err(e) => w.missing(e.to_string()),
        }
    }

    let rank = out.join("analysis/rank_correlation.json");
    match read_json::<BTreeMap<String, Vec<CorrelationMatrix>>>(&rank) {
        Ok(all) => {
            for (axis, mats) in all {
                for m in mats
                    .iter()
                    .filter(|m| !m.rows.is_empty() && !m.cols.is_empty())
                {
                    let title = format!("{axis} ({})", m.scope);
                    w.figure(
                        format!("rank__{axis}__{}.svg", m.scope),
                        svg::heatmap(&title, &m.rows, &m.cols, &m.values, (-1.0, 1.0)),
                    )?;
                }
            }
        }
        Err(_) => w.missing("analysis/rank_correlation.json"),
    }

    let confusion = files_with_extension(&out.join("analysis/confusion"), "json");
    let groups = files_with_extension(&out.join("analysis/groups"), "json");
    if groups.is_empty() {
        w.missing("analysis/groups/");
    }
    for p in confusion {
        match read_json::<ConfusionFile>(&p) {
            Ok(c) => {
                let title = format!(
                    "mean merge threshold, {} / {} ({} models)",
                    c.dataset, c.encoder, c.models
                );
                let body =
                    svg::heatmap_dense(&title, &c.factor_names, &c.factor_names, &c.thresholds);
                w.figure(format!("confusion__{}__{}.svg", c.dataset, c.encoder), body)?;
            }
            Err(e) => w.missing(e.to_string()),
        }
    }
    for p in groups {
        match read_json::<GroupsFile>(&p) {
            Ok(g) => {
                let stem = format!("{}__{}__seed{}", g.dataset, g.encoder, g.seed);
                let series = vec![
                    (
                        "components".to_string(),
                        g.curve
                            .iter()
                            .map(|c| (c.threshold, c.components as f64))
                            .collect(),
                    ),
                    (
                        "factors connected".to_string(),
                        g.curve
                            .iter()
                            .map(|c| (c.threshold, c.factors_connected as f64))
                            .collect(),
                    ),
                ];
                w.figure(
                    format!("groups__{stem}.svg"),
                    svg::step_curves(
                        &format!("{} groups, {stem}", g.estimator),
                        "threshold",
                        "count",
                        &series,
                    ),
                )?;
                w.figure(
                    format!("dendrogram__{stem}.svg"),
                    svg::dendrogram_svg(&stem, &g.dendrogram),
                )?;
            }
            Err(e) => w.missing(e.to_string()),
        }
    }

    write_json(&out.join("figures/report.json"), &w.summary)?;
    Ok(w.summary)
}
