//! Run orchestration for `disent`: configuration, external data, score
//! tables, analyses and reports.

pub mod analyze;
pub mod artifacts;
pub mod config;
pub mod csvio;
pub mod error;
pub mod evaluate;
pub mod report;

use std::path::{Path, PathBuf};

use disent_core::analysis::ScoreTable;
use disent_core::metrics::observational_draw;
use disent_core::seed::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::{write_json, MatrixFile};
use crate::config::{LoadedConfig, ModelSource};
use crate::csvio::{codes_csv, factors_csv, read_scores, scores_csv, write_file};
use crate::error::{CliError, Result};
use crate::evaluate::{TaskRecord, TaskStatus};

pub use crate::config::parse_config;
pub use crate::report::render_report;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "DISENT_OUT";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Worker threads; never changes output bytes.
    pub jobs: usize,
    pub seed: Option<u64>,
}

/// `--out`, then `$DISENT_OUT`, then the config's `output_dir` (relative to
/// the config file), then `disent-out`.
pub fn resolve_out(flag: Option<PathBuf>, cfg: &LoadedConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.config.output_dir.as_ref().map(|d| cfg.base_dir.join(d)))
        .unwrap_or_else(|| PathBuf::from("disent-out"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub verb: String,
    /// SHA-256 of the configuration file bytes, also copied to `config.json`.
    pub config_sha256: String,
    pub master_seed: u64,
    pub seed_overridden: bool,
    pub tasks: Vec<TaskRecord>,
    pub failures: usize,
    /// The only field that differs between identical runs.
    pub created_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn master(cfg: &LoadedConfig, opts: &RunOptions) -> u64 {
    opts.seed.unwrap_or(cfg.config.seed)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::config("--jobs", e.to_string()))
}

fn finish(
    cfg: &LoadedConfig,
    opts: &RunOptions,
    verb: &str,
    tasks: Vec<TaskRecord>,
) -> Result<Manifest> {
    write_file(&opts.out.join("config.json"), &cfg.bytes)?;
    let failures = tasks
        .iter()
        .filter(|t| t.status == TaskStatus::Failed)
        .count();
    let manifest = Manifest {
        tool: "disent".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        verb: verb.into(),
        config_sha256: sha256_hex(&cfg.bytes),
        master_seed: master(cfg, opts),
        seed_overridden: opts.seed.is_some(),
        tasks,
        failures,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    write_json(&opts.out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Writes the observational draw of every oracle model as CSV under `data/`.
pub fn generate(cfg: &LoadedConfig, opts: &RunOptions) -> Result<Manifest> {
    let m = master(cfg, opts);
    let b = &cfg.config.metrics.budget;
    let models = cfg.models()?;
    let tasks: Vec<TaskRecord> = pool(opts.jobs)?.install(|| {
        models
            .par_iter()
            .filter_map(|model| {
                let ModelSource::Oracle { space, encoder } = &model.source else {
                    return None;
                };
                let id = format!(
                    "generate/{}/{}/{}",
                    model.dataset, model.encoder, model.seed
                );
                let seed = derive_seed(m, &model.task_id());
                let dir = opts
                    .out
                    .join("data")
                    .join(&model.dataset)
                    .join(&model.encoder)
                    .join(format!("seed{}", model.seed));
                let r = observational_draw(space, encoder, b.n_train + b.n_test, seed)
                    .map_err(CliError::from)
                    .and_then(|(f, c)| {
                        write_file(&dir.join("factors.csv"), &factors_csv(&f))?;
                        write_file(&dir.join("codes.csv"), &codes_csv(&c))
                    });
                Some(match r {
                    Ok(()) => TaskRecord::ok(id, seed),
                    Err(e) => TaskRecord::failed(id, seed, e),
                })
            })
            .collect()
    });
    finish(cfg, opts, "generate", tasks)
}

/// Scores every model; writes `scores.csv` and the matrices.
fn evaluate_models(cfg: &LoadedConfig, opts: &RunOptions) -> Result<Vec<TaskRecord>> {
    let m = master(cfg, opts);
    let models = cfg.models()?;
    for model in &models {
        if let ModelSource::External { factors_csv, codes_csv } = &model.source {
            csvio::ingest_external(factors_csv, codes_csv)?;
        }
    }
    let outputs: Vec<_> = pool(opts.jobs)?.install(|| {
        models
            .par_iter()
            .map(|model| evaluate::evaluate(cfg, m, model))
            .collect()
    });
    let mut table = ScoreTable::default();
    let mut tasks = Vec::new();
    for o in outputs {
        for r in o.records {
            table.push(r)?;
        }
        for mat in &o.matrices {
            MatrixFile::new(&o.model.dataset, &o.model.encoder, o.model.seed, mat)
                .write(&opts.out)?;
        }
        tasks.extend(o.tasks);
    }
    write_file(&opts.out.join("scores.csv"), &scores_csv(&table))?;
    Ok(tasks)
}

pub fn evaluate(cfg: &LoadedConfig, opts: &RunOptions) -> Result<Manifest> {
    let tasks = evaluate_models(cfg, opts)?;
    finish(cfg, opts, "evaluate", tasks)
}

fn analyze_existing(cfg: &LoadedConfig, opts: &RunOptions) -> Result<Vec<TaskRecord>> {
    let table = read_scores(&opts.out.join("scores.csv"))?;
    pool(opts.jobs)?.install(|| analyze::analyze(cfg, master(cfg, opts), &opts.out, &table))
}

pub fn analyze(cfg: &LoadedConfig, opts: &RunOptions) -> Result<Manifest> {
    let tasks = analyze_existing(cfg, opts)?;
    finish(cfg, opts, "analyze", tasks)
}

fn report_tasks(out: &Path) -> Result<Vec<TaskRecord>> {
    let summary = render_report(out)?;
    Ok(summary
        .missing
        .into_iter()
        .map(|m| TaskRecord::skipped("report", 0, format!("missing {m}")))
        .collect())
}

/// evaluate → analyze → report.
pub fn run(cfg: &LoadedConfig, opts: &RunOptions) -> Result<Manifest> {
    let mut tasks = evaluate_models(cfg, opts)?;
    tasks.extend(analyze_existing(cfg, opts)?);
    tasks.extend(report_tasks(&opts.out)?);
    finish(cfg, opts, "run", tasks)
}

/// Error for a manifest with failed tasks.
pub fn check(manifest: &Manifest) -> Result<()> {
    if manifest.failures > 0 {
        Err(CliError::Partial(manifest.failures))
    } else {
        Ok(())
    }
}
