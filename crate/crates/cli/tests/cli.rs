use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use disent_cli::csvio::ingest_external;
use disent_cli::evaluate::TaskStatus;
use disent_cli::Manifest;
use serde_json::{json, Value};
use tempfile::TempDir;

const SMALL_BUDGET: &str = r#"{"n_train": 600, "n_test": 300, "batch": 32, "bins": 20, "variance_threshold": 0.05}"#;

fn budget() -> Value {
    serde_json::from_str(SMALL_BUDGET).unwrap()
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    p
}

fn disent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disent")).args(args).env_remove("DISENT_OUT").output().unwrap()
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    disent(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(out: &Path) -> Manifest {
    serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

fn score_rows(out: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(out.join("scores.csv")).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn base(encoders: Value) -> Value {
    json!({
        "seed": 3,
        "datasets": [{"id": "toy", "cardinalities": [3, 4, 5]}],
        "encoders": encoders,
        "metrics": {"budget": budget()}
    })
}

#[test]
fn unknown_key_exits_with_config_error() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base(json!([{"id": "identity", "kind": {"type": "identity"}}]));
    cfg["metrcs"] = json!({});
    let o = run(&write_config(dir.path(), &cfg), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("metrcs"), "{}", stderr(&o));
}

#[test]
fn rotation_alpha_outside_range_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = base(json!([{"id": "r", "kind": {"type": "rotation", "alpha": 0.7}}]));
    let o = run(&write_config(dir.path(), &cfg), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("encoders[0].kind.alpha"), "{}", stderr(&o));
}

fn write_external(dir: &Path, rows: usize, codes: usize, gap: bool) -> (PathBuf, PathBuf) {
    let mut f = String::from("factor_0,factor_1\n");
    let mut c = String::from("code_0,code_1\n");
    for i in 0..rows {
        let a = if gap { 2 * (i % 2) } else { i % 3 };
        let b = (i / 3) % 4;
        f.push_str(&format!("{a},{b}\n"));
        if i < codes {
            c.push_str(&format!("{},{}\n", a as f64 + 0.01 * (i % 7) as f64, b as f64 * 0.5));
        }
    }
    let (fp, cp) = (dir.join("factors.csv"), dir.join("codes.csv"));
    fs::write(&fp, f).unwrap();
    fs::write(&cp, c).unwrap();
    (fp, cp)
}

fn external_config(fp: &Path, cp: &Path) -> Value {
    json!({
        "seed": 1,
        "datasets": [],
        "encoders": [{"id": "ext", "kind": {"type": "external", "factors_csv": fp, "codes_csv": cp}}],
        "metrics": {"names": ["mig", "dci_disentanglement", "factor_vae"], "budget": budget()}
    })
}

#[test]
fn row_mismatch_exits_with_data_error() {
    let dir = TempDir::new().unwrap();
    let (fp, cp) = write_external(dir.path(), 100, 99, false);
    let err = ingest_external(&fp, &cp).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("100 factor rows vs 99 code rows"), "{err}");
    let o = run(&write_config(dir.path(), &external_config(&fp, &cp)), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn external_representation_is_scored_with_a_gap_warning() {
    let dir = TempDir::new().unwrap();
    let (fp, cp) = write_external(dir.path(), 300, 300, true);
    let data = ingest_external(&fp, &cp).unwrap();
    assert_eq!(data.codes.len(), 300);
    assert_eq!(data.factors.space().cardinalities(), &[3, 4]);
    assert_eq!(data.warnings.len(), 1);

    let out = dir.path().join("out");
    let o = run(&write_config(dir.path(), &external_config(&fp, &cp)), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&out);
    assert!(m.tasks.iter().any(|t| t.status == TaskStatus::Warning && t.id.ends_with("/ingest")));
    assert!(m.tasks.iter().any(|t| t.status == TaskStatus::Skipped && t.id.ends_with("/factor_vae")));
    let metrics: Vec<String> = score_rows(&out).into_iter().map(|r| r[5].clone()).collect();
    assert!(metrics.contains(&"mig".to_string()) && metrics.contains(&"dci_disentanglement".to_string()));
    assert!(!metrics.contains(&"factor_vae".to_string()));
}

#[test]
fn failing_metric_is_isolated() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base(json!([
        {"id": "collapsed", "kind": {"type": "collapsed", "dims": 3}},
        {"id": "identity", "kind": {"type": "identity"}}
    ]));
    cfg["metrics"]["names"] = json!(["factor_vae", "mig"]);
    cfg["metrics"]["blends"] = json!(false);
    cfg["metrics"]["unsupervised"] = json!(false);
    let out = dir.path().join("out");
    let o = run(&write_config(dir.path(), &cfg), &out, &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let m = manifest(&out);
    assert!(m.failures > 0);
    assert!(m.tasks.iter().any(|t| t.status == TaskStatus::Failed && t.id.contains("/collapsed/") && t.id.ends_with("factor_vae")));
    let rows = score_rows(&out);
    let identity: Vec<&str> = rows.iter().filter(|r| r[1] == "identity").map(|r| r[5].as_str()).collect();
    assert_eq!(identity, ["factor_vae", "mig"]);
}

#[test]
fn score_table_has_one_row_per_encoder_and_score() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base(json!([
        {"id": "identity", "kind": {"type": "identity"}},
        {"id": "rotation", "kind": {"type": "rotation", "alpha": 0.25}},
        {"id": "merge", "kind": {"type": "merge", "groups": [[0, 1]]}},
        {"id": "duplicate", "kind": {"type": "duplicate", "sources": [0]}}
    ]));
    cfg["metrics"]["unsupervised"] = json!(false);
    let out = dir.path().join("out");
    let o = run(&write_config(dir.path(), &cfg), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = score_rows(&out);
    // Nine metrics plus three estimators times five aggregations.
    assert_eq!(rows.len(), 4 * (9 + 3 * 5));
    let mut sorted = rows.clone();
    sorted.sort();
    assert_eq!(rows, sorted);
}

fn determinism_config() -> Value {
    json!({
        "seed": 11,
        "datasets": [{"id": "a", "cardinalities": [3, 4, 5]}, {"id": "b", "cardinalities": [2, 3, 4]}],
        "encoders": [
            {"id": "identity", "kind": {"type": "identity"}},
            {"id": "rotation", "kind": {"type": "rotation", "alpha": 0.25}},
            {"id": "merge", "kind": {"type": "merge", "groups": [[1, 2]]}}
        ],
        "seeds": [0, 1],
        "metrics": {"budget": budget()},
        "downstream": {"learners": ["gbt"], "sizes": [10, 100], "n_test": 200},
        "analyses": ["rank_correlation", "variance_explained", "transfer", "groups"],
        "analysis_settings": {"transfer_trials": 300}
    })
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn output_does_not_depend_on_jobs() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), &determinism_config());
    let (one, eight) = (dir.path().join("one"), dir.path().join("eight"));
    assert_eq!(run(&config, &one, &["--jobs", "1"]).status.code(), Some(0));
    assert_eq!(run(&config, &eight, &["--jobs", "8"]).status.code(), Some(0));
    let (a, b) = (tree(&one), tree(&eight));
    assert!(a.iter().any(|(p, _)| p.ends_with("scores.csv")));
    assert!(a.iter().any(|(p, _)| p.ends_with("analysis/transfer.json")));
    assert_eq!(a.iter().map(|f| &f.0).collect::<Vec<_>>(), b.iter().map(|f| &f.0).collect::<Vec<_>>());
    for ((p, x), (_, y)) in a.iter().zip(&b) {
        assert!(x == y, "{} differs", p.display());
    }

    let (ma, mb) = (manifest(&one), manifest(&eight));
    assert_eq!(ma.tasks, mb.tasks);
    assert_eq!(ma.config_sha256, disent_cli::sha256_hex(&fs::read(&config).unwrap()));
    assert_eq!(fs::read(one.join("config.json")).unwrap(), fs::read(&config).unwrap());
}

#[test]
fn seed_flag_overrides_config_and_env_sets_output() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base(json!([{"id": "rotation", "kind": {"type": "rotation", "alpha": 0.25}}]));
    cfg["metrics"]["names"] = json!(["mig"]);
    cfg["metrics"]["blends"] = json!(false);
    let config = write_config(dir.path(), &cfg);
    let env_out = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_disent"))
        .args(["evaluate", "--config", config.to_str().unwrap()])
        .env("DISENT_OUT", &env_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let other = dir.path().join("other");
    assert_eq!(run(&config, &other, &["--seed", "99"]).status.code(), Some(0));
    assert!(manifest(&other).seed_overridden);
    assert_eq!(manifest(&other).master_seed, 99);
    assert_ne!(fs::read(env_out.join("scores.csv")).unwrap(), fs::read(other.join("scores.csv")).unwrap());
}

#[test]
fn generated_data_reads_back_as_external() {
    let dir = TempDir::new().unwrap();
    let cfg = base(json!([{"id": "identity", "kind": {"type": "identity"}}]));
    let config = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    let o = disent(&["generate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let d = out.join("data/toy/identity/seed0");
    let data = ingest_external(&d.join("factors.csv"), &d.join("codes.csv")).unwrap();
    assert_eq!(data.codes.len(), 900);
    assert_eq!(data.factors.space().cardinalities(), &[3, 4, 5]);
}

#[test]
fn report_lists_missing_inputs() {
    let dir = TempDir::new().unwrap();
    let o = disent(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("missing"));
    assert!(dir.path().join("figures/report.json").exists());
}

#[test]
fn report_heatmap_of_a_three_by_five_matrix() {
    let svg = disent_core::svg::heatmap_dense(
        "m",
        &["f0", "f1", "f2"].map(String::from),
        &["c0", "c1", "c2", "c3", "c4"].map(String::from),
        &[vec![0.1; 5], vec![0.5; 5], vec![0.9; 5]],
    );
    assert_eq!(svg.matches("class=\"cell\"").count(), 15);
    for label in ["f0", "f2", "c0", "c4"] {
        assert!(svg.contains(&format!(">{label}<")), "{label}");
    }
}

#[test]
fn reliability_analysis_writes_one_row_per_metric_and_size() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "seed": 5,
        "datasets": [{"id": "toy", "cardinalities": [3, 3, 4, 4]}],
        "encoders": [{"id": "identity", "kind": {"type": "identity"}}],
        "metrics": {"names": ["mig", "sap"], "blends": false, "unsupervised": false, "budget": budget()},
        "analyses": ["reliability"],
        "analysis_settings": {"reliability_metrics": ["mig", "sap"], "reliability_sizes": [100, 300]}
    });
    let out = dir.path().join("out");
    let o = run(&write_config(dir.path(), &cfg), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("analysis/reliability.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "metric,n,rho,error");
    assert_eq!(lines.len(), 1 + 2 * 2);
}
