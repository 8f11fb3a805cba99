//! Browser bindings: build an entangler, score a factor-code matrix, draw its
//! dendrogram. Matrices travel as JSON arrays of rows.

use disent_core::analysis::dendrogram;
use disent_core::estimation::{Estimator, FactorCodeMatrix};
use disent_core::impossibility::{householder, orthogonality_error, verify_marginals, Entangler, Marginal};
use disent_core::metrics::{aggregate_dci_c, aggregate_dci_d, aggregate_mig, aggregate_modularity, aggregate_sap};
use disent_core::seed::rng_from_seed;
use disent_core::svg::dendrogram_svg;
use ndarray::Array2;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct EntanglerReport {
    pub matrix: Vec<Vec<f64>>,
    pub orthogonality_error: f64,
    pub ks: Vec<f64>,
    pub ks_critical: f64,
    pub marginals_preserved: bool,
}

#[derive(Debug, Serialize)]
pub struct Scores {
    pub mig: Option<f64>,
    pub modularity: Option<f64>,
    pub dci_disentanglement: Option<f64>,
    pub dci_completeness: Option<f64>,
    pub sap: Option<f64>,
}

fn parse_matrix(json: &str) -> Result<FactorCodeMatrix, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(json).map_err(|e| format!("matrix: {e}"))?;
    let k = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err("matrix rows differ in length".into());
    }
    let values = Array2::from_shape_vec((k, d), rows.into_iter().flatten().collect()).map_err(|e| e.to_string())?;
    FactorCodeMatrix::new(values, Estimator::Gbt).map_err(|e| e.to_string())
}

/// Householder entangler of dimension `d` and its marginal check on `n` draws.
pub fn entangler_report(d: usize, alpha: f64, n: usize, seed: u64) -> Result<EntanglerReport, String> {
    let a = householder(d, alpha).map_err(|e| e.to_string())?;
    let e = Entangler::new(d, alpha, Marginal::Uniform01).map_err(|e| e.to_string())?;
    let report = verify_marginals(&e, n, &mut rng_from_seed(seed)).map_err(|e| e.to_string())?;
    Ok(EntanglerReport {
        orthogonality_error: orthogonality_error(&a),
        matrix: a.rows().into_iter().map(|r| r.to_vec()).collect(),
        marginals_preserved: report.all_pass(),
        ks: report.ks,
        ks_critical: report.critical,
    })
}

/// Aggregations of a nonnegative factor-by-code matrix.
pub fn matrix_scores(json: &str) -> Result<Scores, String> {
    let m = parse_matrix(json)?;
    let ok = |r: disent_core::Result<disent_core::metrics::MetricResult>| r.ok().map(|r| r.value);
    Ok(Scores {
        mig: ok(aggregate_mig(&m, None)),
        modularity: ok(aggregate_modularity(&m)),
        dci_disentanglement: ok(aggregate_dci_d(&m)),
        dci_completeness: ok(aggregate_dci_c(&m)),
        sap: ok(aggregate_sap(&m)),
    })
}

/// Dendrogram of a matrix; rescaled by its largest entry when that exceeds 1.
pub fn matrix_dendrogram(json: &str) -> Result<String, String> {
    let m = parse_matrix(json)?;
    let m = if m.values.iter().any(|&v| v > 1.0) { m.normalized_by_max() } else { m };
    let tree = dendrogram(&m).map_err(|e| e.to_string())?;
    Ok(dendrogram_svg("Factor merges", &tree))
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn entangle(d: usize, alpha: f64, n: usize, seed: u32) -> Result<String, JsValue> {
    to_js(entangler_report(d, alpha, n, seed as u64))
}

#[wasm_bindgen]
pub fn score(matrix_json: &str) -> Result<String, JsValue> {
    to_js(matrix_scores(matrix_json))
}

#[wasm_bindgen]
pub fn dendrogram_of(matrix_json: &str) -> Result<String, JsValue> {
    matrix_dendrogram(matrix_json).map_err(|e| JsValue::from_str(&e))
}
