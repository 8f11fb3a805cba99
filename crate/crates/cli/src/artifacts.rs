use std::path::{Path, PathBuf};

use disent_core::estimation::{Estimator, FactorCodeMatrix};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::csvio::{fmt_f64, write_csv, write_file};
use crate::error::{CliError, Result};

/// JSON sidecar of a factor-code matrix; carries everything the CSV cannot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dataset: String,
    pub encoder: String,
    pub seed: u64,
    pub estimator: Estimator,
    pub factor_names: Vec<String>,
    pub code_names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub row_accuracy: Option<Vec<f64>>,
    pub factor_entropy: Option<Vec<f64>>,
}

impl MatrixFile {
    pub fn new(dataset: &str, encoder: &str, seed: u64, m: &FactorCodeMatrix) -> Self {
        Self {
            dataset: dataset.into(),
            encoder: encoder.into(),
            seed,
            estimator: m.estimator,
            factor_names: m.factor_names.clone(),
            code_names: m.code_names.clone(),
            values: m.values.rows().into_iter().map(|r| r.to_vec()).collect(),
            row_accuracy: m.row_accuracy.clone(),
            factor_entropy: m.factor_entropy.clone(),
        }
    }

    pub fn matrix(&self) -> Result<FactorCodeMatrix> {
        let (k, d) = (self.values.len(), self.code_names.len());
        let flat: Vec<f64> = self.values.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((k, d), flat)
            .map_err(|e| CliError::data(self.stem(), format!("matrix shape: {e}")))?;
        let mut m = FactorCodeMatrix::new(values, self.estimator)?;
        m.factor_names = self.factor_names.clone();
        m.code_names = self.code_names.clone();
        m.row_accuracy = self.row_accuracy.clone();
        m.factor_entropy = self.factor_entropy.clone();
        Ok(m)
    }

    pub fn stem(&self) -> String {
        format!(
            "{}__{}__seed{}__{}",
            self.dataset, self.encoder, self.seed, self.estimator
        )
    }

    pub fn dir(out: &Path, dataset: &str, encoder: &str, seed: u64) -> PathBuf {
        out.join("matrices")
            .join(dataset)
            .join(encoder)
            .join(format!("seed{seed}"))
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        let dir = Self::dir(out, &self.dataset, &self.encoder, self.seed);
        let mut header = vec!["factor"];
        header.extend(self.code_names.iter().map(String::as_str));
        write_csv(
            &dir.join(format!("{}.csv", self.estimator)),
            &header,
            self.values
                .iter()
                .zip(&self.factor_names)
                .map(|(row, name)| {
                    std::iter::once(name.clone())
                        .chain(row.iter().map(|&v| fmt_f64(v)))
                        .collect()
                }),
        )?;
        write_json(&dir.join(format!("{}.json", self.estimator)), self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::data(path.display().to_string(), e.to_string()))?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::data(path.display().to_string(), e.to_string()))
}

/// Files below `dir` with extension `ext`, sorted by path.
pub fn files_with_extension(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = std::fs::read_dir(&d) else {
            continue;
        };
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == ext) {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}
