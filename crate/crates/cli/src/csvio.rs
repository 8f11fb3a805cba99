use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use disent_core::analysis::{ScoreRecord, ScoreTable};
use disent_core::factors::{CodeBatch, CodeMode, Factor, FactorBatch, FactorSpace};
use ndarray::Array2;

use crate::error::{CliError, Result};

/// Floats with 17 significant digits: parsing them back is exact.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::data(path.display().to_string(), e.to_string()))
}

fn headers(r: &mut csv::Reader<std::fs::File>, path: &Path, prefix: &str) -> Result<Vec<String>> {
    let h: Vec<String> = r
        .headers()
        .map_err(|e| CliError::data(path.display().to_string(), e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if h.is_empty() {
        return Err(CliError::data(path.display().to_string(), "empty header"));
    }
    if let Some(bad) = h.iter().find(|c| !c.starts_with(prefix)) {
        return Err(CliError::data(
            path.display().to_string(),
            format!("column {bad:?} does not start with {prefix:?}"),
        ));
    }
    Ok(h)
}

/// Rows of a CSV as strings; `row` in errors counts data rows from 1.
fn rows(
    r: &mut csv::Reader<std::fs::File>,
    path: &Path,
    width: usize,
) -> Result<Vec<csv::StringRecord>> {
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| {
            CliError::data(path.display().to_string(), format!("row {}: {e}", i + 1))
        })?;
        if rec.len() != width {
            return Err(CliError::data(
                path.display().to_string(),
                format!("row {}: {} fields, expected {width}", i + 1, rec.len()),
            ));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(CliError::data(path.display().to_string(), "no data rows"));
    }
    Ok(out)
}

#[derive(Debug)]
pub struct Ingested {
    pub factors: FactorBatch,
    pub codes: CodeBatch,
    /// Non-fatal findings, e.g. factor values with gaps.
    pub warnings: Vec<String>,
}

/// Reads a factor CSV (`factor_*` columns, nonnegative integers) and a code
/// CSV (`code_*` columns, finite reals) with the same number of rows. Each
/// factor's cardinality is its largest value plus one.
pub fn ingest_external(factors_csv: &Path, codes_csv: &Path) -> Result<Ingested> {
    let fname = factors_csv.display().to_string();
    let cname = codes_csv.display().to_string();
    let mut fr = reader(factors_csv)?;
    let fh = headers(&mut fr, factors_csv, "factor_")?;
    let frows = rows(&mut fr, factors_csv, fh.len())?;
    let mut cr = reader(codes_csv)?;
    let ch = headers(&mut cr, codes_csv, "code_")?;
    let crows = rows(&mut cr, codes_csv, ch.len())?;
    if frows.len() != crows.len() {
        return Err(CliError::data(
            format!("{fname}, {cname}"),
            format!(
                "row count mismatch: {} factor rows vs {} code rows",
                frows.len(),
                crows.len()
            ),
        ));
    }
    let n = frows.len();
    let mut fv = Array2::<usize>::zeros((n, fh.len()));
    for (i, rec) in frows.iter().enumerate() {
        for (k, field) in rec.iter().enumerate() {
            fv[[i, k]] = field.trim().parse::<usize>().map_err(|_| {
                CliError::data(
                    &fname,
                    format!(
                        "row {}, column {}: {field:?} is not a nonnegative integer",
                        i + 1,
                        fh[k]
                    ),
                )
            })?;
        }
    }
    let mut cv = Array2::<f64>::zeros((n, ch.len()));
    for (i, rec) in crows.iter().enumerate() {
        for (j, field) in rec.iter().enumerate() {
            let v = field
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    CliError::data(
                        &cname,
                        format!(
                            "row {}, column {}: {field:?} is not a finite number",
                            i + 1,
                            ch[j]
                        ),
                    )
                })?;
            cv[[i, j]] = v;
        }
    }
    let mut warnings = Vec::new();
    let mut factors = Vec::with_capacity(fh.len());
    for (k, name) in fh.iter().enumerate() {
        let seen: BTreeSet<usize> = fv.column(k).iter().copied().collect();
        let card = seen.iter().next_back().map_or(0, |m| m + 1);
        if seen.len() < card {
            let missing: Vec<String> = (0..card)
                .filter(|v| !seen.contains(v))
                .map(|v| v.to_string())
                .collect();
            warnings.push(format!(
                "{name}: values {{{}}} never occur; cardinality inferred as {card}",
                missing.join(",")
            ));
        }
        factors.push(Factor {
            name: name.clone(),
            cardinality: card,
        });
    }
    let space = FactorSpace::new(factors).map_err(|e| CliError::data(&fname, e.to_string()))?;
    let factors = FactorBatch::new(space, fv).map_err(|e| CliError::data(&fname, e.to_string()))?;
    let codes =
        CodeBatch::new(cv, CodeMode::Mean).map_err(|e| CliError::data(&cname, e.to_string()))?;
    Ok(Ingested {
        factors,
        codes,
        warnings,
    })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}

fn to_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_file(path, &to_bytes(&header, rows))
}

pub fn factors_csv(batch: &FactorBatch) -> Vec<u8> {
    let header: Vec<String> = (0..batch.space().num_factors())
        .map(|k| format!("factor_{k}"))
        .collect();
    to_bytes(
        &header,
        batch
            .values()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.to_string()).collect()),
    )
}

pub fn codes_csv(batch: &CodeBatch) -> Vec<u8> {
    let header: Vec<String> = (0..batch.dim()).map(|i| format!("code_{i}")).collect();
    to_bytes(
        &header,
        batch
            .values()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&v| fmt_f64(v)).collect()),
    )
}

pub const SCORE_HEADER: [&str; 8] = [
    "dataset_id",
    "encoder_id",
    "method",
    "hyperparam",
    "seed",
    "metric",
    "n_samples",
    "value",
];

/// Score table in key order.
pub fn scores_csv(table: &ScoreTable) -> Vec<u8> {
    let header: Vec<String> = SCORE_HEADER.iter().map(|s| s.to_string()).collect();
    to_bytes(
        &header,
        table.sorted().into_iter().map(|r| {
            vec![
                r.dataset_id.clone(),
                r.encoder_id.clone(),
                r.method.clone(),
                r.hyperparam.clone(),
                r.seed.to_string(),
                r.metric.clone(),
                r.n_samples.to_string(),
                fmt_f64(r.value),
            ]
        }),
    )
}

pub fn read_scores(path: &Path) -> Result<ScoreTable> {
    let name = path.display().to_string();
    let mut r = reader(path)?;
    let h = r
        .headers()
        .map_err(|e| CliError::data(&name, e.to_string()))?
        .clone();
    if h.iter().collect::<Vec<_>>() != SCORE_HEADER {
        return Err(CliError::data(&name, format!("unexpected header {h:?}")));
    }
    let mut table = ScoreTable::default();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| CliError::data(&name, format!("row {row}: {e}")))?;
        let num = |j: usize| -> Result<u64> {
            rec[j].parse().map_err(|_| {
                CliError::data(&name, format!("row {row}: {:?} is not an integer", &rec[j]))
            })
        };
        let value: f64 = rec[7].parse().map_err(|_| {
            CliError::data(&name, format!("row {row}: {:?} is not a number", &rec[7]))
        })?;
        table
            .push(ScoreRecord {
                dataset_id: rec[0].to_string(),
                encoder_id: rec[1].to_string(),
                method: rec[2].to_string(),
                hyperparam: rec[3].to_string(),
                seed: num(4)?,
                metric: rec[5].to_string(),
                n_samples: num(6)? as usize,
                value,
            })
            .map_err(|e| CliError::data(&name, format!("row {row}: {e}")))?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use disent_core::factors::{sample_factors, OracleEncoder};
    use disent_core::seed::rng_from_seed;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let space = FactorSpace::from_cardinalities(&[3, 5]).unwrap();
        let mut rng = rng_from_seed(1);
        let f = sample_factors(&space, 100, &mut rng).unwrap();
        let c = OracleEncoder::rotation(2, 0.3)
            .unwrap()
            .encode(&f, CodeMode::Mean, &mut rng)
            .unwrap();
        let fp = dir.path().join("f.csv");
        let cp = dir.path().join("c.csv");
        write_file(&fp, &factors_csv(&f)).unwrap();
        write_file(&cp, &codes_csv(&c)).unwrap();
        let back = ingest_external(&fp, &cp).unwrap();
        assert_eq!(back.codes.values(), c.values());
        assert_eq!(back.factors.values(), f.values());
        assert_eq!(back.factors.len(), 100);
    }

    #[test]
    fn row_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let f: String = std::iter::once("factor_0,factor_1\n".to_string())
            .chain((0..100).map(|i| format!("{},{}\n", i % 2, i % 3)))
            .collect();
        let c: String = std::iter::once("code_0\n".to_string())
            .chain((0..99).map(|i| format!("{i}.5\n")))
            .collect();
        let fp = write(dir.path(), "f.csv", &f);
        let cp = write(dir.path(), "c.csv", &c);
        let err = ingest_external(&fp, &cp).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(
            err.to_string().contains("100 factor rows vs 99 code rows"),
            "{err}"
        );
    }

    #[test]
    fn gaps_warn_and_bad_values_name_rows() {
        let dir = tempfile::tempdir().unwrap();
        let fp = write(dir.path(), "f.csv", "factor_a,factor_b\n0,0\n2,1\n0,1\n");
        let cp = write(dir.path(), "c.csv", "code_0\n0.1\n0.2\n0.3\n");
        let ok = ingest_external(&fp, &cp).unwrap();
        assert_eq!(ok.factors.space().cardinalities(), vec![3, 2]);
        assert_eq!(ok.warnings.len(), 1);
        assert!(ok.warnings[0].contains("factor_a"));
        let bad = write(dir.path(), "g.csv", "factor_a,factor_b\n0,0\n1.5,1\n0,1\n");
        assert!(ingest_external(&bad, &cp)
            .unwrap_err()
            .to_string()
            .contains("row 2"));
        let nan = write(dir.path(), "d.csv", "code_0\n0.1\nNaN\n0.3\n");
        assert!(ingest_external(&fp, &nan)
            .unwrap_err()
            .to_string()
            .contains("row 2"));
    }
}
