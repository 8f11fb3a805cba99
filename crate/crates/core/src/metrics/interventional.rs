use ndarray::{Array2, Axis};
use rand::Rng as _;

use super::{EvalBudget, MetricResult};
use crate::estimation::mi_matrix;
use crate::factors::{sample_factors, sample_factors_fixed, CodeMode, FactorSpace, OracleEncoder};
use crate::learners::{argmax_first, fit_logistic, Classifier, LogisticConfig, MajorityVote};
use crate::seed::Rng;
use crate::{Error, Result};

fn check_space(space: &FactorSpace) -> Result<()> {
    if space.num_factors() < 2 {
        return Err(Error::arg("interventional metrics need at least 2 factors"));
    }
    Ok(())
}

/// Mean absolute difference between the codes of two batches sharing one
/// fixed factor value.
fn beta_vae_point(space: &FactorSpace, encoder: &OracleEncoder, batch: usize, rng: &mut Rng) -> Result<(Vec<f64>, usize)> {
    let k = rng.random_range(0..space.num_factors());
    let v = rng.random_range(0..space.cardinality(k));
    let f1 = sample_factors_fixed(space, batch, k, v, rng)?;
    let f2 = sample_factors_fixed(space, batch, k, v, rng)?;
    let c1 = encoder.encode(&f1, CodeMode::Mean, rng)?;
    let c2 = encoder.encode(&f2, CodeMode::Mean, rng)?;
    let diff = (c1.values() - c2.values()).mapv(f64::abs);
    let feature = diff.mean_axis(Axis(0)).expect("batch >= 1").to_vec();
    Ok((feature, k))
}

fn beta_vae_set(space: &FactorSpace, encoder: &OracleEncoder, n: usize, batch: usize, rng: &mut Rng) -> Result<(Array2<f64>, Vec<usize>)> {
    let d = encoder.output_dim(space);
    let mut x = Array2::zeros((n, d));
    let mut y = Vec::with_capacity(n);
    for mut row in x.rows_mut() {
        let (feat, k) = beta_vae_point(space, encoder, batch, rng)?;
        row.assign(&ndarray::ArrayView1::from(&feat[..]));
        y.push(k);
    }
    Ok((x, y))
}

/// Accuracy of a logistic classifier predicting which factor was held fixed
/// from the mean absolute code difference of two batches.
pub fn beta_vae_score(space: &FactorSpace, encoder: &OracleEncoder, budget: &EvalBudget, rng: &mut Rng) -> Result<MetricResult> {
    check_space(space)?;
    budget.validate()?;
    encoder.validate(space)?;
    let (xtr, ytr) = beta_vae_set(space, encoder, budget.n_train, budget.batch, rng)?;
    let (xte, yte) = beta_vae_set(space, encoder, budget.n_test, budget.batch, rng)?;
    let model = match fit_logistic(xtr.view(), &ytr, &LogisticConfig::default()) {
        Ok(m) => crate::learners::ClassifierModel::Logistic(m),
        Err(Error::DegenerateLabels(_)) => {
            crate::learners::ClassifierModel::MajorityClass(crate::learners::MajorityClass::fit(&ytr)?)
        }
        Err(e) => return Err(e),
    };
    let value = model.accuracy(xte.view(), &yte);
    Ok(MetricResult::interventional("beta_vae", value, Vec::new()))
}

/// Unbiased per-column variances.
fn column_variances(x: &Array2<f64>) -> Vec<f64> {
    x.var_axis(Axis(0), 1.0).to_vec()
}

fn factor_vae_votes(
    space: &FactorSpace,
    encoder: &OracleEncoder,
    n: usize,
    budget: &EvalBudget,
    scale: &[f64],
    active: &[usize],
    rng: &mut Rng,
) -> Result<Vec<(usize, usize)>> {
    (0..n)
        .map(|_| {
            let k = rng.random_range(0..space.num_factors());
            let v = rng.random_range(0..space.cardinality(k));
            let f = sample_factors_fixed(space, budget.batch, k, v, rng)?;
            let c = encoder.encode(&f, CodeMode::Mean, rng)?;
            let var = column_variances(c.values());
            let normalized = active.iter().map(|&i| -(var[i] / scale[i]));
            Ok((active[argmax_first(normalized)], k))
        })
        .collect()
}

/// Accuracy of a majority-vote classifier mapping the code dimension of
/// least normalized variance to the fixed factor.
pub fn factor_vae_score(space: &FactorSpace, encoder: &OracleEncoder, budget: &EvalBudget, rng: &mut Rng) -> Result<MetricResult> {
    check_space(space)?;
    budget.validate()?;
    encoder.validate(space)?;
    if budget.batch < 2 {
        return Err(Error::arg("factor_vae needs batches of at least 2 rows"));
    }
    let f = sample_factors(space, budget.n_train, rng)?;
    let c = encoder.encode(&f, CodeMode::Mean, rng)?;
    let scale = column_variances(c.values());
    let active: Vec<usize> = (0..scale.len()).filter(|&i| scale[i] >= budget.variance_threshold).collect();
    if active.is_empty() {
        return Err(Error::AllDimensionsCollapsed { threshold: budget.variance_threshold });
    }
    let train = factor_vae_votes(space, encoder, budget.n_train, budget, &scale, &active, rng)?;
    let test = factor_vae_votes(space, encoder, budget.n_test, budget, &scale, &active, rng)?;
    let model = MajorityVote::fit(&train)?;
    let per_dim = (0..scale.len()).map(|i| if active.contains(&i) { 1.0 } else { 0.0 }).collect();
    Ok(MetricResult::interventional("factor_vae", model.accuracy(&test), per_dim))
}

/// Interventional robustness: how far the codes assigned to a factor move
/// when another factor is additionally fixed, relative to their spread.
pub fn irs_score(space: &FactorSpace, encoder: &OracleEncoder, budget: &EvalBudget, rng: &mut Rng) -> Result<MetricResult> {
    check_space(space)?;
    budget.validate()?;
    encoder.validate(space)?;
    let factors = sample_factors(space, budget.n_train, rng)?;
    let codes = encoder.encode(&factors, CodeMode::Mean, rng)?;
    let n = factors.len();
    let kf = space.num_factors();
    let d = codes.dim();
    let var = column_variances(codes.values());
    if var.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("representation is constant".into()));
    }
    let mi = mi_matrix(&factors, &codes, budget.bins)?;
    let owner: Vec<usize> = (0..d).map(|i| argmax_first(mi.values.column(i).iter().copied())).collect();
    let x = codes.values();
    let mut factor_score = vec![0.0; kf];
    for (i, score) in factor_score.iter_mut().enumerate() {
        let dims: Vec<usize> = (0..d).filter(|&j| owner[j] == i).collect();
        if dims.is_empty() {
            continue;
        }
        let centre: Vec<f64> = dims.iter().map(|&j| x.column(j).sum() / n as f64).collect();
        let dist = |row: &[f64], to: &[f64]| row.iter().zip(to).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let mut max_dev = 0.0f64;
        for r in 0..n {
            let row: Vec<f64> = dims.iter().map(|&j| x[[r, j]]).collect();
            max_dev = max_dev.max(dist(&row, &centre));
        }
        if max_dev == 0.0 {
            continue;
        }
        let zi = factors.column(i);
        let ci = space.cardinality(i);
        // Sums and counts per value of z_i, and per (z_i, z_j) cell.
        let mut ref_sum = vec![vec![0.0; dims.len()]; ci];
        let mut ref_n = vec![0usize; ci];
        for r in 0..n {
            ref_n[zi[r]] += 1;
            for (s, &j) in ref_sum[zi[r]].iter_mut().zip(&dims) {
                *s += x[[r, j]];
            }
        }
        let mut total = 0.0;
        let mut seen_values = 0usize;
        let mut worst_by_value = vec![0.0f64; ci];
        for jf in (0..kf).filter(|&jf| jf != i) {
            let zj = factors.column(jf);
            let cj = space.cardinality(jf);
            let mut cell_sum = vec![vec![0.0; dims.len()]; ci * cj];
            let mut cell_n = vec![0usize; ci * cj];
            for r in 0..n {
                let c = zi[r] * cj + zj[r];
                cell_n[c] += 1;
                for (s, &j) in cell_sum[c].iter_mut().zip(&dims) {
                    *s += x[[r, j]];
                }
            }
            for v in 0..ci {
                if ref_n[v] == 0 {
                    continue;
                }
                let reference: Vec<f64> = ref_sum[v].iter().map(|s| s / ref_n[v] as f64).collect();
                for w in 0..cj {
                    let c = v * cj + w;
                    if cell_n[c] == 0 {
                        continue;
                    }
                    let mean: Vec<f64> = cell_sum[c].iter().map(|s| s / cell_n[c] as f64).collect();
                    worst_by_value[v] = worst_by_value[v].max(dist(&mean, &reference));
                }
            }
        }
        for v in 0..ci {
            if ref_n[v] > 0 {
                total += worst_by_value[v];
                seen_values += 1;
            }
        }
        let disagreement = total / seen_values.max(1) as f64;
        *score = (1.0 - disagreement / max_dev).clamp(0.0, 1.0);
    }
    let weight: f64 = var.iter().sum();
    let value = (0..d).map(|j| var[j] * factor_score[owner[j]]).sum::<f64>() / weight;
    Ok(MetricResult::interventional("irs", value.clamp(0.0, 1.0), factor_score))
}
