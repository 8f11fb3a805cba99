use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};

use crate::{Error, Result};

/// Average ranks starting at 1; ties share the mean of their positions.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::arg(format!("need two equal-length vectors of length >= 2, got {} and {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Data("correlation input contains non-finite values".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::arg(format!("lengths {} and {} differ", x.len(), y.len())));
    }
    pearson(&ranks(x), &ranks(y))
}

/// Coefficient of determination of least squares on one-hot dummies of the
/// joint level of all predictor columns, plus an intercept.
pub fn ols_r2<S: AsRef<str>>(predictors: &[Vec<S>], y: &[f64]) -> Result<f64> {
    let n = y.len();
    if predictors.is_empty() {
        return Err(Error::arg("no predictor columns"));
    }
    if predictors.iter().any(|c| c.len() != n) {
        return Err(Error::arg("predictor columns and response differ in length"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("response contains non-finite values".into()));
    }
    let mut levels: BTreeMap<Vec<&str>, usize> = BTreeMap::new();
    let keys: Vec<Vec<&str>> = (0..n).map(|i| predictors.iter().map(|c| c[i].as_ref()).collect()).collect();
    for k in &keys {
        let next = levels.len();
        levels.entry(k.clone()).or_insert(next);
    }
    // Re-number in sorted order for a deterministic design.
    for (i, v) in levels.values_mut().enumerate() {
        *v = i;
    }
    let cols = levels.len() + 1;
    if n <= cols {
        return Err(Error::arg(format!("{n} rows cannot support {cols} design columns")));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Degenerate("response is constant".into()));
    }
    let mut design = DMatrix::<f64>::zeros(n, cols);
    for (i, k) in keys.iter().enumerate() {
        design[(i, 0)] = 1.0;
        design[(i, 1 + levels[k])] = 1.0;
    }
    let target = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let beta = svd.solve(&target, 1e-10).map_err(|e| Error::Degenerate(e.to_string()))?;
    let resid = target - design * beta;
    let r2 = 1.0 - resid.norm_squared() / ss_tot;
    Ok(r2.clamp(0.0, 1.0))
}

/// Empirical mean and biased (1/N) covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: Array1<f64>,
    pub cov: Array2<f64>,
}

pub fn fit_gaussian(codes: ArrayView2<f64>) -> Result<GaussianFit> {
    let (n, d) = codes.dim();
    if d == 0 {
        return Err(Error::arg("cannot fit a Gaussian in zero dimensions"));
    }
    if n == 0 {
        return Err(Error::arg("cannot fit a Gaussian to zero rows"));
    }
    let mean = codes.mean_axis(ndarray::Axis(0)).expect("nonempty");
    let centred = &codes - &mean;
    let cov = centred.t().dot(&centred) / n as f64;
    Ok(GaussianFit { mean, cov })
}

/// Cholesky factor diagonal, or None when not positive definite.
fn cholesky_diag(a: &Array2<f64>) -> Option<Vec<f64>> {
    let d = a.nrows();
    let mut l = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let mut s = a[[j, j]];
        for k in 0..j {
            s -= l[[j, k]] * l[[j, k]];
        }
        if !(s > 0.0) {
            return None;
        }
        let ljj = s.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..d {
            let mut t = a[[i, j]];
            for k in 0..j {
                t -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = t / ljj;
        }
    }
    Some((0..d).map(|j| l[[j, j]]).collect())
}

/// `½(Σ ln Σ_jj − ln det Σ)` with an explicit diagonal jitter in both terms.
pub fn gaussian_tc_with_jitter(fit: &GaussianFit, jitter: f64) -> Result<f64> {
    let d = fit.cov.nrows();
    if d == 0 {
        return Err(Error::arg("zero-dimensional covariance"));
    }
    let mut cov = fit.cov.clone();
    for j in 0..d {
        cov[[j, j]] += jitter;
    }
    let diag = cholesky_diag(&cov).ok_or_else(|| Error::Degenerate("covariance is not positive definite".into()))?;
    let log_det = 2.0 * diag.iter().map(|v| v.ln()).sum::<f64>();
    let log_diag: f64 = (0..d).map(|j| cov[[j, j]].ln()).sum();
    Ok((0.5 * (log_diag - log_det)).max(0.0))
}

/// Total correlation of the fitted Gaussian, in nats. When the covariance is
/// not positive definite a jitter of `1e-8 · trace/d` is added.
pub fn gaussian_tc(fit: &GaussianFit) -> Result<f64> {
    let d = fit.cov.nrows();
    if d == 0 {
        return Err(Error::arg("zero-dimensional covariance"));
    }
    if cholesky_diag(&fit.cov).is_some() {
        return gaussian_tc_with_jitter(fit, 0.0);
    }
    let trace: f64 = fit.cov.diag().sum();
    let eps = if trace > 0.0 { 1e-8 * trace / d as f64 } else { 1e-8 };
    gaussian_tc_with_jitter(fit, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1., 2., 3.], &[10., 20., 30.]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1., 2., 3.], &[3., 2., 1.]).unwrap() + 1.0).abs() < 1e-15);
        // Ranks (1.5, 1.5, 3) against (1, 2, 3): r = 1.5 / √(1.5 · 2).
        let want = 1.5 / 3f64.sqrt();
        assert!((spearman(&[1., 1., 2.], &[1., 2., 3.]).unwrap() - want).abs() < 1e-15);
        assert!(matches!(spearman(&[1., 1.], &[1., 2.]), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn ols_group_examples() {
        let g = vec![vec!["A", "A", "B", "B"]];
        assert!((ols_r2(&g, &[1., 1., 2., 2.]).unwrap() - 1.0).abs() < 1e-12);
        assert!(ols_r2(&g, &[1., 2., 1., 2.]).unwrap().abs() < 1e-12);
        assert!((ols_r2(&g, &[1., 2., 3., 4.]).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ols_rejects_constant_and_saturated() {
        let g = vec![vec!["A", "A", "B", "B"]];
        assert!(matches!(ols_r2(&g, &[1., 1., 1., 1.]), Err(Error::Degenerate(_))));
        let g = vec![vec!["A", "B", "C"]];
        assert!(matches!(ols_r2(&g, &[1., 2., 3.]), Err(Error::Argument(_))));
    }

    #[test]
    fn diagonal_covariance_has_zero_tc() {
        let fit = GaussianFit { mean: array![0., 0., 0.], cov: array![[2., 0., 0.], [0., 0.5, 0.], [0., 0., 1.]] };
        assert!(gaussian_tc(&fit).unwrap().abs() < 1e-9);
    }

    #[test]
    fn closed_form_bivariate() {
        let rho: f64 = 0.5;
        let fit = GaussianFit { mean: array![0., 0.], cov: array![[1., rho], [rho, 1.]] };
        let want = -0.5 * (1.0 - rho * rho).ln();
        assert!((gaussian_tc(&fit).unwrap() - want).abs() < 1e-12);
        assert!((want - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn duplicated_dimension_needs_jitter() {
        let x = array![[0.1, 0.1], [0.5, 0.5], [0.9, 0.9], [0.3, 0.3]];
        let fit = fit_gaussian(x.view()).unwrap();
        let tc = gaussian_tc(&fit).unwrap();
        assert!(tc > 5.0, "{tc}");
        let a = gaussian_tc_with_jitter(&fit, 1e-6).unwrap();
        let b = gaussian_tc_with_jitter(&fit, 1e-8).unwrap();
        assert!(b > a);
    }
}
