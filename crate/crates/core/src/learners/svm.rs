use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;

use super::{argmax_first, check_training, standardize, standardizer, Classifier, MajorityClass};
use crate::seed::rng_from_seed;
use crate::Result;

/// How class scores are trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MulticlassScheme {
    /// Joint multiclass hinge loss (Crammer–Singer).
    CrammerSinger,
    /// One binary hinge-loss machine per class.
    OneVsRest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    pub scheme: MulticlassScheme,
    /// Stopping tolerance on the projected-gradient spread of the dual.
    pub tol: f64,
    pub max_epochs: usize,
    /// Seed of the coordinate visiting order.
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: 0.01, scheme: MulticlassScheme::CrammerSinger, tol: 1e-4, max_epochs: 5000, seed: 0 }
    }
}

/// Linear class scores `w_c · [z, 1]` on standardized features `z`;
/// prediction by the largest score.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `classes × (features + 1)`, bias last.
    pub weights: Array2<f64>,
    pub scheme: MulticlassScheme,
    pub epochs: usize,
    pub converged: bool,
    /// Set when every feature was constant and the model predicts one class.
    pub fallback: Option<MajorityClass>,
}

impl LinearSvmModel {
    pub fn decision(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let p = x.len();
        let z: Vec<f64> = x.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.scale[j]).collect();
        self.weights
            .rows()
            .into_iter()
            .map(|w| w[p] + z.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

impl Classifier for LinearSvmModel {
    fn predict_row(&self, x: ArrayView1<f64>) -> usize {
        match &self.fallback {
            Some(m) => m.label,
            None => argmax_first(self.decision(x)),
        }
    }
}

/// Rows of `x` with a trailing bias feature of 1.
fn augment(x: ArrayView2<f64>) -> Vec<Vec<f64>> {
    x.rows()
        .into_iter()
        .map(|r| r.iter().copied().chain(std::iter::once(1.0)).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn fit_linear_svm(x: ArrayView2<f64>, y: &[usize], config: &SvmConfig) -> Result<LinearSvmModel> {
    let classes = check_training(x, y)?;
    if !(config.c > 0.0) {
        return Err(crate::Error::arg(format!("C must be positive, got {}", config.c)));
    }
    let p = x.ncols();
    let (mean, scale) = standardizer(x);
    let constant = x.columns().into_iter().all(|c| c.iter().all(|&v| v == c[0]));
    if constant {
        return Ok(LinearSvmModel {
            mean,
            scale,
            weights: Array2::zeros((classes, p + 1)),
            scheme: config.scheme,
            epochs: 0,
            converged: true,
            fallback: Some(MajorityClass::fit(y)?),
        });
    }
    let rows = augment(standardize(x, &mean, &scale).view());
    let (w, epochs, converged) = match config.scheme {
        MulticlassScheme::CrammerSinger => crammer_singer(&rows, y, classes, config),
        MulticlassScheme::OneVsRest => one_vs_rest(&rows, y, classes, config),
    };
    let weights = Array2::from_shape_vec((classes, p + 1), w).expect("shape");
    Ok(LinearSvmModel { mean, scale, weights, scheme: config.scheme, epochs, converged, fallback: None })
}

/// Solves the per-row simplex subproblem of the multiclass dual.
fn solve_sub_problem(a: f64, yi: usize, c: f64, b: &[f64], out: &mut [f64]) {
    let mut d: Vec<f64> = b.to_vec();
    d[yi] += a * c;
    d.sort_by(|p, q| q.total_cmp(p));
    let mut beta = d[0] - a * c;
    let mut r = 1;
    while r < d.len() && beta < r as f64 * d[r] {
        beta += d[r];
        r += 1;
    }
    beta /= r as f64;
    for (m, o) in out.iter_mut().enumerate() {
        let v = (beta - b[m]) / a;
        *o = if m == yi { v.min(c) } else { v.min(0.0) };
    }
}

/// Sequential dual coordinate method for the Crammer–Singer machine.
fn crammer_singer(rows: &[Vec<f64>], y: &[usize], k: usize, config: &SvmConfig) -> (Vec<f64>, usize, bool) {
    let n = rows.len();
    let p = rows[0].len();
    let c = config.c;
    let mut w = vec![0.0; k * p];
    let mut alpha = vec![0.0; n * k];
    let qd: Vec<f64> = rows.iter().map(|r| dot(r, r)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(config.seed);
    let mut g = vec![0.0; k];
    let mut b = vec![0.0; k];
    let mut alpha_new = vec![0.0; k];
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut spread = 0.0f64;
        for &i in &order {
            let a = qd[i];
            if a <= 0.0 {
                continue;
            }
            let yi = y[i];
            let row = &rows[i];
            let al = &mut alpha[i * k..(i + 1) * k];
            for m in 0..k {
                g[m] = dot(&w[m * p..(m + 1) * p], row) + if m == yi { 0.0 } else { 1.0 };
            }
            let mut max_g = f64::NEG_INFINITY;
            let mut min_g = f64::INFINITY;
            for m in 0..k {
                if al[m] < 0.0 && g[m] < min_g {
                    min_g = g[m];
                }
                max_g = max_g.max(g[m]);
            }
            if al[yi] < c && g[yi] < min_g {
                min_g = g[yi];
            }
            if max_g - min_g <= 1e-12 {
                continue;
            }
            spread = spread.max(max_g - min_g);
            for m in 0..k {
                b[m] = g[m] - a * al[m];
            }
            solve_sub_problem(a, yi, c, &b, &mut alpha_new);
            for m in 0..k {
                let delta = alpha_new[m] - al[m];
                al[m] = alpha_new[m];
                if delta.abs() >= 1e-12 {
                    for (wj, xj) in w[m * p..(m + 1) * p].iter_mut().zip(row) {
                        *wj += delta * xj;
                    }
                }
            }
        }
        if spread < config.tol {
            return (w, epoch + 1, true);
        }
    }
    (w, config.max_epochs, false)
}

/// Dual coordinate descent for binary L1-loss (hinge) machines, one per class.
fn one_vs_rest(rows: &[Vec<f64>], y: &[usize], k: usize, config: &SvmConfig) -> (Vec<f64>, usize, bool) {
    let n = rows.len();
    let p = rows[0].len();
    let c = config.c;
    let qd: Vec<f64> = rows.iter().map(|r| dot(r, r)).collect();
    let mut weights = Vec::with_capacity(k * p);
    let mut worst_epochs = 0;
    let mut all_converged = true;
    for class in 0..k {
        let sign: Vec<f64> = y.iter().map(|&v| if v == class { 1.0 } else { -1.0 }).collect();
        let mut w = vec![0.0; p];
        let mut alpha = vec![0.0; n];
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = rng_from_seed(config.seed.wrapping_add(class as u64));
        let mut converged = false;
        let mut epochs = config.max_epochs;
        for epoch in 0..config.max_epochs {
            order.shuffle(&mut rng);
            let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
            for &i in &order {
                if qd[i] <= 0.0 {
                    continue;
                }
                let gi = sign[i] * dot(&w, &rows[i]) - 1.0;
                let pg = if alpha[i] == 0.0 {
                    gi.min(0.0)
                } else if alpha[i] == c {
                    gi.max(0.0)
                } else {
                    gi
                };
                pg_max = pg_max.max(pg);
                pg_min = pg_min.min(pg);
                if pg.abs() > 1e-12 {
                    let old = alpha[i];
                    alpha[i] = (old - gi / qd[i]).clamp(0.0, c);
                    let delta = (alpha[i] - old) * sign[i];
                    for (wj, xj) in w.iter_mut().zip(&rows[i]) {
                        *wj += delta * xj;
                    }
                }
            }
            if pg_max - pg_min < config.tol {
                converged = true;
                epochs = epoch + 1;
                break;
            }
        }
        worst_epochs = worst_epochs.max(epochs);
        all_converged &= converged;
        weights.extend(w);
    }
    (weights, worst_epochs, all_converged)
}
