use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{argmax_first, check_training, class_counts, standardize, standardizer, Classifier, ClassifierModel, MajorityClass};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticConfig {
    /// Penalty `λ/2 ‖W‖²` on the weights (not the intercepts), added to the
    /// summed cross-entropy. `λ = 1` matches an inverse strength of `C = 1`.
    pub l2_strength: f64,
    pub max_iter: usize,
    /// Stop when the max-norm of the mean-loss gradient drops below this.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self { l2_strength: 1.0, max_iter: 500, tol: 1e-6 }
    }
}

/// Multinomial logistic regression on internally standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `classes × (features + 1)`, intercept last.
    coef: Array2<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn num_classes(&self) -> usize {
        self.coef.nrows()
    }

    pub fn decision(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let p = x.len();
        let z: Array1<f64> = x.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.scale[j]).collect();
        self.coef.rows().into_iter().map(|w| w.slice(ndarray::s![..p]).dot(&z) + w[p]).collect()
    }
}

impl Classifier for LogisticModel {
    fn predict_row(&self, x: ArrayView1<f64>) -> usize {
        argmax_first(self.decision(x))
    }
}

struct Problem<'a> {
    x: &'a Array2<f64>,
    y: &'a [usize],
    classes: usize,
    lambda: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.classes * (self.x.ncols() + 1)
    }

    /// Mean penalized loss and its gradient.
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (n, p) = self.x.dim();
        let k = self.classes;
        let stride = p + 1;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        let mut logits = vec![0.0; k];
        for (row, &yi) in self.x.rows().into_iter().zip(self.y) {
            for (c, l) in logits.iter_mut().enumerate() {
                let w = &theta[c * stride..(c + 1) * stride];
                *l = w[p] + row.iter().zip(&w[..p]).map(|(a, b)| a * b).sum::<f64>();
            }
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
            loss += lse - logits[yi];
            for (c, &l) in logits.iter().enumerate() {
                let r = (l - lse).exp() - if c == yi { 1.0 } else { 0.0 };
                let g = &mut grad[c * stride..(c + 1) * stride];
                for (gj, a) in g[..p].iter_mut().zip(row) {
                    *gj += r * a;
                }
                g[p] += r;
            }
        }
        for c in 0..k {
            for j in 0..p {
                let w = theta[c * stride + j];
                loss += 0.5 * self.lambda * w * w;
                grad[c * stride + j] += self.lambda * w;
            }
        }
        let inv = 1.0 / n as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        loss * inv
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Limited-memory BFGS with a backtracking Armijo line search.
fn lbfgs(prob: &Problem, max_iter: usize, tol: f64) -> (Vec<f64>, usize, bool) {
    const MEMORY: usize = 10;
    let n = prob.dim();
    let mut x = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut f = prob.eval(&x, &mut g);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    for iter in 0..max_iter {
        if max_abs(&g) <= tol {
            return (x, iter, true);
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let a = dot(s, &q) / dot(y, s);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y), a) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = dot(y, &q) / dot(y, s);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
            s_hist.clear();
            y_hist.clear();
        }
        let mut step = if s_hist.is_empty() { 1.0 / max_abs(&g).max(1.0) } else { 1.0 };
        let mut accepted = false;
        for _ in 0..60 {
            x_new.iter_mut().zip(&x).zip(&dir).for_each(|((xn, xi), di)| *xn = xi + step * di);
            let f_new = prob.eval(&x_new, &mut g_new);
            if f_new <= f + 1e-4 * step * slope {
                let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                if dot(&s, &y) > 1e-12 {
                    if s_hist.len() == MEMORY {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(y);
                }
                std::mem::swap(&mut x, &mut x_new);
                std::mem::swap(&mut g, &mut g_new);
                f = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return (x, iter + 1, max_abs(&g) <= tol);
        }
    }
    let done = max_abs(&g) <= tol;
    (x, max_iter, done)
}

pub fn fit_logistic(x: ArrayView2<f64>, y: &[usize], config: &LogisticConfig) -> Result<LogisticModel> {
    let classes = check_training(x, y)?;
    if !(config.l2_strength >= 0.0) {
        return Err(Error::arg(format!("l2_strength must be >= 0, got {}", config.l2_strength)));
    }
    let (mean, scale) = standardizer(x);
    let xs = standardize(x, &mean, &scale);
    let prob = Problem { x: &xs, y, classes, lambda: config.l2_strength };
    let (theta, iterations, converged) = lbfgs(&prob, config.max_iter, config.tol);
    let coef = Array2::from_shape_vec((classes, x.ncols() + 1), theta).expect("shape");
    Ok(LogisticModel { mean, scale, coef, iterations, converged })
}

/// Fold index per row: stratified round-robin within each class when every
/// present class has at least two rows, otherwise plain round-robin.
fn assign_folds(y: &[usize], folds: usize) -> (Vec<usize>, usize) {
    let counts = class_counts(y);
    let smallest = counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(0);
    let (k, stratified) = if smallest >= folds {
        (folds, true)
    } else if smallest >= 2 {
        (smallest, true)
    } else {
        (folds.min(y.len()), false)
    };
    let mut seen = vec![0usize; counts.len()];
    let fold = y
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if stratified {
                seen[c] += 1;
                (seen[c] - 1) % k
            } else {
                i % k
            }
        })
        .collect();
    (fold, k)
}

/// Log-spaced strengths over `[1e-4, 1e4]`.
pub fn cv_strengths(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / (n - 1) as f64)).collect()
}

fn fit_or_majority(x: ArrayView2<f64>, y: &[usize], config: &LogisticConfig) -> Result<ClassifierModel> {
    match fit_logistic(x, y, config) {
        Ok(m) => Ok(ClassifierModel::Logistic(m)),
        Err(Error::DegenerateLabels(_)) => Ok(ClassifierModel::MajorityClass(MajorityClass::fit(y)?)),
        Err(e) => Err(e),
    }
}

/// Cross-validated choice of the inverse regularization strength `C`, then a
/// refit on all rows. A training fold with a single class predicts it.
pub fn fit_logistic_cv(x: ArrayView2<f64>, y: &[usize], folds: usize, n_strengths: usize) -> Result<ClassifierModel> {
    if y.len() < 2 {
        return Err(Error::Data(format!("cross-validation needs at least 2 rows, got {}", y.len())));
    }
    if folds < 2 || n_strengths < 1 {
        return Err(Error::arg("need folds >= 2 and at least one strength"));
    }
    check_training(x, y)?;
    let (fold_of, k) = assign_folds(y, folds);
    let strengths = cv_strengths(n_strengths);
    let mut best = (0, f64::NEG_INFINITY);
    for (si, &c) in strengths.iter().enumerate() {
        let config = LogisticConfig { l2_strength: 1.0 / c, max_iter: 200, ..Default::default() };
        let mut total = 0.0;
        for f in 0..k {
            let train: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == f).collect();
            let ytr: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let yte: Vec<usize> = test.iter().map(|&i| y[i]).collect();
            let model = fit_or_majority(x.select(Axis(0), &train).view(), &ytr, &config)?;
            total += model.accuracy(x.select(Axis(0), &test).view(), &yte);
        }
        let mean = total / k as f64;
        if mean > best.1 {
            best = (si, mean);
        }
    }
    let config = LogisticConfig { l2_strength: 1.0 / strengths[best.0], ..Default::default() };
    fit_or_majority(x, y, &config)
}
