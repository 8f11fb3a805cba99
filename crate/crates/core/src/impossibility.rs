//! Entangling bijections that preserve every marginal.
//!
//! For a factorized latent with per-coordinate CDFs `g_i`, the map
//!
//! ```text
//! f(u) = g⁻¹( Φ( A · Φ⁻¹( g(u) ) ) )
//! ```
//!
//! with `A` orthogonal sends the latent distribution onto itself, while every
//! output coordinate depends on every input coordinate as soon as all entries
//! of `A` are nonzero. The Householder reflection `A = I − 2vvᵀ` with
//! `v₁ = √α`, `vᵢ = √((1 − α)/(d − 1))` and `0 < α < ½` provides such a
//! matrix for every `d ≥ 2`.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::normal;
use crate::seed::Rng;
use crate::{Error, Result};

/// Orthogonality tolerance `‖AᵀA − I‖_max`.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Per-coordinate marginal of the latent the bijection acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    Uniform01,
    StandardNormal,
}

impl Marginal {
    pub fn cdf(self, x: f64) -> f64 {
        match self {
            Marginal::Uniform01 => x.clamp(0.0, 1.0),
            Marginal::StandardNormal => normal::cdf(x),
        }
    }

    /// Whether `x` lies in the open support.
    pub fn contains(self, x: f64) -> bool {
        match self {
            Marginal::Uniform01 => x > 0.0 && x < 1.0,
            Marginal::StandardNormal => x.is_finite(),
        }
    }

    pub fn sample(self, rng: &mut Rng) -> f64 {
        match self {
            Marginal::Uniform01 => loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break u;
                }
            },
            Marginal::StandardNormal => rng.sample(StandardNormal),
        }
    }

    /// `h ∘ g`: latent coordinate → standard normal coordinate.
    #[inline]
    fn to_gaussian(self, x: f64) -> f64 {
        match self {
            Marginal::Uniform01 => normal::quantile(x),
            Marginal::StandardNormal => x,
        }
    }

    /// `g⁻¹ ∘ h⁻¹`.
    #[inline]
    fn from_gaussian(self, y: f64) -> f64 {
        match self {
            Marginal::Uniform01 => normal::cdf(y),
            Marginal::StandardNormal => y,
        }
    }
}

/// Householder reflection `I − 2vvᵀ` with every entry nonzero.
pub fn householder(d: usize, alpha: f64) -> Result<Array2<f64>> {
    if d < 2 {
        return Err(Error::arg(format!("householder needs d >= 2, got {d}")));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::arg(format!("alpha must lie in (0, 0.5), got {alpha}")));
    }
    let rest = ((1.0 - alpha) / (d - 1) as f64).sqrt();
    let v: Array1<f64> = (0..d).map(|i| if i == 0 { alpha.sqrt() } else { rest }).collect();
    let mut a = Array2::<f64>::eye(d);
    for i in 0..d {
        for j in 0..d {
            a[[i, j]] -= 2.0 * v[i] * v[j];
        }
    }
    Ok(a)
}

/// `‖AᵀA − I‖_max`.
pub fn orthogonality_error(a: &Array2<f64>) -> f64 {
    let ata = a.t().dot(a);
    let mut worst = 0.0f64;
    for ((i, j), x) in ata.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((x - target).abs());
    }
    worst
}

/// The bijection `f` for one orthogonal matrix and one marginal per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Entangler {
    alpha: Option<f64>,
    matrix: Array2<f64>,
    marginals: Vec<Marginal>,
}

impl Entangler {
    /// Householder entangler with the same marginal on every coordinate.
    pub fn new(d: usize, alpha: f64, marginal: Marginal) -> Result<Self> {
        Self::with_marginals(alpha, vec![marginal; d])
    }

    pub fn with_marginals(alpha: f64, marginals: Vec<Marginal>) -> Result<Self> {
        let matrix = householder(marginals.len(), alpha)?;
        Ok(Self { alpha: Some(alpha), matrix, marginals })
    }

    /// Any orthogonal matrix with all entries nonzero.
    pub fn from_matrix(matrix: Array2<f64>, marginals: Vec<Marginal>) -> Result<Self> {
        let d = marginals.len();
        if d < 2 || matrix.dim() != (d, d) {
            return Err(Error::arg("matrix must be d x d with d >= 2 matching the marginals"));
        }
        let err = orthogonality_error(&matrix);
        if err >= ORTHOGONALITY_TOL {
            return Err(Error::arg(format!("matrix is not orthogonal (error {err:e})")));
        }
        if matrix.iter().any(|&x| x == 0.0) {
            return Err(Error::arg("matrix has a zero entry"));
        }
        Ok(Self { alpha: None, matrix, marginals })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    /// The inverse bijection (same construction with `Aᵀ`).
    pub fn inverse(&self) -> Self {
        Self {
            alpha: self.alpha,
            matrix: self.matrix.t().to_owned(),
            marginals: self.marginals.clone(),
        }
    }

    fn check_point(&self, u: ArrayView1<f64>) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::arg(format!("point has {} coordinates, expected {}", u.len(), self.dim())));
        }
        for (i, (&x, m)) in u.iter().zip(&self.marginals).enumerate() {
            if !m.contains(x) {
                return Err(Error::Domain(format!("coordinate {i} = {x} is not inside the support of {m:?}")));
            }
        }
        Ok(())
    }

    /// `f(u)`.
    pub fn apply(&self, u: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_point(u)?;
        let mut out = Array1::zeros(self.dim());
        self.apply_unchecked(u, &mut out);
        Ok(out)
    }

    /// `f(u)` without support checks; boundary inputs are clamped by the
    /// normal quantile.
    pub(crate) fn apply_unchecked(&self, u: ArrayView1<f64>, out: &mut Array1<f64>) {
        let gauss: Array1<f64> = u.iter().zip(&self.marginals).map(|(&x, m)| m.to_gaussian(x)).collect();
        let rotated = self.matrix.dot(&gauss);
        for ((o, &y), m) in out.iter_mut().zip(rotated.iter()).zip(&self.marginals) {
            *o = m.from_gaussian(y);
        }
    }

    /// Draw `n` latent vectors from the product of marginals.
    pub fn sample_latents(&self, n: usize, rng: &mut Rng) -> Array2<f64> {
        let d = self.dim();
        let mut z = Array2::zeros((n, d));
        for mut row in z.rows_mut() {
            for (x, m) in row.iter_mut().zip(&self.marginals) {
                *x = m.sample(rng);
            }
        }
        z
    }

    /// Apply `f` row-wise.
    pub fn apply_rows(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(z.dim());
        let mut buf = Array1::zeros(self.dim());
        for (row, mut dst) in z.rows().into_iter().zip(out.rows_mut()) {
            self.check_point(row)?;
            self.apply_unchecked(row, &mut buf);
            dst.assign(&buf);
        }
        Ok(out)
    }
}

/// Two-sided one-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Critical value of the KS statistic at significance 0.01 (asymptotic).
pub fn ks_critical_001(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheckReport {
    pub ks: Vec<f64>,
    pub n: usize,
    pub critical: f64,
    pub pass: Vec<bool>,
}

impl MarginalCheckReport {
    /// KS of every column of `samples` against the matching marginal CDF.
    pub fn from_samples(samples: &Array2<f64>, marginals: &[Marginal]) -> Self {
        let n = samples.nrows();
        let critical = ks_critical_001(n);
        let ks: Vec<f64> = samples
            .columns()
            .into_iter()
            .zip(marginals)
            .map(|(col, &m)| ks_statistic(&col.to_vec(), |x| m.cdf(x)))
            .collect();
        let pass = ks.iter().map(|&k| k < critical).collect();
        Self { ks, n, critical, pass }
    }

    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }
}

/// Draw `n` latents, apply `f` and test each output coordinate against its
/// marginal.
pub fn verify_marginals(e: &Entangler, n: usize, rng: &mut Rng) -> Result<MarginalCheckReport> {
    if n < 1000 {
        return Err(Error::arg(format!("verify_marginals needs n >= 1000, got {n}")));
    }
    let z = e.sample_latents(n, rng);
    let fz = e.apply_rows(&z)?;
    Ok(MarginalCheckReport::from_samples(&fz, e.marginals()))
}

/// Default cutoff for calling a Jacobian entry nonzero.
pub const JACOBIAN_THRESHOLD: f64 = 1e-6;

/// Central finite-difference Jacobian of `f` at `u`.
pub fn finite_difference_jacobian(e: &Entangler, u: ArrayView1<f64>, h: f64) -> Result<Array2<f64>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::arg(format!("finite-difference step must be positive, got {h}")));
    }
    let d = e.dim();
    e.check_point(u)?;
    let mut jac = Array2::zeros((d, d));
    let mut plus = u.to_owned();
    let mut minus = u.to_owned();
    for j in 0..d {
        plus[j] = u[j] + h;
        minus[j] = u[j] - h;
        if !e.marginals[j].contains(plus[j]) || !e.marginals[j].contains(minus[j]) {
            return Err(Error::Domain(format!(
                "coordinate {j} = {} is within {h} of the support boundary",
                u[j]
            )));
        }
        let fp = e.apply(plus.view())?;
        let fm = e.apply(minus.view())?;
        for i in 0..d {
            jac[[i, j]] = (fp[i] - fm[i]) / (2.0 * h);
        }
        plus[j] = u[j];
        minus[j] = u[j];
    }
    Ok(jac)
}

/// Flags, per point, which Jacobian entries exceed `threshold` in magnitude.
pub fn jacobian_nonvanishing(
    e: &Entangler,
    points: &[Array1<f64>],
    h: f64,
    threshold: f64,
) -> Result<Vec<Array2<bool>>> {
    points
        .iter()
        .map(|p| finite_difference_jacobian(e, p.view(), h).map(|j| j.mapv(|x| x.abs() > threshold)))
        .collect()
}
