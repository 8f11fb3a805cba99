//! Ground-truth factor spaces, sampling and oracle encoders.
//!
//! Oracle encoders stand in for trained models: each maps factor assignments
//! to Gaussian code parameters with a known disentanglement structure, so
//! metrics can be checked against analytic expectations.

use std::collections::HashSet;

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::impossibility::{Entangler, Marginal};
use crate::normal;
use crate::seed::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub cardinality: usize,
}

/// Named discrete factors, each uniformly distributed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Factor>", into = "Vec<Factor>")]
pub struct FactorSpace {
    factors: Vec<Factor>,
}

impl TryFrom<Vec<Factor>> for FactorSpace {
    type Error = Error;
    fn try_from(factors: Vec<Factor>) -> Result<Self> {
        Self::new(factors)
    }
}

impl From<FactorSpace> for Vec<Factor> {
    fn from(s: FactorSpace) -> Self {
        s.factors
    }
}

impl FactorSpace {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::arg(format!("a factor space needs at least 2 factors, got {}", factors.len())));
        }
        let mut seen = HashSet::new();
        for f in &factors {
            if f.cardinality < 2 {
                return Err(Error::arg(format!("factor '{}' has cardinality {} < 2", f.name, f.cardinality)));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::arg(format!("duplicate factor name '{}'", f.name)));
            }
        }
        Ok(Self { factors })
    }

    /// Factors named `factor_0 .. factor_{K-1}`.
    pub fn from_cardinalities(cards: &[usize]) -> Result<Self> {
        Self::new(
            cards
                .iter()
                .enumerate()
                .map(|(k, &c)| Factor { name: format!("factor_{k}"), cardinality: c })
                .collect(),
        )
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn cardinality(&self, k: usize) -> usize {
        self.factors[k].cardinality
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.cardinality).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.factors.iter().map(|f| f.name.clone()).collect()
    }

    /// Number of distinct factor configurations.
    pub fn num_configurations(&self) -> usize {
        self.factors.iter().map(|f| f.cardinality).product()
    }

    /// Entropy (nats) of each uniform factor.
    pub fn entropies(&self) -> Vec<f64> {
        self.factors.iter().map(|f| (f.cardinality as f64).ln()).collect()
    }
}

/// N×K factor assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBatch {
    values: Array2<usize>,
    space: FactorSpace,
}

impl FactorBatch {
    pub fn new(space: FactorSpace, values: Array2<usize>) -> Result<Self> {
        if values.ncols() != space.num_factors() {
            return Err(Error::arg(format!(
                "factor batch has {} columns, space has {} factors",
                values.ncols(),
                space.num_factors()
            )));
        }
        for ((n, k), &v) in values.indexed_iter() {
            if v >= space.cardinality(k) {
                return Err(Error::Data(format!(
                    "row {n}: factor {k} value {v} outside 0..{}",
                    space.cardinality(k)
                )));
            }
        }
        Ok(Self { values, space })
    }

    /// Every configuration of the space exactly once, last factor fastest.
    pub fn enumerate(space: &FactorSpace) -> Self {
        let cards = space.cardinalities();
        let total = space.num_configurations();
        let mut values = Array2::zeros((total, cards.len()));
        for (n, mut row) in values.rows_mut().into_iter().enumerate() {
            let mut rem = n;
            for k in (0..cards.len()).rev() {
                row[k] = rem % cards[k];
                rem /= cards[k];
            }
        }
        Self { values, space: space.clone() }
    }

    pub fn values(&self) -> &Array2<usize> {
        &self.values
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn column(&self, k: usize) -> Vec<usize> {
        self.values.column(k).to_vec()
    }

    pub fn row(&self, n: usize) -> ArrayView1<'_, usize> {
        self.values.row(n)
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self { values: self.values.slice(s![start..end, ..]).to_owned(), space: self.space.clone() }
    }

    /// The batch repeated `times` times.
    pub fn tile(&self, times: usize) -> Self {
        let views: Vec<_> = (0..times).map(|_| self.values.view()).collect();
        let values = ndarray::concatenate(ndarray::Axis(0), &views).expect("same column count");
        Self { values, space: self.space.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeMode {
    Mean,
    Sampled,
}

/// N×d real representation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeBatch {
    values: Array2<f64>,
    mode: CodeMode,
}

impl CodeBatch {
    pub fn new(values: Array2<f64>, mode: CodeMode) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::arg("code batch needs at least one dimension"));
        }
        if let Some(((n, i), x)) = values.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::Data(format!("row {n}: code {i} is not finite ({x})")));
        }
        Ok(Self { values, mode })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mode(&self) -> CodeMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.column(i)
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self { values: self.values.slice(s![start..end, ..]).to_owned(), mode: self.mode }
    }

    /// Columns reordered so that output column `i` is input column `order[i]`.
    pub fn select_columns(&self, order: &[usize]) -> Self {
        Self { values: self.values.select(ndarray::Axis(1), order), mode: self.mode }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::arg("cannot sample an empty batch"));
    }
    Ok(())
}

/// `n` i.i.d. draws from the uniform factor distribution.
pub fn sample_factors(space: &FactorSpace, n: usize, rng: &mut Rng) -> Result<FactorBatch> {
    check_n(n)?;
    let cards = space.cardinalities();
    let mut values = Array2::zeros((n, cards.len()));
    for mut row in values.rows_mut() {
        for (v, &c) in row.iter_mut().zip(&cards) {
            *v = rng.random_range(0..c);
        }
    }
    Ok(FactorBatch { values, space: space.clone() })
}

/// `n` draws with factor `fixed_index` clamped to `fixed_value`.
pub fn sample_factors_fixed(
    space: &FactorSpace,
    n: usize,
    fixed_index: usize,
    fixed_value: usize,
    rng: &mut Rng,
) -> Result<FactorBatch> {
    check_n(n)?;
    if fixed_index >= space.num_factors() {
        return Err(Error::arg(format!("factor index {fixed_index} out of range")));
    }
    if fixed_value >= space.cardinality(fixed_index) {
        return Err(Error::arg(format!(
            "value {fixed_value} invalid for factor {fixed_index} (cardinality {})",
            space.cardinality(fixed_index)
        )));
    }
    let cards = space.cardinalities();
    let mut values = Array2::zeros((n, cards.len()));
    for mut row in values.rows_mut() {
        for (k, (v, &c)) in row.iter_mut().zip(&cards).enumerate() {
            *v = if k == fixed_index { fixed_value } else { rng.random_range(0..c) };
        }
    }
    Ok(FactorBatch { values, space: space.clone() })
}

/// Centre of the value's bin: `(value + 0.5) / cardinality`.
#[inline]
pub fn dequantize(value: usize, cardinality: usize) -> f64 {
    (value as f64 + 0.5) / cardinality as f64
}

/// Structure of an oracle encoder's mean map.
#[derive(Debug, Clone, PartialEq)]
pub enum EncoderKind {
    /// Factor `k` dequantized into code dimension `k`.
    Identity,
    /// Code `i` = `scale[i]` · dequantized factor `permutation[i]`.
    PermuteScale { permutation: Vec<usize>, scale: Vec<f64> },
    /// Each group of factors is packed injectively into one dimension;
    /// ungrouped factors keep their own. Output dimensions are ordered by the
    /// smallest factor of each unit.
    Merge { groups: Vec<Vec<usize>> },
    /// Identity plus a copy of each listed factor dimension, placed right
    /// after its source.
    Duplicate { sources: Vec<usize> },
    /// Pure Gaussian noise channels with the given standard deviations.
    NoiseChannels { stds: Vec<f64> },
    /// `dims` constant dimensions.
    Collapsed { dims: usize, value: f64 },
    /// Jitter-dequantized factors pushed through an [`Entangler`]. `factors`
    /// selects which factors are entangled (all when empty); the rest pass
    /// through jittered.
    Rotation { entangler: Entangler, factors: Vec<usize> },
    /// Concatenation of the parts' outputs.
    Concat { parts: Vec<EncoderKind> },
}

impl EncoderKind {
    fn validate(&self, space: &FactorSpace) -> Result<()> {
        let k = space.num_factors();
        let check_index = |i: usize, what: &str| {
            if i >= k {
                Err(Error::arg(format!("{what}: factor index {i} out of range (K = {k})")))
            } else {
                Ok(())
            }
        };
        match self {
            EncoderKind::Identity => Ok(()),
            EncoderKind::PermuteScale { permutation, scale } => {
                if permutation.len() != k || scale.len() != k {
                    return Err(Error::arg("permute_scale needs a permutation and a scale of length K"));
                }
                let mut seen = vec![false; k];
                for &p in permutation {
                    check_index(p, "permute_scale")?;
                    if std::mem::replace(&mut seen[p], true) {
                        return Err(Error::arg("permute_scale permutation repeats an index"));
                    }
                }
                if scale.iter().any(|s| !s.is_finite() || *s == 0.0) {
                    return Err(Error::arg("permute_scale scales must be finite and nonzero"));
                }
                Ok(())
            }
            EncoderKind::Merge { groups } => {
                let mut seen = vec![false; k];
                for g in groups {
                    if g.len() < 2 {
                        return Err(Error::arg("merge groups need at least two factors"));
                    }
                    for &f in g {
                        check_index(f, "merge")?;
                        if std::mem::replace(&mut seen[f], true) {
                            return Err(Error::arg(format!("merge groups overlap on factor {f}")));
                        }
                    }
                }
                Ok(())
            }
            EncoderKind::Duplicate { sources } => sources.iter().try_for_each(|&f| check_index(f, "duplicate")),
            EncoderKind::NoiseChannels { stds } => {
                if stds.is_empty() || stds.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return Err(Error::arg("noise_channels needs at least one nonnegative std"));
                }
                Ok(())
            }
            EncoderKind::Collapsed { dims, value } => {
                if *dims == 0 || !value.is_finite() {
                    return Err(Error::arg("collapsed needs at least one dimension and a finite value"));
                }
                Ok(())
            }
            EncoderKind::Rotation { entangler, factors } => {
                let selected = if factors.is_empty() { k } else { factors.len() };
                if entangler.dim() != selected {
                    return Err(Error::arg(format!(
                        "rotation entangler has dimension {} but {selected} factors are selected",
                        entangler.dim()
                    )));
                }
                let mut seen = vec![false; k];
                for &f in factors {
                    check_index(f, "rotation")?;
                    if std::mem::replace(&mut seen[f], true) {
                        return Err(Error::arg("rotation factor list repeats an index"));
                    }
                }
                Ok(())
            }
            EncoderKind::Concat { parts } => {
                if parts.is_empty() {
                    return Err(Error::arg("concat needs at least one part"));
                }
                parts.iter().try_for_each(|p| p.validate(space))
            }
        }
    }

    fn output_dim(&self, k: usize) -> usize {
        match self {
            EncoderKind::Identity | EncoderKind::PermuteScale { .. } | EncoderKind::Rotation { .. } => k,
            EncoderKind::Merge { groups } => k - groups.iter().map(|g| g.len() - 1).sum::<usize>(),
            EncoderKind::Duplicate { sources } => k + sources.len(),
            EncoderKind::NoiseChannels { stds } => stds.len(),
            EncoderKind::Collapsed { dims, .. } => *dims,
            EncoderKind::Concat { parts } => parts.iter().map(|p| p.output_dim(k)).sum(),
        }
    }

    /// Fill `out` (length `output_dim`) with the mean code for one row.
    fn mean_row(&self, row: ArrayView1<usize>, cards: &[usize], out: &mut [f64], rng: &mut Rng) {
        match self {
            EncoderKind::Identity => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = dequantize(row[k], cards[k]);
                }
            }
            EncoderKind::PermuteScale { permutation, scale } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let f = permutation[i];
                    *o = scale[i] * dequantize(row[f], cards[f]);
                }
            }
            EncoderKind::Merge { groups } => {
                let mut slot = 0;
                for k in 0..cards.len() {
                    match groups.iter().find(|g| g.contains(&k)) {
                        None => {
                            out[slot] = dequantize(row[k], cards[k]);
                            slot += 1;
                        }
                        Some(g) if g.iter().min() == Some(&k) => {
                            let (mut index, mut total) = (0usize, 1usize);
                            for &f in g {
                                index = index * cards[f] + row[f];
                                total *= cards[f];
                            }
                            out[slot] = dequantize(index, total);
                            slot += 1;
                        }
                        Some(_) => {}
                    }
                }
            }
            EncoderKind::Duplicate { sources } => {
                let mut slot = 0;
                for k in 0..cards.len() {
                    let x = dequantize(row[k], cards[k]);
                    out[slot] = x;
                    slot += 1;
                    for _ in sources.iter().filter(|&&s| s == k) {
                        out[slot] = x;
                        slot += 1;
                    }
                }
            }
            EncoderKind::NoiseChannels { stds } => {
                for (o, s) in out.iter_mut().zip(stds) {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = s * z;
                }
            }
            EncoderKind::Collapsed { value, .. } => out.fill(*value),
            EncoderKind::Rotation { entangler, factors } => {
                let jittered: Vec<f64> = (0..cards.len())
                    .map(|k| {
                        let u: f64 = rng.random();
                        // Keep strictly inside (0, 1).
                        ((row[k] as f64 + u) / cards[k] as f64).clamp(normal::PROB_FLOOR, 1.0 - normal::PROB_FLOOR)
                    })
                    .collect();
                out.copy_from_slice(&jittered);
                let selected: Vec<usize> =
                    if factors.is_empty() { (0..cards.len()).collect() } else { factors.clone() };
                let latent: Array1<f64> = selected
                    .iter()
                    .zip(entangler.marginals())
                    .map(|(&k, m)| match m {
                        Marginal::Uniform01 => jittered[k],
                        Marginal::StandardNormal => normal::quantile(jittered[k]),
                    })
                    .collect();
                let mut mixed = Array1::zeros(selected.len());
                entangler.apply_unchecked(latent.view(), &mut mixed);
                for (&k, &y) in selected.iter().zip(mixed.iter()) {
                    out[k] = y;
                }
            }
            EncoderKind::Concat { parts } => {
                let mut offset = 0;
                for p in parts {
                    let d = p.output_dim(cards.len());
                    p.mean_row(row, cards, &mut out[offset..offset + d], rng);
                    offset += d;
                }
            }
        }
    }
}

/// A synthetic Gaussian encoder: mean map given by `kind`, homoscedastic
/// per-dimension standard deviation `sigma` for sampled codes.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEncoder {
    pub kind: EncoderKind,
    pub sigma: f64,
}

impl OracleEncoder {
    pub fn new(kind: EncoderKind, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::arg(format!("encoder sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { kind, sigma })
    }

    pub fn identity() -> Self {
        Self { kind: EncoderKind::Identity, sigma: 0.0 }
    }

    /// Householder rotation of all factors with uniform marginals.
    pub fn rotation(num_factors: usize, alpha: f64) -> Result<Self> {
        Ok(Self {
            kind: EncoderKind::Rotation {
                entangler: Entangler::new(num_factors, alpha, Marginal::Uniform01)?,
                factors: Vec::new(),
            },
            sigma: 0.0,
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// This encoder followed by extra parts, concatenated.
    pub fn append(self, extra: impl IntoIterator<Item = EncoderKind>) -> Self {
        let mut parts = match self.kind {
            EncoderKind::Concat { parts } => parts,
            other => vec![other],
        };
        parts.extend(extra);
        Self { kind: EncoderKind::Concat { parts }, sigma: self.sigma }
    }

    pub fn validate(&self, space: &FactorSpace) -> Result<()> {
        self.kind.validate(space)
    }

    pub fn output_dim(&self, space: &FactorSpace) -> usize {
        self.kind.output_dim(space.num_factors())
    }

    /// Sampled codes around an existing mean batch: adds `N(0, sigma²)` to
    /// every entry.
    pub fn sample_around(&self, mean: &CodeBatch, rng: &mut Rng) -> Result<CodeBatch> {
        let mut values = mean.values().clone();
        if self.sigma > 0.0 {
            for x in values.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *x += self.sigma * z;
            }
        }
        CodeBatch::new(values, CodeMode::Sampled)
    }

    /// Encode a factor batch. Sampled mode draws the mean code first, then
    /// adds `N(0, sigma²)` to every entry (skipped when `sigma == 0`).
    pub fn encode(&self, factors: &FactorBatch, mode: CodeMode, rng: &mut Rng) -> Result<CodeBatch> {
        self.validate(factors.space())?;
        let cards = factors.space().cardinalities();
        let d = self.output_dim(factors.space());
        if d == 0 {
            return Err(Error::arg("encoder has no output dimensions"));
        }
        let mut values = Array2::zeros((factors.len(), d));
        let mut buf = vec![0.0; d];
        for (row, mut dst) in factors.values().rows().into_iter().zip(values.rows_mut()) {
            self.kind.mean_row(row, &cards, &mut buf, rng);
            if mode == CodeMode::Sampled && self.sigma > 0.0 {
                for x in buf.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x += self.sigma * z;
                }
            }
            dst.assign(&ArrayView1::from(&buf[..]));
        }
        CodeBatch::new(values, mode)
    }
}

/// Free-function form of [`OracleEncoder::encode`].
pub fn encode(encoder: &OracleEncoder, factors: &FactorBatch, mode: CodeMode, rng: &mut Rng) -> Result<CodeBatch> {
    encoder.encode(factors, mode, rng)
}
