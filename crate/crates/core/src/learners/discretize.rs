use ndarray::{Array2, ArrayView1};

use crate::factors::CodeBatch;
use crate::{Error, Result};

pub const DEFAULT_BINS: usize = 20;

/// Equal-width histogram bin indices, per code dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedBatch {
    pub bins: Array2<usize>,
    pub num_bins: usize,
    /// `num_bins + 1` increasing edges per dimension.
    pub edges: Vec<Vec<f64>>,
}

impl DiscretizedBatch {
    pub fn column(&self, i: usize) -> Vec<usize> {
        self.bins.column(i).to_vec()
    }
}

/// Bin one column into `bins` equal-width bins spanning its observed range.
/// A constant column lands entirely in bin 0.
pub fn discretize_column(col: ArrayView1<f64>, bins: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    if bins < 2 {
        return Err(Error::arg(format!("need at least 2 bins, got {bins}")));
    }
    if let Some(x) = col.iter().find(|x| !x.is_finite()) {
        return Err(Error::Data(format!("cannot discretize non-finite value {x}")));
    }
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let width = if range > 0.0 { range / bins as f64 } else { 1.0 / bins as f64 };
    let edges = (0..=bins).map(|b| lo + b as f64 * width).collect();
    let idx = col
        .iter()
        .map(|&x| {
            if range > 0.0 {
                (((x - lo) / range * bins as f64) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect();
    Ok((idx, edges))
}

pub fn discretize(codes: &CodeBatch, bins: usize) -> Result<DiscretizedBatch> {
    if codes.len() < 2 {
        return Err(Error::arg("discretization needs at least 2 rows"));
    }
    let mut out = Array2::zeros((codes.len(), codes.dim()));
    let mut edges = Vec::with_capacity(codes.dim());
    for i in 0..codes.dim() {
        let (idx, e) = discretize_column(codes.column(i), bins)?;
        for (dst, v) in out.column_mut(i).iter_mut().zip(idx) {
            *dst = v;
        }
        edges.push(e);
    }
    Ok(DiscretizedBatch { bins: out, num_bins: bins, edges })
}
