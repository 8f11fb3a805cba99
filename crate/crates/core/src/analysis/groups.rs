use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::estimation::FactorCodeMatrix;
use crate::{Error, Result};

/// Thresholded factor-code graph at one cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCount {
    pub threshold: f64,
    /// Connected components with more than one node.
    pub components: usize,
    /// Factors incident to at least one kept edge.
    pub factors_connected: usize,
}

/// Two factor clusters joining at `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub threshold: f64,
    /// Smallest factor of each side, smaller first.
    pub pair: (usize, usize),
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub factor_names: Vec<String>,
    /// In sweep order; thresholds are nonincreasing.
    pub merges: Vec<MergeEvent>,
    /// The curve evaluated at every distinct edge weight, descending.
    pub curve: Vec<GroupCount>,
}

impl Dendrogram {
    pub fn num_factors(&self) -> usize {
        self.factor_names.len()
    }

    /// K×K merge thresholds; zero for pairs that never join and on the diagonal.
    pub fn merge_thresholds(&self) -> Vec<Vec<f64>> {
        let k = self.num_factors();
        let mut out = vec![vec![0.0; k]; k];
        for e in &self.merges {
            for &a in &e.left {
                for &b in &e.right {
                    out[a][b] = e.threshold;
                    out[b][a] = e.threshold;
                }
            }
        }
        out
    }
}

struct Graph {
    k: usize,
    d: usize,
    /// (weight, factor, code), heaviest first.
    edges: Vec<(f64, usize, usize)>,
}

fn graph(m: &FactorCodeMatrix) -> Result<Graph> {
    if let Some(v) = m.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::arg(format!("factor-code matrix entry {v} outside [0, 1]; normalize by the maximum first")));
    }
    if m.values.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("factor-code matrix is all zero".into()));
    }
    let mut edges: Vec<(f64, usize, usize)> =
        m.values.indexed_iter().filter(|(_, &w)| w > 0.0).map(|((f, c), &w)| (w, f, c)).collect();
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    Ok(Graph { k: m.num_factors(), d: m.num_codes(), edges })
}

impl Graph {
    fn count(&self, t: f64) -> GroupCount {
        let mut uf = UnionFind::<usize>::new(self.k + self.d);
        let mut touched = vec![false; self.k + self.d];
        for &(_, f, c) in self.edges.iter().take_while(|e| e.0 >= t) {
            uf.union(f, self.k + c);
            touched[f] = true;
            touched[self.k + c] = true;
        }
        let mut sizes = vec![0usize; self.k + self.d];
        for v in 0..self.k + self.d {
            sizes[uf.find_mut(v)] += 1;
        }
        GroupCount {
            threshold: t,
            components: sizes.iter().filter(|&&s| s > 1).count(),
            factors_connected: touched[..self.k].iter().filter(|&&b| b).count(),
        }
    }

    fn distinct_weights(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self.edges.iter().map(|e| e.0).collect();
        w.dedup();
        w
    }
}

/// Curve of the thresholded graph. Entries must lie in [0, 1]; zero entries
/// never form edges.
pub fn independent_groups_curve(m: &FactorCodeMatrix, thresholds: &[f64]) -> Result<Vec<GroupCount>> {
    if let Some(t) = thresholds.iter().find(|t| !t.is_finite()) {
        return Err(Error::arg(format!("threshold {t} is not finite")));
    }
    let g = graph(m)?;
    Ok(thresholds.iter().map(|&t| g.count(t)).collect())
}

/// `steps` evenly spaced thresholds from 1 down to 0.
pub fn threshold_grid(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|i| 1.0 - i as f64 / steps as f64).collect()
}

/// Exact merge sequence by a union-find sweep over descending edge weights.
pub fn dendrogram(m: &FactorCodeMatrix) -> Result<Dendrogram> {
    let g = graph(m)?;
    let n = g.k + g.d;
    let mut uf = UnionFind::<usize>::new(n);
    let mut members: Vec<Vec<usize>> = (0..n).map(|v| if v < g.k { vec![v] } else { Vec::new() }).collect();
    let mut merges = Vec::new();
    for &(w, f, c) in &g.edges {
        let (a, b) = (uf.find_mut(f), uf.find_mut(g.k + c));
        if a == b {
            continue;
        }
        let (left, right) = (std::mem::take(&mut members[a]), std::mem::take(&mut members[b]));
        if !left.is_empty() && !right.is_empty() {
            let (left, right) = if left[0] < right[0] { (left.clone(), right.clone()) } else { (right.clone(), left.clone()) };
            merges.push(MergeEvent { threshold: w, pair: (left[0], right[0]), left, right });
        }
        uf.union(a, b);
        let mut all = left;
        all.extend(right);
        all.sort_unstable();
        let root = uf.find_mut(a);
        members[root] = all;
    }
    let curve = g.distinct_weights().into_iter().map(|t| g.count(t)).collect();
    Ok(Dendrogram { factor_names: m.factor_names.clone(), merges, curve })
}

/// Mean merge threshold per factor pair over several models. Larger means the
/// pair stays connected down to a higher cutoff, i.e. is more entangled.
pub fn confusion_thresholds(dendrograms: &[Dendrogram]) -> Result<Vec<Vec<f64>>> {
    let first = dendrograms.first().ok_or_else(|| Error::arg("no dendrograms"))?;
    let k = first.num_factors();
    let mut sum = vec![vec![0.0; k]; k];
    for d in dendrograms {
        if d.factor_names != first.factor_names {
            return Err(Error::arg(format!(
                "factor spaces differ: {:?} vs {:?}",
                first.factor_names, d.factor_names
            )));
        }
        for (s, row) in sum.iter_mut().zip(d.merge_thresholds()) {
            for (a, b) in s.iter_mut().zip(row) {
                *a += b;
            }
        }
    }
    let n = dendrograms.len() as f64;
    Ok(sum.into_iter().map(|r| r.into_iter().map(|v| v / n).collect()).collect())
}
