use ndarray::{ArrayView1, ArrayView2};

use super::{argmax_first, check_training, class_counts, Classifier};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub depth: usize,
    pub shrinkage: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self { n_trees: 100, depth: 3, shrinkage: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: ArrayView1<f64>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
                Node::Leaf(v) => return v,
            }
        }
    }
}

/// One boosted ensemble of log-odds for one class against the rest.
#[derive(Debug, Clone, PartialEq)]
struct Ensemble {
    init: f64,
    shrinkage: f64,
    trees: Vec<Tree>,
}

impl Ensemble {
    fn score(&self, x: ArrayView1<f64>) -> f64 {
        self.init + self.shrinkage * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

/// Boosted regression trees on the binomial deviance, one ensemble per class
/// (a single ensemble for two classes).
#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    classes: usize,
    ensembles: Vec<Ensemble>,
    importances: Vec<f64>,
}

impl GbtModel {
    /// Total split gain per feature normalized to sum 1; all zero when no
    /// split was made.
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }
}

impl Classifier for GbtModel {
    fn predict_row(&self, x: ArrayView1<f64>) -> usize {
        if self.ensembles.len() == 1 {
            return usize::from(self.ensembles[0].score(x) > 0.0);
        }
        argmax_first(self.ensembles.iter().map(|e| e.score(x)))
    }
}

/// Per-feature `(row, value)` pairs sorted by value, shared by every tree.
/// Constant features are dropped.
struct Presorted {
    features: Vec<(usize, Vec<(u32, f64)>)>,
}

impl Presorted {
    fn new(x: ArrayView2<f64>) -> Self {
        let features = x
            .columns()
            .into_iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|&v| v != c[0]))
            .map(|(f, c)| {
                let mut pairs: Vec<(u32, f64)> = c.iter().enumerate().map(|(i, &v)| (i as u32, v)).collect();
                pairs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                (f, pairs)
            })
            .collect();
        Self { features }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    ties: usize,
}

#[derive(Clone, Copy, Default)]
struct Acc {
    n: f64,
    s: f64,
    last: f64,
}

/// Fits one depth-limited least-squares tree to `target`, level by level with
/// exact splits. Returns the tree and the leaf index of every row. A split
/// whose gain is matched exactly by other features is made on the first of
/// them, and its gain is credited to all of them equally.
fn fit_tree(
    x: ArrayView2<f64>,
    pre: &Presorted,
    target: &[f64],
    hess: &[f64],
    depth: usize,
    gain_out: &mut [f64],
) -> (Tree, Vec<usize>) {
    let n = target.len();
    let mut nodes = vec![Node::Leaf(0.0)];
    let mut node_of = vec![0usize; n];
    // Index into the current frontier, or NONE once the row sits in a final leaf.
    const NONE: usize = usize::MAX;
    let mut slot_of = vec![0usize; n];
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let m = frontier.len();
        let mut tot_n = vec![0.0f64; m];
        let mut tot_s = vec![0.0; m];
        let mut tot_ss = vec![0.0; m];
        for i in 0..n {
            let k = slot_of[i];
            if k != NONE {
                tot_n[k] += 1.0;
                tot_s[k] += target[i];
                tot_ss[k] += target[i] * target[i];
            }
        }
        let splittable: Vec<bool> = (0..m)
            .map(|k| {
                let var = tot_ss[k] - tot_s[k] * tot_s[k] / tot_n[k].max(1.0);
                tot_n[k] >= 2.0 && var > 1e-12 * tot_n[k].max(1.0)
            })
            .collect();
        let mut best: Vec<Option<Candidate>> = vec![None; m];
        let mut tied: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut acc = vec![Acc::default(); m];
        for (f, pairs) in &pre.features {
            let f = *f;
            acc.iter_mut().for_each(|a| *a = Acc::default());
            for &(r, v) in pairs {
                let r = r as usize;
                let k = slot_of[r];
                if k == NONE || !splittable[k] {
                    continue;
                }
                let a = &mut acc[k];
                if a.n > 0.0 && v > a.last {
                    let (nl, sl) = (a.n, a.s);
                    let (nr, sr) = (tot_n[k] - nl, tot_s[k] - sl);
                    let gain = sl * sl / nl + sr * sr / nr - tot_s[k] * tot_s[k] / tot_n[k];
                    let floor = 1e-10 * tot_ss[k];
                    if gain > floor && best[k].is_none_or(|b| gain > b.gain) {
                        let mut threshold = 0.5 * (a.last + v);
                        if threshold >= v {
                            threshold = a.last;
                        }
                        best[k] = Some(Candidate { gain, feature: f, threshold, ties: 1 });
                        tied[k].clear();
                        tied[k].push(f);
                    } else if let Some(b) = best[k].as_mut().filter(|b| gain == b.gain && !tied[k].contains(&f)) {
                        b.ties += 1;
                        tied[k].push(f);
                    }
                }
                a.n += 1.0;
                a.s += target[r];
                a.last = v;
            }
        }
        let mut next = Vec::new();
        let mut child_slot = vec![(NONE, NONE); m];
        for (k, &nd) in frontier.iter().enumerate() {
            if let Some(c) = best[k] {
                let left = nodes.len();
                nodes.push(Node::Leaf(0.0));
                nodes.push(Node::Leaf(0.0));
                nodes[nd] = Node::Split { feature: c.feature, threshold: c.threshold, left, right: left + 1 };
                for &f in &tied[k] {
                    gain_out[f] += c.gain / c.ties as f64;
                }
                child_slot[k] = (next.len(), next.len() + 1);
                next.push(left);
                next.push(left + 1);
            }
        }
        if next.is_empty() {
            break;
        }
        for i in 0..n {
            let k = slot_of[i];
            if k == NONE {
                continue;
            }
            match nodes[node_of[i]] {
                Node::Split { feature, threshold, left, right } => {
                    let goes_left = x[[i, feature]] <= threshold;
                    node_of[i] = if goes_left { left } else { right };
                    slot_of[i] = if goes_left { child_slot[k].0 } else { child_slot[k].1 };
                }
                Node::Leaf(_) => slot_of[i] = NONE,
            }
        }
        frontier = next;
    }
    // Newton step per leaf.
    let mut num = vec![0.0; nodes.len()];
    let mut den = vec![0.0; nodes.len()];
    for i in 0..n {
        num[node_of[i]] += target[i];
        den[node_of[i]] += hess[i];
    }
    for (j, node) in nodes.iter_mut().enumerate() {
        if let Node::Leaf(v) = node {
            *v = if den[j] > 1e-12 { num[j] / den[j] } else { 0.0 };
        }
    }
    (Tree { nodes }, node_of)
}

fn sigmoid(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

fn boost(x: ArrayView2<f64>, pre: &Presorted, positive: &[bool], config: &GbtConfig, gain: &mut [f64]) -> Ensemble {
    let n = positive.len();
    let pos = positive.iter().filter(|&&b| b).count() as f64;
    let prior = (pos / n as f64).clamp(1e-12, 1.0 - 1e-12);
    let init = (prior / (1.0 - prior)).ln();
    let mut f = vec![init; n];
    let mut resid = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        for i in 0..n {
            let p = sigmoid(f[i]);
            resid[i] = if positive[i] { 1.0 - p } else { -p };
            hess[i] = p * (1.0 - p);
        }
        let (tree, leaf_of) = fit_tree(x, pre, &resid, &hess, config.depth, gain);
        for i in 0..n {
            if let Node::Leaf(v) = tree.nodes[leaf_of[i]] {
                f[i] += config.shrinkage * v;
            }
        }
        trees.push(tree);
    }
    Ensemble { init, shrinkage: config.shrinkage, trees }
}

pub fn fit_gbt(x: ArrayView2<f64>, y: &[usize], config: &GbtConfig) -> Result<GbtModel> {
    let classes = check_training(x, y)?;
    if config.depth == 0 || !(config.shrinkage > 0.0) {
        return Err(Error::arg("gbt needs depth >= 1 and positive shrinkage"));
    }
    let pre = Presorted::new(x);
    let mut gain = vec![0.0; x.ncols()];
    let counts = class_counts(y);
    let ensembles = if classes == 2 {
        let positive: Vec<bool> = y.iter().map(|&v| v == 1).collect();
        vec![boost(x, &pre, &positive, config, &mut gain)]
    } else {
        (0..classes)
            .map(|c| {
                if counts[c] == 0 {
                    // Absent label: never predicted.
                    Ensemble { init: f64::NEG_INFINITY, shrinkage: config.shrinkage, trees: Vec::new() }
                } else {
                    let positive: Vec<bool> = y.iter().map(|&v| v == c).collect();
                    boost(x, &pre, &positive, config, &mut gain)
                }
            })
            .collect()
    };
    let total: f64 = gain.iter().sum();
    let importances = if total > 0.0 { gain.iter().map(|g| g / total).collect() } else { gain };
    Ok(GbtModel { classes, ensembles, importances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use ndarray::{array, s, Array2};
    use rand::Rng;

    #[test]
    fn informative_feature_takes_the_importance() {
        let mut rng = rng_from_seed(1);
        let y: Vec<usize> = (0..2000).map(|_| rng.random_range(0..3)).collect();
        let x = Array2::from_shape_fn((2000, 2), |(i, j)| if j == 0 { (y[i] as f64 + 0.5) / 3.0 } else { rng.random() });
        let m = fit_gbt(x.view(), &y, &GbtConfig::default()).unwrap();
        assert!(m.importances()[0] >= 0.95, "{:?}", m.importances());
        assert!((m.importances().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_columns_share_importance() {
        let mut rng = rng_from_seed(3);
        let y: Vec<usize> = (0..2000).map(|_| rng.random_range(0..4)).collect();
        let x = Array2::from_shape_fn((2000, 3), |(i, j)| if j < 2 { (y[i] as f64 + 0.5) / 4.0 } else { rng.random() });
        let imp = fit_gbt(x.view(), &y, &GbtConfig::default()).unwrap().importances().to_vec();
        assert!(imp[0] + imp[1] >= 0.95, "{imp:?}");
        assert!((imp[0] - imp[1]).abs() < 1e-12, "{imp:?}");
    }

    #[test]
    fn independent_labels_near_chance() {
        let mut rng = rng_from_seed(2);
        let x = Array2::from_shape_fn((6000, 2), |_| rng.random::<f64>());
        let y: Vec<usize> = (0..6000).map(|_| rng.random_range(0..4)).collect();
        let m = fit_gbt(x.slice(s![..3000, ..]), &y[..3000], &GbtConfig::default()).unwrap();
        let acc = m.accuracy(x.slice(s![3000.., ..]), &y[3000..]);
        assert!((acc - 0.25).abs() <= 0.05, "{acc}");
    }

    #[test]
    fn separable_single_feature() {
        let x = array![[0.1], [0.2], [0.3], [0.7], [0.8], [0.9]];
        let y = [0, 0, 0, 1, 1, 1];
        let m = fit_gbt(x.view(), &y, &GbtConfig::default()).unwrap();
        assert!(m.accuracy(x.view(), &y) >= 0.99);
        assert_eq!(m.importances(), &[1.0]);
    }

    #[test]
    fn constant_features_have_no_importance() {
        let x = array![[0.5, 0.1], [0.5, 0.2], [0.5, 0.8], [0.5, 0.9]];
        let m = fit_gbt(x.view(), &[0, 0, 1, 1], &GbtConfig::default()).unwrap();
        assert_eq!(m.importances()[0], 0.0);
    }

    #[test]
    fn all_constant_gives_zero_importances() {
        let x = array![[0.5], [0.5], [0.5]];
        let m = fit_gbt(x.view(), &[0, 1, 1], &GbtConfig::default()).unwrap();
        assert_eq!(m.importances(), &[0.0]);
        assert_eq!(m.predict(x.view()), vec![1, 1, 1]);
    }

    #[test]
    fn depth_one_interior_class() {
        let y: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let x = Array2::from_shape_fn((300, 1), |(i, _)| y[i] as f64);
        let m = fit_gbt(x.view(), &y, &GbtConfig::default()).unwrap();
        assert_eq!(m.accuracy(x.view(), &y), 1.0);
    }
}
