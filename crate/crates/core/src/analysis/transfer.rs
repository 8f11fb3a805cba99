use std::collections::{BTreeMap, BTreeSet};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::table::ScoreTable;
use crate::seed::{derive_indexed, rng_from_seed, Rng};
use crate::{Error, Result};

/// Win rates of picking the best hyperparameter setting over a random model.
/// `cells[a][b]`: `a` = same (0) or different (1) metric, `b` = same (0) or
/// different (1) dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub trials: usize,
    pub cells: [[f64; 2]; 2],
}

struct Grid {
    datasets: usize,
    metrics: usize,
    settings: usize,
    seeds: usize,
    values: Vec<f64>,
}

impl Grid {
    fn build(table: &ScoreTable) -> Result<Self> {
        let index = |xs: BTreeSet<String>| xs.into_iter().enumerate().map(|(i, x)| (x, i)).collect::<BTreeMap<_, _>>();
        let recs = table.records();
        let ds = index(recs.iter().map(|r| r.dataset_id.clone()).collect());
        let ms = index(recs.iter().map(|r| r.metric.clone()).collect());
        let hs = index(recs.iter().map(|r| format!("{}\u{1f}{}", r.method, r.hyperparam)).collect());
        let ss: BTreeMap<u64, usize> =
            recs.iter().map(|r| r.seed).collect::<BTreeSet<_>>().into_iter().enumerate().map(|(i, s)| (s, i)).collect();
        if ds.len() < 2 || ms.len() < 2 || ss.len() < 2 {
            return Err(Error::arg(format!(
                "transfer needs >= 2 datasets, metrics and seeds; got {}, {}, {}",
                ds.len(),
                ms.len(),
                ss.len()
            )));
        }
        let mut g = Grid { datasets: ds.len(), metrics: ms.len(), settings: hs.len(), seeds: ss.len(), values: Vec::new() };
        let mut cells = vec![None; g.datasets * g.metrics * g.settings * g.seeds];
        for r in recs {
            let h = format!("{}\u{1f}{}", r.method, r.hyperparam);
            let i = g.at(ds[&r.dataset_id], ms[&r.metric], hs[&h], ss[&r.seed]);
            if cells[i].replace(r.value).is_some() {
                return Err(Error::arg(format!(
                    "several scores for dataset {}, metric {}, setting {h:?}, seed {}",
                    r.dataset_id, r.metric, r.seed
                )));
            }
        }
        if cells.iter().any(Option::is_none) {
            return Err(Error::arg("score grid over dataset × metric × setting × seed is incomplete"));
        }
        g.values = cells.into_iter().map(|c| c.unwrap_or_default()).collect();
        Ok(g)
    }

    fn at(&self, d: usize, m: usize, h: usize, s: usize) -> usize {
        ((d * self.metrics + m) * self.settings + h) * self.seeds + s
    }

    fn score(&self, d: usize, m: usize, h: usize, s: usize) -> f64 {
        self.values[self.at(d, m, h, s)]
    }
}

/// Uniform index in `0..n` other than `not`.
fn other(n: usize, not: usize, rng: &mut Rng) -> usize {
    let i = rng.random_range(0..n - 1);
    if i >= not {
        i + 1
    } else {
        i
    }
}

/// Each trial draws its own generator from `(seed, trial)`, so the result
/// does not depend on evaluation order.
pub fn transfer_protocol(table: &ScoreTable, trials: usize, seed: u64) -> Result<TransferResult> {
    if trials == 0 {
        return Err(Error::arg("need at least one trial"));
    }
    let g = Grid::build(table)?;
    let mut wins = [[0usize; 2]; 2];
    for t in 0..trials {
        let mut rng = rng_from_seed(derive_indexed(seed, t as u64));
        let s = rng.random_range(0..g.seeds);
        let m = rng.random_range(0..g.metrics);
        let d = rng.random_range(0..g.datasets);
        let mut best = 0;
        for h in 1..g.settings {
            if g.score(d, m, h, s) > g.score(d, m, best, s) {
                best = h;
            }
        }
        for (a, row) in wins.iter_mut().enumerate() {
            for (b, w) in row.iter_mut().enumerate() {
                let m2 = if a == 0 { m } else { other(g.metrics, m, &mut rng) };
                let d2 = if b == 0 { d } else { other(g.datasets, d, &mut rng) };
                let s2 = other(g.seeds, s, &mut rng);
                let (hr, sr) = (rng.random_range(0..g.settings), rng.random_range(0..g.seeds));
                if g.score(d2, m2, best, s2) >= g.score(d2, m2, hr, sr) {
                    *w += 1;
                }
            }
        }
    }
    let n = trials as f64;
    Ok(TransferResult { trials, cells: wins.map(|r| r.map(|w| w as f64 / n)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::table::ScoreRecord;

    fn table(f: impl Fn(usize, usize, usize, usize) -> f64) -> ScoreTable {
        let mut recs = Vec::new();
        for d in 0..3 {
            for m in 0..4 {
                for h in 0..10 {
                    for s in 0..10 {
                        recs.push(ScoreRecord {
                            encoder_id: format!("h{h}s{s}"),
                            dataset_id: format!("d{d}"),
                            method: "vae".into(),
                            hyperparam: format!("{h}"),
                            seed: s as u64,
                            metric: format!("m{m}"),
                            n_samples: 1,
                            value: f(d, m, h, s),
                        });
                    }
                }
            }
        }
        ScoreTable::new(recs).unwrap()
    }

    #[test]
    fn dominant_setting_always_wins() {
        let t = table(|_, _, h, s| if h == 7 { 10.0 } else { s as f64 * 0.1 });
        let r = transfer_protocol(&t, 500, 1).unwrap();
        assert!(r.cells.iter().flatten().all(|&c| c == 1.0), "{r:?}");
    }

    #[test]
    fn span_is_checked() {
        let t = table(|_, _, _, _| 0.0).filter(|r| r.dataset_id == "d0");
        assert!(matches!(transfer_protocol(&t, 10, 0), Err(Error::Argument(_))));
        let t = table(|_, _, _, _| 0.0).filter(|r| !(r.dataset_id == "d0" && r.seed == 3 && r.hyperparam == "2"));
        assert!(transfer_protocol(&t, 10, 0).is_err());
    }
}
