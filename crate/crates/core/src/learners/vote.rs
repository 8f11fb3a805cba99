use std::collections::BTreeMap;

use crate::{Error, Result};

/// Predicts, per feature index, the label seen most often with it.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorityVote {
    table: BTreeMap<usize, usize>,
    global: usize,
}

fn mode(counts: &BTreeMap<usize, usize>) -> usize {
    // BTreeMap iterates labels ascending, so strict `>` keeps the smallest on ties.
    let mut best = (usize::MAX, 0);
    for (&label, &c) in counts {
        if c > best.1 {
            best = (label, c);
        }
    }
    best.0
}

impl MajorityVote {
    pub fn fit(votes: &[(usize, usize)]) -> Result<Self> {
        if votes.is_empty() {
            return Err(Error::arg("majority vote needs at least one vote"));
        }
        let mut per: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
        let mut all: BTreeMap<usize, usize> = BTreeMap::new();
        for &(f, label) in votes {
            *per.entry(f).or_default().entry(label).or_default() += 1;
            *all.entry(label).or_default() += 1;
        }
        let table = per.iter().map(|(&f, c)| (f, mode(c))).collect();
        Ok(Self { table, global: mode(&all) })
    }

    pub fn predict(&self, feature: usize) -> usize {
        self.table.get(&feature).copied().unwrap_or(self.global)
    }

    pub fn accuracy(&self, votes: &[(usize, usize)]) -> f64 {
        if votes.is_empty() {
            return 0.0;
        }
        votes.iter().filter(|&&(f, l)| self.predict(f) == l).count() as f64 / votes.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_and_ties() {
        let m = MajorityVote::fit(&[(0, 2), (0, 2), (0, 1), (1, 0), (1, 3)]).unwrap();
        assert_eq!(m.predict(0), 2);
        assert_eq!(m.predict(1), 0);
        assert_eq!(m.predict(7), 2);
    }

    #[test]
    fn empty_rejected() {
        assert!(MajorityVote::fit(&[]).is_err());
    }
}
