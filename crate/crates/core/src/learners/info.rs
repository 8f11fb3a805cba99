use crate::learners::class_counts;
use crate::{Error, Result};

/// Plug-in Shannon entropy (nats) of a discrete column.
pub fn entropy(a: &[usize]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let n = a.len() as f64;
    class_counts(a)
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Plug-in mutual information (nats) between two discrete columns.
pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::arg(format!("columns have lengths {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::arg("mutual information of empty columns"));
    }
    let ca = class_counts(a);
    let cb = class_counts(b);
    let (na, nb) = (ca.len(), cb.len());
    let mut joint = vec![0usize; na * nb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * nb + y] += 1;
    }
    let n = a.len() as f64;
    let mut mi = 0.0;
    for x in 0..na {
        for y in 0..nb {
            let c = joint[x * nb + y];
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (ca[x] as f64 * cb[y] as f64)).ln();
            }
        }
    }
    // Rounding can push an exactly-independent table a hair below zero.
    Ok(mi.max(0.0))
}
