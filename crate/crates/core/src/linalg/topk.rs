//! Top-k index selection with deterministic tie-breaking.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Heap entry ordered so that the *worst* kept element is the heap maximum:
/// smaller key is worse, and on ties the larger index is worse (so the lowest
/// indices survive).
struct Worst {
    key: f64,
    idx: usize,
}

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Worst {}

impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then(self.idx.cmp(&other.idx))
    }
}

fn top_k_by<F: Fn(f64) -> f64>(v: &DVector<f64>, k: usize, key: F) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("top-k requires k >= 1"));
    }
    if k > v.len() {
        return Err(Error::invalid(format!(
            "top-k with k = {} exceeds dimension {}",
            k,
            v.len()
        )));
    }
    // O(n log k): a size-k heap with the worst kept element on top.
    let mut heap: BinaryHeap<Worst> = BinaryHeap::with_capacity(k + 1);
    for (idx, &x) in v.iter().enumerate() {
        heap.push(Worst { key: key(x), idx });
        if heap.len() > k {
            heap.pop();
        }
    }
    let mut out: Vec<usize> = heap.into_iter().map(|w| w.idx).collect();
    out.sort_unstable();
    Ok(out)
}

/// Indices of the `k` largest entries by signed value, ties broken by lowest
/// index. Returned sorted ascending.
pub fn top_k_signed(v: &DVector<f64>, k: usize) -> Result<Vec<usize>> {
    top_k_by(v, k, |x| x)
}

/// Indices of the `k` largest entries by absolute value, ties broken by
/// lowest index. Returned sorted ascending.
pub fn top_k_abs(v: &DVector<f64>, k: usize) -> Result<Vec<usize>> {
    top_k_by(v, k, f64::abs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn vecf(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn signed_examples() {
        assert_eq!(top_k_signed(&vecf(&[3.0, -5.0, 1.0, 2.0]), 2).unwrap(), vec![0, 3]);
        assert_eq!(top_k_signed(&vecf(&[1.0, 1.0, 1.0]), 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn abs_examples() {
        assert_eq!(top_k_abs(&vecf(&[3.0, -5.0, 1.0, 2.0]), 2).unwrap(), vec![0, 1]);
        assert_eq!(top_k_abs(&vecf(&[0.0, 0.0, 0.0]), 1).unwrap(), vec![0]);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(top_k_signed(&vecf(&[1.0]), 2).is_err());
        assert!(top_k_abs(&vecf(&[1.0]), 0).is_err());
    }

    /// Full-sort oracle: stable selection of the k best (value desc, index asc).
    fn sort_oracle(v: &DVector<f64>, k: usize, absolute: bool) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ka, kb) = if absolute {
                (v[a].abs(), v[b].abs())
            } else {
                (v[a], v[b])
            };
            kb.total_cmp(&ka).then(a.cmp(&b))
        });
        let mut out = idx[..k].to_vec();
        out.sort_unstable();
        out
    }

    #[test]
    fn matches_full_sort_oracle_on_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = DVector::from_fn(1000, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        assert_eq!(top_k_signed(&v, 10).unwrap(), sort_oracle(&v, 10, false));
        assert_eq!(top_k_abs(&v, 7).unwrap(), sort_oracle(&v, 7, true));
    }

    #[test]
    fn permutation_stability() {
        // Shuffling then mapping selected indices back yields the same
        // selected value multiset.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = DVector::from_fn(60, |_, _| (rng.random::<f64>() * 8.0).round() / 4.0);
        let mut perm: Vec<usize> = (0..60).collect();
        perm.shuffle(&mut rng);
        let shuffled = DVector::from_fn(60, |i, _| v[perm[i]]);

        for k in [1usize, 5, 17] {
            let mut direct: Vec<f64> = top_k_signed(&v, k).unwrap().iter().map(|&i| v[i]).collect();
            let mut via_perm: Vec<f64> = top_k_signed(&shuffled, k)
                .unwrap()
                .iter()
                .map(|&i| shuffled[i])
                .collect();
            direct.sort_by(f64::total_cmp);
            via_perm.sort_by(f64::total_cmp);
            assert_eq!(direct, via_perm);
        }
    }
}
