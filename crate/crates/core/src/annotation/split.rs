use serde::Serialize;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut idx);
    idx
}

/// Train/validation index sets, each sorted ascending.
///
/// `|val| = max(1, n - round(fraction * n))` and `|train| = max(1, n - |val|)`,
/// so both sides stay non-empty for `n >= 2`.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "splitting needs at least 2 images, got {n}"
        )));
    }
    let rounded = (train_fraction * n as f64).round() as usize;
    let val_n = n.saturating_sub(rounded).clamp(1, n - 1);
    let perm = permutation(n, seed);
    let mut train = perm[..n - val_n].to_vec();
    let mut val = perm[n - val_n..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Seeded shuffle split into `(train, val)`; each side keeps source order.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, val) = split_indices(d.len(), train_fraction, seed)?;
    Ok((d.select(&train), d.select(&val)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldSet {
    pub seed: u64,
    pub k: usize,
    pub folds: Vec<Fold>,
}

/// k-fold partition of a seeded permutation. The first `n % k` folds get one
/// extra validation image.
pub fn kfold(d: &Dataset, k: usize, seed: u64) -> Result<FoldSet> {
    let n = d.len();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 2 <= k <= {n}, got {k}"
        )));
    }
    let perm = permutation(n, seed);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut val = perm[start..start + size].to_vec();
        let mut train: Vec<usize> = perm[..start]
            .iter()
            .chain(&perm[start + size..])
            .copied()
            .collect();
        val.sort_unstable();
        train.sort_unstable();
        folds.push(Fold { train, val });
        start += size;
    }
    Ok(FoldSet { seed, k, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::ImageRecord;
    use proptest::prelude::*;

    fn ds(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| ImageRecord::new(format!("{i}.jpg"), 1))
                .collect(),
        )
    }

    #[test]
    fn eighty_twenty() {
        let (tr, va) = split(&ds(100), 0.8, 0).unwrap();
        assert_eq!((tr.len(), va.len()), (80, 20));
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            split_indices(37, 0.7, 5).unwrap(),
            split_indices(37, 0.7, 5).unwrap()
        );
        assert_ne!(
            split_indices(37, 0.7, 5).unwrap(),
            split_indices(37, 0.7, 6).unwrap()
        );
    }

    #[test]
    fn val_never_empty() {
        let (tr, va) = split_indices(2, 0.999, 1).unwrap();
        assert_eq!((tr.len(), va.len()), (1, 1));
        let (tr, va) = split_indices(2, 0.001, 1).unwrap();
        assert_eq!((tr.len(), va.len()), (1, 1));
    }

    #[test]
    fn split_errors() {
        assert!(split(&ds(10), 0.0, 0).is_err());
        assert!(split(&ds(10), 1.0, 0).is_err());
        assert!(split(&ds(0), 0.5, 0).is_err());
    }

    #[test]
    fn kfold_sizes() {
        let f = kfold(&ds(10), 5, 0).unwrap();
        assert!(f.folds.iter().all(|f| f.val.len() == 2));
        let f = kfold(&ds(10), 3, 0).unwrap();
        let sizes: Vec<usize> = f.folds.iter().map(|f| f.val.len()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        let mut all: Vec<usize> = f.folds.iter().flat_map(|f| f.val.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_range() {
        assert!(kfold(&ds(10), 1, 0).is_err());
        assert!(kfold(&ds(10), 11, 0).is_err());
        assert!(kfold(&ds(10), 10, 0).is_ok());
    }

    proptest! {
        #[test]
        fn split_partitions(n in 2usize..200, frac in 0.01..0.99f64, seed: u64) {
            let (tr, va) = split_indices(n, frac, seed).unwrap();
            prop_assert!(!tr.is_empty() && !va.is_empty());
            let mut all: Vec<usize> = tr.iter().chain(&va).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn kfold_partitions(n in 2usize..120, kk in 2usize..20, seed: u64) {
            let k = kk.min(n);
            let fs = kfold(&ds(n), k, seed).unwrap();
            let mut seen = vec![0usize; n];
            for f in &fs.folds {
                prop_assert!(f.val.len() == n / k || f.val.len() == n.div_ceil(k));
                prop_assert_eq!(f.train.len() + f.val.len(), n);
                prop_assert!(f.train.iter().all(|i| !f.val.contains(i)));
                for &i in &f.val { seen[i] += 1; }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn sizes_independent_of_order(n in 2usize..60, seed: u64) {
            let a = kfold(&ds(n), 2, seed).unwrap();
            let mut rev = ds(n);
            rev.images.reverse();
            let b = kfold(&rev, 2, seed).unwrap();
            for (x, y) in a.folds.iter().zip(&b.folds) {
                prop_assert_eq!(x.val.len(), y.val.len());
            }
        }
    }
}
