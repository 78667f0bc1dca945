use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RngSeed};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.6, val: 0.2, test: 0.2 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("split fraction {name}={v} must lie in (0,1)")));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Cut points into a permutation of length `n`.
    pub fn cuts(&self, n: usize) -> (usize, usize) {
        let a = (n as f64 * self.train + 1e-9).floor() as usize;
        let b = (n as f64 * (self.train + self.val) + 1e-9).floor() as usize;
        (a.min(n), b.min(n))
    }
}

/// Index permutation used by [`split_dataset`], exposed so callers can
/// reproduce the split without materializing datasets.
pub fn split_indices(n: usize, r: &SplitRatios, seed: RngSeed) -> Result<[Vec<usize>; 3]> {
    r.validate()?;
    if n < 5 {
        return Err(Error::Config(format!("need at least 5 samples to split, got {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed.rng());
    let (a, b) = r.cuts(n);
    Ok([perm[..a].to_vec(), perm[a..b].to_vec(), perm[b..].to_vec()])
}

/// Seeded permutation followed by contiguous cuts at ⌊n·train⌋ and
/// ⌊n·(train+val)⌋.
pub fn split_dataset(ds: &Dataset, r: &SplitRatios, seed: RngSeed) -> Result<(Dataset, Dataset, Dataset)> {
    let [tr, va, te] = split_indices(ds.len(), r, seed)?;
    let mut parts = [tr, va, te].map(|idx| ds.select(&idx));
    for (part, name) in parts.iter_mut().zip(["train", "val", "test"]) {
        part.cohorts().map_err(|e| Error::EmptyCohort(format!("{name} split: {e}")))?;
        part.meta.provenance = format!("{} | split={name} seed={}", part.meta.provenance, seed.0);
    }
    let [a, b, c] = parts;
    Ok((a, b, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetMeta, Strategy, UserSample};

    fn ds(n: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| UserSample {
                id: i.to_string(),
                x: vec![i as f64],
                t: (i % 2) as u8,
                y_r: 0.0,
                y_c: 0.0,
                strategy: Strategy::Explore,
            })
            .collect();
        Dataset::new(samples, DatasetMeta::default()).unwrap()
    }

    #[test]
    fn sizes_n10() {
        let [a, b, c] = split_indices(10, &SplitRatios::default(), RngSeed(7)).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (6, 2, 2));
    }

    #[test]
    fn sizes_n100000() {
        let [a, b, c] = split_indices(100_000, &SplitRatios::default(), RngSeed(1)).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (60_000, 20_000, 20_000));
    }

    #[test]
    fn deterministic_per_seed() {
        let x = split_dataset(&ds(50), &SplitRatios::default(), RngSeed(7)).unwrap();
        let y = split_dataset(&ds(50), &SplitRatios::default(), RngSeed(7)).unwrap();
        assert_eq!(x, y);
        let z = split_dataset(&ds(50), &SplitRatios::default(), RngSeed(8)).unwrap();
        assert_ne!(x.0, z.0);
    }

    #[test]
    fn rejects_bad_ratios() {
        let r = SplitRatios { train: 0.5, val: 0.2, test: 0.2 };
        assert!(split_indices(10, &r, RngSeed(0)).is_err());
        assert!(split_indices(4, &SplitRatios::default(), RngSeed(0)).is_err());
    }

    #[test]
    fn lost_cohort_is_error() {
        // Only one treated sample: some split must lack it.
        let samples = (0..10)
            .map(|i| UserSample {
                id: i.to_string(),
                x: vec![0.0],
                t: u8::from(i == 0),
                y_r: 0.0,
                y_c: 0.0,
                strategy: Strategy::Explore,
            })
            .collect();
        let ds = Dataset::new(samples, DatasetMeta::default()).unwrap();
        assert!(matches!(split_dataset(&ds, &SplitRatios::default(), RngSeed(3)), Err(Error::EmptyCohort(_))));
    }

    proptest::proptest! {
        #[test]
        fn parts_partition(n in 5usize..500, train in 0.05f64..0.9, val_frac in 0.05f64..0.95, seed in 0u64..1000) {
            let val = (1.0 - train) * val_frac;
            let r = SplitRatios { train, val, test: 1.0 - train - val };
            proptest::prop_assume!(r.validate().is_ok());
            let [a, b, c] = split_indices(n, &r, RngSeed(seed)).unwrap();
            let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
            all.sort_unstable();
            proptest::prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
