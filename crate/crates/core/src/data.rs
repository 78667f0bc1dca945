//! Shared domain types: samples, datasets, cohorts and seeded randomness.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a sample entered the experiment log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Explore,
    Exploit,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Explore => "explore",
            Strategy::Exploit => "exploit",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "explore" => Ok(Strategy::Explore),
            "exploit" => Ok(Strategy::Exploit),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

/// One user: features, binary treatment and the two observed outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSample {
    pub id: String,
    pub x: Vec<f64>,
    pub t: u8,
    pub y_r: f64,
    pub y_c: f64,
    #[serde(default)]
    pub strategy: Strategy,
}

impl UserSample {
    pub fn is_treated(&self) -> bool {
        self.t == 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub provenance: String,
}

/// An ordered collection of samples sharing one feature width.
///
/// Every per-index array in the crate (scores, probabilities, weights) is
/// aligned with `samples`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<UserSample>,
    d: usize,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Validates the sample invariants and requires both cohorts to be present.
    pub fn new(samples: Vec<UserSample>, meta: DatasetMeta) -> Result<Self> {
        let ds = Self::new_unchecked_cohorts(samples, meta)?;
        ds.cohorts()?;
        Ok(ds)
    }

    /// Like [`Dataset::new`] but tolerates a missing cohort. Used for
    /// explore-only logs and other intermediate tables.
    pub fn new_unchecked_cohorts(samples: Vec<UserSample>, meta: DatasetMeta) -> Result<Self> {
        let d = samples.first().map(|s| s.x.len()).unwrap_or(0);
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != d {
                return Err(Error::ShapeMismatch { expected: d, got: s.x.len() });
            }
            if s.t > 1 {
                return Err(Error::Parse { row: i, msg: format!("treatment must be 0 or 1, got {}", s.t) });
            }
            if !s.y_r.is_finite() || !s.y_c.is_finite() {
                return Err(Error::Parse { row: i, msg: "outcomes must be finite".into() });
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse { row: i, msg: "features must be finite".into() });
            }
        }
        Ok(Self { samples, d, meta })
    }

    pub fn samples(&self) -> &[UserSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<UserSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn treatments(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y_r).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y_c).collect()
    }

    /// Row-major n×d copy of the features.
    pub fn feature_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), self.d));
        for (mut row, s) in m.rows_mut().into_iter().zip(&self.samples) {
            row.iter_mut().zip(&s.x).for_each(|(dst, v)| *dst = *v);
        }
        m
    }

    pub fn cohorts(&self) -> Result<Cohorts> {
        split_cohorts(self)
    }

    /// New dataset containing the given indices in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            d: self.d,
            meta: self.meta.clone(),
        }
    }
}

/// Partition of sample indices by treatment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cohorts {
    pub treated: Vec<usize>,
    pub control: Vec<usize>,
}

impl Cohorts {
    pub fn from_treatments(t: &[u8]) -> Result<Self> {
        let (treated, control): (Vec<usize>, Vec<usize>) = (0..t.len()).partition(|&i| t[i] == 1);
        if treated.is_empty() {
            return Err(Error::EmptyCohort("no treated samples".into()));
        }
        if control.is_empty() {
            return Err(Error::EmptyCohort("no control samples".into()));
        }
        Ok(Self { treated, control })
    }

    pub fn len(&self) -> usize {
        self.treated.len() + self.control.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Both cohorts, treated first.
    pub fn groups(&self) -> [&[usize]; 2] {
        [&self.treated, &self.control]
    }
}

pub fn split_cohorts(ds: &Dataset) -> Result<Cohorts> {
    Cohorts::from_treatments(&ds.treatments())
}

/// Seed for every randomized operation. Same seed, same inputs, same bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent stream for a named sub-task.
    pub fn derive(self, stream: u64) -> RngSeed {
        // splitmix64 finalizer
        let mut z = self.0 ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds_with_t(t: &[u8]) -> Dataset {
        let samples = t
            .iter()
            .enumerate()
            .map(|(i, &t)| UserSample {
                id: i.to_string(),
                x: vec![i as f64],
                t,
                y_r: 0.0,
                y_c: 0.0,
                strategy: Strategy::Explore,
            })
            .collect();
        Dataset::new_unchecked_cohorts(samples, DatasetMeta::default()).unwrap()
    }

    #[test]
    fn split_small() {
        let c = split_cohorts(&ds_with_t(&[1, 0, 1])).unwrap();
        assert_eq!(c.treated, vec![0, 2]);
        assert_eq!(c.control, vec![1]);
    }

    #[test]
    fn split_block() {
        let t: Vec<u8> = [1u8; 5].iter().chain([0u8; 5].iter()).copied().collect();
        let c = split_cohorts(&ds_with_t(&t)).unwrap();
        assert_eq!(c.treated, (0..5).collect::<Vec<_>>());
        assert_eq!(c.control, (5..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_no_treated() {
        assert!(matches!(split_cohorts(&ds_with_t(&[0, 0])), Err(Error::EmptyCohort(_))));
    }

    #[test]
    fn dataset_rejects_ragged_rows() {
        let mut a = ds_with_t(&[1, 0]).into_samples();
        a[1].x.push(1.0);
        assert!(Dataset::new(a, DatasetMeta::default()).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let s = RngSeed(7);
        assert_ne!(s.derive(1), s.derive(2));
        assert_eq!(s.derive(1), s.derive(1));
    }

    proptest::proptest! {
        #[test]
        fn split_is_partition(t in proptest::collection::vec(0u8..2, 2..64)) {
            let ds = ds_with_t(&t);
            if let Ok(c) = split_cohorts(&ds) {
                let mut all: Vec<usize> = c.treated.iter().chain(&c.control).copied().collect();
                all.sort_unstable();
                proptest::prop_assert_eq!(all, (0..t.len()).collect::<Vec<_>>());
                proptest::prop_assert!(c.treated.iter().all(|&i| t[i] == 1));
                proptest::prop_assert!(c.control.iter().all(|&i| t[i] == 0));
            } else {
                proptest::prop_assert!(t.iter().all(|&v| v == t[0]));
            }
        }
    }
}
