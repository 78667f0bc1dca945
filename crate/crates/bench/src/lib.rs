//! Fixtures shared by the benchmarks.

use uplift_rank::ingest::{generate_synthetic, SyntheticConfig};
use uplift_rank::{Dataset, RngSeed};

/// Heterogeneous synthetic experiment with `n` users and `d` features.
pub fn dataset(n: usize, d: usize) -> Dataset {
    generate_synthetic(&SyntheticConfig::heterogeneous(n, d), RngSeed(1)).expect("valid generator").0
}
