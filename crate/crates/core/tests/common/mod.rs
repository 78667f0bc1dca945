#![allow(dead_code)]

use rand::Rng;
use uplift_rank::{Dataset, DatasetMeta, RngSeed, Strategy, UserSample};

/// Small random experiment with both arms present.
pub fn random_dataset(seed: u64, n: usize, d: usize) -> Dataset {
    let mut rng = RngSeed(seed).rng();
    let samples = (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = match i {
                0 => 1,
                1 => 0,
                _ => u8::from(rng.random::<f64>() < 0.5),
            };
            UserSample {
                id: i.to_string(),
                y_r: rng.random_range(-1.0..3.0) + f64::from(t) * (1.0 + x[0]),
                y_c: rng.random_range(0.0..2.0) + 0.5 * f64::from(t),
                x,
                t,
                strategy: Strategy::Explore,
            }
        })
        .collect();
    Dataset::new(samples, DatasetMeta { name: "random".into(), provenance: format!("test seed={seed}") }).unwrap()
}
