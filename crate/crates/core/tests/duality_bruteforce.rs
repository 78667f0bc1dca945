//! Dual ascent selections against exhaustive enumeration of the 0/1 problem
//! `max Σ z τ_r  s.t.  Σ z τ_c ≤ B`.

use rand::Rng;
use uplift_rank::rlearner::{duality_solve, DualityConfig};
use uplift_rank::RngSeed;

fn brute_force(r: &[f64], c: &[f64], b: f64) -> f64 {
    let n = r.len();
    let mut best = 0.0;
    for mask in 0u32..(1 << n) {
        let (mut v, mut s) = (0.0, 0.0);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                v += r[i];
                s += c[i];
            }
        }
        if s <= b && v > best {
            best = v;
        }
    }
    best
}

#[test]
fn feasible_and_within_one_marginal_user() {
    for seed in 0..200 {
        let mut rng = RngSeed(seed).rng();
        let n = rng.random_range(2..=12);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..2.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let b = rng.random_range(0.2..0.8) * c.iter().sum::<f64>();
        let sol = duality_solve(&r, &c, b, &DualityConfig::default()).unwrap();
        let value: f64 = sol.z.iter().zip(&r).map(|(z, r)| z * r).sum();
        let opt = brute_force(&r, &c, b);
        assert!(sol.spend <= b + 1e-12, "seed {seed}: spend {} > {b}", sol.spend);
        let slack = (0..n).filter(|&i| sol.z[i] == 0.0).map(|i| r[i]).fold(0.0, f64::max);
        assert!(value <= opt + 1e-12);
        assert!(value >= opt - slack - 1e-12, "seed {seed}: value {value}, optimum {opt}, slack {slack}");
    }
}
