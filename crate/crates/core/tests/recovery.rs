//! R-learner effect models against known linear effects.

use ndarray::Array2;
use uplift_rank::ingest::{generate_synthetic, SyntheticConfig, TauSpec, TreatProb};
use uplift_rank::rlearner::{fit_propensity, rlearner_fit, Outcome, PropensityKind};
use uplift_rank::RngSeed;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn linear_effect_coefficients_recovered() {
    let d = 6;
    let true_r = vec![0.8, -0.5, 0.3, 0.0, 0.2, -0.4];
    let true_c = vec![0.3, 0.4, -0.2, 0.1, 0.0, 0.25];
    for (seed, assign) in [(1, TreatProb::Constant(0.5)), (2, TreatProb::logistic_default())] {
        let g = SyntheticConfig {
            noise_sd: 0.1,
            treat_prob: assign,
            tau_r: TauSpec::linear(1.0, true_r.clone()),
            tau_c: TauSpec::linear(0.5, true_c.clone()),
            ..SyntheticConfig::heterogeneous(5000, d)
        };
        let (ds, _) = generate_synthetic(&g, RngSeed(seed)).unwrap();
        let x: Array2<f64> = ds.feature_matrix();
        let prop = fit_propensity(x.view(), &ds.treatments(), PropensityKind::Logistic).unwrap();
        let r = rlearner_fit(&ds, Outcome::Value, &prop, 0.0).unwrap();
        let c = rlearner_fit(&ds, Outcome::Cost, &prop, 0.0).unwrap();
        let (cr, cc) = (cosine(&r.weights, &true_r), cosine(&c.weights, &true_c));
        assert!(cr > 0.99 && cc > 0.99, "seed {seed}: value {cr}, cost {cc}");
    }
}
