//! Synthetic two-outcome experiments with known treatment effects.
//!
//! Outcomes follow `y = mu0(x) + t·tau(x) + noise` for value and cost alike;
//! features are i.i.d. standard normal.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta, RngSeed, Strategy, UserSample};
use crate::error::{Error, Result};
use crate::util::{dot_prefix, sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauShape {
    /// `b + w·x`
    Linear,
    /// `b + w·x + sin(x_0)`
    LinearPlusSin,
    /// `softplus(b + w·x)`, strictly positive.
    Softplus,
}

/// A treatment-effect function. Coefficients shorter than `d` are zero-padded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauSpec {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub shape: TauShape,
}

impl TauSpec {
    pub fn constant(c: f64) -> Self {
        Self { intercept: c, coef: vec![], shape: TauShape::Linear }
    }

    pub fn linear(intercept: f64, coef: Vec<f64>) -> Self {
        Self { intercept, coef, shape: TauShape::Linear }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let z = self.intercept + dot_prefix(&self.coef, x);
        match self.shape {
            TauShape::Linear => z,
            TauShape::LinearPlusSin => z + x.first().copied().unwrap_or(0.0).sin(),
            TauShape::Softplus => softplus(z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.intercept + dot_prefix(&self.coef, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatProb {
    Constant(f64),
    /// `e(x) = sigmoid(b + w·x)`
    Logistic {
        intercept: f64,
        coef: Vec<f64>,
    },
}

impl TreatProb {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TreatProb::Constant(e) => *e,
            TreatProb::Logistic { intercept, coef } => sigmoid(intercept + dot_prefix(coef, x)),
        }
    }

    /// Default feature-dependent assignment.
    pub fn logistic_default() -> Self {
        TreatProb::Logistic { intercept: 0.0, coef: vec![0.8, -0.6, 0.4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    pub treat_prob: TreatProb,
    pub noise_sd: f64,
    pub tau_r: TauSpec,
    pub tau_c: TauSpec,
    pub mu0_r: LinearSpec,
    pub mu0_c: LinearSpec,
}

impl SyntheticConfig {
    /// Heterogeneous default: value effect linear plus `sin(x_0)`, cost effect
    /// softplus-shaped and therefore positive, linear baselines.
    pub fn heterogeneous(n: usize, d: usize) -> Self {
        let c = |v: &[f64]| v[..v.len().min(d)].to_vec();
        Self {
            n,
            d,
            treat_prob: TreatProb::Constant(0.5),
            noise_sd: 0.1,
            tau_r: TauSpec { intercept: 1.0, coef: c(&[0.6, 0.3, -0.2]), shape: TauShape::LinearPlusSin },
            tau_c: TauSpec { intercept: 0.3, coef: c(&[-0.5, 0.0, 0.3, 0.2]), shape: TauShape::Softplus },
            mu0_r: LinearSpec { intercept: 2.0, coef: c(&[0.3, 0.2, 0.0, 0.0, 0.1]) },
            mu0_c: LinearSpec { intercept: 1.0, coef: c(&[0.1, 0.0, 0.2]) },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Config(format!("n must be >= 10, got {}", self.n)));
        }
        if self.d < 1 {
            return Err(Error::Config("d must be >= 1".into()));
        }
        if let TreatProb::Constant(e) = self.treat_prob {
            if !(0.05..=0.95).contains(&e) {
                return Err(Error::Config(format!("constant treatment probability {e} outside [0.05, 0.95]")));
            }
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config(format!("noise_sd must be finite and >= 0, got {}", self.noise_sd)));
        }
        let too_long = |len: usize| len > self.d;
        if too_long(self.tau_r.coef.len())
            || too_long(self.tau_c.coef.len())
            || too_long(self.mu0_r.coef.len())
            || too_long(self.mu0_c.coef.len())
        {
            // Longer coefficient lists are truncated by dot_prefix; reject to surface config typos.
            return Err(Error::Config(format!("coefficient vector longer than d={}", self.d)));
        }
        if let TreatProb::Logistic { coef, .. } = &self.treat_prob {
            if too_long(coef.len()) {
                return Err(Error::Config(format!("propensity coefficients longer than d={}", self.d)));
            }
        }
        Ok(())
    }

    pub fn draw_features(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..self.d).map(|_| StandardNormal.sample(rng)).collect()).collect()
    }

    /// Realizes both outcomes for one user under assignment `t`.
    pub fn realize(&self, x: &[f64], t: u8, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let tf = f64::from(t);
        let mut y_r = self.mu0_r.eval(x) + tf * self.tau_r.eval(x);
        let mut y_c = self.mu0_c.eval(x) + tf * self.tau_c.eval(x);
        if self.noise_sd > 0.0 {
            let e_r: f64 = StandardNormal.sample(rng);
            let e_c: f64 = StandardNormal.sample(rng);
            y_r += self.noise_sd * e_r;
            y_c += self.noise_sd * e_c;
        }
        (y_r, y_c)
    }

    pub fn ground_truth(&self, xs: &[Vec<f64>]) -> GroundTruth {
        GroundTruth {
            tau_r_true: xs.iter().map(|x| self.tau_r.eval(x)).collect(),
            tau_c_true: xs.iter().map(|x| self.tau_c.eval(x)).collect(),
            propensity_true: xs.iter().map(|x| self.treat_prob.eval(x)).collect(),
        }
    }
}

/// Noiseless per-sample effects and assignment probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tau_r_true: Vec<f64>,
    pub tau_c_true: Vec<f64>,
    pub propensity_true: Vec<f64>,
}

impl GroundTruth {
    /// Oracle ranking score: true value effect per unit of true cost effect.
    pub fn oracle_scores(&self) -> Vec<f64> {
        self.tau_r_true.iter().zip(&self.tau_c_true).map(|(r, c)| r / c).collect()
    }

    pub fn select(&self, idx: &[usize]) -> GroundTruth {
        GroundTruth {
            tau_r_true: idx.iter().map(|&i| self.tau_r_true[i]).collect(),
            tau_c_true: idx.iter().map(|&i| self.tau_c_true[i]).collect(),
            propensity_true: idx.iter().map(|&i| self.propensity_true[i]).collect(),
        }
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig, seed: RngSeed) -> Result<(Dataset, GroundTruth)> {
    cfg.validate()?;
    let mut rng = seed.rng();
    let xs = cfg.draw_features(cfg.n, &mut rng);
    let truth = cfg.ground_truth(&xs);
    let ts: Vec<u8> = truth.propensity_true.iter().map(|&e| u8::from(rng.random::<f64>() < e)).collect();
    let samples: Vec<UserSample> = xs
        .into_iter()
        .zip(ts)
        .enumerate()
        .map(|(i, (x, t))| {
            let (y_r, y_c) = cfg.realize(&x, t, &mut rng);
            UserSample { id: i.to_string(), x, t, y_r, y_c, strategy: Strategy::Explore }
        })
        .collect();
    let meta = DatasetMeta {
        name: "synthetic".into(),
        provenance: format!("synthetic n={} d={} seed={}", cfg.n, cfg.d, seed.0),
    };
    Ok((Dataset::new(samples, meta)?, truth))
}
