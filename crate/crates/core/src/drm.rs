//! Direct ranking: per-cohort softmax effectiveness probabilities, the
//! aggregated treatment-effect functionals they induce, and the objectives
//! built from them.
//!
//! For probabilities `p` (summing to one within the treated cohort and
//! within the control cohort), the aggregated effect of an outcome `y` is
//!
//! ```text
//! tau = Σ_treated p_i y_i − Σ_control p_i y_i
//! ```
//!
//! and, with inverse propensity weighting,
//!
//! ```text
//! tau = ê Σ_treated p_i y_i / e(x_i) − (1 − ê) Σ_control p_i y_i / (1 − e(x_i))
//! ```
//!
//! Both are linear in `p`, so every objective here is handled as
//! `form(Σ p_i a^r_i, Σ p_i a^c_i)` with per-sample signed coefficients `a`.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::{Cohorts, Dataset};
use crate::error::{Error, Result};
use crate::nn::{self, ScoreObjective, ScorerParams};
use crate::train::{self, Evaluate, Evaluation, TrainConfig, TrainOutcome};
use crate::util::{sigmoid, softplus};

/// Added after softplus in ratio denominators.
pub const RECTIFIER_EPS: f64 = 1e-6;
/// Propensities are clipped into this range before inverse weighting.
pub const PROPENSITY_CLIP: (f64, f64) = (0.01, 0.99);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    Treated,
    Control,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectivenessProbs {
    pub p: Vec<f64>,
    pub cohort: Vec<Cohort>,
}

/// Max-shifted softmax of `scores` over `idx`, written into `out`.
fn softmax_into(scores: &[f64], idx: &[usize], out: &mut [f64]) {
    let max = idx.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for &i in idx {
        let e = (scores[i] - max).exp();
        out[i] = e;
        z += e;
    }
    for &i in idx {
        out[i] /= z;
    }
}

pub(crate) fn cohort_softmax(scores: &[f64], cohorts: &Cohorts) -> Vec<f64> {
    let mut p = vec![0.0; scores.len()];
    for g in cohorts.groups() {
        softmax_into(scores, g, &mut p);
    }
    p
}

/// Chain rule through the per-cohort softmax: `dO/ds_j = p_j (g_j − Σ_c p_k g_k)`.
pub(crate) fn softmax_backward(p: &[f64], dp: &[f64], cohorts: &Cohorts) -> Vec<f64> {
    let mut ds = vec![0.0; p.len()];
    for g in cohorts.groups() {
        let mean: f64 = g.iter().map(|&k| p[k] * dp[k]).sum();
        for &j in g {
            ds[j] = p[j] * (dp[j] - mean);
        }
    }
    ds
}

pub fn effectiveness_probs(scores: &[f64], t: &[u8]) -> Result<EffectivenessProbs> {
    if scores.len() != t.len() {
        return Err(Error::ShapeMismatch { expected: t.len(), got: scores.len() });
    }
    let cohorts = Cohorts::from_treatments(t)?;
    Ok(EffectivenessProbs {
        p: cohort_softmax(scores, &cohorts),
        cohort: t.iter().map(|&t| if t == 1 { Cohort::Treated } else { Cohort::Control }).collect(),
    })
}

fn sign(t: u8) -> f64 {
    if t == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `Σ_treated p_i y_i − Σ_control p_i y_i`.
pub fn tau_hat(p: &[f64], y: &[f64], t: &[u8]) -> f64 {
    p.iter().zip(y).zip(t).map(|((p, y), &t)| sign(t) * p * y).sum()
}

/// Overall and per-sample treatment propensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityWeights {
    /// Treated fraction of the dataset.
    pub e_hat: f64,
    /// Per-sample `e(x)`, clipped.
    pub e_x: Vec<f64>,
}

impl PropensityWeights {
    pub fn new(t: &[u8], e_x: Vec<f64>) -> Result<Self> {
        if e_x.len() != t.len() {
            return Err(Error::ShapeMismatch { expected: t.len(), got: e_x.len() });
        }
        if e_x.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite("propensity"));
        }
        let (lo, hi) = PROPENSITY_CLIP;
        Ok(Self { e_hat: treated_fraction(t), e_x: e_x.into_iter().map(|e| e.clamp(lo, hi)).collect() })
    }

    /// `e(x) ≡ ê`: a fully randomized experiment.
    pub fn constant(t: &[u8]) -> Self {
        let e_hat = treated_fraction(t);
        Self { e_hat, e_x: vec![e_hat; t.len()] }
    }

    pub fn len(&self) -> usize {
        self.e_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_x.is_empty()
    }

    /// Multiplier of `p_i y_i`: `ê / e_i` for treated, `(1 − ê) / (1 − e_i)` for control.
    pub fn factor(&self, i: usize, t: u8) -> f64 {
        if t == 1 {
            self.e_hat / self.e_x[i]
        } else {
            (1.0 - self.e_hat) / (1.0 - self.e_x[i])
        }
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self { e_hat: self.e_hat, e_x: idx.iter().map(|&i| self.e_x[i]).collect() }
    }
}

fn treated_fraction(t: &[u8]) -> f64 {
    t.iter().filter(|&&t| t == 1).count() as f64 / t.len() as f64
}

pub fn tau_hat_propensity(p: &[f64], y: &[f64], t: &[u8], w: &PropensityWeights) -> f64 {
    let (mut treated, mut control) = (0.0, 0.0);
    for i in 0..p.len() {
        if t[i] == 1 {
            treated += y[i] * p[i] / w.e_x[i];
        } else {
            control += y[i] * p[i] / (1.0 - w.e_x[i]);
        }
    }
    w.e_hat * treated - (1.0 - w.e_hat) * control
}

/// How the two aggregated effects combine into one maximized scalar.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ObjectiveForm {
    /// `tau_r / (softplus(tau_c) + eps)`
    #[default]
    Ratio,
    /// `softplus(tau_r) / (softplus(tau_c) + eps)`
    DoubleRectified,
    /// `tau_r − alpha·tau_c`
    Linear { alpha: f64 },
}

impl ObjectiveForm {
    /// Linear form used with propensity-weighted direct ranking.
    pub const DRM_PROPENSITY: ObjectiveForm = ObjectiveForm::Linear { alpha: 1.5 };
    /// Linear form used when comparing against the R-learner.
    pub const RLEARNER_PROPENSITY: ObjectiveForm = ObjectiveForm::Linear { alpha: 1.3 };

    /// Value and partial derivatives in `(tau_r, tau_c)`.
    pub fn eval(self, tau_r: f64, tau_c: f64) -> (f64, f64, f64) {
        match self {
            ObjectiveForm::Ratio => {
                let den = softplus(tau_c) + RECTIFIER_EPS;
                (tau_r / den, 1.0 / den, -tau_r * sigmoid(tau_c) / (den * den))
            }
            ObjectiveForm::DoubleRectified => {
                let num = softplus(tau_r);
                let den = softplus(tau_c) + RECTIFIER_EPS;
                (num / den, sigmoid(tau_r) / den, -num * sigmoid(tau_c) / (den * den))
            }
            ObjectiveForm::Linear { alpha } => (tau_r - alpha * tau_c, 1.0, -alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau_r: f64,
    pub tau_c: f64,
    pub objective: f64,
    pub rectifier_eps: f64,
}

/// The aggregated-effect objective for one dataset, as a function of the
/// final per-sample probabilities.
#[derive(Debug, Clone)]
pub struct TauObjective {
    pub(crate) cohorts: Cohorts,
    coef_r: Vec<f64>,
    coef_c: Vec<f64>,
    pub form: ObjectiveForm,
}

impl TauObjective {
    pub fn new(ds: &Dataset, form: ObjectiveForm, weights: Option<&PropensityWeights>) -> Result<Self> {
        let cohorts = ds.cohorts()?;
        if let Some(w) = weights {
            if w.len() != ds.len() {
                return Err(Error::ShapeMismatch { expected: ds.len(), got: w.len() });
            }
        }
        let factor = |i: usize, t: u8| sign(t) * weights.map_or(1.0, |w| w.factor(i, t));
        let s = ds.samples();
        Ok(Self {
            cohorts,
            coef_r: s.iter().enumerate().map(|(i, u)| factor(i, u.t) * u.y_r).collect(),
            coef_c: s.iter().enumerate().map(|(i, u)| factor(i, u.t) * u.y_c).collect(),
            form,
        })
    }

    pub fn len(&self) -> usize {
        self.coef_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coef_r.is_empty()
    }

    pub fn cohorts(&self) -> &Cohorts {
        &self.cohorts
    }

    pub fn estimate(&self, p: &[f64]) -> TauEstimate {
        self.estimate_with_grad(p).0
    }

    /// Estimate and `dO/dp`.
    pub fn estimate_with_grad(&self, p: &[f64]) -> (TauEstimate, Vec<f64>) {
        let tau_r: f64 = p.iter().zip(&self.coef_r).map(|(p, a)| p * a).sum();
        let tau_c: f64 = p.iter().zip(&self.coef_c).map(|(p, a)| p * a).sum();
        let (objective, d_r, d_c) = self.form.eval(tau_r, tau_c);
        let dp = self.coef_r.iter().zip(&self.coef_c).map(|(ar, ac)| d_r * ar + d_c * ac).collect();
        (TauEstimate { tau_r, tau_c, objective, rectifier_eps: RECTIFIER_EPS }, dp)
    }
}

impl Evaluate for TauObjective {
    fn evaluate(&self, scores: &[f64]) -> Result<Evaluation> {
        if scores.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), got: scores.len() });
        }
        let p = cohort_softmax(scores, &self.cohorts);
        let (estimate, dp) = self.estimate_with_grad(&p);
        if !estimate.objective.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        Ok(Evaluation {
            value: estimate.objective,
            dscores: softmax_backward(&p, &dp, &self.cohorts),
            estimate,
            barrier: None,
        })
    }
}

impl ScoreObjective for TauObjective {
    fn value_and_grad(&self, scores: &[f64]) -> Result<(f64, Vec<f64>)> {
        let e = self.evaluate(scores)?;
        Ok((e.value, e.dscores))
    }
}

/// `tau_r / (softplus(tau_c) + eps) − reg·‖θ‖²`, higher is better.
pub fn drm_objective(params: &ScorerParams, ds: &Dataset, reg: f64) -> Result<f64> {
    let obj = TauObjective::new(ds, ObjectiveForm::Ratio, None)?;
    nn::objective_value(&obj, params, ds.feature_matrix().view(), reg)
}

pub fn drm_propensity_objective(
    params: &ScorerParams,
    ds: &Dataset,
    w: &PropensityWeights,
    form: ObjectiveForm,
) -> Result<f64> {
    let obj = TauObjective::new(ds, form, Some(w))?;
    nn::objective_value(&obj, params, ds.feature_matrix().view(), 0.0)
}

/// Value and exact parameter gradient of the (optionally propensity-weighted)
/// direct ranking objective on raw features.
pub fn drm_gradient(
    params: &ScorerParams,
    ds: &Dataset,
    form: ObjectiveForm,
    w: Option<&PropensityWeights>,
    reg: f64,
) -> Result<(f64, ScorerParams)> {
    let obj = TauObjective::new(ds, form, w)?;
    nn::gradient(&obj, params, ds.feature_matrix().view(), reg)
}

/// Full-batch (or mini-batch) Adam ascent on the direct ranking objective.
/// The returned parameters score raw, unstandardized features.
pub fn train_drm(ds: &Dataset, cfg: &TrainConfig, w: Option<&PropensityWeights>) -> Result<TrainOutcome> {
    ds.cohorts()?;
    let x = ds.feature_matrix();
    let treated: Vec<bool> = ds.samples().iter().map(|s| s.t == 1).collect();
    train::ascend(x.view(), &treated, cfg, |_, subset| {
        let (sub_ds, sub_w);
        let (ds_ref, w_ref) = match subset {
            Some(idx) => {
                sub_ds = ds.select(idx);
                sub_w = w.map(|w| w.select(idx));
                (&sub_ds, sub_w.as_ref())
            }
            None => (ds, w),
        };
        TauObjective::new(ds_ref, cfg.form, w_ref)
    })
}

/// Scores for `x` under trained parameters.
pub fn score(params: &ScorerParams, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    Ok(nn::forward(params, x)?.to_vec())
}
