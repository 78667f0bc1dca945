//! Constrained ranking: a soft barrier on effectiveness probabilities that
//! keeps users above a percentage or budget threshold and fades out the rest.
//!
//! The barrier multiplies each `p_i` by `logistic(T (p_i − d*))` and
//! renormalizes per cohort. Written in log space this is a second softmax
//! over `s_i + log logistic(T (p_i − d*))`, which stays finite even when
//! every weight of a cohort underflows.

use serde::{Deserialize, Serialize};

use crate::data::{Cohorts, Dataset};
use crate::drm::{cohort_softmax, softmax_backward, ObjectiveForm, PropensityWeights, TauObjective};
use crate::error::{Error, Result};
use crate::nn::{self, ScoreObjective, ScorerParams};
use crate::train::{self, BarrierTrace, Evaluate, Evaluation, TrainConfig, TrainOutcome};
use crate::util::{sigmoid, softplus};

/// Offset used to place a threshold just outside the observed probabilities.
const EDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Constraint {
    /// Keep the top fraction `p` of the pooled population.
    Percentage { p: f64 },
    /// Keep the highest-ranked users whose cumulative cost stays within `b`.
    Budget { b: f64 },
}

impl Default for Constraint {
    fn default() -> Self {
        Constraint::Percentage { p: 0.4 }
    }
}

impl Constraint {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Constraint::Percentage { p } if !(p > 0.0 && p <= 1.0) => {
                Err(Error::Config(format!("percentage must be in (0, 1], got {p}")))
            }
            Constraint::Budget { b } if !(b > 0.0 && b.is_finite()) => {
                Err(Error::Config(format!("budget must be positive, got {b}")))
            }
            _ => Ok(()),
        }
    }
}

/// Order used to accumulate cost under a budget constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetOrder {
    /// Most effective first.
    #[default]
    Effectiveness,
    /// Cheapest first; the affordable count is then cut from the top of the ranking.
    CostAscending,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub dt: f64,
    pub every: usize,
    pub t_max: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self { t0: 0.5, dt: 0.1, every: 10, t_max: 50.0 }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) || !(self.dt >= 0.0) || self.every == 0 || !(self.t_max >= self.t0) {
            return Err(Error::Config(format!("invalid anneal schedule {self:?}")));
        }
        Ok(())
    }

    pub fn temperature(&self, step: usize) -> f64 {
        (self.t0 + self.dt * (step / self.every) as f64).min(self.t_max)
    }
}

fn sorted_desc(p: &[f64]) -> Vec<f64> {
    let mut v = p.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Threshold letting exactly the `k` largest of `v` (sorted descending) pass.
/// Keeping everyone yields `-inf`, where every weight is exactly one.
fn cut_after(v: &[f64], k: usize) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    if k == 0 {
        return v[0] + EDGE;
    }
    if k >= v.len() {
        // nothing is cut, so the barrier switches off
        return f64::NEG_INFINITY;
    }
    let (hi, lo) = (v[k - 1], v[k]);
    if hi == lo {
        // ties at the cut all pass
        return hi - EDGE;
    }
    let mid = lo + 0.5 * (hi - lo);
    if mid < hi {
        mid
    } else {
        lo
    }
}

pub fn select_threshold_percentage(p: &[f64], frac: f64) -> f64 {
    let k = ((frac * p.len() as f64).round() as usize).min(p.len());
    cut_after(&sorted_desc(p), k)
}

/// Count of the longest prefix (in the given order) whose cumulative cost is within `b`.
fn affordable(order: &[usize], costs: &[f64], b: f64) -> usize {
    let mut acc = 0.0;
    for (k, &i) in order.iter().enumerate() {
        acc += costs[i];
        if acc > b {
            return k;
        }
    }
    order.len()
}

pub fn select_threshold_budget(p: &[f64], costs: &[f64], b: f64) -> f64 {
    select_threshold_budget_ordered(p, costs, b, BudgetOrder::Effectiveness)
}

pub fn select_threshold_budget_ordered(p: &[f64], costs: &[f64], b: f64, order: BudgetOrder) -> f64 {
    let idx: Vec<usize> = match order {
        BudgetOrder::Effectiveness => crate::util::rank_desc(p),
        BudgetOrder::CostAscending => {
            let mut idx: Vec<usize> = (0..p.len()).collect();
            idx.sort_by(|&a, &c| costs[a].total_cmp(&costs[c]).then(a.cmp(&c)));
            idx
        }
    };
    let k = affordable(&idx, costs, b);
    cut_after(&sorted_desc(p), k)
}

pub fn select_threshold(p: &[f64], costs: &[f64], c: Constraint, order: BudgetOrder) -> f64 {
    match c {
        Constraint::Percentage { p: frac } => select_threshold_percentage(p, frac),
        Constraint::Budget { b } => select_threshold_budget_ordered(p, costs, b, order),
    }
}

pub fn barrier_weights(p: &[f64], d_star: f64, temperature: f64) -> Vec<f64> {
    p.iter().map(|&p| sigmoid(temperature * (p - d_star))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierOutput {
    pub d_star: f64,
    pub weights: Vec<f64>,
    pub p_hat: Vec<f64>,
}

/// Barrier applied to per-cohort softmax probabilities of `scores`.
pub fn apply_barrier(scores: &[f64], cohorts: &Cohorts, d_star: f64, temperature: f64) -> BarrierOutput {
    let p = cohort_softmax(scores, cohorts);
    barrier_from_probs(scores, &p, cohorts, d_star, temperature)
}

fn barrier_from_probs(scores: &[f64], p: &[f64], cohorts: &Cohorts, d_star: f64, temperature: f64) -> BarrierOutput {
    let u: Vec<f64> = scores.iter().zip(p).map(|(s, p)| s - softplus(-temperature * (p - d_star))).collect();
    BarrierOutput { d_star, weights: barrier_weights(p, d_star, temperature), p_hat: cohort_softmax(&u, cohorts) }
}

/// The direct ranking objective evaluated on barrier-pooled probabilities.
/// `d*` is recomputed from the scores on every evaluation and held
/// constant for the gradient.
#[derive(Debug, Clone)]
pub struct ConstrainedObjective {
    pub tau: TauObjective,
    pub constraint: Constraint,
    pub order: BudgetOrder,
    pub temperature: f64,
    costs: Vec<f64>,
}

impl ConstrainedObjective {
    pub fn new(
        ds: &Dataset,
        form: ObjectiveForm,
        w: Option<&PropensityWeights>,
        constraint: Constraint,
        order: BudgetOrder,
        temperature: f64,
    ) -> Result<Self> {
        constraint.validate()?;
        if !(temperature > 0.0) {
            return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Self { tau: TauObjective::new(ds, form, w)?, constraint, order, temperature, costs: ds.costs() })
    }

    /// `(p, barrier)` for a score vector.
    pub fn pool(&self, scores: &[f64]) -> (Vec<f64>, BarrierOutput) {
        let cohorts = self.tau.cohorts();
        let p = cohort_softmax(scores, cohorts);
        let d = select_threshold(&p, &self.costs, self.constraint, self.order);
        let b = barrier_from_probs(scores, &p, cohorts, d, self.temperature);
        (p, b)
    }
}

impl Evaluate for ConstrainedObjective {
    fn evaluate(&self, scores: &[f64]) -> Result<Evaluation> {
        if scores.len() != self.tau.len() {
            return Err(Error::ShapeMismatch { expected: self.tau.len(), got: scores.len() });
        }
        let cohorts = self.tau.cohorts();
        let (p, b) = self.pool(scores);
        let (estimate, g) = self.tau.estimate_with_grad(&b.p_hat);
        if !estimate.objective.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        // u = s + log w(p): direct path plus the path through p.
        let du = softmax_backward(&b.p_hat, &g, cohorts);
        let via_p: Vec<f64> = du.iter().zip(&b.weights).map(|(d, w)| d * self.temperature * (1.0 - w)).collect();
        let back = softmax_backward(&p, &via_p, cohorts);
        let dscores = du.iter().zip(&back).map(|(a, b)| a + b).collect();
        let passed = p.iter().filter(|&&p| p > b.d_star).count();
        Ok(Evaluation {
            value: estimate.objective,
            dscores,
            estimate,
            barrier: Some(BarrierTrace {
                temperature: self.temperature,
                d_star: b.d_star,
                pass_fraction: passed as f64 / p.len() as f64,
            }),
        })
    }
}

impl ScoreObjective for ConstrainedObjective {
    fn value_and_grad(&self, scores: &[f64]) -> Result<(f64, Vec<f64>)> {
        let e = self.evaluate(scores)?;
        Ok((e.value, e.dscores))
    }
}

pub fn constrained_objective(
    params: &ScorerParams,
    ds: &Dataset,
    c: Constraint,
    temperature: f64,
    reg: f64,
) -> Result<f64> {
    let obj = ConstrainedObjective::new(ds, ObjectiveForm::Ratio, None, c, BudgetOrder::Effectiveness, temperature)?;
    nn::objective_value(&obj, params, ds.feature_matrix().view(), reg)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstrainedConfig {
    pub train: TrainConfig,
    pub constraint: Constraint,
    pub schedule: AnnealSchedule,
    pub budget_order: BudgetOrder,
}

pub fn train_constrained(ds: &Dataset, cfg: &ConstrainedConfig, w: Option<&PropensityWeights>) -> Result<TrainOutcome> {
    cfg.constraint.validate()?;
    cfg.schedule.validate()?;
    ds.cohorts()?;
    let x = ds.feature_matrix();
    let treated: Vec<bool> = ds.samples().iter().map(|s| s.t == 1).collect();
    train::ascend(x.view(), &treated, &cfg.train, |step, subset| {
        let temperature = cfg.schedule.temperature(step);
        match subset {
            Some(idx) => {
                let sub_w = w.map(|w| w.select(idx));
                ConstrainedObjective::new(
                    &ds.select(idx),
                    cfg.train.form,
                    sub_w.as_ref(),
                    cfg.constraint,
                    cfg.budget_order,
                    temperature,
                )
            }
            None => ConstrainedObjective::new(ds, cfg.train.form, w, cfg.constraint, cfg.budget_order, temperature),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RngSeed;
    use crate::drm::{drm_objective, effectiveness_probs};
    use crate::ingest::{generate_synthetic, SyntheticConfig};

    #[test]
    fn percentage_examples() {
        assert!((select_threshold_percentage(&[0.4, 0.3, 0.2, 0.1], 0.5) - 0.25).abs() < 1e-15);
        let d = select_threshold_percentage(&[0.4, 0.3, 0.2, 0.1], 1.0);
        assert!(d < 0.1);
        let d = select_threshold_percentage(&[0.4, 0.3, 0.3, 0.0], 0.5);
        assert!(d < 0.3 && d > 0.3 - 1e-9);
    }

    #[test]
    fn budget_examples() {
        let p = [0.5, 0.3, 0.2];
        assert!((select_threshold_budget(&p, &[1.0, 1.0, 1.0], 2.0) - 0.25).abs() < 1e-15);
        assert!(select_threshold_budget(&p, &[1.0, 1.0, 1.0], 100.0) < 0.2);
        assert!(select_threshold_budget(&p, &[1.0, 1.0, 1.0], 0.5) > 0.5);
        // cheapest-first: costs [5, 1, 1] with b = 2 admits two users, cut from the top
        let d = select_threshold_budget_ordered(&p, &[5.0, 1.0, 1.0], 2.0, BudgetOrder::CostAscending);
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(barrier_weights(&[0.3], 0.3, 5.0), vec![0.5]);
        let w = barrier_weights(&[2.5], 0.5, 0.5)[0];
        assert!((w - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        let w = barrier_weights(&[0.31, 0.29], 0.3, 1e6);
        assert!(w[0] > 1.0 - 1e-9 && w[1] < 1e-9);
    }

    #[test]
    fn schedule_examples() {
        let s = AnnealSchedule::default();
        assert!((s.temperature(25) - 0.7).abs() < 1e-12);
        assert_eq!(s.temperature(0), 0.5);
        assert_eq!(s.temperature(1_000_000), 50.0);
        let flat = AnnealSchedule { dt: 0.0, ..s };
        assert!((0..100).all(|k| flat.temperature(k) == 0.5));
        assert!(AnnealSchedule { every: 0, ..s }.validate().is_err());
    }

    #[test]
    fn barrier_renormalizes_and_handles_underflow() {
        let t = [1u8, 1, 1, 0, 0];
        let cohorts = Cohorts::from_treatments(&t).unwrap();
        let s = [0.3, -0.2, 0.9, 0.1, 0.0];
        for temp in [0.5, 50.0, 1e8] {
            let b = apply_barrier(&s, &cohorts, 0.45, temp);
            for g in cohorts.groups() {
                let sum: f64 = g.iter().map(|&i| b.p_hat[i]).sum();
                assert!((sum - 1.0).abs() < 1e-9, "{temp}");
            }
            assert!(b.p_hat.iter().all(|v| v.is_finite()));
        }
    }

    fn synth(n: usize, seed: u64) -> Dataset {
        generate_synthetic(&SyntheticConfig::heterogeneous(n, 4), RngSeed(seed)).unwrap().0
    }

    #[test]
    fn full_percentage_reduces_to_drm() {
        let ds = synth(200, 1);
        let p = nn::init_params(&[4, 1], RngSeed(2)).unwrap();
        let a = constrained_objective(&p, &ds, Constraint::Percentage { p: 1.0 }, 10.0, 0.0).unwrap();
        let b = drm_objective(&p, &ds, 0.0).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn hard_limit_matches_restricted_objective() {
        let ds = synth(120, 4);
        let params = nn::init_params(&[4, 1], RngSeed(3)).unwrap();
        let x = ds.feature_matrix();
        let scores = nn::forward(&params, x.view()).unwrap().to_vec();
        let t = ds.treatments();
        let p = effectiveness_probs(&scores, &t).unwrap().p;
        let d = select_threshold_percentage(&p, 0.5);

        // oracle: top-half subset, probabilities renormalized within cohort
        let keep: Vec<usize> = (0..ds.len()).filter(|&i| p[i] > d).collect();
        assert_eq!(keep.len(), 60);
        let (mut zt, mut zc) = (0.0, 0.0);
        for &i in &keep {
            if t[i] == 1 {
                zt += p[i]
            } else {
                zc += p[i]
            }
        }
        let (mut tr, mut tc) = (0.0, 0.0);
        for &i in &keep {
            let u = &ds.samples()[i];
            let (q, sgn) = if t[i] == 1 { (p[i] / zt, 1.0) } else { (p[i] / zc, -1.0) };
            tr += sgn * q * u.y_r;
            tc += sgn * q * u.y_c;
        }
        let oracle = tr / (softplus(tc) + crate::drm::RECTIFIER_EPS);
        let got = constrained_objective(&params, &ds, Constraint::Percentage { p: 0.5 }, 1e9, 0.0).unwrap();
        assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
    }

    #[test]
    fn uniform_scores_uniform_survivors() {
        let ds = synth(50, 5);
        let params = ScorerParams::zeros(vec![4, 1]).unwrap();
        let obj = ConstrainedObjective::new(
            &ds,
            ObjectiveForm::Ratio,
            None,
            Constraint::Percentage { p: 0.5 },
            BudgetOrder::Effectiveness,
            3.0,
        )
        .unwrap();
        let scores = nn::forward(&params, ds.feature_matrix().view()).unwrap().to_vec();
        let (_, b) = obj.pool(&scores);
        let cohorts = ds.cohorts().unwrap();
        for g in cohorts.groups() {
            for &i in g.iter() {
                assert!((b.p_hat[i] - 1.0 / g.len() as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trained_pass_fraction_matches_percentage() {
        let ds = synth(500, 6);
        let cfg = ConstrainedConfig {
            train: TrainConfig { iterations: 100, ..TrainConfig::default() },
            ..ConstrainedConfig::default()
        };
        let out = train_constrained(&ds, &cfg, None).unwrap();
        let b = out.trace.last().unwrap().barrier.unwrap();
        assert!((b.pass_fraction - 0.4).abs() <= 1.0 / 500.0 + 1e-12);
        assert!((b.temperature - cfg.schedule.temperature(100)).abs() < 1e-12);
    }
}
