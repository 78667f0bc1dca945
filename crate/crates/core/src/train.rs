//! The Adam ascent loop shared by the direct and constrained rankers.

use std::cell::RefCell;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::RngSeed;
use crate::drm::{ObjectiveForm, TauEstimate};
use crate::error::{Error, Result};
use crate::nn::{self, AdamConfig, AdamState, ScoreObjective, ScorerParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Hidden widths; empty means the single layer `tanh(wᵀx + b)`.
    pub hidden: Vec<usize>,
    pub iterations: usize,
    pub adam: AdamConfig,
    pub l2: f64,
    pub seed: RngSeed,
    /// Train on z-scored features and fold the scaling into the first layer.
    pub standardize: bool,
    /// Stratified mini-batches; `None` is full batch.
    pub batch_size: Option<usize>,
    pub form: ObjectiveForm,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: Vec::new(),
            iterations: 1500,
            adam: AdamConfig::default(),
            l2: 0.0,
            seed: RngSeed(0),
            standardize: true,
            batch_size: None,
            form: ObjectiveForm::Ratio,
        }
    }
}

impl TrainConfig {
    pub fn layer_sizes(&self, d: usize) -> Vec<usize> {
        let mut s = vec![d];
        s.extend(&self.hidden);
        s.push(1);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierTrace {
    pub temperature: f64,
    pub d_star: f64,
    pub pass_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub dscores: Vec<f64>,
    pub estimate: TauEstimate,
    pub barrier: Option<BarrierTrace>,
}

/// An objective of the score vector that also reports diagnostics.
pub trait Evaluate {
    fn evaluate(&self, scores: &[f64]) -> Result<Evaluation>;
}

struct Recorder<'a, O> {
    inner: &'a O,
    last: RefCell<Option<Evaluation>>,
}

impl<O: Evaluate> ScoreObjective for Recorder<'_, O> {
    fn value_and_grad(&self, scores: &[f64]) -> Result<(f64, Vec<f64>)> {
        let e = self.inner.evaluate(scores)?;
        let out = (e.value, e.dscores.clone());
        *self.last.borrow_mut() = Some(e);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub tau_r: f64,
    pub tau_c: f64,
    pub barrier: Option<BarrierTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ScorerParams,
    /// Row `i` is evaluated before step `i`; the last row is the final model.
    pub trace: Vec<TraceRow>,
}

impl TrainOutcome {
    pub fn write_trace<W: Write>(&self, mut w: W) -> Result<()> {
        let barrier = self.trace.iter().any(|r| r.barrier.is_some());
        write!(w, "iteration,objective,tau_r,tau_c")?;
        if barrier {
            write!(w, ",temperature,d_star,pass_fraction")?;
        }
        writeln!(w)?;
        for r in &self.trace {
            write!(w, "{},{},{},{}", r.iteration, r.objective, r.tau_r, r.tau_c)?;
            if barrier {
                match r.barrier {
                    Some(b) => write!(w, ",{},{},{}", b.temperature, b.d_star, b.pass_fraction)?,
                    None => write!(w, ",,,")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_trace(f)
    }
}

/// Column means and standard deviations; zero-variance columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = x.mean_axis(Axis(0)).map(|m| m.to_vec()).unwrap_or_else(|| vec![0.0; x.ncols()]);
        let scale = x
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(c, m)| {
                let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 1e-12 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    /// Rewrites the first layer so `p` applied to raw `x` equals the
    /// original applied to `transform(x)`.
    pub fn fold_into(&self, p: &mut ScorerParams) {
        let d = p.input_dim();
        let out = p.layer_sizes()[1];
        let theta = p.as_mut_slice();
        let (w, rest) = theta.split_at_mut(out * d);
        for o in 0..out {
            let mut shift = 0.0;
            for j in 0..d {
                let wj = &mut w[o * d + j];
                *wj /= self.scale[j];
                shift += *wj * self.mean[j];
            }
            rest[o] -= shift;
        }
    }
}

/// Stratified batches: every batch receives a proportional share of each cohort.
fn stratified_batches(treated: &[bool], batch: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    let n = treated.len();
    let nb = n.div_ceil(batch.max(1));
    let mut t: Vec<usize> = (0..n).filter(|&i| treated[i]).collect();
    let mut c: Vec<usize> = (0..n).filter(|&i| !treated[i]).collect();
    if t.len() < nb || c.len() < nb {
        return Err(Error::Config(format!("batch size {batch} leaves a batch without one cohort")));
    }
    t.shuffle(rng);
    c.shuffle(rng);
    Ok((0..nb)
        .map(|k| {
            let mut b: Vec<usize> = t[k * t.len() / nb..(k + 1) * t.len() / nb].to_vec();
            b.extend_from_slice(&c[k * c.len() / nb..(k + 1) * c.len() / nb]);
            b.sort_unstable();
            b
        })
        .collect())
}

/// Runs `cfg.iterations` Adam ascent steps. `make(step, subset)` builds the
/// objective for the rows in `subset` (all rows when `None`); `treated`
/// drives mini-batch stratification.
pub(crate) fn ascend<O, F>(
    x: ArrayView2<'_, f64>,
    treated: &[bool],
    cfg: &TrainConfig,
    mut make: F,
) -> Result<TrainOutcome>
where
    O: Evaluate,
    F: FnMut(usize, Option<&[usize]>) -> Result<O>,
{
    let scaler = cfg.standardize.then(|| FeatureScaler::fit(x));
    let xs = match &scaler {
        Some(s) => s.transform(x),
        None => x.to_owned(),
    };
    let mut params = nn::init_params(&cfg.layer_sizes(x.ncols()), cfg.seed)?;
    let mut adam = AdamState::new(cfg.adam, &params);
    let mut rng = cfg.seed.derive(1).rng();
    let mut batches: Vec<Vec<usize>> = Vec::new();
    let mut trace = Vec::with_capacity(cfg.iterations + 1);

    for step in 0..=cfg.iterations {
        let last = step == cfg.iterations;
        let (obj, xb) = match cfg.batch_size {
            Some(b) if !last => {
                if batches.is_empty() {
                    batches = stratified_batches(treated, b, &mut rng)?;
                    batches.reverse();
                }
                let idx = batches.pop().unwrap();
                (make(step, Some(&idx))?, Some(xs.select(Axis(0), &idx)))
            }
            _ => (make(step, None)?, None),
        };
        let rec = Recorder { inner: &obj, last: RefCell::new(None) };
        let view = xb.as_ref().map_or(xs.view(), |a| a.view());
        let (value, grad) = if last {
            (nn::objective_value(&rec, &params, view, cfg.l2)?, None)
        } else {
            let (v, g) = nn::gradient(&rec, &params, view, cfg.l2)?;
            (v, Some(g))
        };
        let e = rec.last.into_inner().expect("objective evaluated");
        trace.push(TraceRow {
            iteration: step,
            objective: value,
            tau_r: e.estimate.tau_r,
            tau_c: e.estimate.tau_c,
            barrier: e.barrier,
        });
        if let Some(g) = grad {
            adam.step_in_place(&mut params, &g)?;
        }
    }
    if let Some(s) = &scaler {
        s.fold_into(&mut params);
    }
    Ok(TrainOutcome { params, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn fold_preserves_scores() {
        let x = array![[1.0, 10.0, 3.0], [2.0, 20.0, 3.0], [4.0, -5.0, 3.0]];
        let s = FeatureScaler::fit(x.view());
        assert_eq!(s.scale[2], 1.0);
        for sizes in [vec![3, 1], vec![3, 4, 1]] {
            let p = nn::init_params(&sizes, RngSeed(9)).unwrap();
            let a = nn::forward(&p, s.transform(x.view()).view()).unwrap();
            let mut q = p.clone();
            s.fold_into(&mut q);
            let b = nn::forward(&q, x.view()).unwrap();
            for (a, b) in a.iter().zip(&b) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batches_cover_rows_and_keep_cohorts() {
        let treated: Vec<bool> = (0..103).map(|i| i % 4 == 0).collect();
        let mut rng = RngSeed(1).rng();
        let b = stratified_batches(&treated, 20, &mut rng).unwrap();
        assert_eq!(b.len(), 6);
        let mut all: Vec<usize> = b.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        for batch in &b {
            assert!(batch.iter().any(|&i| treated[i]) && batch.iter().any(|&i| !treated[i]));
        }
        assert!(stratified_batches(&treated, 1, &mut rng).is_err());
    }
}
