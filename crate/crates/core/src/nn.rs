//! The scoring network `f(x|θ)`, its analytic gradient and Adam.
//!
//! Every layer is affine followed by `tanh`, so scores lie in (−1, 1).
//! Parameters live in one flat vector (per layer: row-major `out×in`
//! weights, then `out` biases) which keeps the optimizer and the
//! finite-difference checks shape-agnostic.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::RngSeed;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    layer_sizes: Vec<usize>,
    theta: Vec<f64>,
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::InvalidShape(format!("need input and output widths, got {sizes:?}")));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidShape(format!("zero-width layer in {sizes:?}")));
    }
    if *sizes.last().unwrap() != 1 {
        return Err(Error::InvalidShape(format!("output width must be 1, got {sizes:?}")));
    }
    Ok(())
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl ScorerParams {
    pub fn from_flat(layer_sizes: Vec<usize>, theta: Vec<f64>) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        let expected = param_count(&layer_sizes);
        if theta.len() != expected {
            return Err(Error::ShapeMismatch { expected, got: theta.len() });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scorer parameters"));
        }
        Ok(Self { layer_sizes, theta })
    }

    pub fn zeros(layer_sizes: Vec<usize>) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        let n = param_count(&layer_sizes);
        Ok(Self { layer_sizes, theta: vec![0.0; n] })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn squared_norm(&self) -> f64 {
        self.theta.iter().map(|v| v * v).sum()
    }

    /// Same shape, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self { layer_sizes: self.layer_sizes.clone(), theta: vec![0.0; self.theta.len()] }
    }

    fn layer_offsets(&self) -> Vec<(usize, usize, usize)> {
        let mut off = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let o = off;
                off += w[0] * w[1] + w[1];
                (o, w[0], w[1])
            })
            .collect()
    }

    /// `(weights out×in, bias)` views for each layer.
    pub fn layers(&self) -> Vec<(ArrayView2<'_, f64>, &[f64])> {
        self.layer_offsets()
            .into_iter()
            .map(|(o, fan_in, fan_out)| {
                let w = ArrayView2::from_shape((fan_out, fan_in), &self.theta[o..o + fan_in * fan_out]).unwrap();
                (w, &self.theta[o + fan_in * fan_out..o + fan_in * fan_out + fan_out])
            })
            .collect()
    }

    fn check_shape(&self, other: &ScorerParams) -> Result<()> {
        if self.layer_sizes != other.layer_sizes {
            return Err(Error::ShapeMismatch { expected: self.theta.len(), got: other.theta.len() });
        }
        Ok(())
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(layer_sizes: &[usize], seed: RngSeed) -> Result<ScorerParams> {
    let mut p = ScorerParams::zeros(layer_sizes.to_vec())?;
    let mut rng = seed.rng();
    for (o, fan_in, fan_out) in p.layer_offsets() {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in &mut p.theta[o..o + fan_in * fan_out] {
            *w = rng.random_range(-a..a);
        }
    }
    Ok(p)
}

/// Activations of every layer, input first.
struct Trace {
    acts: Vec<Array2<f64>>,
}

fn forward_trace(p: &ScorerParams, x: ArrayView2<'_, f64>) -> Result<Trace> {
    if x.ncols() != p.input_dim() {
        return Err(Error::ShapeMismatch { expected: p.input_dim(), got: x.ncols() });
    }
    let mut acts = vec![x.to_owned()];
    for (w, b) in p.layers() {
        let mut z = acts.last().unwrap().dot(&w.t());
        for mut row in z.rows_mut() {
            row.iter_mut().zip(b).for_each(|(v, bj)| *v = (*v + bj).tanh());
        }
        acts.push(z);
    }
    Ok(Trace { acts })
}

pub fn forward(p: &ScorerParams, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let trace = forward_trace(p, x)?;
    Ok(trace.acts.last().unwrap().column(0).to_owned())
}

/// Backpropagates `d objective / d score_i` into parameter space.
pub fn backward(p: &ScorerParams, x: ArrayView2<'_, f64>, dscores: &[f64]) -> Result<ScorerParams> {
    if dscores.len() != x.nrows() {
        return Err(Error::ShapeMismatch { expected: x.nrows(), got: dscores.len() });
    }
    let trace = forward_trace(p, x)?;
    Ok(backward_trace(p, &trace, dscores))
}

fn backward_trace(p: &ScorerParams, trace: &Trace, dscores: &[f64]) -> ScorerParams {
    let mut grads = p.zeros_like();
    let offsets = p.layer_offsets();
    let layers = p.layers();
    let out = trace.acts.last().unwrap();
    let mut delta = Array2::from_shape_fn((out.nrows(), 1), |(i, _)| dscores[i] * (1.0 - out[[i, 0]].powi(2)));
    for l in (0..layers.len()).rev() {
        let (o, fan_in, fan_out) = offsets[l];
        let input = &trace.acts[l];
        let gw = delta.t().dot(input);
        let gb = delta.sum_axis(Axis(0));
        grads.theta[o..o + fan_in * fan_out].copy_from_slice(gw.as_slice().unwrap());
        grads.theta[o + fan_in * fan_out..o + fan_in * fan_out + fan_out].copy_from_slice(gb.as_slice().unwrap());
        if l > 0 {
            let mut next = delta.dot(&layers[l].0);
            next.zip_mut_with(input, |d, a| *d *= 1.0 - a * a);
            delta = next;
        }
    }
    grads
}

/// A scalar objective of the score vector with its analytic score gradient.
/// Objectives are maximized.
pub trait ScoreObjective {
    fn value_and_grad(&self, scores: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn value(&self, scores: &[f64]) -> Result<f64> {
        Ok(self.value_and_grad(scores)?.0)
    }
}

/// `obj(f(X|θ)) − l2·‖θ‖²` and its exact gradient in θ.
pub fn gradient<O: ScoreObjective + ?Sized>(
    obj: &O,
    p: &ScorerParams,
    x: ArrayView2<'_, f64>,
    l2: f64,
) -> Result<(f64, ScorerParams)> {
    let trace = forward_trace(p, x)?;
    let scores = trace.acts.last().unwrap().column(0).to_vec();
    let (mut value, dscores) = obj.value_and_grad(&scores)?;
    if dscores.len() != scores.len() {
        return Err(Error::ShapeMismatch { expected: scores.len(), got: dscores.len() });
    }
    let mut g = backward_trace(p, &trace, &dscores);
    if l2 != 0.0 {
        value -= l2 * p.squared_norm();
        g.theta.iter_mut().zip(&p.theta).for_each(|(gi, ti)| *gi -= 2.0 * l2 * ti);
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    if g.theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok((value, g))
}

/// Objective value only, same composition as [`gradient`].
pub fn objective_value<O: ScoreObjective + ?Sized>(
    obj: &O,
    p: &ScorerParams,
    x: ArrayView2<'_, f64>,
    l2: f64,
) -> Result<f64> {
    let scores = forward(p, x)?;
    let v = obj.value(scores.as_slice().unwrap())? - l2 * p.squared_norm();
    if !v.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, p: &ScorerParams) -> Self {
        Self { config, m: vec![0.0; p.len()], v: vec![0.0; p.len()], step: 0 }
    }

    /// One ascent step on a maximized objective.
    pub fn step_in_place(&mut self, p: &mut ScorerParams, grads: &ScorerParams) -> Result<()> {
        p.check_shape(grads)?;
        if self.m.len() != p.len() {
            return Err(Error::ShapeMismatch { expected: self.m.len(), got: p.len() });
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (((theta, g), m), v) in p.theta.iter_mut().zip(&grads.theta).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *theta += lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        }
        Ok(())
    }
}

pub fn adam_step(state: &AdamState, p: &ScorerParams, grads: &ScorerParams) -> Result<(AdamState, ScorerParams)> {
    let mut s = state.clone();
    let mut q = p.clone();
    s.step_in_place(&mut q, grads)?;
    Ok((s, q))
}
