//! R-learner baseline: ridge base learners, propensity models, the two-stage
//! residual-on-residual fit and the Lagrangian combination of value and cost
//! effect models.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::drm::PROPENSITY_CLIP;
use crate::error::{Error, Result};
use crate::eval::{aucc, cost_curve, Grid};
use crate::train::FeatureScaler;
use crate::util::sigmoid;

/// Relative pivot size below which a normal-equation system is treated as singular.
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub reg: f64,
}

impl RidgeModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.weights.len() {
            return Err(Error::ShapeMismatch { expected: self.weights.len(), got: x.ncols() });
        }
        Ok(x.rows()
            .into_iter()
            .map(|r| self.intercept + r.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>())
            .collect())
    }
}

pub fn fit_ridge(x: ArrayView2<'_, f64>, y: &[f64], reg: f64) -> Result<RidgeModel> {
    fit_ridge_weighted(x, y, None, reg)
}

/// Minimizes `Σ w_i (y_i − x_iᵀβ − b)² + reg‖β‖²` with an unpenalized intercept.
pub fn fit_ridge_weighted(x: ArrayView2<'_, f64>, y: &[f64], weights: Option<&[f64]>, reg: f64) -> Result<RidgeModel> {
    let (n, d) = x.dim();
    if y.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: y.len() });
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: w.len() });
        }
        if w.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("regression weights must be finite and nonnegative".into()));
        }
    }
    if !(reg >= 0.0) || !reg.is_finite() {
        return Err(Error::Config(format!("ridge penalty must be nonnegative, got {reg}")));
    }
    if n == 0 {
        return Err(Error::InvalidShape("no rows to fit".into()));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression input"));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..n).map(w).sum();
    if wsum <= 0.0 {
        return Err(Error::SingularSystem("all regression weights are zero".into()));
    }
    let mut xbar = vec![0.0; d];
    let mut ybar = 0.0;
    for (i, row) in x.rows().into_iter().enumerate() {
        let wi = w(i) / wsum;
        ybar += wi * y[i];
        for (m, v) in xbar.iter_mut().zip(row) {
            *m += wi * v;
        }
    }
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut xc = vec![0.0; d];
    for (i, row) in x.rows().into_iter().enumerate() {
        let wi = w(i);
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            xc[j] = row[j] - xbar[j];
        }
        let yc = y[i] - ybar;
        for j in 0..d {
            rhs[j] += wi * xc[j] * yc;
            for k in 0..=j {
                a[(j, k)] += wi * xc[j] * xc[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            a[(k, j)] = a[(j, k)];
        }
        a[(j, j)] += reg;
    }
    let beta = solve_spd(a, rhs)?;
    let weights: Vec<f64> = beta.iter().copied().collect();
    let intercept = ybar - weights.iter().zip(&xbar).map(|(w, m)| w * m).sum::<f64>();
    Ok(RidgeModel { weights, intercept, reg })
}

fn solve_spd(a: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let d = a.nrows();
    if d == 0 {
        return Ok(rhs);
    }
    let scale = (0..d).map(|j| a[(j, j)]).fold(0.0, f64::max);
    if scale <= 0.0 {
        return Err(Error::SingularSystem("design has no variance".into()));
    }
    let chol =
        a.cholesky().ok_or_else(|| Error::SingularSystem("normal equations are not positive definite".into()))?;
    let l = chol.l_dirty();
    for j in 0..d {
        if l[(j, j)] * l[(j, j)] < PIVOT_TOL * scale {
            return Err(Error::SingularSystem(format!("rank-deficient design (column {j})")));
        }
    }
    Ok(chol.solve(&rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropensityKind {
    Constant,
    #[default]
    Logistic,
    /// Least-squares linear probability model.
    Linear,
}

impl std::str::FromStr for PropensityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "logistic" => Ok(Self::Logistic),
            "linear" => Ok(Self::Linear),
            _ => Err(Error::Config(format!("unknown propensity kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PropensityModel {
    Constant { e_hat: f64 },
    Logistic { weights: Vec<f64>, intercept: f64 },
    Linear { weights: Vec<f64>, intercept: f64 },
}

impl PropensityModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let (lo, hi) = PROPENSITY_CLIP;
        let lin = |w: &[f64], b: f64| b + w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        let e = match self {
            Self::Constant { e_hat } => *e_hat,
            Self::Logistic { weights, intercept } => sigmoid(lin(weights, *intercept)),
            Self::Linear { weights, intercept } => lin(weights, *intercept),
        };
        e.clamp(lo, hi)
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|r| match r.as_slice() {
                Some(s) => self.predict_row(s),
                None => self.predict_row(&r.to_vec()),
            })
            .collect()
    }
}

pub const LOGISTIC_ITERS: usize = 500;
pub const LOGISTIC_LR: f64 = 0.1;

pub fn fit_propensity(x: ArrayView2<'_, f64>, t: &[u8], kind: PropensityKind) -> Result<PropensityModel> {
    if t.len() != x.nrows() {
        return Err(Error::ShapeMismatch { expected: x.nrows(), got: t.len() });
    }
    let n1 = t.iter().filter(|&&t| t == 1).count();
    if n1 == 0 || n1 == t.len() {
        return Err(Error::EmptyCohort(if n1 == 0 { "treated".into() } else { "control".into() }));
    }
    match kind {
        PropensityKind::Constant => Ok(PropensityModel::Constant { e_hat: n1 as f64 / t.len() as f64 }),
        PropensityKind::Linear => {
            let y: Vec<f64> = t.iter().map(|&t| f64::from(t)).collect();
            let m = fit_ridge(x, &y, 0.0)?;
            Ok(PropensityModel::Linear { weights: m.weights, intercept: m.intercept })
        }
        PropensityKind::Logistic => {
            let scaler = FeatureScaler::fit(x);
            let xs = scaler.transform(x);
            let (n, d) = xs.dim();
            let mut w = vec![0.0; d];
            let mut b = 0.0;
            let mut g = vec![0.0; d];
            for _ in 0..LOGISTIC_ITERS {
                g.iter_mut().for_each(|v| *v = 0.0);
                let mut gb = 0.0;
                for (i, row) in xs.rows().into_iter().enumerate() {
                    let z = b + row.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>();
                    let r = f64::from(t[i]) - sigmoid(z);
                    gb += r;
                    for (gj, xj) in g.iter_mut().zip(row) {
                        *gj += r * xj;
                    }
                }
                b += LOGISTIC_LR * gb / n as f64;
                for (wj, gj) in w.iter_mut().zip(&g) {
                    *wj += LOGISTIC_LR * gj / n as f64;
                }
            }
            // back to raw feature space
            let weights: Vec<f64> = w.iter().zip(&scaler.scale).map(|(w, s)| w / s).collect();
            let intercept = b - weights.iter().zip(&scaler.mean).map(|(w, m)| w * m).sum::<f64>();
            Ok(PropensityModel::Logistic { weights, intercept })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum Outcome {
    Value,
    Cost,
    /// `y_r − lambda·y_c`
    Combined {
        lambda: f64,
    },
}

fn outcome_values(ds: &Dataset, outcome: Outcome) -> Vec<f64> {
    ds.samples()
        .iter()
        .map(|s| match outcome {
            Outcome::Value => s.y_r,
            Outcome::Cost => s.y_c,
            Outcome::Combined { lambda } => s.y_r - lambda * s.y_c,
        })
        .collect()
}

/// Two-stage fit of `y − m(x) = (t − e(x)) τ(x) + ε` with linear `m` and `τ`.
pub fn rlearner_fit(ds: &Dataset, outcome: Outcome, prop: &PropensityModel, reg: f64) -> Result<RidgeModel> {
    ds.cohorts()?;
    let x = ds.feature_matrix();
    let y = outcome_values(ds, outcome);
    let m = fit_ridge(x.view(), &y, reg)?;
    let m_hat = m.predict(x.view())?;
    let e = prop.predict(x.view());
    let t = ds.treatments();
    let mut target = Vec::with_capacity(y.len());
    let mut weight = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        let r = f64::from(t[i]) - e[i];
        target.push((y[i] - m_hat[i]) / r);
        weight.push(r * r);
    }
    fit_ridge_weighted(x.view(), &target, Some(&weight), reg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualitySolution {
    pub z: Vec<f64>,
    pub lambda: f64,
    pub s: Vec<f64>,
    pub spend: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualityConfig {
    pub alpha: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for DualityConfig {
    fn default() -> Self {
        Self { alpha: 0.01, max_iters: 2000, tol: 1e-9 }
    }
}

fn select_at(tau_r: &[f64], tau_c: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let s: Vec<f64> = tau_r.iter().zip(tau_c).map(|(r, c)| r - lambda * c).collect();
    let z: Vec<f64> = s.iter().map(|&s| if s >= 0.0 { 1.0 } else { 0.0 }).collect();
    let spend = z.iter().zip(tau_c).map(|(z, c)| z * c).sum();
    let value = z.iter().zip(tau_r).map(|(z, r)| z * r).sum();
    (s, z, spend, value)
}

/// Growth of the dual step until the budget residual first changes sign.
const STEP_GROWTH: f64 = 1.5;

/// Projected dual ascent on `max Σ z τ_r  s.t.  Σ z τ_c ≤ B, z ∈ [0,1]`.
/// The step grows until the budget residual first changes sign and halves
/// on every flip; when the final iterate overspends the best budget-feasible
/// iterate is returned.
pub fn duality_solve(tau_r: &[f64], tau_c: &[f64], b: f64, cfg: &DualityConfig) -> Result<DualitySolution> {
    if tau_r.len() != tau_c.len() {
        return Err(Error::ShapeMismatch { expected: tau_r.len(), got: tau_c.len() });
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Config(format!("budget must be positive, got {b}")));
    }
    if tau_r.iter().chain(tau_c).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("effect estimates"));
    }
    let mut lambda = 0.0;
    let mut alpha = cfg.alpha;
    let mut prev_sign = 0.0;
    let mut bracketed = false;
    let mut best: Option<(f64, f64)> = None; // (value, lambda)
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..cfg.max_iters {
        iterations = it + 1;
        let (_, _, spend, value) = select_at(tau_r, tau_c, lambda);
        let residual = b - spend;
        if residual >= 0.0 && best.is_none_or(|(v, _)| value > v) {
            best = Some((value, lambda));
        }
        let sign = residual.signum();
        if prev_sign != 0.0 && sign != 0.0 {
            if sign != prev_sign {
                alpha *= 0.5;
                bracketed = true;
            } else if !bracketed {
                alpha *= STEP_GROWTH;
            }
        }
        if sign != 0.0 {
            prev_sign = sign;
        }
        let next = (lambda - alpha * residual).max(0.0);
        let delta = (next - lambda).abs();
        lambda = next;
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    let (_, _, spend, _) = select_at(tau_r, tau_c, lambda);
    if spend > b {
        if let Some((_, l)) = best {
            lambda = l;
        }
    }
    let (s, z, spend, _) = select_at(tau_r, tau_c, lambda);
    Ok(DualitySolution { z, lambda, s, spend, converged, iterations })
}

/// `τ_r(x) − λ τ_c(x)` per row.
pub fn duality_score(tau_r: &RidgeModel, tau_c: &RidgeModel, lambda: f64, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let r = tau_r.predict(x)?;
    let c = tau_c.predict(x)?;
    Ok(r.iter().zip(&c).map(|(r, c)| r - lambda * c).collect())
}

pub const LAMBDA_GRID: [f64; 6] = [0.001, 0.005, 0.01, 0.05, 0.1, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityModel {
    pub tau_r: RidgeModel,
    pub tau_c: RidgeModel,
    pub lambda: f64,
    pub propensity: PropensityModel,
    /// Validation AUCC per grid value; `None` where the curve is undefined.
    pub validation: Vec<(f64, Option<f64>)>,
}

impl DualityModel {
    pub fn score(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        duality_score(&self.tau_r, &self.tau_c, self.lambda, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RLearnerConfig {
    pub reg: f64,
    pub propensity: PropensityKind,
    pub lambda_grid: Vec<f64>,
}

impl Default for RLearnerConfig {
    fn default() -> Self {
        Self { reg: 0.0, propensity: PropensityKind::Logistic, lambda_grid: LAMBDA_GRID.to_vec() }
    }
}

/// Fits value and cost effect models on `train` and picks λ by AUCC on `val`.
/// Ties keep the smaller λ.
pub fn fit_duality(train: &Dataset, val: &Dataset, cfg: &RLearnerConfig, grid: &Grid) -> Result<DualityModel> {
    if cfg.lambda_grid.is_empty() || cfg.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Config("lambda grid must be nonempty and nonnegative".into()));
    }
    let propensity = fit_propensity(train.feature_matrix().view(), &train.treatments(), cfg.propensity)?;
    let tau_r = rlearner_fit(train, Outcome::Value, &propensity, cfg.reg)?;
    let tau_c = rlearner_fit(train, Outcome::Cost, &propensity, cfg.reg)?;
    let xv = val.feature_matrix();
    let mut validation = Vec::with_capacity(cfg.lambda_grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &cfg.lambda_grid {
        let scores = duality_score(&tau_r, &tau_c, lambda, xv.view())?;
        let a = cost_curve(&scores, val, grid).and_then(|c| aucc(&c)).ok();
        if let Some(a) = a {
            if best.is_none_or(|(b, _)| a > b) {
                best = Some((a, lambda));
            }
        }
        validation.push((lambda, a));
    }
    let lambda = match best {
        Some((_, l)) => l,
        None => {
            log::warn!("validation AUCC undefined for every lambda; using {}", cfg.lambda_grid[0]);
            cfg.lambda_grid[0]
        }
    };
    Ok(DualityModel { tau_r, tau_c, lambda, propensity, validation })
}

/// Single combined-outcome R-learner with λ chosen by validation AUCC.
pub fn fit_combined(
    train: &Dataset,
    val: &Dataset,
    cfg: &RLearnerConfig,
    grid: &Grid,
) -> Result<(RidgeModel, f64, PropensityModel)> {
    if cfg.lambda_grid.is_empty() || cfg.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Config("lambda grid must be nonempty and nonnegative".into()));
    }
    let propensity = fit_propensity(train.feature_matrix().view(), &train.treatments(), cfg.propensity)?;
    let xv = val.feature_matrix();
    let mut best: Option<(f64, f64, RidgeModel)> = None;
    let mut first = None;
    for &lambda in &cfg.lambda_grid {
        let m = rlearner_fit(train, Outcome::Combined { lambda }, &propensity, cfg.reg)?;
        let scores = m.predict(xv.view())?;
        if let Ok(a) = cost_curve(&scores, val, grid).and_then(|c| aucc(&c)) {
            if best.as_ref().is_none_or(|(b, _, _)| a > *b) {
                best = Some((a, lambda, m.clone()));
            }
        }
        first.get_or_insert((lambda, m));
    }
    let (lambda, model) = match best {
        Some((_, l, m)) => (l, m),
        None => first.expect("nonempty grid"),
    };
    Ok((model, lambda, propensity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RngSeed;
    use crate::ingest::{generate_synthetic, SyntheticConfig, TauSpec, TreatProb};
    use ndarray::{array, Array2};
    use rand::Rng;

    #[test]
    fn ridge_exact_recovery() {
        let mut rng = RngSeed(1).rng();
        let x = Array2::from_shape_fn((50, 3), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = x.rows().into_iter().map(|r| 0.5 + 2.0 * r[0] - r[1] + 0.25 * r[2]).collect();
        let m = fit_ridge(x.view(), &y, 0.0).unwrap();
        let pred = m.predict(x.view()).unwrap();
        assert!(pred.iter().zip(&y).all(|(p, y)| (p - y).abs() < 1e-8));
    }

    #[test]
    fn ridge_orthonormal_shrinkage() {
        // centered orthonormal columns: w = Xᵀ(y − ȳ) / (1 + r)
        let h = 0.5;
        let x = array![[h, h], [h, -h], [-h, h], [-h, -h]];
        let y = [3.0, 1.0, 0.0, 4.0];
        let ybar = 2.0;
        for r in [0.0, 0.5, 3.0] {
            let m = fit_ridge(x.view(), &y, r).unwrap();
            for j in 0..2 {
                let oracle: f64 = (0..4).map(|i| x[[i, j]] * (y[i] - ybar)).sum::<f64>() / (1.0 + r);
                assert!((m.weights[j] - oracle).abs() < 1e-12);
            }
            assert!((m.intercept - ybar).abs() < 1e-12);
        }
    }

    #[test]
    fn ridge_constant_target_and_singular() {
        let x = array![[1.0, 2.0], [3.0, 1.0], [0.0, 5.0]];
        let m = fit_ridge(x.view(), &[7.0; 3], 0.0).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-12));
        assert!((m.intercept - 7.0).abs() < 1e-12);
        let dup = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        assert!(matches!(fit_ridge(dup.view(), &[1.0, 2.0, 4.0], 0.0), Err(Error::SingularSystem(_))));
        assert!(fit_ridge(dup.view(), &[1.0, 2.0, 4.0], 0.1).is_ok());
    }

    #[test]
    fn propensity_examples() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let c = fit_propensity(x.view(), &[1, 1, 0, 0], PropensityKind::Constant).unwrap();
        assert_eq!(c, PropensityModel::Constant { e_hat: 0.5 });
        assert!(matches!(
            fit_propensity(x.view(), &[1, 1, 1, 1], PropensityKind::Logistic),
            Err(Error::EmptyCohort(_))
        ));

        let x = Array2::from_shape_fn((200, 1), |(i, _)| i as f64 - 100.0);
        let t: Vec<u8> = (0..200).map(|i| (i >= 100) as u8).collect();
        let sep = fit_propensity(x.view(), &t, PropensityKind::Logistic).unwrap();
        let e = sep.predict(x.view());
        assert_eq!(e[0], 0.01);
        assert_eq!(e[199], 0.99);
    }

    #[test]
    fn propensity_independent_treatment() {
        let cfg = SyntheticConfig { treat_prob: TreatProb::Constant(0.5), ..SyntheticConfig::heterogeneous(10_000, 5) };
        let (ds, _) = generate_synthetic(&cfg, RngSeed(3)).unwrap();
        let m = fit_propensity(ds.feature_matrix().view(), &ds.treatments(), PropensityKind::Logistic).unwrap();
        let e = m.predict(ds.feature_matrix().view());
        let inside = e.iter().filter(|e| (0.45..=0.55).contains(*e)).count();
        assert!(inside as f64 >= 0.95 * e.len() as f64);
    }

    #[test]
    fn constant_effect_identified_exactly() {
        let cfg = SyntheticConfig {
            treat_prob: TreatProb::Constant(0.5),
            noise_sd: 0.0,
            tau_r: TauSpec::constant(2.0),
            ..SyntheticConfig::heterogeneous(2000, 4)
        };
        let (ds, _) = generate_synthetic(&cfg, RngSeed(4)).unwrap();
        let prop = fit_propensity(ds.feature_matrix().view(), &ds.treatments(), PropensityKind::Linear).unwrap();
        let m = rlearner_fit(&ds, Outcome::Value, &prop, 0.0).unwrap();
        for p in m.predict(ds.feature_matrix().view()).unwrap() {
            assert!((p - 2.0).abs() < 1e-6, "{p}");
        }
    }

    #[test]
    fn combined_is_linear_in_targets() {
        let (ds, _) = generate_synthetic(&SyntheticConfig::heterogeneous(800, 4), RngSeed(5)).unwrap();
        let prop = fit_propensity(ds.feature_matrix().view(), &ds.treatments(), PropensityKind::Logistic).unwrap();
        let v = rlearner_fit(&ds, Outcome::Value, &prop, 0.0).unwrap();
        let c = rlearner_fit(&ds, Outcome::Cost, &prop, 0.0).unwrap();
        let z = rlearner_fit(&ds, Outcome::Combined { lambda: 0.0 }, &prop, 0.0).unwrap();
        assert_eq!(z, v);
        let l = 0.3;
        let comb = rlearner_fit(&ds, Outcome::Combined { lambda: l }, &prop, 0.0).unwrap();
        let x = ds.feature_matrix();
        let a = comb.predict(x.view()).unwrap();
        let b = duality_score(&v, &c, l, x.view()).unwrap();
        assert!(a.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn duality_examples() {
        let cfg = DualityConfig::default();
        let sol = duality_solve(&[3.0, 1.0], &[2.0, 2.0], 2.0, &cfg).unwrap();
        assert_eq!(sol.z, vec![1.0, 0.0]);
        assert!(sol.lambda > 0.5 && sol.lambda <= 1.5, "{}", sol.lambda);
        assert_eq!(sol.spend, 2.0);

        let sol = duality_solve(&[3.0, -1.0, 0.5], &[1.0, 1.0, 1.0], 10.0, &cfg).unwrap();
        assert_eq!(sol.lambda, 0.0);
        assert_eq!(sol.z, vec![1.0, 0.0, 1.0]);
        assert!(sol.converged);
    }

    #[test]
    fn duality_score_examples() {
        let r = RidgeModel { weights: vec![1.0, -2.0], intercept: 0.5, reg: 0.0 };
        let x = array![[1.0, 1.0], [0.0, 3.0]];
        assert_eq!(duality_score(&r, &r, 0.0, x.view()).unwrap(), r.predict(x.view()).unwrap());
        assert!(duality_score(&r, &r, 1.0, x.view()).unwrap().iter().all(|s| *s == 0.0));
    }
}
