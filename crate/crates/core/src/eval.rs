//! Cost curves, AUCC, slope metrics and the propensity-weighted
//! generalization score.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RngSeed};
use crate::drm::{cohort_softmax, ObjectiveForm, PropensityWeights, TauObjective};
use crate::error::{Error, Result};
use crate::util::rank_desc;

/// Population fractions at which curves are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Grid(Vec<f64>);

impl TryFrom<Vec<f64>> for Grid {
    type Error = Error;

    fn try_from(q: Vec<f64>) -> Result<Self> {
        Grid::new(q)
    }
}

impl From<Grid> for Vec<f64> {
    fn from(g: Grid) -> Self {
        g.0
    }
}

impl Grid {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Config("empty grid".into()));
        }
        if q.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) || q.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("grid must be strictly increasing in (0, 1]: {q:?}")));
        }
        if *q.last().unwrap() != 1.0 {
            return Err(Error::Config("grid must end at 1.0".into()));
        }
        Ok(Self(q))
    }

    /// 5%, 10%, …, 100%.
    pub fn percent_steps(step: u32) -> Self {
        let step = step.clamp(1, 100);
        let mut q: Vec<f64> = (1..=100 / step).map(|k| f64::from(k * step) / 100.0).collect();
        if *q.last().unwrap() != 1.0 {
            q.push(1.0);
        }
        Self(q)
    }

    /// The fractions used for generalization tables.
    pub fn table() -> Self {
        Self(vec![0.15, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0])
    }

    pub fn fractions(&self) -> &[f64] {
        &self.0
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self::percent_steps(5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub q: f64,
    pub cost: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub points: Vec<CurvePoint>,
}

impl CostCurve {
    pub fn endpoint(&self) -> Option<CurvePoint> {
        self.points.last().copied()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["q", "cum_cost", "cum_value"])?;
        for p in &self.points {
            w.write_record([p.q.to_string(), p.cost.to_string(), p.value.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Treated count and the two ATEs over `idx`.
fn subset_ates(ds: &Dataset, idx: &[usize]) -> Result<(usize, f64, f64)> {
    let s = ds.samples();
    let (mut n1, mut n0) = (0usize, 0usize);
    let (mut r1, mut r0, mut c1, mut c0) = (0.0, 0.0, 0.0, 0.0);
    for &i in idx {
        let u = &s[i];
        if u.t == 1 {
            n1 += 1;
            r1 += u.y_r;
            c1 += u.y_c;
        } else {
            n0 += 1;
            r0 += u.y_r;
            c0 += u.y_c;
        }
    }
    if n1 == 0 {
        return Err(Error::EmptyCohort("treated".into()));
    }
    if n0 == 0 {
        return Err(Error::EmptyCohort("control".into()));
    }
    let (n1f, n0f) = (n1 as f64, n0 as f64);
    Ok((n1, r1 / n1f - r0 / n0f, c1 / n1f - c0 / n0f))
}

fn top_k(scores: &[f64], q: f64) -> (Vec<usize>, usize) {
    let order = rank_desc(scores);
    let k = ((q * scores.len() as f64).round() as usize).min(scores.len());
    (order, k)
}

/// Points `(n_treated·ATE_c, n_treated·ATE_r)` over the top-`q` prefix of the
/// ranking for each grid fraction. Fractions whose prefix lacks a cohort are
/// skipped with a warning; the full-population point is always present.
pub fn cost_curve(scores: &[f64], ds: &Dataset, grid: &Grid) -> Result<CostCurve> {
    if scores.len() != ds.len() {
        return Err(Error::ShapeMismatch { expected: ds.len(), got: scores.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    let order = rank_desc(scores);
    // The full population is summed in row order so its point does not depend on the scores.
    let all: Vec<usize> = (0..ds.len()).collect();
    let mut points = Vec::with_capacity(grid.fractions().len());
    for &q in grid.fractions() {
        let k = ((q * ds.len() as f64).round() as usize).min(ds.len());
        let idx = if k == ds.len() { &all[..] } else { &order[..k] };
        match subset_ates(ds, idx) {
            Ok((n1, ate_r, ate_c)) => points.push(CurvePoint { q, cost: n1 as f64 * ate_c, value: n1 as f64 * ate_r }),
            Err(e) if q < 1.0 => log::warn!("cost curve: skipping q = {q}: {e}"),
            Err(e) => return Err(e),
        }
    }
    Ok(CostCurve { points })
}

/// Normalized area under the cost curve: the trapezoid area from the origin
/// through every point, divided by the rectangle spanned by the final
/// (full-population) point. Points beyond the endpoint are clamped to it.
pub fn aucc(curve: &CostCurve) -> Result<f64> {
    let end = curve.endpoint().ok_or_else(|| Error::Undefined("empty cost curve".into()))?;
    if !(end.cost > 0.0) || !(end.value > 0.0) {
        return Err(Error::Undefined(format!(
            "full-population incremental cost {} and value {} must both be positive",
            end.cost, end.value
        )));
    }
    let (mut px, mut py) = (0.0, 0.0);
    let mut area = 0.0;
    for p in &curve.points {
        let (x, y) = (p.cost.min(end.cost), p.value.min(end.value));
        area += (x - px) * (y + py) / 2.0;
        px = x;
        py = y;
    }
    Ok(area / (end.cost * end.value))
}

/// `ATE_r / ATE_c` over a subset.
pub fn slope_r(ds: &Dataset) -> Result<f64> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let (_, r, c) = subset_ates(ds, &idx)?;
    if c == 0.0 {
        return Err(Error::Undefined("incremental cost is zero".into()));
    }
    Ok(r / c)
}

pub fn efficiency_gain(r_exploit: f64, r_explore: f64) -> Result<f64> {
    if r_explore == 0.0 {
        return Err(Error::Undefined("benchmark slope is zero".into()));
    }
    Ok((r_exploit - r_explore) / r_explore)
}

/// Propensity-weighted objective on the top-`q` users, with probabilities
/// from a per-cohort softmax of `scores` inside that subset.
pub fn generalization_score(
    scores: &[f64],
    ds: &Dataset,
    q: f64,
    w: &PropensityWeights,
    form: ObjectiveForm,
) -> Result<f64> {
    if scores.len() != ds.len() {
        return Err(Error::ShapeMismatch { expected: ds.len(), got: scores.len() });
    }
    if w.len() != ds.len() {
        return Err(Error::ShapeMismatch { expected: ds.len(), got: w.len() });
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!("fraction must be in (0, 1], got {q}")));
    }
    let (order, k) = top_k(scores, q);
    let mut idx = order[..k].to_vec();
    idx.sort_unstable();
    let sub = ds.select(&idx);
    let obj = TauObjective::new(&sub, form, Some(&w.select(&idx)))?;
    let sub_scores: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let p = cohort_softmax(&sub_scores, obj.cohorts());
    let v = obj.estimate(&p).objective;
    if !v.is_finite() {
        return Err(Error::NonFinite("generalization score"));
    }
    Ok(v)
}

/// One generalization score per grid fraction.
pub fn generalization_table(
    scores: &[f64],
    ds: &Dataset,
    grid: &Grid,
    w: &PropensityWeights,
    form: ObjectiveForm,
) -> Result<Vec<(f64, f64)>> {
    grid.fractions().iter().map(|&q| Ok((q, generalization_score(scores, ds, q, w, form)?))).collect()
}

/// Uniform random scores.
pub fn random_scores(n: usize, seed: RngSeed) -> Vec<f64> {
    use rand::Rng;
    let mut rng = seed.rng();
    (0..n).map(|_| rng.random::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetMeta, Strategy, UserSample};
    use crate::drm::tau_hat_propensity;
    use rand::Rng;

    fn ds_from(rows: &[(u8, f64, f64)]) -> Dataset {
        let samples = rows
            .iter()
            .enumerate()
            .map(|(i, &(t, y_r, y_c))| UserSample {
                id: i.to_string(),
                x: vec![i as f64],
                t,
                y_r,
                y_c,
                strategy: Strategy::Explore,
            })
            .collect();
        Dataset::new(samples, DatasetMeta::default()).unwrap()
    }

    fn small() -> Dataset {
        ds_from(&[(1, 5.0, 2.0), (0, 1.0, 1.0), (1, 3.0, 2.0), (0, 1.0, 1.0)])
    }

    #[test]
    fn curve_hand_example() {
        let c = cost_curve(&[4.0, 3.0, 2.0, 1.0], &small(), &Grid::new(vec![0.5, 1.0]).unwrap()).unwrap();
        assert_eq!(c.points[0], CurvePoint { q: 0.5, cost: 1.0, value: 4.0 });
        assert_eq!(c.points[1], CurvePoint { q: 1.0, cost: 2.0, value: 6.0 });
    }

    #[test]
    fn equal_scores_take_first_rows() {
        let c = cost_curve(&[0.0; 4], &small(), &Grid::new(vec![0.5, 1.0]).unwrap()).unwrap();
        // first half = users 0 and 1 by index
        assert_eq!(c.points[0], CurvePoint { q: 0.5, cost: 1.0, value: 4.0 });
    }

    #[test]
    fn skipped_points() {
        let c = cost_curve(&[4.0, 1.0, 3.0, 2.0], &small(), &Grid::new(vec![0.25, 0.5, 1.0]).unwrap()).unwrap();
        assert_eq!(c.points.len(), 1);
    }

    fn curve(pts: &[(f64, f64)]) -> CostCurve {
        CostCurve {
            points: pts
                .iter()
                .enumerate()
                .map(|(i, &(cost, value))| CurvePoint { q: (i + 1) as f64 / pts.len() as f64, cost, value })
                .collect(),
        }
    }

    #[test]
    fn aucc_examples() {
        assert!((aucc(&curve(&[(1.0, 1.0), (2.0, 2.0), (4.0, 4.0)])).unwrap() - 0.5).abs() < 1e-15);
        assert!((aucc(&curve(&[(0.0, 3.0), (5.0, 3.0)])).unwrap() - 1.0).abs() < 1e-15);
        // (0,0) → (C/2, V) → (C, V): (C/2)(V/2) + (C/2)V = 0.75·C·V
        assert!((aucc(&curve(&[(2.0, 6.0), (4.0, 6.0)])).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(aucc(&curve(&[(1.0, 1.0), (-1.0, 2.0)])), Err(Error::Undefined(_))));
        assert!(matches!(aucc(&curve(&[(1.0, 1.0), (1.0, 0.0)])), Err(Error::Undefined(_))));
    }

    #[test]
    fn aucc_clamps_overshoot() {
        let a = aucc(&curve(&[(1.0, 9.0), (2.0, 3.0)])).unwrap();
        // clamped to (1,3): 1·3/2 + 1·3 = 4.5 over 6
        assert!((a - 0.75).abs() < 1e-15);
    }

    #[test]
    fn slope_and_gain() {
        let ds = ds_from(&[(1, 6.0, 3.0), (0, 2.0, 1.0)]);
        assert_eq!(slope_r(&ds).unwrap(), 2.0);
        let ds = ds_from(&[(1, 2.0, 3.0), (0, 2.0, 1.0)]);
        assert_eq!(slope_r(&ds).unwrap(), 0.0);
        let ds = ds_from(&[(1, 2.0, 1.0), (0, 2.0, 1.0)]);
        assert!(matches!(slope_r(&ds), Err(Error::Undefined(_))));
        assert_eq!(efficiency_gain(3.0, 2.0).unwrap(), 0.5);
        assert_eq!(efficiency_gain(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(efficiency_gain(1.0, 2.0).unwrap(), -0.5);
        assert!(efficiency_gain(1.0, 0.0).is_err());
    }

    #[test]
    fn grids() {
        let g = Grid::default();
        assert_eq!(g.fractions().len(), 20);
        assert_eq!(g.fractions()[0], 0.05);
        assert_eq!(*g.fractions().last().unwrap(), 1.0);
        assert_eq!(Grid::table().fractions(), &[0.15, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0]);
        assert!(Grid::new(vec![0.5, 0.5, 1.0]).is_err());
        assert!(Grid::new(vec![0.5]).is_err());
    }

    #[test]
    fn generalization_constant_scores_reduce_to_subset_ratio() {
        let mut rng = RngSeed(2).rng();
        let rows: Vec<(u8, f64, f64)> =
            (0..40).map(|i| ((i % 2) as u8, rng.random_range(0.0..5.0), rng.random_range(0.0..2.0))).collect();
        let ds = ds_from(&rows);
        let w = PropensityWeights::constant(&ds.treatments());
        let g = generalization_score(&[1.0; 40], &ds, 0.5, &w, ObjectiveForm::Ratio).unwrap();
        let sub = ds.select(&(0..20).collect::<Vec<_>>());
        let idx: Vec<usize> = (0..20).collect();
        let (_, r, c) = subset_ates(&sub, &idx).unwrap();
        let oracle = r / (crate::util::softplus(c) + crate::drm::RECTIFIER_EPS);
        assert!((g - oracle).abs() < 1e-12);
    }

    #[test]
    fn generalization_matches_direct_sums() {
        let mut rng = RngSeed(3).rng();
        for _ in 0..20 {
            let n = 30;
            let rows: Vec<(u8, f64, f64)> =
                (0..n).map(|i| ((i % 3 == 0) as u8, rng.random_range(-2.0..5.0), rng.random_range(0.0..2.0))).collect();
            let ds = ds_from(&rows);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let e: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
            let w = PropensityWeights::new(&ds.treatments(), e).unwrap();
            let alpha = 1.3;
            let got = generalization_score(&scores, &ds, 0.6, &w, ObjectiveForm::Linear { alpha }).unwrap();

            let order = rank_desc(&scores);
            let mut keep = order[..18].to_vec();
            keep.sort_unstable();
            let (mut zt, mut zc) = (0.0, 0.0);
            for &i in &keep {
                if rows[i].0 == 1 {
                    zt += scores[i].exp()
                } else {
                    zc += scores[i].exp()
                }
            }
            let p: Vec<f64> = keep.iter().map(|&i| scores[i].exp() / if rows[i].0 == 1 { zt } else { zc }).collect();
            let t: Vec<u8> = keep.iter().map(|&i| rows[i].0).collect();
            let yr: Vec<f64> = keep.iter().map(|&i| rows[i].1).collect();
            let yc: Vec<f64> = keep.iter().map(|&i| rows[i].2).collect();
            let sw = w.select(&keep);
            let oracle = tau_hat_propensity(&p, &yr, &t, &sw) - alpha * tau_hat_propensity(&p, &yc, &t, &sw);
            assert!((got - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn table_rows() {
        let mut rng = RngSeed(4).rng();
        let rows: Vec<(u8, f64, f64)> =
            (0..100).map(|i| ((i % 2) as u8, rng.random_range(0.0..5.0), rng.random_range(0.0..2.0))).collect();
        let ds = ds_from(&rows);
        let scores = random_scores(100, RngSeed(1));
        let w = PropensityWeights::constant(&ds.treatments());
        let t = generalization_table(&scores, &ds, &Grid::table(), &w, ObjectiveForm::Ratio).unwrap();
        assert_eq!(t.iter().map(|r| r.0).collect::<Vec<_>>(), Grid::table().fractions());
    }
}
