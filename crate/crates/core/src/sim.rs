//! Explore/exploit campaign simulation on synthetic populations.
//!
//! A cycle samples a uniform explore group with randomized treatment, splits
//! the remaining users evenly across exploit arms, and lets each arm's model
//! pick its top users before randomizing treatment inside the pick. Outcomes
//! come from the same generator that produces synthetic datasets.

use std::io::Write;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barrier::Constraint;
use crate::data::{Dataset, DatasetMeta, RngSeed, Strategy, UserSample};
use crate::error::{Error, Result};
use crate::eval::{efficiency_gain, slope_r};
use crate::ingest::{native_header, GroundTruth, SyntheticConfig};
use crate::model::Scorer;
use crate::util::rank_desc;

pub const EXPLORE_ARM: &str = "explore";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    pub population_size: usize,
    pub explore_fraction: f64,
    pub treat_prob_explore: f64,
    pub exploit_cutoff: Constraint,
    pub exploit_treat_prob: f64,
    pub seed: RngSeed,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            population_size: 10_000,
            explore_fraction: 0.2,
            treat_prob_explore: 0.5,
            exploit_cutoff: Constraint::Percentage { p: 0.4 },
            exploit_treat_prob: 0.5,
            seed: RngSeed(0),
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !open(self.explore_fraction) {
            return Err(Error::Config(format!("explore_fraction must be in (0, 1), got {}", self.explore_fraction)));
        }
        if !open(self.treat_prob_explore) || !open(self.exploit_treat_prob) {
            return Err(Error::Config("treatment probabilities must be in (0, 1)".into()));
        }
        if self.population_size < 10 {
            return Err(Error::Config("population_size must be >= 10".into()));
        }
        self.exploit_cutoff.validate()
    }
}

/// Users with features and their true effects under one generator.
#[derive(Debug, Clone)]
pub struct Population {
    pub generator: SyntheticConfig,
    pub xs: Vec<Vec<f64>>,
    pub truth: GroundTruth,
}

impl Population {
    pub fn generate(generator: &SyntheticConfig, size: usize, seed: RngSeed) -> Result<Self> {
        let generator = SyntheticConfig { n: size, ..generator.clone() };
        generator.validate()?;
        let xs = generator.draw_features(size, &mut seed.rng());
        let truth = generator.ground_truth(&xs);
        Ok(Self { generator, xs, truth })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn matrix(&self, idx: &[usize]) -> Array2<f64> {
        let d = self.generator.d;
        Array2::from_shape_fn((idx.len(), d), |(i, j)| self.xs[idx[i]][j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub cycle: usize,
    pub arm: String,
    pub sample: UserSample,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentLog {
    pub d: usize,
    pub rows: Vec<LogRow>,
}

impl ExperimentLog {
    pub fn arms(&self) -> Vec<String> {
        let mut arms: Vec<String> = Vec::new();
        for r in &self.rows {
            if !arms.contains(&r.arm) {
                arms.push(r.arm.clone());
            }
        }
        arms
    }

    pub fn arm_dataset(&self, arm: &str) -> Result<Dataset> {
        let samples: Vec<UserSample> = self.rows.iter().filter(|r| r.arm == arm).map(|r| r.sample.clone()).collect();
        if samples.is_empty() {
            return Err(Error::EmptyCohort(format!("arm {arm:?} has no rows")));
        }
        Dataset::new(samples, DatasetMeta { name: arm.into(), provenance: "simulation".into() })
    }

    pub fn extend(&mut self, other: ExperimentLog) {
        if self.rows.is_empty() {
            self.d = other.d;
        }
        self.rows.extend(other.rows);
    }

    /// Native CSV layout with leading `cycle` and `arm` columns.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        let mut header = vec!["cycle".to_string(), "arm".to_string()];
        header.extend(native_header(self.d));
        w.write_record(&header)?;
        for r in &self.rows {
            let s = &r.sample;
            let mut rec = vec![
                r.cycle.to_string(),
                r.arm.clone(),
                s.id.clone(),
                s.strategy.as_str().to_string(),
                s.t.to_string(),
                s.y_r.to_string(),
                s.y_c.to_string(),
            ];
            rec.extend(s.x.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn realize_row(pop: &Population, i: usize, t: u8, strategy: Strategy, rng: &mut ChaCha8Rng) -> UserSample {
    let (y_r, y_c) = pop.generator.realize(&pop.xs[i], t, rng);
    UserSample { id: i.to_string(), x: pop.xs[i].clone(), t, y_r, y_c, strategy }
}

/// Positions in `order` an arm keeps under the cutoff. Budgets are spent in
/// units of true incremental cost.
fn exploit_take(order: &[usize], pop: &Population, cutoff: Constraint) -> usize {
    match cutoff {
        Constraint::Percentage { p } => ((p * order.len() as f64).round() as usize).min(order.len()),
        Constraint::Budget { b } => {
            let mut acc = 0.0;
            for (k, &i) in order.iter().enumerate() {
                acc += pop.truth.tau_c_true[i];
                if acc > b {
                    return k;
                }
            }
            order.len()
        }
    }
}

pub fn run_cycle(
    pop: &Population,
    models: &[(&str, &dyn Scorer)],
    cfg: &CycleConfig,
    cycle: usize,
) -> Result<ExperimentLog> {
    cfg.validate()?;
    if let Some((name, _)) = models.iter().find(|(n, _)| *n == EXPLORE_ARM) {
        return Err(Error::Config(format!("arm name {name:?} is reserved")));
    }
    let n = pop.len();
    let mut rng = cfg.seed.derive(cycle as u64).rng();
    let n_explore = ((cfg.explore_fraction * n as f64).round() as usize).clamp(1, n);
    let mut is_explore = vec![false; n];
    let mut explore: Vec<usize> = index::sample(&mut rng, n, n_explore).into_vec();
    explore.sort_unstable();
    explore.iter().for_each(|&i| is_explore[i] = true);

    let mut rows = Vec::new();
    for &i in &explore {
        let t = u8::from(rng.random::<f64>() < cfg.treat_prob_explore);
        rows.push(LogRow {
            cycle,
            arm: EXPLORE_ARM.into(),
            sample: realize_row(pop, i, t, Strategy::Explore, &mut rng),
        });
    }

    if !models.is_empty() {
        let mut pool: Vec<usize> = (0..n).filter(|&i| !is_explore[i]).collect();
        pool.shuffle(&mut rng);
        let m = models.len();
        for (a, (name, model)) in models.iter().enumerate() {
            let mut share = pool[a * pool.len() / m..(a + 1) * pool.len() / m].to_vec();
            share.sort_unstable();
            let scores = model.score(pop.matrix(&share).view())?;
            let order: Vec<usize> = rank_desc(&scores).into_iter().map(|k| share[k]).collect();
            let k = exploit_take(&order, pop, cfg.exploit_cutoff);
            for &i in &order[..k] {
                let t = u8::from(rng.random::<f64>() < cfg.exploit_treat_prob);
                rows.push(LogRow {
                    cycle,
                    arm: (*name).into(),
                    sample: realize_row(pop, i, t, Strategy::Exploit, &mut rng),
                });
            }
        }
    }
    Ok(ExperimentLog { d: pop.generator.d, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmMetrics {
    pub arm: String,
    pub n: usize,
    pub r: f64,
    /// Relative to the explore arm; `None` for the explore arm itself.
    pub efficiency_gain: Option<f64>,
}

pub fn evaluate_cycle(log: &ExperimentLog) -> Result<Vec<ArmMetrics>> {
    let explore = log.arm_dataset(EXPLORE_ARM)?;
    let r_explore = slope_r(&explore)?;
    let mut out = vec![ArmMetrics { arm: EXPLORE_ARM.into(), n: explore.len(), r: r_explore, efficiency_gain: None }];
    for arm in log.arms().into_iter().filter(|a| a != EXPLORE_ARM) {
        let ds = log.arm_dataset(&arm)?;
        let r = slope_r(&ds)?;
        out.push(ArmMetrics { arm, n: ds.len(), r, efficiency_gain: Some(efficiency_gain(r, r_explore)?) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{LinearSpec, TauSpec};
    use crate::model::RankingModel;

    fn pop(n: usize, noise: f64) -> Population {
        let g = SyntheticConfig { noise_sd: noise, ..SyntheticConfig::heterogeneous(n, 5) };
        Population::generate(&g, n, RngSeed(1)).unwrap()
    }

    fn oracle(p: &Population) -> RankingModel {
        RankingModel::Oracle { tau_r: p.generator.tau_r.clone(), tau_c: p.generator.tau_c.clone() }
    }

    #[test]
    fn explore_only_and_exact_size() {
        let p = pop(1000, 0.1);
        let cfg = CycleConfig { population_size: 1000, ..CycleConfig::default() };
        let log = run_cycle(&p, &[], &cfg, 0).unwrap();
        assert_eq!(log.rows.len(), 200);
        assert!(log.rows.iter().all(|r| r.arm == EXPLORE_ARM && r.sample.strategy == Strategy::Explore));
    }

    #[test]
    fn arms_are_disjoint() {
        let p = pop(2000, 0.1);
        let o = oracle(&p);
        let r = RankingModel::Random { seed: 3 };
        let models: [(&str, &dyn Scorer); 2] = [("oracle", &o), ("random", &r)];
        for seed in 0..5 {
            let cfg = CycleConfig { seed: RngSeed(seed), ..CycleConfig::default() };
            let log = run_cycle(&p, &models, &cfg, 0).unwrap();
            let mut ids: Vec<&str> = log.rows.iter().map(|r| r.sample.id.as_str()).collect();
            let n = ids.len();
            ids.sort_unstable();
            ids.dedup();
            assert_eq!(ids.len(), n);
        }
    }

    #[test]
    fn oracle_arm_beats_random_arm() {
        let p = pop(20_000, 0.0);
        let o = oracle(&p);
        let r = RankingModel::Random { seed: 3 };
        let models: [(&str, &dyn Scorer); 2] = [("oracle", &o), ("random", &r)];
        let log = run_cycle(&p, &models, &CycleConfig::default(), 0).unwrap();
        let m = evaluate_cycle(&log).unwrap();
        let gain = |a: &str| m.iter().find(|x| x.arm == a).unwrap().efficiency_gain.unwrap();
        assert!(gain("oracle") > 0.0);
        assert!(gain("oracle") > gain("random"));
        assert!(gain("random").abs() < 0.2);
    }

    #[test]
    fn zero_cost_effect_is_undefined() {
        let g = SyntheticConfig {
            noise_sd: 0.0,
            tau_c: TauSpec::constant(0.0),
            mu0_c: LinearSpec { intercept: 1.0, coef: vec![] },
            ..SyntheticConfig::heterogeneous(500, 3)
        };
        let p = Population::generate(&g, 500, RngSeed(2)).unwrap();
        let log = run_cycle(&p, &[], &CycleConfig::default(), 0).unwrap();
        assert!(matches!(evaluate_cycle(&log), Err(Error::Undefined(_))));
    }

    #[test]
    fn log_csv_columns() {
        let p = pop(100, 0.1);
        let log = run_cycle(&p, &[], &CycleConfig::default(), 3).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("cycle,arm,id,strategy,t,y_r,y_c,f0"));
        assert!(text.lines().nth(1).unwrap().starts_with("3,explore,"));
    }
}
