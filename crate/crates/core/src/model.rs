//! Serializable ranking models and the common scoring interface.

use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::barrier::{train_constrained, AnnealSchedule, BudgetOrder, ConstrainedConfig, Constraint};
use crate::data::{Dataset, RngSeed};
use crate::drm::{train_drm, PropensityWeights};
use crate::error::{Error, Result};
use crate::eval::{random_scores, Grid};
use crate::ingest::{SyntheticConfig, TauSpec};
use crate::nn::{self, ScorerParams};
use crate::rlearner::{
    fit_combined, fit_duality, fit_propensity, DualityModel, PropensityKind, PropensityModel, RLearnerConfig,
    RidgeModel,
};
use crate::train::{TrainConfig, TrainOutcome};

pub const MODEL_VERSION: &str = "1";

/// Anything that assigns a ranking score to each feature row.
pub trait Scorer {
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RankingModel {
    /// Direct ranking network, unconstrained or barrier-trained.
    Drm {
        params: ScorerParams,
    },
    Constrained {
        params: ScorerParams,
    },
    Duality(DualityModel),
    /// Single R-learner fit on `y_r − λ·y_c`.
    Rlearner {
        model: RidgeModel,
        lambda: f64,
        propensity: PropensityModel,
    },
    Random {
        seed: u64,
    },
    /// Ranks by the true effect ratio of a synthetic generator.
    Oracle {
        tau_r: TauSpec,
        tau_c: TauSpec,
    },
}

impl RankingModel {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Drm { .. } => "drm",
            Self::Constrained { .. } => "constrained",
            Self::Duality(_) => "duality",
            Self::Rlearner { .. } => "rlearner",
            Self::Random { .. } => "random",
            Self::Oracle { .. } => "oracle",
        }
    }

    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Self::Drm { params } | Self::Constrained { params } => Some(params.input_dim()),
            Self::Duality(m) => Some(m.tau_r.weights.len()),
            Self::Rlearner { model, .. } => Some(model.weights.len()),
            Self::Random { .. } | Self::Oracle { .. } => None,
        }
    }
}

impl Scorer for RankingModel {
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if let Some(d) = self.input_dim() {
            if d != x.ncols() {
                return Err(Error::ShapeMismatch { expected: d, got: x.ncols() });
            }
        }
        match self {
            Self::Drm { params } | Self::Constrained { params } => Ok(nn::forward(params, x)?.to_vec()),
            Self::Duality(m) => m.score(x),
            Self::Rlearner { model, .. } => model.predict(x),
            Self::Random { seed } => Ok(random_scores(x.nrows(), RngSeed(*seed))),
            Self::Oracle { tau_r, tau_c } => Ok(x
                .rows()
                .into_iter()
                .map(|r| {
                    let r = r.to_vec();
                    tau_r.eval(&r) / tau_c.eval(&r)
                })
                .collect()),
        }
    }
}

/// On-disk model: the model itself plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: String,
    pub model: RankingModel,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl ModelFile {
    pub fn new(model: RankingModel, config: serde_json::Value) -> Self {
        Self { version: MODEL_VERSION.into(), model, config }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f: Self = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        if f.version != MODEL_VERSION {
            return Err(Error::Schema(format!("unsupported model version {:?}", f.version)));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Drm,
    Constrained,
    Duality,
    Rlearner,
    Random,
    Oracle,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] =
        [Self::Drm, Self::Constrained, Self::Duality, Self::Rlearner, Self::Random, Self::Oracle];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Drm => "drm",
            Self::Constrained => "constrained",
            Self::Duality => "duality",
            Self::Rlearner => "rlearner",
            Self::Random => "random",
            Self::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown model kind {s:?} (expected one of drm, constrained, duality, rlearner, random, oracle)"
            ))
        })
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything needed to fit any model kind.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub train: TrainConfig,
    pub constraint: Constraint,
    pub schedule: AnnealSchedule,
    pub budget_order: BudgetOrder,
    /// Propensity model used to weight the direct ranking objectives; `None` trains unweighted.
    pub drm_propensity: Option<PropensityKind>,
    pub rlearner: RLearnerConfig,
    pub grid: Grid,
    /// Generator whose true effects the oracle ranks by.
    pub generator: Option<SyntheticConfig>,
}

pub struct Fitted {
    pub model: RankingModel,
    pub outcome: Option<TrainOutcome>,
}

fn drm_weights(ds: &Dataset, kind: Option<PropensityKind>) -> Result<Option<(PropensityModel, PropensityWeights)>> {
    let Some(kind) = kind else { return Ok(None) };
    let x = ds.feature_matrix();
    let t = ds.treatments();
    let m = fit_propensity(x.view(), &t, kind)?;
    let w = PropensityWeights::new(&t, m.predict(x.view()))?;
    Ok(Some((m, w)))
}

/// Fits `kind` on `train`; `val` is used only where a hyperparameter is
/// selected on held-out data (the λ of the R-learner variants).
pub fn fit_model(kind: ModelKind, train: &Dataset, val: &Dataset, cfg: &FitConfig) -> Result<Fitted> {
    match kind {
        ModelKind::Drm => {
            let w = drm_weights(train, cfg.drm_propensity)?;
            let out = train_drm(train, &cfg.train, w.as_ref().map(|w| &w.1))?;
            Ok(Fitted { model: RankingModel::Drm { params: out.params.clone() }, outcome: Some(out) })
        }
        ModelKind::Constrained => {
            let w = drm_weights(train, cfg.drm_propensity)?;
            let c = ConstrainedConfig {
                train: cfg.train.clone(),
                constraint: cfg.constraint,
                schedule: cfg.schedule,
                budget_order: cfg.budget_order,
            };
            let out = train_constrained(train, &c, w.as_ref().map(|w| &w.1))?;
            Ok(Fitted { model: RankingModel::Constrained { params: out.params.clone() }, outcome: Some(out) })
        }
        ModelKind::Duality => Ok(Fitted {
            model: RankingModel::Duality(fit_duality(train, val, &cfg.rlearner, &cfg.grid)?),
            outcome: None,
        }),
        ModelKind::Rlearner => {
            let (model, lambda, propensity) = fit_combined(train, val, &cfg.rlearner, &cfg.grid)?;
            Ok(Fitted { model: RankingModel::Rlearner { model, lambda, propensity }, outcome: None })
        }
        ModelKind::Random => Ok(Fitted { model: RankingModel::Random { seed: cfg.train.seed.0 }, outcome: None }),
        ModelKind::Oracle => {
            let g = cfg.generator.as_ref().ok_or_else(|| {
                Error::Config("the oracle needs the synthetic generator that produced the data".into())
            })?;
            Ok(Fitted { model: RankingModel::Oracle { tau_r: g.tau_r.clone(), tau_c: g.tau_c.clone() }, outcome: None })
        }
    }
}
