use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use uplift_rank::barrier::{AnnealSchedule, BudgetOrder, Constraint};
use uplift_rank::eval::{aucc, cost_curve, generalization_table};
use uplift_rank::ingest::{
    build_census, build_covtype, covtype_columns, load_csv, read_sidecar, save_csv, split_dataset, write_sidecar,
    ColumnMap, Provenance, RawTable, RecipeManifest, SplitRatios, SyntheticConfig, TreatProb,
};
use uplift_rank::model::{fit_model, FitConfig, ModelKind};
use uplift_rank::nn::AdamConfig;
use uplift_rank::rlearner::{fit_propensity, PropensityKind, RLearnerConfig};
use uplift_rank::sim::{evaluate_cycle, run_cycle, CycleConfig, ExperimentLog, Population, EXPLORE_ARM};
use uplift_rank::{
    CostCurve, Dataset, Grid, ModelFile, ObjectiveForm, PropensityWeights, RngSeed, Scorer, TrainConfig,
};

use crate::args::{resolve, Cli, Command, CompareArgs, EvalArgs, FitArgs, GenArgs, PrepArgs, SimulateArgs, TrainArgs};
use crate::UsageError;

pub fn run(cli: Cli) -> Result<()> {
    let cfg = cli.config.as_deref();
    let name = cli.command.name();
    match cli.command {
        Command::Gen(a) => gen(resolve(a, cfg)?, name),
        Command::Prep(a) => prep(resolve(a, cfg)?, name),
        Command::Train(a) => train(resolve(a, cfg)?, name),
        Command::Eval(a) => eval(resolve(a, cfg)?, name),
        Command::Simulate(a) => simulate(resolve(a, cfg)?, name),
        Command::Compare(a) => compare(resolve(a, cfg)?, name),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone().ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = required(out, "out")?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

/// `config.resolved.json`: the arguments as resolved plus the full settings
/// derived from them. Feeding it back through `--config` repeats the run.
fn snapshot<A: Serialize, R: Serialize>(dir: &Path, command: &str, args: &A, resolved: &R) -> Result<()> {
    let v = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
        "resolved": resolved,
    });
    write_json(&dir.join("config.resolved.json"), &v)
}

fn parse<T: std::str::FromStr<Err = uplift_rank::Error>>(s: &str) -> Result<T> {
    s.parse::<T>().map_err(|e| usage(e.to_string()))
}

fn parse_form(name: Option<&str>, alpha: Option<f64>) -> Result<ObjectiveForm> {
    match name.unwrap_or("ratio") {
        "ratio" => Ok(ObjectiveForm::Ratio),
        "double-rectified" | "double_rectified" => Ok(ObjectiveForm::DoubleRectified),
        "linear" => Ok(ObjectiveForm::Linear { alpha: alpha.unwrap_or(1.0) }),
        other => Err(usage(format!("unknown objective {other:?} (expected ratio, double-rectified, linear)"))),
    }
}

fn grid(step: Option<u32>) -> Result<Grid> {
    match step.unwrap_or(5) {
        s @ 1..=100 => Ok(Grid::percent_steps(s)),
        s => Err(usage(format!("grid step must be 1..=100 percent, got {s}"))),
    }
}

fn load_generator(path: &Path) -> Result<SyntheticConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading generator {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let g = v.pointer("/resolved/generator").cloned().unwrap_or(v);
    serde_json::from_value(g).with_context(|| format!("{} holds no generator", path.display()))
}

impl FitArgs {
    fn fit_config(&self) -> Result<FitConfig> {
        let d = FitConfig::default();
        let train = TrainConfig {
            hidden: self.hidden.clone().unwrap_or(d.train.hidden),
            iterations: self.iterations.unwrap_or(d.train.iterations),
            adam: AdamConfig { lr: self.lr.unwrap_or(d.train.adam.lr), ..d.train.adam },
            l2: self.l2.unwrap_or(d.train.l2),
            seed: RngSeed(self.seed.unwrap_or(0)),
            standardize: self.standardize.unwrap_or(d.train.standardize),
            batch_size: self.batch_size,
            form: parse_form(self.objective.as_deref(), self.alpha)?,
        };
        let constraint = match (self.percentage, self.budget) {
            (Some(_), Some(_)) => return Err(usage("--percentage and --budget are exclusive")),
            (_, Some(b)) => Constraint::Budget { b },
            (Some(p), None) => Constraint::Percentage { p },
            (None, None) => d.constraint,
        };
        constraint.validate().map_err(|e| usage(e.to_string()))?;
        let schedule = AnnealSchedule {
            t0: self.t0.unwrap_or(d.schedule.t0),
            dt: self.dt.unwrap_or(d.schedule.dt),
            every: self.every.unwrap_or(d.schedule.every),
            t_max: self.t_max.unwrap_or(d.schedule.t_max),
        };
        schedule.validate().map_err(|e| usage(e.to_string()))?;
        let budget_order = match self.budget_order.as_deref() {
            None | Some("effectiveness") => BudgetOrder::Effectiveness,
            Some("cost_ascending" | "cost-ascending") => BudgetOrder::CostAscending,
            Some(o) => {
                return Err(usage(format!("unknown budget order {o:?} (expected effectiveness, cost_ascending)")))
            }
        };
        let drm_propensity = match self.propensity.as_deref() {
            None | Some("none") => None,
            Some(k) => Some(parse::<PropensityKind>(k)?),
        };
        let rlearner = RLearnerConfig {
            reg: self.reg.unwrap_or(d.rlearner.reg),
            propensity: self.rl_propensity.as_deref().map(parse).transpose()?.unwrap_or(d.rlearner.propensity),
            lambda_grid: self.lambda_grid.clone().unwrap_or(d.rlearner.lambda_grid),
        };
        let generator = self.generator.as_deref().map(load_generator).transpose()?;
        Ok(FitConfig {
            train,
            constraint,
            schedule,
            budget_order,
            drm_propensity,
            rlearner,
            grid: grid(self.grid_step)?,
            generator,
        })
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    load_csv(path, &ColumnMap::native()).with_context(|| format!("loading {}", path.display()))
}

/// Short name for tables: the sidecar's source if present, else the file stem.
fn dataset_label(path: &Path) -> String {
    read_sidecar(path).map(|p| p.source).unwrap_or_else(|_| {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
    })
}

fn split3(ds: &Dataset, seed: Option<u64>) -> Result<(Dataset, Dataset, Dataset)> {
    split_dataset(ds, &SplitRatios::default(), RngSeed(seed.unwrap_or(0))).context("splitting dataset")
}

fn gen(a: GenArgs, command: &str) -> Result<()> {
    let dir = out_dir(&a.out)?;
    let (n, d) = (a.n.unwrap_or(20_000), a.d.unwrap_or(10));
    let seed = a.seed.unwrap_or(0);
    let mut g = SyntheticConfig::heterogeneous(n, d);
    g.noise_sd = a.noise.unwrap_or(g.noise_sd);
    g.treat_prob = match a.assignment.as_deref() {
        None | Some("constant") => TreatProb::Constant(a.treat_prob.unwrap_or(0.5)),
        Some("logistic") => TreatProb::logistic_default(),
        Some(o) => return Err(usage(format!("unknown assignment {o:?} (expected constant, logistic)"))),
    };
    g.validate().map_err(|e| usage(e.to_string()))?;
    let (ds, _) = uplift_rank::ingest::generate_synthetic(&g, RngSeed(seed))?;
    let csv = dir.join("dataset.csv");
    save_csv(&ds, &csv)?;
    write_sidecar(
        &csv,
        &Provenance { source: "synthetic".into(), recipe: "heterogeneous".into(), seed: Some(seed), split: None, n, d },
    )?;
    snapshot(&dir, command, &a, &json!({ "seed": seed, "generator": g }))?;
    println!("wrote {} rows to {}", ds.len(), csv.display());
    Ok(())
}

fn prep(a: PrepArgs, command: &str) -> Result<()> {
    let recipe = required(&a.recipe, "recipe")?;
    let input = required(&a.input, "input")?;
    let (columns, default_manifest) = match recipe.as_str() {
        "census" => (None, RecipeManifest::census_default()),
        "covtype" => (Some(covtype_columns()), RecipeManifest::covtype_default()),
        o => return Err(usage(format!("unknown recipe {o:?} (expected census, covtype)"))),
    };
    let manifest = match &a.manifest {
        Some(p) => RecipeManifest::load(p).with_context(|| format!("loading manifest {}", p.display()))?,
        None => default_manifest,
    };
    let dir = out_dir(&a.out)?;
    let raw = RawTable::read(&input, columns).with_context(|| format!("reading {}", input.display()))?;
    let ds = if recipe == "census" { build_census(&raw, &manifest)? } else { build_covtype(&raw, &manifest)? };
    let csv = dir.join("dataset.csv");
    save_csv(&ds, &csv)?;
    let prov = Provenance {
        source: recipe.clone(),
        recipe: format!("{recipe} default"),
        seed: None,
        split: None,
        n: ds.len(),
        d: ds.dim(),
    };
    write_sidecar(&csv, &prov)?;
    snapshot(&dir, command, &a, &json!({ "manifest": manifest }))?;
    println!("wrote {} rows, {} features to {}", ds.len(), ds.dim(), csv.display());
    Ok(())
}

fn train(a: TrainArgs, command: &str) -> Result<()> {
    let data = required(&a.data, "data")?;
    let kind: ModelKind = parse(a.model.as_deref().unwrap_or("drm"))?;
    let cfg = a.fit.fit_config()?;
    let dir = out_dir(&a.out)?;
    let ds = load_dataset(&data)?;
    let (tr, va, _) = split3(&ds, a.fit.split_seed)?;
    let fitted = fit_model(kind, &tr, &va, &cfg).with_context(|| format!("fitting {kind}"))?;
    ModelFile::new(fitted.model, serde_json::to_value(&cfg)?).save(dir.join("model.json"))?;
    if let Some(out) = &fitted.outcome {
        out.save_trace(dir.join("trace.csv"))?;
    }
    snapshot(&dir, command, &a, &cfg)?;
    println!("trained {kind} on {} rows; wrote {}", tr.len(), dir.join("model.json").display());
    Ok(())
}

/// AUCC with an undefined area reported as `None`.
fn aucc_or_none(curve: &CostCurve, what: &str) -> Result<Option<f64>> {
    match aucc(curve) {
        Ok(v) => Ok(Some(v)),
        Err(uplift_rank::Error::Undefined(m)) => {
            log::warn!("{what}: AUCC undefined: {m}");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn eval(a: EvalArgs, command: &str) -> Result<()> {
    let data = required(&a.data, "data")?;
    let model_path = required(&a.model, "model")?;
    let split = a.split.clone().unwrap_or_else(|| "test".into());
    let prop_kind: PropensityKind = parse(a.propensity.as_deref().unwrap_or("logistic"))?;
    let form = parse_form(a.objective.as_deref(), a.alpha)?;
    let g = grid(a.grid_step)?;
    let dir = out_dir(&a.out)?;
    let file = ModelFile::load(&model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let ds = load_dataset(&data)?;
    let (tr, part) = if split == "all" {
        (ds.clone(), ds)
    } else {
        let (tr, va, te) = split3(&ds, a.split_seed)?;
        let part = match split.as_str() {
            "train" => tr.clone(),
            "val" => va,
            "test" => te,
            o => return Err(usage(format!("unknown split {o:?} (expected train, val, test, all)"))),
        };
        (tr, part)
    };
    let x = part.feature_matrix();
    let scores = file.model.score(x.view())?;
    let curve = cost_curve(&scores, &part, &g)?;
    curve.write_csv(std::io::BufWriter::new(fs::File::create(dir.join("curve.csv"))?))?;
    let area = aucc_or_none(&curve, file.model.kind())?;

    let prop = fit_propensity(tr.feature_matrix().view(), &tr.treatments(), prop_kind)?;
    let w = PropensityWeights::new(&part.treatments(), prop.predict(x.view()))?;
    let generalization: Vec<Value> = match generalization_table(&scores, &part, &Grid::table(), &w, form) {
        Ok(rows) => rows.into_iter().map(|(q, s)| json!({ "q": q, "score": s })).collect(),
        Err(e) => {
            log::warn!("generalization scores unavailable: {e}");
            Vec::new()
        }
    };
    let summary = json!({
        "model": file.model.kind(),
        "dataset": dataset_label(&data),
        "split": split,
        "n": part.len(),
        "aucc": area,
        "curve": curve.points,
        "generalization": { "propensity": prop_kind, "objective": form, "rows": generalization },
    });
    write_json(&dir.join("summary.json"), &summary)?;
    snapshot(&dir, command, &a, &json!({ "grid": g, "objective": form, "propensity": prop_kind }))?;
    match area {
        Some(v) => println!("{} AUCC on {split} ({} rows): {v:.4}", file.model.kind(), part.len()),
        None => println!("{} AUCC on {split} ({} rows): undefined", file.model.kind(), part.len()),
    }
    Ok(())
}

fn model_kinds(names: &Option<Vec<String>>, default: &[&str]) -> Result<Vec<ModelKind>> {
    let names: Vec<String> = names.clone().unwrap_or_else(|| default.iter().map(|s| s.to_string()).collect());
    let mut kinds = Vec::new();
    for n in names.iter().filter(|n| !n.is_empty()) {
        let k: ModelKind = parse(n)?;
        if kinds.contains(&k) {
            return Err(usage(format!("model {k} listed twice")));
        }
        kinds.push(k);
    }
    if kinds.is_empty() {
        return Err(usage("no models given"));
    }
    Ok(kinds)
}

fn simulate(a: SimulateArgs, command: &str) -> Result<()> {
    let kinds = model_kinds(&a.models, &["drm", "random"])?;
    let mut fit = a.fit.fit_config()?;
    let cycles = a.cycles.unwrap_or(2);
    if cycles == 0 {
        return Err(usage("--cycles must be at least 1"));
    }
    let dc = CycleConfig::default();
    let exploit_cutoff = match (a.exploit_percentage, a.exploit_budget) {
        (Some(_), Some(_)) => return Err(usage("--exploit-percentage and --exploit-budget are exclusive")),
        (_, Some(b)) => Constraint::Budget { b },
        (Some(p), None) => Constraint::Percentage { p },
        (None, None) => dc.exploit_cutoff,
    };
    let cc = CycleConfig {
        population_size: a.population.unwrap_or(dc.population_size),
        explore_fraction: a.explore_fraction.unwrap_or(dc.explore_fraction),
        treat_prob_explore: a.treat_prob_explore.unwrap_or(dc.treat_prob_explore),
        exploit_cutoff,
        exploit_treat_prob: a.exploit_treat_prob.unwrap_or(dc.exploit_treat_prob),
        seed: RngSeed(a.fit.seed.unwrap_or(0)),
    };
    cc.validate().map_err(|e| usage(e.to_string()))?;
    let mut g = match &fit.generator {
        Some(g) => g.clone(),
        None => SyntheticConfig::heterogeneous(cc.population_size, a.d.unwrap_or(10)),
    };
    g.noise_sd = a.noise.unwrap_or(g.noise_sd);
    fit.generator = Some(g.clone());
    let dir = out_dir(&a.out)?;

    let mut log = ExperimentLog::default();
    let mut per_cycle = Vec::new();
    for c in 0..cycles {
        let pop = Population::generate(&g, cc.population_size, cc.seed.derive(1_000 + c as u64))?;
        let models = if c == 0 {
            Vec::new()
        } else {
            let explored = log.arm_dataset(EXPLORE_ARM)?;
            let ratios = SplitRatios { train: 0.8, val: 0.1, test: 0.1 };
            let (tr, va, _) = split_dataset(&explored, &ratios, cc.seed.derive(c as u64))?;
            kinds
                .iter()
                .map(|&k| {
                    Ok((k, fit_model(k, &tr, &va, &fit).with_context(|| format!("cycle {c}: fitting {k}"))?.model))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let arms: Vec<(&str, &dyn Scorer)> = models.iter().map(|(k, m)| (k.as_str(), m as &dyn Scorer)).collect();
        let cycle_log = run_cycle(&pop, &arms, &cc, c)?;
        let metrics = evaluate_cycle(&cycle_log)?;
        for m in &metrics {
            match m.efficiency_gain {
                Some(e) => println!("cycle {c} {:<12} n={:<6} r={:.4} gain={:+.2}%", m.arm, m.n, m.r, 100.0 * e),
                None => println!("cycle {c} {:<12} n={:<6} r={:.4}", m.arm, m.n, m.r),
            }
        }
        per_cycle.push(json!({ "cycle": c, "arms": metrics }));
        log.extend(cycle_log);
    }
    log.write_csv(std::io::BufWriter::new(fs::File::create(dir.join("log.csv"))?))?;
    write_json(&dir.join("summary.json"), &json!({ "cycles": per_cycle }))?;
    snapshot(&dir, command, &a, &json!({ "cycle": cc, "fit": fit }))?;
    Ok(())
}

#[derive(Serialize)]
struct CompareRow {
    algorithm: String,
    dataset: String,
    aucc: Option<f64>,
    /// Relative to the Duality R-learner, in percent.
    improvement_over_duality_pct: Option<f64>,
}

fn compare(a: CompareArgs, command: &str) -> Result<()> {
    let data = required(&a.data, "data")?;
    let kinds = model_kinds(&a.models, &["random", "drm", "constrained", "duality"])?;
    let cfg = a.fit.fit_config()?;
    if kinds.contains(&ModelKind::Oracle) && cfg.generator.is_none() {
        return Err(usage("the oracle needs --generator"));
    }
    let dir = out_dir(&a.out)?;
    let ds = load_dataset(&data)?;
    let label = dataset_label(&data);
    let (tr, va, te) = split3(&ds, a.fit.split_seed)?;
    let xt = te.feature_matrix();

    let results: Vec<(ModelKind, CostCurve, Option<f64>)> = kinds
        .par_iter()
        .map(|&k| -> Result<_> {
            let fitted = fit_model(k, &tr, &va, &cfg).with_context(|| format!("fitting {k}"))?;
            let scores = fitted.model.score(xt.view())?;
            let curve = cost_curve(&scores, &te, &cfg.grid)?;
            let area = aucc_or_none(&curve, k.as_str())?;
            Ok((k, curve, area))
        })
        .collect::<Result<_>>()?;

    let baseline = results.iter().find(|r| r.0 == ModelKind::Duality).and_then(|r| r.2);
    let rows: Vec<CompareRow> = results
        .iter()
        .map(|(k, _, area)| CompareRow {
            algorithm: k.as_str().into(),
            dataset: label.clone(),
            aucc: *area,
            improvement_over_duality_pct: match (area, baseline) {
                (Some(v), Some(b)) if b != 0.0 => Some(100.0 * (v - b) / b),
                _ => None,
            },
        })
        .collect();

    let mut table = csv_writer(&dir.join("compare.csv"))?;
    writeln!(table, "algorithm,dataset,aucc,improvement_over_duality_pct")?;
    for r in &rows {
        writeln!(table, "{},{},{},{}", r.algorithm, r.dataset, opt(r.aucc), opt(r.improvement_over_duality_pct))?;
    }
    table.flush()?;
    let mut curves = csv_writer(&dir.join("curve.csv"))?;
    writeln!(curves, "model,q,cum_cost,cum_value")?;
    for (k, c, _) in &results {
        for p in &c.points {
            writeln!(curves, "{k},{},{},{}", p.q, p.cost, p.value)?;
        }
    }
    curves.flush()?;
    let curves_json: Vec<Value> = results.iter().map(|(k, c, _)| json!({ "model": k, "points": c.points })).collect();
    write_json(
        &dir.join("summary.json"),
        &json!({ "dataset": label, "n_train": tr.len(), "n_test": te.len(), "rows": rows, "curves": curves_json }),
    )?;
    snapshot(&dir, command, &a, &cfg)?;

    println!("{:<12} {:<12} {:>8} {:>12}", "algorithm", "dataset", "AUCC", "vs duality");
    for r in &rows {
        let v = r.aucc.map_or("-".into(), |v| format!("{v:.4}"));
        let i = r.improvement_over_duality_pct.map_or("-".into(), |v| format!("{v:+.2}%"));
        println!("{:<12} {:<12} {:>8} {:>12}", r.algorithm, r.dataset, v, i);
    }
    Ok(())
}

fn csv_writer(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Caps the global thread pool from `UPLIFT_RANK_THREADS`.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("UPLIFT_RANK_THREADS") else { return Ok(()) };
    let n: usize =
        v.trim().parse().map_err(|_| usage(format!("UPLIFT_RANK_THREADS must be a positive integer, got {v:?}")))?;
    if n == 0 {
        bail!(usage("UPLIFT_RANK_THREADS must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}
