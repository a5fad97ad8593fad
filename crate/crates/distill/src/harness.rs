//! Experiment orchestration. Every run writes into `config.out`:
//! `config.resolved.json`, `run.log`, and the artifacts of the subcommand.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use distill_core::baselines::{
    average_real, baseline_grid_eval, kmeans_centroids, mean_std, repeat_steps,
    select_optimized_real, select_random_real, split_steps, BaselineKind, GridResult,
    OptimizedRealConfig,
};
use distill_core::data::{downscale, gen_linear_problem, LinearProblem};
use distill_core::distillation::{
    apply_distilled, distill_with, draws_used, DistilledData, DistilledStep, RealData,
};
use distill_core::linear_case::{verify_lower_bound, LowerBoundReport};
use distill_core::models::{
    sample_init, train_plain, InitKind, InitSpec, ParamVector, TrainConfig,
};
use distill_core::objectives::{attack_metrics, AttackMetrics};
use distill_core::{LabeledDataset, Objective};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{
    sibling_test_path, DataConfig, ExperimentConfig, InitConfig, REFERENCE_HELDOUT,
};
use crate::formats::{
    export_pgms, load_distilled, load_idx_with_classes, load_pool, save_distilled, save_pool,
};
use crate::HarnessError;

pub type Result<T> = std::result::Result<T, HarnessError>;

pub const RESOLVED_CONFIG: &str = "config.resolved.json";
pub const RUN_LOG: &str = "run.log";
pub const DISTILLED_FILE: &str = "distilled.ddxd";
pub const EVAL_CSV: &str = "eval.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const BASELINE_CSV: &str = "baseline.csv";
pub const POOL_FILE: &str = "pool.ddpv";
pub const POOL_CSV: &str = "pool.csv";
pub const IMAGES_DIR: &str = "images";

/// Line-oriented run log, flushed to disk once per run.
#[derive(Debug, Default, Clone)]
pub struct RunLog {
    lines: Vec<String>,
}

impl RunLog {
    pub fn push(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        fs::write(dir.join(RUN_LOG), text)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Datasets {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

fn truncate(data: LabeledDataset, limit: Option<usize>) -> Result<LabeledDataset> {
    match limit {
        Some(n) if n < data.len() => Ok(data.select(&(0..n).collect::<Vec<_>>())?),
        _ => Ok(data),
    }
}

/// Load, truncate and downscale the IDX train/test pair.
pub fn load_data(config: &ExperimentConfig) -> Result<Datasets> {
    let DataConfig::Mnist {
        train_images,
        train_labels,
        test_images,
        test_labels,
        downscale: factor,
        train_limit,
        test_limit,
    } = &config.data
    else {
        return Err(HarnessError::Validation(
            "this subcommand needs image data".into(),
        ));
    };
    let test_images = test_images
        .clone()
        .unwrap_or_else(|| sibling_test_path(train_images));
    let test_labels = test_labels
        .clone()
        .unwrap_or_else(|| sibling_test_path(train_labels));
    let classes = config.model.num_classes();
    let mut train = truncate(
        load_idx_with_classes(train_images, train_labels, classes)?,
        *train_limit,
    )?;
    let mut test = truncate(
        load_idx_with_classes(&test_images, &test_labels, classes)?,
        *test_limit,
    )?;
    if *factor > 1 {
        train = downscale(&train, *factor)?;
        test = downscale(&test, *factor)?;
    }
    if Some(train.num_classes()) != config.model.num_classes()
        || train.dim() != config.model.input_dim()
    {
        return Err(HarnessError::Validation(format!(
            "data has {} classes of dimension {}, the model expects {:?} classes of dimension {}",
            train.num_classes(),
            train.dim(),
            config.model.num_classes(),
            config.model.input_dim()
        )));
    }
    Ok(Datasets { train, test })
}

pub fn linear_problem(config: &ExperimentConfig) -> Result<LinearProblem> {
    match config.data {
        DataConfig::Linear {
            n,
            dim,
            noise_sigma,
            seed,
        } => Ok(gen_linear_problem(n, dim, noise_sigma, seed)?),
        DataConfig::Mnist { .. } => Ok(gen_linear_problem(64, 8, 0.1, config.seed)?),
    }
}

fn load_pool_for(config: &ExperimentConfig) -> Result<Option<Vec<ParamVector>>> {
    match &config.init {
        InitConfig::PretrainedPool { path, .. } => {
            let path = path.as_deref().ok_or_else(|| {
                HarnessError::Validation("pretrained pool init needs --pool or init.path".into())
            })?;
            Ok(Some(load_pool(path, &config.model)?))
        }
        _ => Ok(None),
    }
}

/// Held-out evaluation models and a description of where they come from.
/// Random draws start right after the last index used in training.
pub fn eval_models(
    config: &ExperimentConfig,
    init: &InitSpec,
    pool: Option<&[ParamVector]>,
) -> Result<(Vec<ParamVector>, String)> {
    match (&config.init, pool) {
        (InitConfig::PretrainedPool { heldout, .. }, Some(pool)) => {
            let start = pool.len() - heldout;
            Ok((
                pool[start..].to_vec(),
                format!("pool entries {start}..{}", pool.len()),
            ))
        }
        (InitConfig::FixedSeed { .. }, _) => Ok((
            vec![sample_init(init, &config.model, 0)?],
            "fixed init".into(),
        )),
        _ => {
            let first = draws_used(&config.distill);
            let n = config.eval_pool_size(0) as u64;
            let models = (first..first + n)
                .map(|i| sample_init(init, &config.model, i))
                .collect::<distill_core::Result<Vec<_>>>()?;
            Ok((models, format!("init draws {first}..{}", first + n)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub run_id: String,
    /// Test accuracy per held-out model.
    pub accuracies: Vec<f64>,
    /// Present for the poisoning objective.
    pub attack: Option<Vec<AttackMetrics>>,
    /// Attack metrics of the same models before the poison step.
    pub clean_attack: Option<Vec<AttackMetrics>>,
    pub mean: f64,
    pub std: f64,
    pub fingerprint: String,
    pub pool_size: usize,
    pub eval_draws: String,
}

impl EvalReport {
    fn new(
        config: &ExperimentConfig,
        accuracies: Vec<f64>,
        attack: Option<Vec<AttackMetrics>>,
        clean_attack: Option<Vec<AttackMetrics>>,
        eval_draws: String,
    ) -> Self {
        let (mean, std) = mean_std(&accuracies);
        EvalReport {
            run_id: config.run_id.clone(),
            pool_size: accuracies.len(),
            accuracies,
            attack,
            clean_attack,
            mean,
            std,
            fingerprint: config.fingerprint(),
            eval_draws,
        }
    }

    /// Fewer held-out models than the reference protocol.
    pub fn desk_scale(&self) -> bool {
        self.pool_size < REFERENCE_HELDOUT
    }

    pub fn banner(&self) -> String {
        if self.desk_scale() {
            format!(
                "DESK-SCALE RESULT: {} held-out model(s), reference protocol uses {REFERENCE_HELDOUT}",
                self.pool_size
            )
        } else {
            format!("{} held-out models", self.pool_size)
        }
    }

    pub fn attack_means(metrics: &[AttackMetrics]) -> AttackMetrics {
        let n = metrics.len().max(1) as f64;
        AttackMetrics {
            attack_success: metrics.iter().map(|m| m.attack_success).sum::<f64>() / n,
            other_accuracy: metrics.iter().map(|m| m.other_accuracy).sum::<f64>() / n,
            relabeled_accuracy: metrics.iter().map(|m| m.relabeled_accuracy).sum::<f64>() / n,
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.attack.is_some() {
            w.write_record([
                "run_id",
                "model_index",
                "accuracy",
                "attack_success",
                "other_accuracy",
                "relabeled_accuracy",
            ])?;
        } else {
            w.write_record(["run_id", "model_index", "accuracy"])?;
        }
        for (i, acc) in self.accuracies.iter().enumerate() {
            let mut row = vec![self.run_id.clone(), i.to_string(), acc.to_string()];
            if let Some(a) = &self.attack {
                row.extend([
                    a[i].attack_success.to_string(),
                    a[i].other_accuracy.to_string(),
                    a[i].relabeled_accuracy.to_string(),
                ]);
            }
            w.write_record(&row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let mut v = json!({
            "run_id": self.run_id,
            "desk_scale": self.desk_scale(),
            "notice": self.banner(),
            "pool_size": self.pool_size,
            "eval_draws": self.eval_draws,
            "mean_accuracy": self.mean,
            "std_accuracy": self.std,
            "config_fingerprint": self.fingerprint,
        });
        let metrics = |m: AttackMetrics| {
            json!({
                "attack_success": m.attack_success,
                "other_accuracy": m.other_accuracy,
                "relabeled_accuracy": m.relabeled_accuracy,
            })
        };
        if let Some(a) = &self.attack {
            v["poisoned"] = metrics(Self::attack_means(a));
        }
        if let Some(a) = &self.clean_attack {
            v["clean"] = metrics(Self::attack_means(a));
        }
        v
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(EVAL_CSV), self.to_csv()?)?;
        let mut text = serde_json::to_string_pretty(&self.summary_json()).expect("json");
        text.push('\n');
        fs::write(dir.join(SUMMARY_JSON), text)?;
        Ok(())
    }
}

/// Apply `distilled` to every evaluation model and score it on `test`.
pub fn evaluate(
    config: &ExperimentConfig,
    distilled: &DistilledData,
    models: &[ParamVector],
    test: &LabeledDataset,
    eval_draws: String,
) -> Result<EvalReport> {
    distilled
        .validate(&config.model)
        .map_err(|e| HarnessError::Validation(format!("layout mismatch: {e}")))?;
    let model = &config.model;
    let objective = &config.objective;
    let per_model: Vec<(f64, Option<(AttackMetrics, AttackMetrics)>)> = models
        .par_iter()
        .map(|theta0| -> Result<_> {
            let theta = apply_distilled(model, theta0, distilled, objective)?;
            let acc = model.evaluate(&theta, test)?;
            let attack = match *objective {
                Objective::Poison { attacked, target } => Some((
                    attack_metrics(model, &theta, test, attacked, target)?,
                    attack_metrics(model, theta0, test, attacked, target)?,
                )),
                _ => None,
            };
            Ok((acc, attack))
        })
        .collect::<Result<_>>()?;
    let accuracies = per_model.iter().map(|(a, _)| *a).collect();
    let (attack, clean) = if matches!(objective, Objective::Poison { .. }) {
        let pairs: Vec<_> = per_model
            .iter()
            .map(|(_, m)| m.expect("poison metrics"))
            .collect();
        (
            Some(pairs.iter().map(|p| p.0).collect()),
            Some(pairs.iter().map(|p| p.1).collect()),
        )
    } else {
        (None, None)
    };
    Ok(EvalReport::new(
        config, accuracies, attack, clean, eval_draws,
    ))
}

fn prepare_out(config: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(&config.out)?;
    let mut text = config.to_json();
    text.push('\n');
    fs::write(config.out.join(RESOLVED_CONFIG), text)?;
    Ok(config.out.clone())
}

#[derive(Debug, Clone)]
pub struct DistillOutcome {
    pub distilled: DistilledData,
    pub report: EvalReport,
    pub dir: PathBuf,
}

/// Distill, save the data and its images, then evaluate on held-out models
/// that were never drawn during training. On divergence the last finite
/// snapshot is saved and a numeric error returned.
pub fn run_distill(config: &ExperimentConfig) -> Result<DistillOutcome> {
    config.validate()?;
    let dir = prepare_out(config)?;
    let mut log = RunLog::default();
    log.push(format!("run_id {}", config.run_id));
    log.push(format!("config_fingerprint {}", config.fingerprint()));
    let data = load_data(config)?;
    let pool = load_pool_for(config)?;
    let init = config.init_spec(pool.as_deref())?;
    log.push(format!(
        "train {} examples, test {} examples, dim {}",
        data.train.len(),
        data.test.len(),
        data.train.dim()
    ));
    let fixed = init.is_fixed();
    let result = distill_with(
        &config.model,
        &init,
        RealData::Classification(&data.train),
        &config.objective,
        &config.distill,
        |it| {
            let draws = if fixed {
                "fixed".to_string()
            } else {
                format!("{}..{}", it.init_draws.start, it.init_draws.end)
            };
            log.push(format!(
                "iter {} loss {:.6} init_draws {draws}",
                it.iteration, it.mean_loss
            ));
        },
    );
    let distilled = match result {
        Ok(d) => d,
        Err(failure) => {
            log.push(format!(
                "numeric failure at iteration {}: {}",
                failure.iteration, failure.error
            ));
            if !failure.last_good.steps.is_empty() {
                save_distilled(&failure.last_good, &dir.join(DISTILLED_FILE))?;
                log.push(format!("saved last finite snapshot to {DISTILLED_FILE}"));
            }
            log.write(&dir)?;
            return Err(HarnessError::from(failure.error));
        }
    };
    save_distilled(&distilled, &dir.join(DISTILLED_FILE))?;
    if distilled
        .steps
        .first()
        .is_some_and(|s| distill_core::data::integer_sqrt(s.inputs.shape()[1]).is_some())
    {
        export_pgms(&distilled, &dir.join(IMAGES_DIR))?;
    }
    let (models, eval_draws) = eval_models(config, &init, pool.as_deref())?;
    log.push(format!("heldout {eval_draws}"));
    let report = evaluate(config, &distilled, &models, &data.test, eval_draws)?;
    log.push(report.banner());
    log.push(format!(
        "mean_accuracy {} std_accuracy {}",
        report.mean, report.std
    ));
    report.write(&dir)?;
    log.write(&dir)?;
    Ok(DistillOutcome {
        distilled,
        report,
        dir,
    })
}

/// Evaluate a saved distilled file under `config`.
pub fn run_eval(distilled_path: &Path, config: &ExperimentConfig) -> Result<EvalReport> {
    config.validate()?;
    let dir = prepare_out(config)?;
    let distilled = load_distilled(distilled_path)?;
    let data = load_data(config)?;
    let pool = load_pool_for(config)?;
    let init = config.init_spec(pool.as_deref())?;
    let (models, eval_draws) = eval_models(config, &init, pool.as_deref())?;
    let report = evaluate(config, &distilled, &models, &data.test, eval_draws)?;
    report.write(&dir)?;
    let mut log = RunLog::default();
    log.push(format!("eval {}", distilled_path.display()));
    log.push(format!("config_fingerprint {}", report.fingerprint));
    log.push(format!("heldout {}", report.eval_draws));
    log.push(report.banner());
    log.write(&dir)?;
    Ok(report)
}

/// Poison distillation: pretrained-pool init, poison objective, and a single
/// deployment step (`S = E = 1`, forced).
pub fn run_poison(config: &ExperimentConfig) -> Result<DistillOutcome> {
    if !matches!(config.objective, Objective::Poison { .. }) {
        return Err(HarnessError::Validation(
            "poison needs a poison objective".into(),
        ));
    }
    if !matches!(config.init, InitConfig::PretrainedPool { .. }) {
        return Err(HarnessError::Validation(
            "poison needs a pretrained pool init".into(),
        ));
    }
    let mut config = config.clone();
    config.distill.steps = 1;
    config.distill.epochs = 1;
    run_distill(&config)
}

/// Train `pretrain.count` models from independent Xavier draws and distinct
/// shuffling seeds; writes the pool to `pool_path` (default `out/pool.ddpv`)
/// and per-model test accuracy to `pool.csv`.
pub fn pretrain_pool(
    config: &ExperimentConfig,
    pool_path: Option<&Path>,
) -> Result<Vec<ParamVector>> {
    config.validate()?;
    let dir = prepare_out(config)?;
    let data = load_data(config)?;
    let init = InitSpec::new(InitKind::RandomXavier, config.seed);
    let p = &config.pretrain;
    let train_objective = config.objective.training_loss();
    let pool: Vec<ParamVector> = (0..p.count as u64)
        .into_par_iter()
        .map(|i| -> Result<ParamVector> {
            let theta0 = sample_init(&init, &config.model, i)?;
            let cfg = TrainConfig {
                lr: p.lr,
                epochs: p.epochs,
                batch_size: p.batch_size,
                seed: config.seed.wrapping_mul(1_000_003).wrapping_add(i),
            };
            Ok(train_plain(
                &config.model,
                &theta0,
                &data.train,
                &train_objective,
                &cfg,
            )?)
        })
        .collect::<Result<_>>()?;
    let accuracies: Vec<f64> = pool
        .par_iter()
        .map(|theta| config.model.evaluate(theta, &data.test))
        .collect::<distill_core::Result<_>>()?;
    let path = pool_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(POOL_FILE));
    save_pool(&pool, &path)?;
    let mut w = csv::Writer::from_path(dir.join(POOL_CSV))?;
    w.write_record(["run_id", "model_index", "accuracy"])?;
    for (i, a) in accuracies.iter().enumerate() {
        w.write_record([config.run_id.clone(), i.to_string(), a.to_string()])?;
    }
    w.flush()?;
    let mut log = RunLog::default();
    log.push(format!(
        "pretrained {} models into {}",
        pool.len(),
        path.display()
    ));
    log.push(format!("mean_accuracy {}", mean_std(&accuracies).0));
    log.write(&dir)?;
    Ok(pool)
}

/// Baseline sets shaped like the distilled schedule: `S` steps of `M`
/// images each.
pub fn baseline_sets(
    kind: BaselineKind,
    config: &ExperimentConfig,
    train: &LabeledDataset,
    init: &InitSpec,
) -> Result<Vec<Vec<DistilledStep>>> {
    let classes = train.num_classes();
    let s = config.distill.steps;
    let m = match config.distill.images_per_step {
        0 => classes,
        m => m,
    };
    if m % classes != 0 {
        return Err(HarnessError::Validation(format!(
            "baselines need a class-balanced step size; {m} images per step over {classes} classes"
        )));
    }
    let per_class = s * m / classes;
    let b = &config.baseline;
    Ok(match kind {
        BaselineKind::RandomReal => (0..b.random_sets as u64)
            .map(|k| {
                split_steps(
                    &select_random_real(train, per_class, config.seed.wrapping_add(k))?,
                    s,
                )
            })
            .collect::<distill_core::Result<_>>()?,
        BaselineKind::OptimizedReal => {
            let first = draws_used(&config.distill) + config.heldout as u64;
            let eval_models = (first..first + b.optimized_eval_models as u64)
                .map(|i| sample_init(init, &config.model, i))
                .collect::<distill_core::Result<Vec<_>>>()?;
            let cfg = OptimizedRealConfig {
                per_class,
                steps: s,
                candidates: b.optimized_candidates,
                keep: b.optimized_keep,
                probe_size: b.optimized_probe,
                lr: b.optimized_lr,
                epochs: b.optimized_epochs,
                seed: config.seed,
            };
            select_optimized_real(&config.model, train, &eval_models, &cfg, &config.objective)?
                .into_iter()
                .map(|set| split_steps(&set.images, s))
                .collect::<distill_core::Result<_>>()?
        }
        BaselineKind::KMeans => vec![split_steps(
            &kmeans_centroids(train, per_class, config.seed)?,
            s,
        )?],
        BaselineKind::AverageReal => vec![repeat_steps(&average_real(train)?, s)],
    })
}

/// Grid-evaluate one baseline on the held-out models used for distillation
/// reports; `learned_lr` adds the distilled method's mean learned rate.
pub fn run_baseline_kind(
    kind: BaselineKind,
    config: &ExperimentConfig,
    data: &Datasets,
    learned_lr: Option<f64>,
) -> Result<GridResult> {
    if matches!(
        config.objective,
        Objective::Poison { .. } | Objective::QuadraticMse
    ) {
        return Err(HarnessError::Validation(
            "baselines are defined for plain classification".into(),
        ));
    }
    let pool = load_pool_for(config)?;
    let init = config.init_spec(pool.as_deref())?;
    let (models, _) = eval_models(config, &init, pool.as_deref())?;
    let sets = baseline_sets(kind, config, &data.train, &init)?;
    Ok(baseline_grid_eval(
        &config.model,
        &sets,
        &models,
        &data.test,
        &config.baseline.grid(),
        learned_lr,
        &config.objective,
    )?)
}

pub fn parse_baseline_kind(name: &str) -> Result<BaselineKind> {
    match name.replace('-', "_").as_str() {
        "random_real" => Ok(BaselineKind::RandomReal),
        "optimized_real" => Ok(BaselineKind::OptimizedReal),
        "kmeans" | "k_means" => Ok(BaselineKind::KMeans),
        "average_real" => Ok(BaselineKind::AverageReal),
        other => Err(HarnessError::Validation(format!(
            "unknown baseline {other}"
        ))),
    }
}

pub const ALL_BASELINES: [BaselineKind; 4] = [
    BaselineKind::RandomReal,
    BaselineKind::OptimizedReal,
    BaselineKind::KMeans,
    BaselineKind::AverageReal,
];

/// Mean of the learned rates of a distilled file.
pub fn learned_lr(distilled: &DistilledData) -> f64 {
    mean_std(&distilled.rates()).0
}

/// CSV with one row per grid cell and a final `winner` row per baseline.
pub fn baseline_csv(run_id: &str, results: &[(BaselineKind, GridResult)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "run_id",
        "baseline",
        "cell",
        "lr",
        "epochs",
        "learned_lr",
        "mean_accuracy",
        "std_accuracy",
    ])?;
    for (kind, r) in results {
        let rows = r
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| (i.to_string(), c))
            .chain(std::iter::once(("winner".to_string(), r.winner())));
        for (cell, c) in rows {
            w.write_record([
                run_id.to_string(),
                kind.name().to_string(),
                cell,
                c.lr.to_string(),
                c.epochs.to_string(),
                c.learned.to_string(),
                c.mean.to_string(),
                c.std.to_string(),
            ])?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn run_baselines(
    config: &ExperimentConfig,
    kinds: &[BaselineKind],
    distilled: Option<&Path>,
) -> Result<Vec<(BaselineKind, GridResult)>> {
    config.validate()?;
    let dir = prepare_out(config)?;
    let data = load_data(config)?;
    let learned = distilled
        .map(load_distilled)
        .transpose()?
        .map(|d| learned_lr(&d));
    let mut results = Vec::new();
    let mut log = RunLog::default();
    log.push(format!("config_fingerprint {}", config.fingerprint()));
    for &kind in kinds {
        let r = run_baseline_kind(kind, config, &data, learned)?;
        let w = r.winner();
        log.push(format!(
            "{} winner lr {} epochs {} mean {} std {}",
            kind.name(),
            w.lr,
            w.epochs,
            w.mean,
            w.std
        ));
        results.push((kind, r));
    }
    fs::write(
        dir.join(BASELINE_CSV),
        baseline_csv(&config.run_id, &results)?,
    )?;
    log.write(&dir)?;
    Ok(results)
}

/// Lower-bound check over `linear.ms`; returns the reports and their CSV.
pub fn linear_check(config: &ExperimentConfig) -> Result<(Vec<LowerBoundReport>, String)> {
    let problem = linear_problem(config)?;
    let options = config.linear.options(config.seed);
    let reports = config
        .linear
        .ms
        .iter()
        .map(|&m| verify_lower_bound(&problem, m, config.linear.trials, &options))
        .collect::<distill_core::Result<Vec<_>>>()?;
    let mut text = String::from("M,D,worst_gap,feasible\n");
    for r in &reports {
        let _ = writeln!(text, "{},{},{:e},{}", r.m, r.d, r.worst_gap, r.feasible);
    }
    Ok((reports, text))
}

pub fn export_images(distilled_path: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let distilled = load_distilled(distilled_path)?;
    Ok(export_pgms(&distilled, out)?)
}
