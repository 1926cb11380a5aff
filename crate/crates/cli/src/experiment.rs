//! The train-small, evaluate-large pipeline: subsample training and target
//! sets from one source database, learn with each method, and score learned
//! weights on every target set.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use mlnbound::bounds::log_delta;
use mlnbound::datagen::{
    db_to_world, derive_seed, generate_fs, parse_db, serialize_db, subsample, Database, FsMetadata,
    SampleSpec,
};
use mlnbound::learning::{
    lambda_sweep, DaMode, LearnConfig, LearnResult, Learner, Regularizer, SweepResult,
    TargetEvaluator,
};
use mlnbound::logic::{normalize_distinct, parse_mln, MlnModel, TypeId};
use mlnbound::worlds::{Domain, EnumGuard, World};

use crate::config::{da_name, ExperimentConfig};

/// Leading comment line of every results file.
pub const CSV_SCHEMA: &str = "# mlnbound-experiment schema 1";

pub const CSV_HEADER: [&str; 14] = [
    "run",
    "method",
    "lambda",
    "train_size",
    "target_size",
    "replicate",
    "target_ll",
    "ll_delta",
    "log_delta",
    "log_delta_unscaled",
    "converged",
    "iterations",
    "model",
    "status",
];

/// The bundled Friends & Smokers model.
pub const FS_MLN: &str = include_str!("../models/fs.mln");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    None,
    L1,
    L2,
    Da,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::None, Method::L1, Method::L2, Method::Da];

    pub fn name(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::L1 => "l1",
            Method::L2 => "l2",
            Method::Da => "da",
        }
    }
}

/// One result line.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub run: usize,
    pub method: Method,
    pub lambda: f64,
    pub train_size: usize,
    pub target_size: usize,
    pub replicate: usize,
    pub target_ll: Option<f64>,
    /// Target log-likelihood minus that of the unregularized fit on the same
    /// run and target set.
    pub ll_delta: Option<f64>,
    /// `log Δ` of the weights used at the target size.
    pub log_delta: Option<f64>,
    /// `log Δ` of the learned parameters without target-size scaling.
    pub log_delta_unscaled: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub model: String,
    pub status: String,
}

fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl Row {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.run.to_string(),
            self.method.name().to_string(),
            self.lambda.to_string(),
            self.train_size.to_string(),
            self.target_size.to_string(),
            self.replicate.to_string(),
            num(self.target_ll),
            num(self.ll_delta),
            num(self.log_delta),
            num(self.log_delta_unscaled),
            self.converged.map(|c| c.to_string()).unwrap_or_default(),
            self.iterations.map(|c| c.to_string()).unwrap_or_default(),
            self.model.clone(),
            self.status.clone(),
        ]
    }
}

/// A learned model written alongside the results.
#[derive(Debug, Clone)]
pub struct LearnedModel {
    pub file: String,
    pub model: MlnModel,
}

/// One training run with one method.
#[derive(Debug, Clone)]
pub struct Fit {
    pub run: usize,
    pub method: Method,
    pub lambda: f64,
    pub result: std::result::Result<LearnResult, String>,
}

pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub model: MlnModel,
    pub rows: Vec<Row>,
    pub fits: Vec<Fit>,
    pub sweeps: Vec<(Method, SweepResult)>,
    pub lambda_l1: f64,
    pub lambda_l2: f64,
    pub models: Vec<LearnedModel>,
    pub source: Database,
    pub source_meta: Option<FsMetadata>,
}

struct Data {
    train: Vec<World>,
    /// Per target size, the replicate worlds.
    targets: Vec<Vec<World>>,
    train_domain: Domain,
    target_domains: Vec<Domain>,
}

fn guard(cfg: &ExperimentConfig) -> EnumGuard {
    if cfg.force_guard {
        EnumGuard::forced()
    } else {
        EnumGuard::default()
    }
}

fn sampled_domain(model: &MlnModel, db: &Database, ty: TypeId, size: usize) -> Result<Domain> {
    let mut sizes = db.sizes();
    sizes[ty] = size;
    Ok(Domain::new(&model.signature, sizes)?)
}

fn build_data(
    cfg: &ExperimentConfig,
    model: &MlnModel,
    source: &Database,
    ty: TypeId,
) -> Result<Data> {
    let train_domain = sampled_domain(model, source, ty, cfg.train_size)?;
    let mut train = Vec::with_capacity(cfg.train_sets);
    for r in 0..cfg.train_sets {
        let spec = SampleSpec {
            ty,
            size: cfg.train_size,
            seed: derive_seed(cfg.seed, 1 + r as u64),
        };
        train.push(db_to_world(&subsample(source, &spec)?, &train_domain)?);
    }
    let mut targets = Vec::new();
    let mut target_domains = Vec::new();
    for (ti, &size) in cfg.targets.iter().enumerate() {
        let domain = sampled_domain(model, source, ty, size)?;
        let mut reps = Vec::with_capacity(cfg.replicates);
        for j in 0..cfg.replicates {
            let spec = SampleSpec {
                ty,
                size,
                seed: derive_seed(cfg.seed, 1_000_000 + 1000 * ti as u64 + j as u64),
            };
            reps.push(db_to_world(&subsample(source, &spec)?, &domain)?);
        }
        targets.push(reps);
        target_domains.push(domain);
    }
    Ok(Data {
        train,
        targets,
        train_domain,
        target_domains,
    })
}

/// Reads the model, normalized to distinct-constant form.
pub fn load_model(cfg: &ExperimentConfig) -> Result<MlnModel> {
    let text = match &cfg.mln {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => FS_MLN.to_string(),
    };
    Ok(normalize_distinct(&parse_mln(&text)?))
}

fn load_source(cfg: &ExperimentConfig, model: &MlnModel) -> Result<(Database, Option<FsMetadata>)> {
    match &cfg.db {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok((parse_db(&model.signature, &text)?, None))
        }
        None => {
            let (db, meta) = generate_fs(cfg.population, derive_seed(cfg.seed, 0))?;
            Ok((db, Some(meta)))
        }
    }
}

fn learn_config(cfg: &ExperimentConfig, regularizer: Regularizer, da: DaMode) -> LearnConfig {
    LearnConfig {
        regularizer,
        da,
        max_iterations: cfg.max_iterations,
        tolerance: cfg.tolerance,
        tie_split_weights: cfg.tie_split_weights,
        ..LearnConfig::default()
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| anyhow!("thread pool: {}", e))?
            .install(|| run_inner(cfg)),
        None => run_inner(cfg),
    }
}

fn run_inner(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let model = load_model(cfg)?;
    let (source, source_meta) = load_source(cfg, &model)?;
    if source.signature().predicates().len() != model.signature.predicates().len() {
        bail!("database and model declare different predicates");
    }
    let ty = match &cfg.sample_type {
        Some(name) => model
            .signature
            .type_id(name)
            .ok_or_else(|| anyhow!("unknown sample type `{}`", name))?,
        None => 0,
    };
    let g = guard(cfg);
    let data = build_data(cfg, &model, &source, ty)?;
    let learner = Learner::new(&model, &data.train_domain, g)?;
    let evaluators = data
        .target_domains
        .iter()
        .map(|d| TargetEvaluator::new(&model, d, g))
        .collect::<mlnbound::Result<Vec<_>>>()?;

    // tuning uses the smallest target size
    let smallest = (0..cfg.targets.len())
        .min_by_key(|&i| cfg.targets[i])
        .expect("validated non-empty");
    let mut sweeps = Vec::new();
    let (lambda_l1, lambda_l2) = match cfg.lambda {
        Some(l) => (l, l),
        None => {
            let base = learn_config(cfg, Regularizer::None, DaMode::Off);
            let s1 = lambda_sweep(
                &learner,
                &data.train,
                &evaluators[smallest],
                &data.targets[smallest],
                Regularizer::L1,
                &base,
                &cfg.grid,
            )?;
            let s2 = lambda_sweep(
                &learner,
                &data.train,
                &evaluators[smallest],
                &data.targets[smallest],
                Regularizer::L2,
                &base,
                &cfg.grid,
            )?;
            let best = (s1.best, s2.best);
            sweeps.push((Method::L1, s1));
            sweeps.push((Method::L2, s2));
            best
        }
    };

    let methods: Vec<(Method, Regularizer, DaMode, f64)> = vec![
        (Method::None, Regularizer::None, DaMode::Off, 0.0),
        (
            Method::L1,
            Regularizer::L1(lambda_l1),
            DaMode::Off,
            lambda_l1,
        ),
        (
            Method::L2,
            Regularizer::L2(lambda_l2),
            DaMode::Off,
            lambda_l2,
        ),
        (Method::Da, Regularizer::None, cfg.da, 0.0),
    ];
    let jobs: Vec<(usize, usize)> = (0..cfg.train_sets)
        .flat_map(|r| (0..methods.len()).map(move |k| (r, k)))
        .collect();
    let fits: Vec<Fit> = jobs
        .par_iter()
        .map(|&(r, k)| {
            let (method, reg, da, lambda) = methods[k];
            let result = learner
                .learn(&data.train[r], &learn_config(cfg, reg, da))
                .map_err(|e| e.to_string());
            Fit {
                run: r,
                method,
                lambda,
                result,
            }
        })
        .collect();

    let per_run: Vec<(Vec<Row>, Vec<LearnedModel>)> = (0..cfg.train_sets)
        .into_par_iter()
        .map(|r| {
            score_run(
                cfg,
                &model,
                &data,
                &evaluators,
                &fits[r * methods.len()..(r + 1) * methods.len()],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut models = Vec::new();
    for (r, m) in per_run {
        rows.extend(r);
        models.extend(m);
    }
    if rows.iter().all(|r| r.status != "ok") {
        bail!(
            "every run failed; first error: {}",
            rows.first().map_or("", |r| r.status.as_str())
        );
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        model,
        rows,
        fits,
        sweeps,
        lambda_l1,
        lambda_l2,
        models,
        source,
        source_meta,
    })
}

fn score_run(
    cfg: &ExperimentConfig,
    model: &MlnModel,
    data: &Data,
    evaluators: &[TargetEvaluator],
    fits: &[Fit],
) -> Result<(Vec<Row>, Vec<LearnedModel>)> {
    let n = cfg.train_size;
    let mut rows = Vec::new();
    let mut models = Vec::new();
    let baseline = fits
        .iter()
        .find(|f| f.method == Method::None)
        .expect("baseline method present");
    for fit in fits {
        let file_base = format!("run{:02}_{}", fit.run, fit.method.name());
        let params = match &fit.result {
            Ok(r) => Some(r.weights.clone()),
            Err(_) => None,
        };
        if let (Some(p), false) = (&params, fit.method == Method::Da) {
            models.push(LearnedModel {
                file: format!("{}.mln", file_base),
                model: model.with_weights(p)?,
            });
        }
        let unscaled = match &params {
            Some(p) => Some(
                cfg.targets
                    .iter()
                    .map(|&t| log_delta(&model.with_weights(p)?, n, t - n))
                    .collect::<mlnbound::Result<Vec<f64>>>()?,
            ),
            None => None,
        };
        for (ti, &t) in cfg.targets.iter().enumerate() {
            let eval = &evaluators[ti];
            let mode = if fit.method == Method::Da {
                cfg.da
            } else {
                DaMode::Off
            };
            let (file, effective) = match &params {
                Some(p) => {
                    let w = eval.effective_weights(p, mode)?;
                    if fit.method == Method::Da {
                        let file = format!("{}_t{}.mln", file_base, t);
                        models.push(LearnedModel {
                            file: file.clone(),
                            model: model.with_weights(&w)?,
                        });
                        (file, Some(w))
                    } else {
                        (format!("{}.mln", file_base), Some(w))
                    }
                }
                None => (String::new(), None),
            };
            let ld = match &effective {
                Some(w) => Some(log_delta(&model.with_weights(w)?, n, t - n)?),
                None => None,
            };
            for (j, target) in data.targets[ti].iter().enumerate() {
                let mut row = Row {
                    run: fit.run,
                    method: fit.method,
                    lambda: fit.lambda,
                    train_size: n,
                    target_size: t,
                    replicate: j,
                    target_ll: None,
                    ll_delta: None,
                    log_delta: ld,
                    log_delta_unscaled: unscaled.as_ref().map(|u| u[ti]),
                    converged: fit.result.as_ref().ok().map(|r| r.converged),
                    iterations: fit.result.as_ref().ok().map(|r| r.iterations),
                    model: file.clone(),
                    status: "ok".into(),
                };
                match &fit.result {
                    Ok(r) => {
                        let ll = eval.log_likelihood(&r.weights, target, mode)?;
                        row.target_ll = Some(ll);
                        if let Ok(b) = &baseline.result {
                            row.ll_delta =
                                Some(ll - eval.log_likelihood(&b.weights, target, DaMode::Off)?);
                        }
                    }
                    Err(e) => row.status = format!("error: {}", e),
                }
                rows.push(row);
            }
        }
    }
    Ok((rows, models))
}

/// Writes the CSV: schema line, header, rows.
pub fn write_csv<W: Write>(rows: &[Row], mut out: W) -> Result<()> {
    writeln!(out, "{}", CSV_SCHEMA)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Human-readable summary of an experiment.
pub fn summary(out: &ExperimentOutput) -> String {
    let cfg = &out.config;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "train size {}  training sets {}  targets {:?} x {} replicates  seed {}",
        cfg.train_size, cfg.train_sets, cfg.targets, cfg.replicates, cfg.seed
    );
    let _ = writeln!(
        s,
        "da mode {}  tie split weights {}",
        da_name(cfg.da),
        cfg.tie_split_weights
    );
    for (m, sw) in &out.sweeps {
        let scores: Vec<String> = sw
            .scores
            .iter()
            .map(|(l, v)| format!("{}:{:.6}", l, v))
            .collect();
        let _ = writeln!(
            s,
            "{} sweep best lambda {}  [{}]",
            m.name(),
            sw.best,
            scores.join(" ")
        );
    }
    let _ = writeln!(
        s,
        "lambda l1 {}  lambda l2 {}",
        out.lambda_l1, out.lambda_l2
    );
    for m in Method::ALL {
        let fits: Vec<&Fit> = out.fits.iter().filter(|f| f.method == m).collect();
        let converged = fits
            .iter()
            .filter(|f| matches!(&f.result, Ok(r) if r.converged))
            .count();
        let failed = fits.iter().filter(|f| f.result.is_err()).count();
        let _ = writeln!(
            s,
            "{:<4} converged {}/{}  failed {}",
            m.name(),
            converged,
            fits.len(),
            failed
        );
        for &t in &cfg.targets {
            let rows: Vec<&Row> = out
                .rows
                .iter()
                .filter(|r| r.method == m && r.target_size == t)
                .collect();
            let _ = writeln!(
                s,
                "     target {}  mean target ll {}  mean ll delta {}  mean log delta {}",
                t,
                fmt_opt(mean(rows.iter().filter_map(|r| r.target_ll))),
                fmt_opt(mean(rows.iter().filter_map(|r| r.ll_delta))),
                fmt_opt(mean(rows.iter().filter_map(|r| r.log_delta))),
            );
        }
    }
    s
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{:.6}", v)).unwrap_or_else(|| "-".into())
}

/// Writes `results.csv`, `summary.txt`, the learned models and the source
/// database into `dir`.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("models"))
        .with_context(|| format!("creating {}", dir.display()))?;
    let mut csv_bytes = Vec::new();
    write_csv(&out.rows, &mut csv_bytes)?;
    fs::write(dir.join("results.csv"), csv_bytes)?;
    fs::write(dir.join("summary.txt"), summary(out))?;
    for m in &out.models {
        fs::write(dir.join("models").join(&m.file), m.model.to_string())?;
    }
    if let Some(meta) = &out.source_meta {
        fs::write(dir.join("population.db"), serialize_db(&out.source))?;
        fs::write(dir.join("population.meta"), meta.to_text())?;
    }
    Ok(())
}
