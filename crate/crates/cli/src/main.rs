use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mlnbound::bounds::verify;
use mlnbound::datagen::{db_to_world, generate_fs, parse_db, serialize_db};
use mlnbound::learning::{LearnConfig, Learner, Regularizer, TargetEvaluator};
use mlnbound::logic::{normalize_distinct, parse_mln, MlnModel};
use mlnbound::worlds::{Domain, EnumGuard};
use mlnbound_cli::config::{parse_da, ExperimentConfig};
use mlnbound_cli::experiment::{run_experiment, summary, write_csv, write_outputs};

#[derive(Parser)]
#[command(
    name = "mlnbound",
    version,
    about = "Domain-size generalization bounds for Markov logic networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustively check every bound for a split of n + m constants.
    Verify(VerifyArgs),
    /// Train on small subsamples and score on larger ones.
    Experiment(ExperimentArgs),
    /// Generate Friends & Smokers populations.
    Generate(GenerateArgs),
    /// Learn weights from one database.
    Learn(LearnArgs),
    /// Log-likelihood of a database under a model.
    Eval(EvalArgs),
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    mln: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Raise the enumeration limit.
    #[arg(long)]
    force_guard: bool,
    /// Also write the report rows as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mln: Option<PathBuf>,
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<usize>>,
    /// Fixed λ for both penalties instead of a sweep.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    da: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force_guard: bool,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 500)]
    population: usize,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seed: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Reg {
    None,
    L1,
    L2,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    mln: PathBuf,
    #[arg(long)]
    db: PathBuf,
    #[arg(long, value_enum, default_value = "none")]
    reg: Reg,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value = "off")]
    da: String,
    /// Learned model path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force_guard: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    mln: PathBuf,
    #[arg(long)]
    db: PathBuf,
    /// Treat the weights as parameters to scale to the database size.
    #[arg(long, default_value = "off")]
    da: String,
    #[arg(long)]
    force_guard: bool,
}

/// Failures that map to exit code 1 rather than 2.
#[derive(Debug)]
struct CheckFailure(String);

impl std::fmt::Display for CheckFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailure {}

fn guard(force: bool) -> EnumGuard {
    if force {
        EnumGuard::forced()
    } else {
        EnumGuard::default()
    }
}

fn read_model(path: &Path) -> Result<MlnModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_mln(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_verify(a: &VerifyArgs) -> Result<()> {
    let model = normalize_distinct(&read_model(&a.mln)?);
    let report = verify(&model, a.n, a.m, guard(a.force_guard))?;
    print!("{}", report);
    if let Some(path) = &a.out {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["check", "n", "m", "log_delta", "worst_slack", "pass"])?;
        for r in report.rows() {
            w.write_record([
                r.check,
                r.n.to_string(),
                r.m.to_string(),
                r.log_delta.to_string(),
                r.worst_slack.to_string(),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
    }
    if !report.all_pass() {
        return Err(CheckFailure("at least one check failed".into()).into());
    }
    Ok(())
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::parse(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &a.mln {
        cfg.mln = Some(v.clone());
    }
    if let Some(v) = &a.db {
        cfg.db = Some(v.clone());
    }
    if let Some(v) = a.train_size {
        cfg.train_size = v;
    }
    if let Some(v) = &a.targets {
        cfg.targets = v.clone();
    }
    if let Some(v) = a.lambda {
        cfg.lambda = Some(v);
    }
    if let Some(v) = &a.grid {
        cfg.grid = v.clone();
    }
    if let Some(v) = &a.da {
        cfg.da = parse_da(v)?;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = &a.out {
        cfg.out = Some(v.clone());
    }
    if a.force_guard {
        cfg.force_guard = true;
    }
    if let Some(v) = a.workers {
        cfg.workers = Some(v);
    }
    cfg.validate()?;
    let out = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) if e.to_string().starts_with("every run failed") => {
            return Err(CheckFailure(e.to_string()).into())
        }
        Err(e) => return Err(e),
    };
    match &cfg.out {
        Some(dir) => {
            write_outputs(&out, dir)?;
            print!("{}", summary(&out));
        }
        None => write_csv(&out.rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for &seed in &a.seed {
        let (db, meta) = generate_fs(a.population, seed)?;
        let base = a.out.join(format!("fs_p{}_s{}", a.population, seed));
        fs::write(base.with_extension("db"), serialize_db(&db))?;
        fs::write(base.with_extension("meta"), meta.to_text())?;
        println!("{}", base.with_extension("db").display());
    }
    Ok(())
}

fn load_data(model: &MlnModel, db_path: &Path) -> Result<(Domain, mlnbound::World)> {
    let text =
        fs::read_to_string(db_path).with_context(|| format!("reading {}", db_path.display()))?;
    let db = parse_db(&model.signature, &text)?;
    let domain = Domain::new(&model.signature, db.sizes())?;
    let world = db_to_world(&db, &domain)?;
    Ok((domain, world))
}

fn cmd_learn(a: &LearnArgs) -> Result<()> {
    let model = normalize_distinct(&read_model(&a.mln)?);
    let (domain, world) = load_data(&model, &a.db)?;
    let regularizer = match a.reg {
        Reg::None => Regularizer::None,
        Reg::L1 => Regularizer::L1(a.lambda),
        Reg::L2 => Regularizer::L2(a.lambda),
    };
    let cfg = LearnConfig {
        regularizer,
        da: parse_da(&a.da)?,
        ..LearnConfig::default()
    };
    let result = Learner::new(&model, &domain, guard(a.force_guard))?.learn(&world, &cfg)?;
    if !result.converged {
        eprintln!(
            "warning: no convergence after {} iterations",
            result.iterations
        );
    }
    let learned = model.with_weights(&result.weights)?;
    match &a.out {
        Some(p) => {
            fs::write(p, learned.to_string()).with_context(|| format!("writing {}", p.display()))?
        }
        None => print!("{}", learned),
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let model = normalize_distinct(&read_model(&a.mln)?);
    let (domain, world) = load_data(&model, &a.db)?;
    let eval = TargetEvaluator::new(&model, &domain, guard(a.force_guard))?;
    println!(
        "{}",
        eval.log_likelihood(&model.weights(), &world, parse_da(&a.da)?)?
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<CheckFailure>() => {
            eprintln!("mlnbound: {}", e);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("mlnbound: {:#}", e);
            ExitCode::from(2)
        }
    }
}
