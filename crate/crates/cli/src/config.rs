//! Experiment configuration and its `key = value` file format.
//!
//! One setting per line, `#` starts a comment, list values are
//! comma-separated. Unknown keys are errors.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use mlnbound::learning::{default_grid, DaMode};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// MLN file; the bundled Friends & Smokers model when absent.
    pub mln: Option<PathBuf>,
    /// Source database; a generated Friends & Smokers population when absent.
    pub db: Option<PathBuf>,
    pub population: usize,
    /// Name of the sampled type; the first declared type when absent.
    pub sample_type: Option<String>,
    pub train_size: usize,
    pub train_sets: usize,
    pub targets: Vec<usize>,
    pub replicates: usize,
    pub grid: Vec<f64>,
    /// Fixed λ for both penalties instead of a sweep.
    pub lambda: Option<f64>,
    pub seed: u64,
    pub da: DaMode,
    pub tie_split_weights: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub out: Option<PathBuf>,
    pub force_guard: bool,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mln: None,
            db: None,
            population: 500,
            sample_type: None,
            train_size: 3,
            train_sets: 20,
            targets: vec![4],
            replicates: 5,
            grid: default_grid(),
            lambda: None,
            seed: 1,
            da: DaMode::TrainAndTarget,
            tie_split_weights: false,
            max_iterations: 500,
            tolerance: 1e-6,
            out: None,
            force_guard: false,
            workers: None,
        }
    }
}

pub fn parse_da(s: &str) -> Result<DaMode> {
    match s.trim() {
        "off" => Ok(DaMode::Off),
        "train-and-target" | "on" => Ok(DaMode::TrainAndTarget),
        "target-only" => Ok(DaMode::TargetOnly),
        other => bail!(
            "unknown DA mode `{}` (expected off, train-and-target, target-only)",
            other
        ),
    }
}

pub fn da_name(mode: DaMode) -> &'static str {
    match mode {
        DaMode::Off => "off",
        DaMode::TrainAndTarget => "train-and-target",
        DaMode::TargetOnly => "target-only",
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| anyhow!("{}: bad value `{}`: {}", key, s, e))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| anyhow!("{}: bad value `{}`: {}", key, value.trim(), e))
}

impl ExperimentConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "mln" => self.mln = Some(PathBuf::from(v)),
            "db" => self.db = Some(PathBuf::from(v)),
            "population" => self.population = parse_one(key, v)?,
            "sample_type" => self.sample_type = Some(v.to_string()),
            "train_size" => self.train_size = parse_one(key, v)?,
            "train_sets" => self.train_sets = parse_one(key, v)?,
            "targets" => self.targets = parse_list(key, v)?,
            "replicates" => self.replicates = parse_one(key, v)?,
            "grid" => self.grid = parse_list(key, v)?,
            "lambda" => self.lambda = Some(parse_one(key, v)?),
            "seed" => self.seed = parse_one(key, v)?,
            "da" => self.da = parse_da(v)?,
            "tie_split_weights" => self.tie_split_weights = parse_one(key, v)?,
            "max_iterations" => self.max_iterations = parse_one(key, v)?,
            "tolerance" => self.tolerance = parse_one(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "force_guard" => self.force_guard = parse_one(key, v)?,
            "workers" => self.workers = Some(parse_one(key, v)?),
            other => bail!("unknown configuration key `{}`", other),
        }
        Ok(())
    }

    /// Reads settings from `key = value` text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            cfg.set(k, v).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_sets == 0 || self.replicates == 0 {
            bail!("train_sets and replicates must be at least 1");
        }
        if self.targets.is_empty() {
            bail!("at least one target size is required");
        }
        if let Some(&t) = self.targets.iter().find(|&&t| t < self.train_size) {
            bail!(
                "target size {} is below the training size {}",
                t,
                self.train_size
            );
        }
        if self.grid.is_empty() && self.lambda.is_none() {
            bail!("lambda grid is empty");
        }
        if self
            .grid
            .iter()
            .chain(self.lambda.iter())
            .any(|l| l.is_nan() || *l < 0.0 || !l.is_finite())
        {
            bail!("lambda values must be finite and >= 0");
        }
        if self.da == DaMode::Off {
            bail!("the da method needs a scaling mode other than off");
        }
        if self.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# desk scale\ntrain_size = 2\ntargets = 2, 3,4\ngrid = 0.1,1\nda = target-only # eval only\n",
        )
        .unwrap();
        assert_eq!(cfg.train_size, 2);
        assert_eq!(cfg.targets, vec![2, 3, 4]);
        assert_eq!(cfg.grid, vec![0.1, 1.0]);
        assert_eq!(cfg.da, DaMode::TargetOnly);
        assert_eq!(cfg.seed, 1);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("seed = minus one").is_err());
        assert!(ExperimentConfig::parse("seed 4").is_err());
        let cfg = ExperimentConfig::parse("targets = 2").unwrap();
        assert!(cfg.validate().is_err());
    }
}
