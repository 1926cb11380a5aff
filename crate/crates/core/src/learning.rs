//! Exact maximum-likelihood weight learning from one observed world, with
//! optional L1/L2 penalties on clauses of arity above one and domain-size
//! aware scaling.
//!
//! The optimizer is full-batch proximal gradient descent on the negative
//! log-likelihood. The smooth part (negative log-likelihood, plus the L2
//! penalty when present) takes a gradient step; the L1 penalty is applied by
//! soft-thresholding. Step sizes start at 1, halve until the sufficient
//! decrease condition
//! `f(θ⁺) ≤ f(θ) + ∇f(θ)·(θ⁺−θ) + ‖θ⁺−θ‖²/(2t)` holds, and double after every
//! accepted step. For the smooth case this is the Armijo condition with
//! constant 1/2. Convergence is declared when the ∞-norm of the gradient
//! mapping `(θ − prox(θ − ∇f(θ)))` is at most the tolerance.
//!
//! Likelihoods come from a [`CountHistogram`] of the training domain, built
//! once, so every objective evaluation costs one pass over distinct count
//! vectors rather than over all worlds.

use rayon::prelude::*;

use crate::bounds::log_delta;
use crate::error::{Error, Result};
use crate::logic::MlnModel;
use crate::model::{
    apply_da_scaling, da_scale_factors, expected_counts_table, log_partition_table, CountHistogram,
    GroundingTable,
};
use crate::worlds::{Domain, EnumGuard, World};

/// Penalty on the weights of clauses with arity above one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    None,
    /// `λ Σ |a_i|`.
    L1(f64),
    /// `λ Σ a_i²`.
    L2(f64),
}

impl Regularizer {
    pub fn lambda(&self) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::L1(l) | Regularizer::L2(l) => l,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::L1(_) => "l1",
            Regularizer::L2(_) => "l2",
        }
    }
}

/// When domain-size aware scaling is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DaMode {
    Off,
    /// Learn parameters whose weights are scaled by the training-size
    /// factors, and evaluate with target-size factors.
    TrainAndTarget,
    /// Learn unscaled weights; scale by target-size factors at evaluation.
    TargetOnly,
}

impl DaMode {
    pub fn at_target(&self) -> bool {
        !matches!(self, DaMode::Off)
    }

    pub fn at_train(&self) -> bool {
        matches!(self, DaMode::TrainAndTarget)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub regularizer: Regularizer,
    pub da: DaMode,
    pub max_iterations: usize,
    /// Convergence threshold on the ∞-norm of the gradient mapping.
    pub tolerance: f64,
    pub initial_step: f64,
    /// Maximum number of step halvings per iteration.
    pub max_backtracks: usize,
    /// Initial parameters; zeros when absent.
    pub initial: Option<Vec<f64>>,
    /// Share one parameter among clauses derived from the same input clause.
    pub tie_split_weights: bool,
    /// `(n, m)` at which [`LearnResult::log_delta`] is computed.
    pub reference: Option<(usize, usize)>,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            regularizer: Regularizer::None,
            da: DaMode::Off,
            max_iterations: 500,
            tolerance: 1e-6,
            initial_step: 1.0,
            max_backtracks: 60,
            initial: None,
            tie_split_weights: false,
            reference: None,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        let l = self.regularizer.lambda();
        if l.is_nan() || l < 0.0 || !l.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                l
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if self.initial_step.is_nan() || self.initial_step <= 0.0 {
            return Err(Error::Config("initial_step must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub nll: f64,
    pub penalty: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnResult {
    /// Learned parameters, one per clause (tied clauses repeat their value).
    /// Without DA scaling these are the clause weights.
    pub weights: Vec<f64>,
    /// Clause weights in effect at the training size.
    pub train_weights: Vec<f64>,
    /// One entry per iterate, starting with the initial point.
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub iterations: usize,
    /// `log Δ` of the weights used at size `n+m` of the reference split.
    pub log_delta: Option<f64>,
}

impl LearnResult {
    pub fn penalized_objective(&self) -> f64 {
        let last = self.trace.last().expect("trace holds the initial point");
        last.nll + last.penalty
    }
}

/// Training-domain state shared by many runs: the grounding table, the
/// count histogram and the clause-to-parameter map.
pub struct Learner {
    model: MlnModel,
    table: GroundingTable,
    histogram: CountHistogram,
}

impl Learner {
    pub fn new(model: &MlnModel, domain: &Domain, guard: EnumGuard) -> Result<Self> {
        let table = GroundingTable::new(model, domain)?;
        let histogram = CountHistogram::build(&table, guard)?;
        Ok(Learner {
            model: model.clone(),
            table,
            histogram,
        })
    }

    pub fn model(&self) -> &MlnModel {
        &self.model
    }

    pub fn domain(&self) -> &Domain {
        self.table.domain()
    }

    pub fn counts(&self, data: &World) -> Result<Vec<u32>> {
        check_data(self.domain(), data)?;
        Ok(self.table.counts(data))
    }

    /// `log P(data)` under `weights`.
    pub fn log_likelihood(&self, weights: &[f64], data: &World) -> Result<f64> {
        let counts = self.counts(data)?;
        Ok(dot(weights, &counts) - self.histogram.log_partition(weights))
    }

    pub fn learn(&self, data: &World, cfg: &LearnConfig) -> Result<LearnResult> {
        cfg.validate()?;
        let counts = self.counts(data)?;
        let problem = Problem::new(&self.model, self.domain(), cfg)?;
        let mut theta = match &cfg.initial {
            Some(init) => {
                if init.len() != self.model.clauses.len() {
                    return Err(Error::ClauseMismatch {
                        expected: self.model.clauses.len(),
                        found: init.len(),
                    });
                }
                problem.params_from_clause_values(init)
            }
            None => vec![0.0; problem.num_params()],
        };
        let mut state = problem.evaluate(&self.histogram, &counts, &theta);
        let mut trace = vec![TraceEntry {
            nll: state.nll,
            penalty: problem.penalty(&theta),
            grad_norm: problem.mapping_norm(&theta, &state.grad),
            step: 0.0,
        }];
        let mut step = cfg.initial_step;
        let mut converged = trace[0].grad_norm <= cfg.tolerance;
        let mut iterations = 0;
        while !converged && iterations < cfg.max_iterations {
            iterations += 1;
            let mut t = step;
            let mut accepted = None;
            for _ in 0..=cfg.max_backtracks {
                let next = problem.prox_step(&theta, &state.grad, t);
                let next_state = problem.evaluate(&self.histogram, &counts, &next);
                let diff: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
                let model_decrease = state.smooth
                    + diff
                        .iter()
                        .zip(&state.grad)
                        .map(|(d, g)| d * g)
                        .sum::<f64>()
                    + diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * t);
                if next_state.smooth <= model_decrease {
                    accepted = Some((next, next_state));
                    break;
                }
                t *= 0.5;
            }
            let Some((next, next_state)) = accepted else {
                break;
            };
            theta = next;
            state = next_state;
            let entry = TraceEntry {
                nll: state.nll,
                penalty: problem.penalty(&theta),
                grad_norm: problem.mapping_norm(&theta, &state.grad),
                step: t,
            };
            trace.push(entry);
            converged = entry.grad_norm <= cfg.tolerance;
            step = 2.0 * t;
        }
        let weights = problem.clause_values(&theta);
        let train_weights = problem.train_weights(&theta);
        let log_delta = match cfg.reference {
            Some((n, m)) => {
                let sizes: Vec<usize> = self.domain().sizes().iter().map(|_| n + m).collect();
                let at_ref = if cfg.da.at_target() {
                    scaled_weights(&self.model, &weights, &sizes)?
                } else {
                    weights.clone()
                };
                Some(log_delta(&self.model.with_weights(&at_ref)?, n, m)?)
            }
            None => None,
        };
        Ok(LearnResult {
            weights,
            train_weights,
            trace,
            converged,
            iterations,
            log_delta,
        })
    }
}

fn check_data(domain: &Domain, data: &World) -> Result<()> {
    if data.len() != domain.num_atoms() {
        return Err(Error::WorldSize {
            expected: domain.num_atoms(),
            found: data.len(),
        });
    }
    Ok(())
}

fn dot(weights: &[f64], counts: &[u32]) -> f64 {
    weights
        .iter()
        .zip(counts)
        .map(|(&a, &c)| a * c as f64)
        .sum()
}

/// Clause weights `θ_i / s_i` for target sizes `sizes`.
pub fn scaled_weights(model: &MlnModel, params: &[f64], sizes: &[usize]) -> Result<Vec<f64>> {
    let m = model.with_weights(params)?;
    Ok(apply_da_scaling(&m, &da_scale_factors(&m, sizes)?)?.weights())
}

struct Evaluation {
    nll: f64,
    /// Smooth part of the objective: `nll` plus the L2 penalty.
    smooth: f64,
    /// Gradient of `smooth` with respect to the parameters.
    grad: Vec<f64>,
}

/// Parameterization of one learning problem.
struct Problem {
    regularizer: Regularizer,
    /// Parameter of each clause.
    group: Vec<usize>,
    /// Weight of clause `i` is `θ[group[i]] · scale[i]`.
    scale: Vec<f64>,
    /// Whether each parameter is penalized.
    penalized: Vec<bool>,
}

impl Problem {
    fn new(model: &MlnModel, domain: &Domain, cfg: &LearnConfig) -> Result<Self> {
        let k = model.clauses.len();
        let mut origins: Vec<usize> = Vec::new();
        let mut group = Vec::with_capacity(k);
        for (i, c) in model.clauses.iter().enumerate() {
            if cfg.tie_split_weights {
                match origins.iter().position(|&o| o == c.origin) {
                    Some(g) => group.push(g),
                    None => {
                        origins.push(c.origin);
                        group.push(origins.len() - 1);
                    }
                }
            } else {
                origins.push(i);
                group.push(i);
            }
        }
        // a tied group is penalized when its input clause had arity above
        // one, which is the largest arity among the clauses it produced
        let mut max_arity = vec![0usize; origins.len()];
        for (c, &g) in model.clauses.iter().zip(&group) {
            max_arity[g] = max_arity[g].max(c.arity());
        }
        let scale = if cfg.da.at_train() {
            da_scale_factors(model, domain.sizes())?
                .factors
                .iter()
                .map(|s| 1.0 / s)
                .collect()
        } else {
            vec![1.0; k]
        };
        Ok(Problem {
            regularizer: cfg.regularizer,
            group,
            scale,
            penalized: max_arity.iter().map(|&a| a > 1).collect(),
        })
    }

    fn num_params(&self) -> usize {
        self.penalized.len()
    }

    fn params_from_clause_values(&self, values: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0; self.num_params()];
        let mut seen = vec![false; self.num_params()];
        for (i, &g) in self.group.iter().enumerate() {
            if !seen[g] {
                theta[g] = values[i];
                seen[g] = true;
            }
        }
        theta
    }

    fn clause_values(&self, theta: &[f64]) -> Vec<f64> {
        self.group.iter().map(|&g| theta[g]).collect()
    }

    fn train_weights(&self, theta: &[f64]) -> Vec<f64> {
        self.group
            .iter()
            .zip(&self.scale)
            .map(|(&g, s)| theta[g] * s)
            .collect()
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        let (l, square) = match self.regularizer {
            Regularizer::None => return 0.0,
            Regularizer::L1(l) => (l, false),
            Regularizer::L2(l) => (l, true),
        };
        l * theta
            .iter()
            .zip(&self.penalized)
            .filter(|(_, &p)| p)
            .map(|(t, _)| if square { t * t } else { t.abs() })
            .sum::<f64>()
    }

    fn evaluate(&self, hist: &CountHistogram, counts: &[u32], theta: &[f64]) -> Evaluation {
        let weights = self.train_weights(theta);
        let (log_z, expected) = hist.expected_counts(&weights);
        let nll = log_z - dot(&weights, counts);
        let mut grad = vec![0.0; self.num_params()];
        for i in 0..counts.len() {
            grad[self.group[i]] += self.scale[i] * (expected[i] - counts[i] as f64);
        }
        let mut smooth = nll;
        if let Regularizer::L2(l) = self.regularizer {
            for (j, g) in grad.iter_mut().enumerate() {
                if self.penalized[j] {
                    *g += 2.0 * l * theta[j];
                    smooth += l * theta[j] * theta[j];
                }
            }
        }
        Evaluation { nll, smooth, grad }
    }

    fn prox_step(&self, theta: &[f64], grad: &[f64], t: f64) -> Vec<f64> {
        theta
            .iter()
            .zip(grad)
            .zip(&self.penalized)
            .map(|((&th, &g), &p)| {
                let v = th - t * g;
                match self.regularizer {
                    Regularizer::L1(l) if p => soft_threshold(v, l * t),
                    _ => v,
                }
            })
            .collect()
    }

    /// ∞-norm of the unit-step gradient mapping.
    fn mapping_norm(&self, theta: &[f64], grad: &[f64]) -> f64 {
        self.prox_step(theta, grad, 1.0)
            .iter()
            .zip(theta)
            .map(|(n, t)| (t - n).abs())
            .fold(0.0, f64::max)
    }
}

pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// `log P^(n)(data)` by streaming enumeration.
pub fn log_likelihood(
    model: &MlnModel,
    domain: &Domain,
    data: &World,
    guard: EnumGuard,
) -> Result<f64> {
    check_data(domain, data)?;
    guard.check(domain.num_atoms())?;
    let table = GroundingTable::new(model, domain)?;
    Ok(table.log_weight(data) - log_partition_table(&table, table.weights(), guard)?)
}

/// `N(φ_i, data) − E[N(φ_i, ·)]`, with the expectation by streaming
/// enumeration.
pub fn gradient(
    model: &MlnModel,
    domain: &Domain,
    data: &World,
    guard: EnumGuard,
) -> Result<Vec<f64>> {
    check_data(domain, data)?;
    guard.check(domain.num_atoms())?;
    let table = GroundingTable::new(model, domain)?;
    let (_, expected) = expected_counts_table(&table, table.weights(), guard)?;
    let counts = table.counts(data);
    Ok(counts
        .iter()
        .zip(&expected)
        .map(|(&c, e)| c as f64 - e)
        .collect())
}

/// Learns with a fresh [`Learner`].
pub fn learn(
    model: &MlnModel,
    domain: &Domain,
    data: &World,
    cfg: &LearnConfig,
    guard: EnumGuard,
) -> Result<LearnResult> {
    Learner::new(model, domain, guard)?.learn(data, cfg)
}

/// Target-domain state for evaluating many learned weight vectors.
pub struct TargetEvaluator {
    model: MlnModel,
    table: GroundingTable,
    histogram: CountHistogram,
}

impl TargetEvaluator {
    pub fn new(model: &MlnModel, domain: &Domain, guard: EnumGuard) -> Result<Self> {
        let table = GroundingTable::new(model, domain)?;
        let histogram = CountHistogram::build(&table, guard)?;
        Ok(TargetEvaluator {
            model: model.clone(),
            table,
            histogram,
        })
    }

    pub fn domain(&self) -> &Domain {
        self.table.domain()
    }

    /// Clause weights used at the target size for learned parameters.
    pub fn effective_weights(&self, params: &[f64], da: DaMode) -> Result<Vec<f64>> {
        if da.at_target() {
            scaled_weights(&self.model, params, self.domain().sizes())
        } else {
            if params.len() != self.model.clauses.len() {
                return Err(Error::ClauseMismatch {
                    expected: self.model.clauses.len(),
                    found: params.len(),
                });
            }
            Ok(params.to_vec())
        }
    }

    /// `log P^(target)(data)` for learned parameters.
    pub fn log_likelihood(&self, params: &[f64], data: &World, da: DaMode) -> Result<f64> {
        check_data(self.domain(), data)?;
        let w = self.effective_weights(params, da)?;
        Ok(dot(&w, &self.table.counts(data)) - self.histogram.log_partition(&w))
    }
}

/// Target-set log-likelihood of learned parameters.
pub fn evaluate_target(
    model: &MlnModel,
    target: &Domain,
    data: &World,
    da: DaMode,
    guard: EnumGuard,
) -> Result<f64> {
    let w = TargetEvaluator::new(model, target, guard)?;
    w.log_likelihood(&model.weights(), data, da)
}

/// `10^-2 .. 10^2` in 9 log-spaced points.
pub fn default_grid() -> Vec<f64> {
    (0..9).map(|i| 10f64.powf(-2.0 + 0.5 * i as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best: f64,
    /// `(λ, score)` in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the grid point with the highest score; ties go to the larger λ.
pub fn select_lambda<F>(grid: &[f64], score: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }
    let scores = grid
        .iter()
        .map(|&l| Ok((l, score(l)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = scores[0];
    for &(l, s) in &scores[1..] {
        if s > best.1 || (s == best.1 && l > best.0) {
            best = (l, s);
        }
    }
    Ok(SweepResult {
        best: best.0,
        scores,
    })
}

/// Learns on every training world for each λ and scores λ by the mean
/// target log-likelihood over all (training world, target world) pairs.
pub fn lambda_sweep(
    learner: &Learner,
    train: &[World],
    evaluator: &TargetEvaluator,
    targets: &[World],
    make: fn(f64) -> Regularizer,
    base: &LearnConfig,
    grid: &[f64],
) -> Result<SweepResult> {
    if train.is_empty() || targets.is_empty() {
        return Err(Error::Config(
            "lambda sweep needs training and target worlds".into(),
        ));
    }
    select_lambda(grid, |l| {
        let cfg = LearnConfig {
            regularizer: make(l),
            reference: None,
            ..base.clone()
        };
        let per_run = train
            .par_iter()
            .map(|w| {
                let r = learner.learn(w, &cfg)?;
                targets
                    .iter()
                    .map(|t| evaluator.log_likelihood(&r.weights, t, base.da))
                    .sum::<Result<f64>>()
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(per_run.iter().sum::<f64>() / (train.len() * targets.len()) as f64)
    })
}
