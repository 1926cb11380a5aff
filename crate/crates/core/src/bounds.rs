//! Extremal k-weights, the connecting-term bounds `M_max`, `M_min`, `Δ`, and
//! exhaustive verification of the inequalities relating an MLN on `[n]` to
//! the same MLN on `[n+m]`.
//!
//! Every check compares two log-space quantities and records the worst slack
//! (bound minus value, oriented so that a satisfied inequality has slack
//! `≥ 0`). A check fails only when some slack is below `-TOLERANCE`.

use std::fmt::{self, Write as _};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::logic::MlnModel;
use crate::model::{
    k_weight_table, log_weight_table, marginal_table, GroundingTable, MarginalTable,
};
use crate::numeric::{cross_exponent, log_sum_exp, par_chunks};
use crate::worlds::{Domain, EnumGuard, Gather, Split, World};

/// Absolute log-space tolerance of every check.
pub const TOLERANCE: f64 = 1e-9;

/// Atoms over `k` constants above which extremal search is refused.
pub const EXTREMA_MAX_ATOMS: usize = 27;

/// Extremes of `log w_k` over all partial worlds on one `k`-tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct KExtremum {
    pub k: usize,
    pub log_max: f64,
    pub log_min: f64,
    /// First world (in index order) attaining the maximum, over `k` constants.
    pub argmax: World,
    pub argmin: World,
}

impl KExtremum {
    pub fn spread(&self) -> f64 {
        self.log_max - self.log_min
    }
}

/// Exhaustive `log w_k^max` and `log w_k^min`. By exchangeability the
/// canonical tuple `(0, .., k-1)` represents every `k`-tuple.
pub fn extremal_k_weights(model: &MlnModel, k: usize) -> Result<KExtremum> {
    let table = k_weight_table(model, k)?;
    let g = table.domain().num_atoms();
    EnumGuard::with_limit(EXTREMA_MAX_ATOMS).check(g)?;
    let parts = par_chunks(1u64 << g, |range| {
        let mut best = (f64::NEG_INFINITY, 0u64, f64::INFINITY, 0u64);
        for w in range {
            let lw = table.log_weight(&w);
            if lw > best.0 {
                best.0 = lw;
                best.1 = w;
            }
            if lw < best.2 {
                best.2 = lw;
                best.3 = w;
            }
        }
        best
    });
    let mut best = (f64::NEG_INFINITY, 0u64, f64::INFINITY, 0u64);
    for p in parts {
        if p.0 > best.0 {
            best.0 = p.0;
            best.1 = p.1;
        }
        if p.2 < best.2 {
            best.2 = p.2;
            best.3 = p.3;
        }
    }
    Ok(KExtremum {
        k,
        log_max: best.0,
        log_min: best.2,
        argmax: World::from_index(best.1, g),
        argmin: World::from_index(best.3, g),
    })
}

/// `log M_max`, `log M_min` and `log Δ` for a split of `[n+m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MBounds {
    pub n: usize,
    pub m: usize,
    /// One entry per arity `1..=d`.
    pub extrema: Vec<KExtremum>,
    pub log_m_max: f64,
    pub log_m_min: f64,
    pub log_delta: f64,
}

/// `log M = Σ_k (C(n+m,k) − C(n,k) − C(m,k)) · log w_k^ext`.
pub fn m_bounds(model: &MlnModel, n: usize, m: usize) -> Result<MBounds> {
    model.arity_partition()?;
    let types = model.signature.types().len();
    if types != 1 {
        return Err(Error::MultipleTypes(types));
    }
    let mut extrema = Vec::new();
    let mut log_m_max = 0.0;
    let mut log_m_min = 0.0;
    for k in 1..=model.max_arity() {
        let ext = extremal_k_weights(model, k)?;
        let e = cross_exponent(n, m, k);
        if e > 0.0 {
            log_m_max += e * ext.log_max;
            log_m_min += e * ext.log_min;
        }
        extrema.push(ext);
    }
    Ok(MBounds {
        n,
        m,
        extrema,
        log_m_max,
        log_m_min,
        log_delta: log_m_max - log_m_min,
    })
}

/// `log Δ` alone.
pub fn log_delta(model: &MlnModel, n: usize, m: usize) -> Result<f64> {
    Ok(m_bounds(model, n, m)?.log_delta)
}

/// Worst slacks of a two-sided inequality `lower ≤ value ≤ upper`. A
/// one-sided check leaves the other side at `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    /// `min (value − lower)`.
    pub lower_slack: f64,
    /// `min (upper − value)`.
    pub upper_slack: f64,
    /// World index attaining the worst lower slack, for per-world checks.
    pub lower_witness: Option<u64>,
    pub upper_witness: Option<u64>,
}

impl CheckRecord {
    fn new(name: &str) -> Self {
        CheckRecord {
            name: name.to_string(),
            lower_slack: f64::INFINITY,
            upper_slack: f64::INFINITY,
            lower_witness: None,
            upper_witness: None,
        }
    }

    fn observe_lower(&mut self, slack: f64, witness: Option<u64>) {
        if slack < self.lower_slack || slack.is_nan() {
            self.lower_slack = slack;
            self.lower_witness = witness;
        }
    }

    fn observe_upper(&mut self, slack: f64, witness: Option<u64>) {
        if slack < self.upper_slack || slack.is_nan() {
            self.upper_slack = slack;
            self.upper_witness = witness;
        }
    }

    /// Merges a record of the same check computed on a later index range.
    fn merge(&mut self, other: &CheckRecord) {
        self.observe_lower(other.lower_slack, other.lower_witness);
        self.observe_upper(other.upper_slack, other.upper_witness);
    }

    pub fn worst_slack(&self) -> f64 {
        self.lower_slack.min(self.upper_slack)
    }

    pub fn pass(&self) -> bool {
        let w = self.worst_slack();
        !w.is_nan() && w >= -TOLERANCE
    }
}

/// Cached quantities for one model and split, shared by all checks.
pub struct SplitAnalysis {
    model: MlnModel,
    split: Split,
    guard: EnumGuard,
    bounds: MBounds,
    full: GroundingTable,
    lower_lw: Vec<f64>,
    upper_lw: Vec<f64>,
    log_z_n: f64,
    log_z_m: f64,
    marginal: OnceLock<MarginalTable>,
}

impl SplitAnalysis {
    pub fn new(model: &MlnModel, n: usize, m: usize, guard: EnumGuard) -> Result<Self> {
        let bounds = m_bounds(model, n, m)?;
        let split = Split::single(&model.signature, n, m)?;
        guard.check(split.full().num_atoms())?;
        let full = GroundingTable::new(model, split.full())?;
        let lower_lw = log_weight_table(&GroundingTable::new(model, &split.lower())?, guard)?;
        let upper_lw = log_weight_table(&GroundingTable::new(model, &split.upper())?, guard)?;
        let log_z_n = log_sum_exp(lower_lw.iter().copied());
        let log_z_m = log_sum_exp(upper_lw.iter().copied());
        Ok(SplitAnalysis {
            model: model.clone(),
            split,
            guard,
            bounds,
            full,
            lower_lw,
            upper_lw,
            log_z_n,
            log_z_m,
            marginal: OnceLock::new(),
        })
    }

    pub fn bounds(&self) -> &MBounds {
        &self.bounds
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn log_delta(&self) -> f64 {
        self.bounds.log_delta
    }

    /// Number of cross atoms; `C_{n,m} = 2^` this.
    pub fn cross_atoms(&self) -> usize {
        self.split.extension_count_log2()
    }

    pub fn log_c(&self) -> f64 {
        self.cross_atoms() as f64 * std::f64::consts::LN_2
    }

    pub fn log_z_n(&self) -> f64 {
        self.log_z_n
    }

    pub fn log_z_m(&self) -> f64 {
        self.log_z_m
    }

    pub fn marginal(&self) -> Result<&MarginalTable> {
        if let Some(t) = self.marginal.get() {
            return Ok(t);
        }
        let t = marginal_table(&self.model, &self.split, self.guard)?;
        Ok(self.marginal.get_or_init(|| t))
    }

    pub fn log_z_nm(&self) -> Result<f64> {
        Ok(self.marginal()?.log_z)
    }

    /// `log P^(n)` of a world over `[n]` given by index.
    pub fn log_p_n(&self, index: u64) -> f64 {
        self.lower_lw[index as usize] - self.log_z_n
    }

    pub fn log_marginal(&self, index: u64) -> Result<f64> {
        Ok(self.marginal()?.log_marginal[index as usize])
    }

    /// `(lower, upper)` slack of the per-world factorization bound at one
    /// world of `[n+m]`.
    pub fn prop1_slack_at(&self, world: u64) -> (f64, f64) {
        let (lo, hi) = self.gathers();
        self.prop1_slack(world, &lo, &hi)
    }

    fn gathers(&self) -> (Gather, Gather) {
        (
            Gather::new(self.split.lower_positions()),
            Gather::new(self.split.upper_positions()),
        )
    }

    fn prop1_slack(&self, world: u64, lo: &Gather, hi: &Gather) -> (f64, f64) {
        let lw = self.full.log_weight(&world);
        let parts =
            self.lower_lw[lo.apply(world) as usize] + self.upper_lw[hi.apply(world) as usize];
        (
            lw - (parts + self.bounds.log_m_min),
            parts + self.bounds.log_m_max - lw,
        )
    }

    /// `w(ω↓[n])·w(ω↓[n̄])·M_min ≤ w(ω) ≤ w(ω↓[n])·w(ω↓[n̄])·M_max` for every
    /// `ω ∈ Ω^(n+m)`.
    pub fn check_prop1(&self) -> CheckRecord {
        let (lo, hi) = self.gathers();
        let g = self.split.full().num_atoms();
        let parts = par_chunks(1u64 << g, |range| {
            let mut rec = CheckRecord::new("prop1");
            for w in range {
                let (l, u) = self.prop1_slack(w, &lo, &hi);
                rec.observe_lower(l, Some(w));
                rec.observe_upper(u, Some(w));
            }
            rec
        });
        let mut rec = CheckRecord::new("prop1");
        for p in &parts {
            rec.merge(p);
        }
        rec
    }

    /// `M_min·C·Z(n)·Z(m) ≤ Z(n+m) ≤ Z(n)·Z(m)·C·M_max`.
    pub fn check_prop3(&self) -> Result<CheckRecord> {
        let z = self.log_z_nm()?;
        let base = self.log_z_n + self.log_z_m + self.log_c();
        let mut rec = CheckRecord::new("prop3");
        rec.observe_lower(z - (base + self.bounds.log_m_min), None);
        rec.observe_upper(base + self.bounds.log_m_max - z, None);
        Ok(rec)
    }

    /// `P^(n)/Δ ≤ P^(n+m)↓[n] ≤ Δ·P^(n)` on every world over `[n]`.
    pub fn check_theorem1(&self) -> Result<CheckRecord> {
        let marg = self.marginal()?;
        let d = self.log_delta();
        let mut rec = CheckRecord::new("theorem1");
        for (i, &lm) in marg.log_marginal.iter().enumerate() {
            let lp = self.log_p_n(i as u64);
            rec.observe_lower(lm - (lp - d), Some(i as u64));
            rec.observe_upper(lp + d - lm, Some(i as u64));
        }
        Ok(rec)
    }

    /// `max_ω |log P^(n+m)↓[n](ω) − log P^(n)(ω)|`.
    pub fn max_log_ratio(&self) -> Result<f64> {
        let marg = self.marginal()?;
        Ok(marg
            .log_marginal
            .iter()
            .enumerate()
            .map(|(i, &lm)| (lm - self.log_p_n(i as u64)).abs())
            .fold(0.0, f64::max))
    }

    /// `KL(P^(n+m)↓[n] ‖ P^(n))`.
    pub fn kl_divergence(&self) -> Result<f64> {
        let marg = self.marginal()?;
        let mut kl = 0.0;
        for (i, &lm) in marg.log_marginal.iter().enumerate() {
            if lm == f64::NEG_INFINITY {
                continue;
            }
            kl += lm.exp() * (lm - self.log_p_n(i as u64));
        }
        Ok(kl)
    }

    /// `0 ≤ KL ≤ log Δ`.
    pub fn check_kl(&self) -> Result<CheckRecord> {
        let kl = self.kl_divergence()?;
        let mut rec = CheckRecord::new("kl");
        rec.observe_lower(kl, None);
        rec.observe_upper(self.log_delta() - kl, None);
        Ok(rec)
    }

    /// Both corollaries at one world over `[n]`:
    /// `−log P^(n+m)↓[n](ω) ≤ −log P^(n)(ω) + log Δ` and
    /// `−log P^(n)(ω) + KL ≤ −log P^(n)(ω) + log Δ`.
    pub fn check_corollaries_at(&self, index: u64) -> Result<(CheckRecord, CheckRecord)> {
        let lm = self.log_marginal(index)?;
        let lp = self.log_p_n(index);
        let kl = self.kl_divergence()?;
        let d = self.log_delta();
        let mut c1 = CheckRecord::new("corollary1");
        c1.observe_upper((-lp + d) - (-lm), Some(index));
        let mut c2 = CheckRecord::new("corollary2");
        c2.observe_upper((-lp + d) - (-lp + kl), Some(index));
        Ok((c1, c2))
    }

    /// Corollaries over every world of `[n]`.
    pub fn check_corollaries(&self) -> Result<(CheckRecord, CheckRecord)> {
        let mut c1 = CheckRecord::new("corollary1");
        let mut c2 = CheckRecord::new("corollary2");
        for i in 0..self.lower_lw.len() as u64 {
            let (a, b) = self.check_corollaries_at(i)?;
            c1.merge(&a);
            c2.merge(&b);
        }
        Ok((c1, c2))
    }

    /// Runs every check.
    pub fn report(&self) -> Result<BoundsReport> {
        let mut checks = vec![
            self.check_prop1(),
            self.check_prop3()?,
            self.check_theorem1()?,
            self.check_kl()?,
        ];
        let (c1, c2) = self.check_corollaries()?;
        checks.push(c1);
        checks.push(c2);
        Ok(BoundsReport {
            bounds: self.bounds.clone(),
            cross_atoms: self.cross_atoms(),
            log_c: self.log_c(),
            log_z_n: self.log_z_n,
            log_z_m: self.log_z_m,
            log_z_nm: self.log_z_nm()?,
            kl: self.kl_divergence()?,
            max_log_ratio: self.max_log_ratio()?,
            checks,
            full: self.split.full().clone(),
            lower: self.split.lower(),
            partial: (1..=self.model.max_arity())
                .map(|k| Domain::single(&self.model.signature, k))
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

pub fn check_prop1(model: &MlnModel, n: usize, m: usize, guard: EnumGuard) -> Result<CheckRecord> {
    Ok(SplitAnalysis::new(model, n, m, guard)?.check_prop1())
}

pub fn check_prop3(model: &MlnModel, n: usize, m: usize, guard: EnumGuard) -> Result<CheckRecord> {
    SplitAnalysis::new(model, n, m, guard)?.check_prop3()
}

pub fn check_theorem1(
    model: &MlnModel,
    n: usize,
    m: usize,
    guard: EnumGuard,
) -> Result<CheckRecord> {
    SplitAnalysis::new(model, n, m, guard)?.check_theorem1()
}

pub fn kl_divergence(model: &MlnModel, n: usize, m: usize, guard: EnumGuard) -> Result<f64> {
    SplitAnalysis::new(model, n, m, guard)?.kl_divergence()
}

/// Both likelihood-gap corollaries at one world over `[n]`.
pub fn check_corollaries(
    model: &MlnModel,
    n: usize,
    m: usize,
    world: &World,
    guard: EnumGuard,
) -> Result<(CheckRecord, CheckRecord)> {
    let a = SplitAnalysis::new(model, n, m, guard)?;
    let lower = a.split().lower();
    if world.len() != lower.num_atoms() {
        return Err(Error::WorldSize {
            expected: lower.num_atoms(),
            found: world.len(),
        });
    }
    a.check_corollaries_at(world.to_index().expect("guarded world fits in 64 bits"))
}

/// All bound quantities and check results for one model and split.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub bounds: MBounds,
    pub cross_atoms: usize,
    pub log_c: f64,
    pub log_z_n: f64,
    pub log_z_m: f64,
    pub log_z_nm: f64,
    pub kl: f64,
    pub max_log_ratio: f64,
    pub checks: Vec<CheckRecord>,
    full: Domain,
    lower: Domain,
    partial: Vec<Domain>,
}

/// One machine-readable line of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub check: String,
    pub n: usize,
    pub m: usize,
    pub log_delta: f64,
    pub worst_slack: f64,
    pub pass: bool,
}

impl BoundsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(CheckRecord::pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.checks
            .iter()
            .map(|c| ReportRow {
                check: c.name.clone(),
                n: self.bounds.n,
                m: self.bounds.m,
                log_delta: self.bounds.log_delta,
                worst_slack: c.worst_slack(),
                pass: c.pass(),
            })
            .collect()
    }

    fn witness_domain(&self, check: &str) -> &Domain {
        if check == "prop1" {
            &self.full
        } else {
            &self.lower
        }
    }
}

/// Renders a world as the set of its true atoms.
pub fn format_world(domain: &Domain, world: &World) -> String {
    let sig = domain.signature();
    let atoms: Vec<String> = world
        .true_atoms()
        .map(|i| {
            let (p, args) = domain.atom(i);
            let args: Vec<String> = args.iter().map(usize::to_string).collect();
            format!("{}({})", sig.predicate(p).name, args.join(","))
        })
        .collect();
    format!("{{{}}}", atoms.join(", "))
}

impl fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.bounds;
        writeln!(f, "split n={} m={}", b.n, b.m)?;
        for (ext, dom) in b.extrema.iter().zip(&self.partial) {
            writeln!(
                f,
                "  k={} log w_max={:.12} log w_min={:.12} spread={:.12} argmax={} argmin={}",
                ext.k,
                ext.log_max,
                ext.log_min,
                ext.spread(),
                format_world(dom, &ext.argmax),
                format_world(dom, &ext.argmin),
            )?;
        }
        writeln!(f, "  log M_max = {:.12}", b.log_m_max)?;
        writeln!(f, "  log M_min = {:.12}", b.log_m_min)?;
        writeln!(f, "  log Delta = {:.12}", b.log_delta)?;
        writeln!(
            f,
            "  log C     = {:.12} (2^{} extensions)",
            self.log_c, self.cross_atoms
        )?;
        writeln!(
            f,
            "  log Z(n) = {:.12}  log Z(m) = {:.12}  log Z(n+m) = {:.12}",
            self.log_z_n, self.log_z_m, self.log_z_nm
        )?;
        writeln!(
            f,
            "  KL = {:.12}  max |log ratio| = {:.12}",
            self.kl, self.max_log_ratio
        )?;
        for c in &self.checks {
            let mut line = format!(
                "  {:<11} {}  lower slack {:>16.9e}  upper slack {:>16.9e}",
                c.name,
                if c.pass() { "PASS" } else { "FAIL" },
                c.lower_slack,
                c.upper_slack
            );
            let dom = self.witness_domain(&c.name);
            if let Some(w) = c.lower_witness {
                let _ = write!(
                    line,
                    "  lower at {}",
                    format_world(dom, &World::from_index(w, dom.num_atoms()))
                );
            }
            if let Some(w) = c.upper_witness {
                let _ = write!(
                    line,
                    "  upper at {}",
                    format_world(dom, &World::from_index(w, dom.num_atoms()))
                );
            }
            writeln!(f, "{}", line)?;
        }
        Ok(())
    }
}

/// Runs every check for one model and split.
pub fn verify(model: &MlnModel, n: usize, m: usize, guard: EnumGuard) -> Result<BoundsReport> {
    SplitAnalysis::new(model, n, m, guard)?.report()
}
