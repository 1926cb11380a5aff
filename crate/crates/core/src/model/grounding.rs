//! Precompiled groundings of every clause over one domain.
//!
//! Each clause has a list of distinct atom templates. A grounding maps every
//! template to a ground atom index, and the clause's truth value under that
//! grounding is a lookup in a truth table indexed by the template truth bits.
//! Groundings sharing an equality pattern between variables share a table,
//! since disequalities resolve identically for all of them. Groundings whose
//! table is constant are not stored; always-true ones are counted once.

use crate::error::{Error, Result};
use crate::logic::{Clause, Formula, MlnModel, PredId, Signature, VarId};
use crate::worlds::{Domain, Truth};

/// Template count above which a clause's truth table is not built.
pub const MAX_TEMPLATES: usize = 20;

#[derive(Debug, Clone)]
struct Group {
    table: Vec<bool>,
    width: usize,
    atoms: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct ClauseGroundings {
    groups: Vec<Group>,
    constant: u64,
    total: u64,
}

impl ClauseGroundings {
    pub fn build(clause: &Clause, domain: &Domain) -> Result<Self> {
        let templates = clause.formula.atoms();
        let width = templates.len();
        if width > MAX_TEMPLATES {
            return Err(Error::ClauseTooWide(width));
        }
        let arity = clause.arity();
        let sizes: Vec<usize> = clause.vars.iter().map(|v| domain.size(v.ty)).collect();
        let mut out = ClauseGroundings {
            groups: Vec::new(),
            constant: 0,
            total: 0,
        };
        if sizes.contains(&0) {
            return Ok(out);
        }
        // equality pattern (restricted growth string) -> group slot, or None
        // when the resolved formula is constant
        let mut patterns: Vec<(Vec<usize>, Option<usize>, bool)> = Vec::new();
        let mut assign = vec![0usize; arity];
        loop {
            out.total += 1;
            let pattern = equality_pattern(&assign);
            let pos = match patterns.iter().position(|(p, _, _)| *p == pattern) {
                Some(i) => i,
                None => {
                    let entry =
                        compile_pattern(&clause.formula, &templates, &assign, &mut out.groups);
                    patterns.push((pattern, entry.0, entry.1));
                    patterns.len() - 1
                }
            };
            match patterns[pos].1 {
                Some(g) => {
                    let group = &mut out.groups[g];
                    for (pred, args) in &templates {
                        let consts: Vec<usize> = args.iter().map(|&v| assign[v]).collect();
                        group.atoms.push(domain.atom_index(*pred, &consts) as u32);
                    }
                }
                None => {
                    if patterns[pos].2 {
                        out.constant += 1;
                    }
                }
            }
            // next assignment, last variable fastest
            let mut i = arity;
            loop {
                if i == 0 {
                    out.groups.retain(|g| !g.atoms.is_empty());
                    return Ok(out);
                }
                i -= 1;
                assign[i] += 1;
                if assign[i] < sizes[i] {
                    break;
                }
                assign[i] = 0;
            }
        }
    }

    /// Number of true groundings in `world`.
    #[inline]
    pub fn count<T: Truth>(&self, world: &T) -> u64 {
        let mut c = self.constant;
        for g in &self.groups {
            for atoms in g.atoms.chunks_exact(g.width) {
                let mut idx = 0usize;
                for (j, &a) in atoms.iter().enumerate() {
                    idx |= (world.truth(a as usize) as usize) << j;
                }
                c += g.table[idx] as u64;
            }
        }
        c
    }

    /// Number of variable assignments considered (all of them, including
    /// those ruled out by disequalities).
    pub fn assignments(&self) -> u64 {
        self.total
    }
}

fn equality_pattern(assign: &[usize]) -> Vec<usize> {
    let mut firsts: Vec<usize> = Vec::new();
    assign
        .iter()
        .map(|c| match firsts.iter().position(|f| f == c) {
            Some(b) => b,
            None => {
                firsts.push(*c);
                firsts.len() - 1
            }
        })
        .collect()
}

/// Returns `(Some(group), _)` for a non-constant pattern and `(None, value)`
/// for a constant one.
fn compile_pattern(
    formula: &Formula,
    templates: &[(PredId, Vec<VarId>)],
    assign: &[usize],
    groups: &mut Vec<Group>,
) -> (Option<usize>, bool) {
    let resolved = formula
        .resolve_neq(&|a: VarId, b: VarId| assign[a] != assign[b])
        .fold();
    if let Formula::Const(v) = resolved {
        return (None, v);
    }
    let width = templates.len();
    let mut table = vec![false; 1 << width];
    // two templates may ground to the same atom under this pattern; only
    // consistent bit vectors are ever looked up, so the rest are don't-cares
    for (bits, slot) in table.iter_mut().enumerate() {
        *slot = resolved.eval(
            &|p: PredId, args: &[VarId]| {
                let j = templates
                    .iter()
                    .position(|(q, a)| *q == p && a.as_slice() == args)
                    .expect("atom is one of the templates");
                (bits >> j) & 1 == 1
            },
            &|_, _| unreachable!("disequalities resolved"),
        );
    }
    if table.iter().all(|&t| t) {
        return (None, true);
    }
    if table.iter().all(|&t| !t) {
        return (None, false);
    }
    groups.push(Group {
        table,
        width,
        atoms: Vec::new(),
    });
    (Some(groups.len() - 1), false)
}

/// Groundings of every clause of a model over one domain, with the model's
/// weights.
#[derive(Debug, Clone)]
pub struct GroundingTable {
    domain: Domain,
    clauses: Vec<ClauseGroundings>,
    weights: Vec<f64>,
}

pub(crate) fn check_signature(model: &Signature, domain: &Domain) -> Result<()> {
    let ds = domain.signature();
    if ds.predicates() != model.predicates() || ds.types().len() != model.types().len() {
        return Err(Error::InvalidDomain(
            "domain signature differs from the model's".into(),
        ));
    }
    Ok(())
}

impl GroundingTable {
    pub fn new(model: &MlnModel, domain: &Domain) -> Result<Self> {
        check_signature(&model.signature, domain)?;
        let clauses = model
            .clauses
            .iter()
            .map(|c| ClauseGroundings::build(c, domain))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroundingTable {
            domain: domain.clone(),
            clauses,
            weights: model.weights(),
        })
    }

    /// Table restricted to the clauses for which `keep` holds; the others
    /// keep their slot with zero weight and no groundings.
    pub fn filtered<F: Fn(&Clause) -> bool>(
        model: &MlnModel,
        domain: &Domain,
        keep: F,
    ) -> Result<Self> {
        check_signature(&model.signature, domain)?;
        let mut clauses = Vec::with_capacity(model.clauses.len());
        let mut weights = Vec::with_capacity(model.clauses.len());
        for c in &model.clauses {
            if keep(c) {
                clauses.push(ClauseGroundings::build(c, domain)?);
                weights.push(c.weight);
            } else {
                clauses.push(ClauseGroundings {
                    groups: Vec::new(),
                    constant: 0,
                    total: 0,
                });
                weights.push(0.0);
            }
        }
        Ok(GroundingTable {
            domain: domain.clone(),
            clauses,
            weights,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn clause(&self, i: usize) -> &ClauseGroundings {
        &self.clauses[i]
    }

    pub fn count<T: Truth>(&self, i: usize, world: &T) -> u64 {
        self.clauses[i].count(world)
    }

    pub fn counts_into<T: Truth>(&self, world: &T, out: &mut [u32]) {
        for (o, c) in out.iter_mut().zip(&self.clauses) {
            *o = c.count(world) as u32;
        }
    }

    pub fn counts<T: Truth>(&self, world: &T) -> Vec<u32> {
        let mut out = vec![0; self.clauses.len()];
        self.counts_into(world, &mut out);
        out
    }

    /// `Σ_i a_i N(φ_i, ω)` with the model's weights.
    #[inline]
    pub fn log_weight<T: Truth>(&self, world: &T) -> f64 {
        self.log_weight_with(&self.weights, world)
    }

    #[inline]
    pub fn log_weight_with<T: Truth>(&self, weights: &[f64], world: &T) -> f64 {
        let mut acc = 0.0;
        for (c, &a) in self.clauses.iter().zip(weights) {
            if a != 0.0 {
                acc += a * c.count(world) as f64;
            }
        }
        acc
    }
}
