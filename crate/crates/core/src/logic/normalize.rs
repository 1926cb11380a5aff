//! Rewriting clauses so that every grounding uses pairwise-distinct constants.
//!
//! A clause over variables `V` is replaced by one clause per set partition of
//! `V` into blocks of same-typed variables. Each block is collapsed to its
//! first variable and the result is conjoined with disequalities between all
//! remaining same-typed variables. Every output clause keeps the input weight,
//! so the sum of true groundings (and hence the distribution) is unchanged.

use super::{Clause, Formula, MlnModel, TypeId, Var, VarId};

/// Set partitions of `0..types.len()` that only group equal types, as
/// restricted growth strings (`rgs[i]` is the block of element `i`, blocks
/// numbered by first occurrence). Lexicographic order.
pub fn set_partitions(types: &[TypeId]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut rgs = Vec::with_capacity(types.len());
    let mut block_types = Vec::new();
    extend_partitions(types, &mut rgs, &mut block_types, &mut out);
    out
}

fn extend_partitions(
    types: &[TypeId],
    rgs: &mut Vec<usize>,
    block_types: &mut Vec<TypeId>,
    out: &mut Vec<Vec<usize>>,
) {
    let i = rgs.len();
    if i == types.len() {
        out.push(rgs.clone());
        return;
    }
    for b in 0..=block_types.len() {
        if b < block_types.len() {
            if block_types[b] != types[i] {
                continue;
            }
            rgs.push(b);
            extend_partitions(types, rgs, block_types, out);
            rgs.pop();
        } else {
            block_types.push(types[i]);
            rgs.push(b);
            extend_partitions(types, rgs, block_types, out);
            rgs.pop();
            block_types.pop();
        }
    }
}

/// Distinct-constant rewrite of one clause. Clauses that fold to a constant
/// (e.g. because they required `x != x`) contribute nothing to the
/// distribution and are dropped.
pub fn normalize_clause(clause: &Clause) -> Vec<Clause> {
    let types: Vec<TypeId> = clause.vars.iter().map(|v| v.ty).collect();
    let mut out = Vec::new();
    for rgs in set_partitions(&types) {
        let nblocks = rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut vars: Vec<Var> = Vec::with_capacity(nblocks);
        for (i, &b) in rgs.iter().enumerate() {
            if b == vars.len() {
                vars.push(clause.vars[i].clone());
            }
        }
        // all output variables are distinct, so every surviving disequality
        // between different variables holds
        let body = clause
            .formula
            .substitute(&rgs)
            .resolve_neq(&|a: VarId, b: VarId| a != b)
            .fold();
        if let Formula::Const(_) = body {
            continue;
        }
        let mut neqs = Vec::new();
        for a in 0..vars.len() {
            for b in a + 1..vars.len() {
                if vars[a].ty == vars[b].ty {
                    neqs.push(Formula::Neq(a, b));
                }
            }
        }
        let formula = if neqs.is_empty() {
            body
        } else {
            let mut parts = vec![body];
            parts.extend(neqs);
            Formula::and(parts)
        };
        out.push(Clause {
            formula,
            vars,
            weight: clause.weight,
            origin: clause.origin,
        });
    }
    out
}

/// Applies [`normalize_clause`] to every clause of the model.
pub fn normalize_distinct(model: &MlnModel) -> MlnModel {
    let clauses = model.clauses.iter().flat_map(normalize_clause).collect();
    MlnModel::new(model.signature.clone(), clauses)
}
