//! Exact MLN semantics by enumeration: grounding counts, world weights,
//! k-weights, the partition function, probabilities and cross-domain
//! marginals.
//!
//! All quantities are in log space. Enumeration splits the world-index range
//! into fixed chunks (see [`crate::numeric::CHUNK`]) and merges chunk results
//! in index order, so results do not depend on the number of threads.

mod da;
mod grounding;
mod stats;

pub use da::{apply_da_scaling, da_scale_factors, DaMlnScaling};
pub use grounding::{ClauseGroundings, GroundingTable, MAX_TEMPLATES};
pub use stats::{expected_counts, expected_counts_table, CountHistogram};

use crate::error::{Error, Result};
use crate::logic::{Clause, MlnModel};
use crate::numeric::{par_chunks, LogSumExp};
use crate::worlds::{Domain, EnumGuard, Gather, Scatter, Split, World};

/// Atoms over `[n]` above which the marginal accumulator is not allocated.
pub const MARGINAL_MAX_LOWER_ATOMS: usize = 24;

fn check_world(domain: &Domain, world: &World) -> Result<()> {
    if world.len() != domain.num_atoms() {
        return Err(Error::WorldSize {
            expected: domain.num_atoms(),
            found: world.len(),
        });
    }
    Ok(())
}

/// `N(φ, ω)`: true groundings of one clause.
pub fn count_true_groundings(clause: &Clause, domain: &Domain, world: &World) -> Result<u64> {
    check_world(domain, world)?;
    Ok(ClauseGroundings::build(clause, domain)?.count(world))
}

/// `log w(ω) = Σ_i a_i N(φ_i, ω)`.
pub fn log_weight(model: &MlnModel, domain: &Domain, world: &World) -> Result<f64> {
    check_world(domain, world)?;
    Ok(GroundingTable::new(model, domain)?.log_weight(world))
}

/// Grounding table over `k` constants holding only the arity-`k` clauses.
pub fn k_weight_table(model: &MlnModel, k: usize) -> Result<GroundingTable> {
    if !model.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let domain = Domain::single(&model.signature, k)?;
    GroundingTable::filtered(model, &domain, |c| c.arity() == k)
}

/// `log w_k(ω↓c)`: the weighted true-grounding count of the arity-`k`
/// clauses in a partial world over exactly `k` constants.
pub fn log_k_weight(model: &MlnModel, partial: &World, k: usize) -> Result<f64> {
    let table = k_weight_table(model, k)?;
    check_world(table.domain(), partial)?;
    Ok(table.log_weight(partial))
}

/// `log Z` for the table's domain under `weights`.
pub fn log_partition_table(
    table: &GroundingTable,
    weights: &[f64],
    guard: EnumGuard,
) -> Result<f64> {
    let g = table.domain().num_atoms();
    guard.check(g)?;
    let parts = par_chunks(1u64 << g, |range| {
        let mut acc = LogSumExp::new();
        for w in range {
            acc.push(table.log_weight_with(weights, &w));
        }
        acc
    });
    let mut total = LogSumExp::new();
    for p in &parts {
        total.merge(p);
    }
    Ok(total.value())
}

/// `log Z(n)`, streaming over every world of `domain`.
pub fn log_partition(model: &MlnModel, domain: &Domain, guard: EnumGuard) -> Result<f64> {
    let g = domain.num_atoms();
    guard.check(g)?;
    let table = GroundingTable::new(model, domain)?;
    log_partition_table(&table, table.weights(), guard)
}

/// `log P(ω) = log w(ω) − log Z`.
pub fn log_probability(
    model: &MlnModel,
    domain: &Domain,
    world: &World,
    guard: EnumGuard,
) -> Result<f64> {
    check_world(domain, world)?;
    guard.check(domain.num_atoms())?;
    let table = GroundingTable::new(model, domain)?;
    Ok(table.log_weight(world) - log_partition_table(&table, table.weights(), guard)?)
}

/// Log-weights of every world of the table's domain, indexed by world.
pub fn log_weight_table(table: &GroundingTable, guard: EnumGuard) -> Result<Vec<f64>> {
    let g = table.domain().num_atoms();
    guard.check(g)?;
    let parts = par_chunks(1u64 << g, |range| {
        range.map(|w| table.log_weight(&w)).collect::<Vec<f64>>()
    });
    Ok(parts.concat())
}

/// The marginal of `P^(n+m)` on `Ω^(n)`, for every world over `[n]`.
#[derive(Debug, Clone)]
pub struct MarginalTable {
    /// `log P^(n+m)↓[n](ω')` indexed by the integer form of `ω'`.
    pub log_marginal: Vec<f64>,
    /// `log Z(n+m)`.
    pub log_z: f64,
}

/// One pass over `Ω^(n+m)`, grouped by restriction to `[n]`.
pub fn marginal_table(model: &MlnModel, split: &Split, guard: EnumGuard) -> Result<MarginalTable> {
    let full = split.full();
    let g = full.num_atoms();
    guard.check(g)?;
    let lower = split.lower_positions();
    if lower.len() > MARGINAL_MAX_LOWER_ATOMS {
        return Err(Error::DomainTooLarge {
            atoms: lower.len(),
            limit: MARGINAL_MAX_LOWER_ATOMS,
        });
    }
    let table = GroundingTable::new(model, full)?;
    let rest: Vec<usize> = {
        let mut keep = vec![true; g];
        for &p in &lower {
            keep[p] = false;
        }
        (0..g).filter(|&p| keep[p]).collect()
    };
    let lo = Scatter::new(&lower);
    let hi = Scatter::new(&rest);
    let r = rest.len();
    let mask = (1u64 << r) - 1;
    // combined index: restriction bits above the remaining atoms' bits, so a
    // chunk covers consecutive buckets
    let parts = par_chunks(1u64 << g, |range| {
        let mut out: Vec<(u64, LogSumExp)> = Vec::new();
        for i in range {
            let bucket = i >> r;
            let world = lo.apply(bucket) | hi.apply(i & mask);
            let lw = table.log_weight(&world);
            match out.last_mut() {
                Some((b, acc)) if *b == bucket => acc.push(lw),
                _ => {
                    let mut acc = LogSumExp::new();
                    acc.push(lw);
                    out.push((bucket, acc));
                }
            }
        }
        out
    });
    let mut buckets = vec![LogSumExp::new(); 1usize << lower.len()];
    for part in &parts {
        for (b, acc) in part {
            buckets[*b as usize].merge(acc);
        }
    }
    let mut total = LogSumExp::new();
    for b in &buckets {
        total.merge(b);
    }
    let log_z = total.value();
    Ok(MarginalTable {
        log_marginal: buckets.iter().map(|b| b.value() - log_z).collect(),
        log_z,
    })
}

/// `log P^(n+m)↓[n](ω')` for one world over `[n]`.
pub fn log_marginal(
    model: &MlnModel,
    split: &Split,
    lower_world: &World,
    guard: EnumGuard,
) -> Result<f64> {
    check_world(&split.lower(), lower_world)?;
    let idx = lower_world
        .to_index()
        .expect("guarded world fits in 64 bits");
    Ok(marginal_table(model, split, guard)?.log_marginal[idx as usize])
}

/// Restriction of integer worlds of the full domain to `[n]` and `[n̄]`.
pub fn split_gathers(split: &Split) -> (Gather, Gather) {
    (
        Gather::new(split.lower_positions()),
        Gather::new(split.upper_positions()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{normalize_distinct, parse_mln};
    use crate::numeric::log_sum_exp;
    use crate::worlds::{enumerate_worlds, ordered_tuples, permute, restrict};

    const G: EnumGuard = EnumGuard { max_atoms: 28 };

    fn model(text: &str) -> MlnModel {
        parse_mln(text).unwrap()
    }

    #[test]
    fn counts_on_small_worlds() {
        let m = model("type t = 2\npredicate S(t)\n1 S(x)");
        let d = Domain::single(&m.signature, 2).unwrap();
        let w = World::from_bools(&[true, false]);
        assert_eq!(count_true_groundings(&m.clauses[0], &d, &w).unwrap(), 1);

        let m = model("type t = 2\npredicate R(t,t)\n1 R(x,y) ^ R(y,x) ^ x != y");
        let d = Domain::single(&m.signature, 2).unwrap();
        let mut w = World::all_false(4);
        w.set(d.atom_index(0, &[0, 1]), true);
        w.set(d.atom_index(0, &[1, 0]), true);
        assert_eq!(count_true_groundings(&m.clauses[0], &d, &w).unwrap(), 2);
    }

    #[test]
    fn triangle_count_matches_brute_force() {
        let m = model(
            "type t = 3\npredicate R(t,t)\n0.7 R(x,y) ^ R(y,z) ^ R(x,z) ^ x != y ^ x != z ^ y != z",
        );
        let d = Domain::single(&m.signature, 3).unwrap();
        let w = World::all_true(9);
        let mut brute = 0;
        for x in 0..3 {
            for y in 0..3 {
                for z in 0..3 {
                    if x != y && x != z && y != z {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(count_true_groundings(&m.clauses[0], &d, &w).unwrap(), brute);
        assert_eq!(brute, 6);
    }

    #[test]
    fn weight_examples() {
        let m = model("type t = 3\npredicate S(t)\n0 S(x)");
        let d = Domain::single(&m.signature, 3).unwrap();
        assert_eq!(log_weight(&m, &d, &World::all_true(3)).unwrap(), 0.0);
        let m = m.with_weights(&[2f64.ln()]).unwrap();
        let lw = log_weight(&m, &d, &World::all_true(3)).unwrap();
        assert!((lw - 3.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn partition_closed_forms() {
        let m = model("type t = 2\npredicate R(t,t)\n0 R(x,y)");
        let d = Domain::single(&m.signature, 2).unwrap();
        assert!((log_partition(&m, &d, G).unwrap() - 16f64.ln()).abs() < 1e-12);

        let a = 0.8f64;
        let m = model(&format!("type t = 3\npredicate S(t)\n{a} S(x)"));
        let d = Domain::single(&m.signature, 3).unwrap();
        let closed = 3.0 * (1.0 + a.exp()).ln();
        assert!((log_partition(&m, &d, G).unwrap() - closed).abs() < 1e-12);
    }

    #[test]
    fn probabilities_normalize_and_respect_isomorphism() {
        let m = normalize_distinct(&model(
            "type t = 3\npredicate S(t)\npredicate R(t,t)\n0.4 S(x) ^ R(x,y) => S(y)\n-1.1 R(x,y) ^ R(y,x)",
        ));
        let d = Domain::single(&m.signature, 2).unwrap();
        let table = GroundingTable::new(&m, &d).unwrap();
        let lz = log_partition(&m, &d, G).unwrap();
        let total = log_sum_exp((0..1u64 << d.num_atoms()).map(|w| table.log_weight(&w) - lz));
        assert!(total.abs() < 1e-12);

        let d3 = Domain::single(&m.signature, 3).unwrap();
        let table = GroundingTable::new(&m, &d3).unwrap();
        let perms = [
            vec![1, 0, 2],
            vec![0, 2, 1],
            vec![2, 0, 1],
            vec![1, 2, 0],
            vec![2, 1, 0],
        ];
        for w in enumerate_worlds(&d3, G).unwrap().step_by(37) {
            let lw = table.log_weight(&w);
            for p in &perms {
                let pw = permute(&w, &d3, std::slice::from_ref(p)).unwrap();
                assert!((table.log_weight(&pw) - lw).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn k_weights_sum_to_world_weight() {
        let m = normalize_distinct(&model(
            "type t = 3\npredicate S(t)\npredicate R(t,t)\n0.3 S(x)\n-0.7 S(x) ^ R(x,y) => S(y)\n1.2 R(x,y) ^ R(y,z) => R(x,z)",
        ));
        let d = Domain::single(&m.signature, 3).unwrap();
        let table = GroundingTable::new(&m, &d).unwrap();
        for w in enumerate_worlds(&d, G).unwrap().step_by(101) {
            let mut sum = 0.0;
            for k in 1..=m.max_arity() {
                for c in ordered_tuples(3, k) {
                    let (part, _) = restrict(&w, &d, &[c]).unwrap();
                    sum += log_k_weight(&m, &part, k).unwrap();
                }
            }
            assert!((sum - table.log_weight(&w)).abs() < 1e-9);
        }
        let only_unary = model("type t = 2\npredicate S(t)\n1 S(x)");
        assert_eq!(
            log_k_weight(&only_unary, &World::all_true(4 - 2), 2).unwrap(),
            0.0
        );
    }

    #[test]
    fn pair_k_weight_counts_both_directions() {
        let m = model("type t = 2\npredicate R(t,t)\n0.9 R(x,y) ^ x != y");
        let d = Domain::single(&m.signature, 2).unwrap();
        let mut w = World::all_false(4);
        w.set(d.atom_index(0, &[0, 1]), true);
        w.set(d.atom_index(0, &[1, 0]), true);
        assert!((log_k_weight(&m, &w, 2).unwrap() - 1.8).abs() < 1e-15);
    }

    #[test]
    fn marginal_of_sigma_determinate_model_is_projective() {
        let m = normalize_distinct(&model(
            "type t = 3\npredicate C(t)\npredicate K(t,t)\n0.6 C(x)\n1.3 K(x,y) ^ K(y,x)",
        ));
        assert!(m.is_sigma_determinate());
        let split = Split::single(&m.signature, 2, 1).unwrap();
        let marg = marginal_table(&m, &split, G).unwrap();
        let lower = split.lower();
        let table = GroundingTable::new(&m, &lower).unwrap();
        let lz = log_partition(&m, &lower, G).unwrap();
        for (i, &lm) in marg.log_marginal.iter().enumerate() {
            assert!((lm - (table.log_weight(&(i as u64)) - lz)).abs() < 1e-9);
        }
        assert!(log_sum_exp(marg.log_marginal.iter().copied()).abs() < 1e-12);
        let full = log_partition(&m, split.full(), G).unwrap();
        assert!((marg.log_z - full).abs() < 1e-9);
    }

    #[test]
    fn guard_is_enforced() {
        let m = model("type t = 6\npredicate R(t,t)\n1 R(x,y)");
        let d = Domain::single(&m.signature, 6).unwrap();
        assert!(matches!(
            log_partition(&m, &d, G),
            Err(Error::DomainTooLarge { .. })
        ));
    }
}
