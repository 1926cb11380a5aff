//! Expected true-grounding counts, by streaming and by a histogram of count
//! vectors.
//!
//! Under an MLN the weight of a world depends only on its vector of clause
//! counts, so `Z` and every moment of the counts are sums over the distinct
//! count vectors of the domain weighted by how many worlds produce them. The
//! histogram is built once per domain and then serves any weight vector.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::logic::MlnModel;
use crate::numeric::{par_chunks, LogSumExp, CHUNK};
use crate::worlds::{Domain, EnumGuard};

use super::GroundingTable;

/// Running `Σ exp(lw)` and `Σ exp(lw)·N_i` relative to a running maximum.
#[derive(Debug, Clone)]
struct Moments {
    max: f64,
    z: f64,
    s: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Moments {
            max: f64::NEG_INFINITY,
            z: 0.0,
            s: vec![0.0; k],
        }
    }

    fn rescale(&mut self, new_max: f64) {
        if self.max != f64::NEG_INFINITY {
            let f = (self.max - new_max).exp();
            self.z *= f;
            for v in &mut self.s {
                *v *= f;
            }
        }
        self.max = new_max;
    }

    fn push(&mut self, lw: f64, counts: &[u32], mult: f64) {
        if lw > self.max {
            self.rescale(lw);
        }
        let e = mult * (lw - self.max).exp();
        self.z += e;
        for (v, &c) in self.s.iter_mut().zip(counts) {
            *v += e * c as f64;
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            self.rescale(other.max);
        }
        let f = (other.max - self.max).exp();
        self.z += f * other.z;
        for (v, o) in self.s.iter_mut().zip(&other.s) {
            *v += f * o;
        }
    }

    fn finish(&self) -> (f64, Vec<f64>) {
        (
            self.max + self.z.ln(),
            self.s.iter().map(|v| v / self.z).collect(),
        )
    }
}

/// `(log Z, E[N_i])` under `weights`, streaming over every world.
pub fn expected_counts_table(
    table: &GroundingTable,
    weights: &[f64],
    guard: EnumGuard,
) -> Result<(f64, Vec<f64>)> {
    let g = table.domain().num_atoms();
    guard.check(g)?;
    let k = table.num_clauses();
    let parts = par_chunks(1u64 << g, |range| {
        let mut acc = Moments::new(k);
        let mut counts = vec![0u32; k];
        for w in range {
            table.counts_into(&w, &mut counts);
            let lw: f64 = counts
                .iter()
                .zip(weights)
                .map(|(&c, &a)| a * c as f64)
                .sum();
            acc.push(lw, &counts, 1.0);
        }
        acc
    });
    let mut total = Moments::new(k);
    for p in &parts {
        total.merge(p);
    }
    Ok(total.finish())
}

/// `(log Z, E[N_i])` for the model's own weights.
pub fn expected_counts(
    model: &MlnModel,
    domain: &Domain,
    guard: EnumGuard,
) -> Result<(f64, Vec<f64>)> {
    guard.check(domain.num_atoms())?;
    let table = GroundingTable::new(model, domain)?;
    expected_counts_table(&table, table.weights(), guard)
}

/// Distinct count vectors of a domain with the number of worlds producing
/// each, sorted by count vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CountHistogram {
    num_clauses: usize,
    entries: Vec<(Vec<u32>, u64)>,
}

impl CountHistogram {
    pub fn build(table: &GroundingTable, guard: EnumGuard) -> Result<Self> {
        let g = table.domain().num_atoms();
        guard.check(g)?;
        let k = table.num_clauses();
        // bits per clause: enough for the number of assignments
        let widths: Vec<u32> = (0..k)
            .map(|i| 64 - table.clause(i).assignments().leading_zeros())
            .collect();
        let total_bits: u32 = widths.iter().sum();
        if total_bits > 128 {
            return Err(Error::InvalidDomain(format!(
                "count vectors need {} bits; at most 128 are supported",
                total_bits
            )));
        }
        let nchunks = (1u64 << g).div_ceil(CHUNK);
        // integer counts: the merge is exact in any order
        let map: HashMap<u128, u64> = (0..nchunks)
            .into_par_iter()
            .fold(HashMap::new, |mut map, c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(1u64 << g);
                let mut counts = vec![0u32; k];
                for w in start..end {
                    table.counts_into(&w, &mut counts);
                    let mut key = 0u128;
                    for (&c, &b) in counts.iter().zip(&widths) {
                        key = (key << b) | c as u128;
                    }
                    *map.entry(key).or_insert(0) += 1;
                }
                map
            })
            .reduce(HashMap::new, |mut a, b| {
                for (key, v) in b {
                    *a.entry(key).or_insert(0) += v;
                }
                a
            });
        let mut entries: Vec<(Vec<u32>, u64)> = map
            .into_iter()
            .map(|(mut key, mult)| {
                let mut counts = vec![0u32; k];
                for i in (0..k).rev() {
                    counts[i] = (key & ((1u128 << widths[i]) - 1)) as u32;
                    key >>= widths[i];
                }
                (counts, mult)
            })
            .collect();
        entries.sort_unstable();
        Ok(CountHistogram {
            num_clauses: k,
            entries,
        })
    }

    pub fn entries(&self) -> &[(Vec<u32>, u64)] {
        &self.entries
    }

    pub fn num_clauses(&self) -> usize {
        self.num_clauses
    }

    /// Number of worlds summarized (`2^G`).
    pub fn num_worlds(&self) -> u64 {
        self.entries.iter().map(|(_, m)| m).sum()
    }

    pub fn log_partition(&self, weights: &[f64]) -> f64 {
        let mut acc = LogSumExp::new();
        for (counts, mult) in &self.entries {
            acc.push(dot(weights, counts) + (*mult as f64).ln());
        }
        acc.value()
    }

    /// `(log Z, E[N_i])` under `weights`.
    pub fn expected_counts(&self, weights: &[f64]) -> (f64, Vec<f64>) {
        let mut acc = Moments::new(self.num_clauses);
        for (counts, mult) in &self.entries {
            acc.push(dot(weights, counts), counts, *mult as f64);
        }
        acc.finish()
    }
}

pub(crate) fn dot(weights: &[f64], counts: &[u32]) -> f64 {
    weights
        .iter()
        .zip(counts)
        .map(|(&a, &c)| a * c as f64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{normalize_distinct, parse_mln};
    use crate::model::log_partition_table;

    #[test]
    fn histogram_and_streaming_agree() {
        let m = normalize_distinct(
            &parse_mln(
                "type t = 3\npredicate S(t)\npredicate R(t,t)\n0.5 S(x)\n-0.8 R(x,y) ^ S(x) => S(y)\n0.3 R(x,y) <=> R(y,x)",
            )
            .unwrap(),
        );
        let d = Domain::single(&m.signature, 3).unwrap();
        let table = GroundingTable::new(&m, &d).unwrap();
        let guard = EnumGuard::default();
        let h = CountHistogram::build(&table, guard).unwrap();
        assert_eq!(h.num_worlds(), 1 << d.num_atoms());
        let w = m.weights();
        let (lz_s, e_s) = expected_counts_table(&table, &w, guard).unwrap();
        let (lz_h, e_h) = h.expected_counts(&w);
        assert!((lz_s - lz_h).abs() < 1e-10);
        assert!((h.log_partition(&w) - lz_s).abs() < 1e-10);
        assert!((log_partition_table(&table, &w, guard).unwrap() - lz_s).abs() < 1e-10);
        for (a, b) in e_s.iter().zip(&e_h) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_expectation_of_unary_clause() {
        let m = parse_mln("type t = 3\npredicate S(t)\n0 S(x)").unwrap();
        let d = Domain::single(&m.signature, 3).unwrap();
        let (lz, e) = expected_counts(&m, &d, EnumGuard::default()).unwrap();
        assert!((lz - 8f64.ln()).abs() < 1e-12);
        assert!((e[0] - 1.5).abs() < 1e-12);
    }
}
