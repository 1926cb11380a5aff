//! Shared test support: a seeded random MLN generator and brute-force
//! oracles that ground formulas by direct substitution, independent of the
//! library's grounding tables.

#![allow(dead_code)]

use mlnbound::logic::{parse_mln, MlnModel};
use mlnbound::worlds::{Domain, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, Default)]
pub struct GenOptions {
    /// Append a clause over three variables (forces a binary predicate).
    pub ternary: bool,
}

fn literal(rng: &mut ChaCha8Rng, preds: &[(char, usize)], vars: &[&str]) -> String {
    let (name, arity) = preds[rng.gen_range(0..preds.len())];
    let args: Vec<&str> = (0..arity)
        .map(|_| vars[rng.gen_range(0..vars.len())])
        .collect();
    let neg = if rng.gen_bool(0.4) { "!" } else { "" };
    format!("{}{}({})", neg, name, args.join(", "))
}

fn formula(
    rng: &mut ChaCha8Rng,
    preds: &[(char, usize)],
    vars: &[&str],
    literals: usize,
) -> String {
    let mut f = literal(rng, preds, vars);
    for _ in 1..literals {
        let op = ["^", "v", "=>"][rng.gen_range(0..3)];
        f = format!("({}) {} {}", f, op, literal(rng, preds, vars));
    }
    f
}

/// A raw MLN text over one type of declared size 3 with at most two
/// predicates, at most one of them binary, and weights in `[-1.5, 1.5]`.
pub fn random_mln_text(seed: u64, opts: GenOptions) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = if opts.ternary {
        2
    } else {
        rng.gen_range(1..=2)
    };
    let mut preds = vec![('P', first)];
    if rng.gen_bool(0.6) {
        let second = if first == 2 { 1 } else { rng.gen_range(1..=2) };
        preds.push(('Q', second));
    }
    let mut text = String::from("type t = 3\n");
    for (name, arity) in &preds {
        text.push_str(&format!(
            "predicate {}({})\n",
            name,
            vec!["t"; *arity].join(", ")
        ));
    }
    let clauses = rng.gen_range(1..=3);
    for _ in 0..clauses {
        let w: f64 = rng.gen_range(-1.5..=1.5);
        let lits = rng.gen_range(1..=3);
        let mut f = formula(&mut rng, &preds, &["x", "y"], lits);
        if f.contains('x') && f.contains('y') && rng.gen_bool(0.25) {
            f = format!("({}) ^ x != y", f);
        }
        text.push_str(&format!("{} {}\n", w, f));
    }
    if opts.ternary {
        let w: f64 = rng.gen_range(-1.5..=1.5);
        let binary = [('P', 2)];
        let mut f = format!(
            "P(x, y) ^ P(y, z) => {}",
            literal(&mut rng, &binary, &["x", "z"])
        );
        if rng.gen_bool(0.5) {
            f = format!("({}) v {}", f, literal(&mut rng, &preds, &["x", "y", "z"]));
        }
        text.push_str(&format!("{} {}\n", w, f));
    }
    text
}

pub fn random_mln(seed: u64, opts: GenOptions) -> MlnModel {
    let text = random_mln_text(seed, opts);
    parse_mln(&text).unwrap_or_else(|e| panic!("generated model failed to parse: {}\n{}", e, text))
}

/// `Σ_i a_i N(φ_i, ω)` by substituting every assignment of every clause.
pub fn naive_log_weight(model: &MlnModel, domain: &Domain, world: &World) -> f64 {
    let mut total = 0.0;
    for clause in &model.clauses {
        let sizes: Vec<usize> = clause.vars.iter().map(|v| domain.size(v.ty)).collect();
        let mut asg = vec![0usize; sizes.len()];
        let mut count = 0u64;
        'outer: loop {
            if sizes.iter().all(|&s| s > 0) {
                let atom = |p: usize, args: &[usize]| {
                    let consts: Vec<usize> = args.iter().map(|&v| asg[v]).collect();
                    world.get(domain.atom_index(p, &consts))
                };
                let neq = |a: usize, b: usize| asg[a] != asg[b];
                if clause.formula.eval(&atom, &neq) {
                    count += 1;
                }
            } else {
                break;
            }
            for i in (0..asg.len()).rev() {
                asg[i] += 1;
                if asg[i] < sizes[i] {
                    continue 'outer;
                }
                asg[i] = 0;
            }
            break;
        }
        total += clause.weight * count as f64;
    }
    total
}

fn lse(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log-probability of every world, indexed by world integer.
pub fn naive_log_probs(model: &MlnModel, domain: &Domain) -> Vec<f64> {
    let g = domain.num_atoms();
    assert!(g <= 22, "oracle enumeration is limited to 22 atoms");
    let lw: Vec<f64> = (0..1u64 << g)
        .map(|i| naive_log_weight(model, domain, &World::from_index(i, g)))
        .collect();
    let z = lse(&lw);
    lw.into_iter().map(|w| w - z).collect()
}

pub fn naive_log_partition(model: &MlnModel, domain: &Domain) -> f64 {
    let g = domain.num_atoms();
    let lw: Vec<f64> = (0..1u64 << g)
        .map(|i| naive_log_weight(model, domain, &World::from_index(i, g)))
        .collect();
    lse(&lw)
}

/// `log P(data)` under `weights`, by brute force.
pub fn naive_log_likelihood(
    model: &MlnModel,
    domain: &Domain,
    weights: &[f64],
    data: &World,
) -> f64 {
    let m = model.with_weights(weights).unwrap();
    naive_log_weight(&m, domain, data) - naive_log_partition(&m, domain)
}
