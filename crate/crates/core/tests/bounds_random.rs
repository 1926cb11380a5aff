mod common;

use common::{naive_log_probs, random_mln, GenOptions};
use mlnbound::bounds::{log_delta, verify, SplitAnalysis};
use mlnbound::logic::normalize_distinct;
use mlnbound::worlds::{restrict, EnumGuard, Split, World};
use proptest::prelude::*;

/// `log P^(n+m)↓[n]` for every world over `[n]`, by summing the brute-force
/// distribution on `[n+m]`.
fn naive_marginal(model: &mlnbound::MlnModel, n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let split = Split::single(&model.signature, n, m).unwrap();
    let full = split.full().clone();
    let lower = split.lower();
    let probs = naive_log_probs(model, &full);
    let mut marg = vec![0.0f64; 1 << lower.num_atoms()];
    for (i, lp) in probs.iter().enumerate() {
        let w = World::from_index(i as u64, full.num_atoms());
        let (r, _) = restrict(&w, &full, &split.lower_subsets()).unwrap();
        marg[r.to_index().unwrap() as usize] += lp.exp();
    }
    (
        marg.iter().map(|p| p.ln()).collect(),
        naive_log_probs(model, &lower),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_check_passes_on_random_models(seed in any::<u64>()) {
        let model = normalize_distinct(&random_mln(seed, GenOptions::default()));
        let report = verify(&model, 2, 2, EnumGuard::default()).unwrap();
        for c in &report.checks {
            prop_assert!(c.pass(), "{} failed with slack {}\n{}", c.name, c.worst_slack(), model);
        }
        prop_assert!(report.kl >= -1e-12);
        prop_assert!(report.max_log_ratio <= report.bounds.log_delta + 1e-9);
    }

    #[test]
    fn marginal_matches_brute_force(seed in any::<u64>(), n in 1usize..3) {
        let model = normalize_distinct(&random_mln(seed, GenOptions::default()));
        let m = 3 - n;
        let a = SplitAnalysis::new(&model, n, m, EnumGuard::default()).unwrap();
        let (marg, direct) = naive_marginal(&model, n, m);
        let ld = log_delta(&model, n, m).unwrap();
        for (i, (lm, lp)) in marg.iter().zip(&direct).enumerate() {
            prop_assert!((a.log_marginal(i as u64).unwrap() - lm).abs() <= 1e-9);
            prop_assert!((a.log_p_n(i as u64) - lp).abs() <= 1e-9);
            prop_assert!((lm - lp).abs() <= ld + 1e-9);
        }
        let kl: f64 = marg.iter().zip(&direct).map(|(lm, lp)| lm.exp() * (lm - lp)).sum();
        prop_assert!((a.kl_divergence().unwrap() - kl).abs() <= 1e-9);
        prop_assert!(kl <= ld + 1e-9);
    }
}

#[test]
fn ternary_model_passes_at_the_guard_edge() {
    let model = mlnbound::parse_mln(
        "type t = 4\npredicate R(t, t)\n-0.9 R(x, y) ^ R(y, z) => R(x, z) ^ x != y ^ y != z ^ x != z",
    )
    .unwrap();
    let report = verify(&normalize_distinct(&model), 2, 2, EnumGuard::default()).unwrap();
    assert!(report.all_pass(), "{}", report);
}
