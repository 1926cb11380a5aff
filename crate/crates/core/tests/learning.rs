mod common;

use common::{naive_log_likelihood, random_mln, GenOptions};
use mlnbound::bounds::SplitAnalysis;
use mlnbound::learning::{gradient, LearnConfig, Learner, Regularizer};
use mlnbound::logic::{normalize_distinct, parse_mln};
use mlnbound::worlds::{Domain, EnumGuard, World};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const G: EnumGuard = EnumGuard { max_atoms: 28 };

fn random_point(seed: u64) -> (mlnbound::MlnModel, Domain, World) {
    let model = normalize_distinct(&random_mln(seed, GenOptions::default()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let weights: Vec<f64> = model
        .clauses
        .iter()
        .map(|_| rng.gen_range(-1.5..=1.5))
        .collect();
    let model = model.with_weights(&weights).unwrap();
    let domain = Domain::single(&model.signature, 3).unwrap();
    let g = domain.num_atoms();
    let data = World::from_index(rng.gen_range(0..1u64 << g), g);
    (model, domain, data)
}

fn penalty_sum(weights: &[f64], model: &mlnbound::MlnModel) -> f64 {
    weights
        .iter()
        .zip(&model.clauses)
        .filter(|(_, c)| c.arity() > 1)
        .map(|(w, _)| w * w)
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>()) {
        let (model, domain, data) = random_point(seed);
        let g = gradient(&model, &domain, &data, G).unwrap();
        let w = model.weights();
        let h = 1e-5;
        for i in 0..w.len() {
            let mut up = w.clone();
            up[i] += h;
            let mut down = w.clone();
            down[i] -= h;
            let fd = (naive_log_likelihood(&model, &domain, &up, &data)
                - naive_log_likelihood(&model, &domain, &down, &data))
                / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-5, "clause {}: fd {} analytic {}", i, fd, g[i]);
        }
    }

    #[test]
    fn accepted_steps_never_increase_the_objective(seed in any::<u64>(), l1 in any::<bool>(), lambda in 0.0f64..2.0) {
        let (model, domain, data) = random_point(seed);
        let learner = Learner::new(&model, &domain, G).unwrap();
        let reg = if l1 { Regularizer::L1(lambda) } else { Regularizer::L2(lambda) };
        let r = learner.learn(&data, &LearnConfig { regularizer: reg, max_iterations: 200, ..Default::default() }).unwrap();
        for pair in r.trace.windows(2) {
            let (a, b) = (pair[0].nll + pair[0].penalty, pair[1].nll + pair[1].penalty);
            prop_assert!(b <= a + 1e-10 * (1.0 + a.abs()), "{} then {}", a, b);
        }
    }
}

#[test]
fn l2_shrinks_relational_weights() {
    // every clause is relational, so any λ > 0 gives a strongly convex fit
    let model = normalize_distinct(
        &parse_mln("type t = 3\npredicate S(t)\npredicate F(t, t)\n0 F(x, y) ^ x != y\n0 (F(x, y) ^ S(x) => S(y)) ^ x != y")
            .unwrap(),
    );
    let domain = Domain::single(&model.signature, 3).unwrap();
    let learner = Learner::new(&model, &domain, G).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..6 {
        let data = World::from_index(
            rng.gen_range(0..1u64 << domain.num_atoms()),
            domain.num_atoms(),
        );
        let mut previous = f64::INFINITY;
        for lambda in [0.01, 0.1, 1.0, 10.0] {
            let r = learner
                .learn(
                    &data,
                    &LearnConfig {
                        regularizer: Regularizer::L2(lambda),
                        max_iterations: 5000,
                        ..Default::default()
                    },
                )
                .unwrap();
            assert!(r.converged, "λ {} did not converge", lambda);
            let s = penalty_sum(&r.weights, &model);
            assert!(
                s <= previous + 1e-9,
                "λ {}: {} after {}",
                lambda,
                s,
                previous
            );
            previous = s;
        }
    }
}

#[test]
fn learned_weights_respect_the_likelihood_gap() {
    let model = normalize_distinct(
        &parse_mln("type t = 2\npredicate S(t)\npredicate F(t, t)\n0 S(x)\n0 (F(x, y) ^ S(x) => S(y)) ^ x != y").unwrap(),
    );
    let domain = Domain::single(&model.signature, 2).unwrap();
    let learner = Learner::new(&model, &domain, G).unwrap();
    for idx in 0..1u64 << domain.num_atoms() {
        let data = World::from_index(idx, domain.num_atoms());
        let r = learner
            .learn(
                &data,
                &LearnConfig {
                    regularizer: Regularizer::L1(0.1),
                    max_iterations: 100,
                    ..Default::default()
                },
            )
            .unwrap();
        let learned = model.with_weights(&r.weights).unwrap();
        let a = SplitAnalysis::new(&learned, 2, 1, G).unwrap();
        let (c1, c2) = a.check_corollaries_at(idx).unwrap();
        assert!(c1.pass() && c2.pass(), "world {}", idx);
    }
}

#[test]
fn unregularized_fit_reaches_stationarity_on_interior_data() {
    let model = parse_mln("type t = 4\npredicate S(t)\n0 S(x)").unwrap();
    let domain = Domain::single(&model.signature, 4).unwrap();
    let data = World::from_index(0b0011, 4);
    let r = Learner::new(&model, &domain, G)
        .unwrap()
        .learn(&data, &LearnConfig::default())
        .unwrap();
    assert!(r.converged);
    // half the atoms true: the maximum-likelihood weight is 0
    assert!(r.weights[0].abs() < 1e-6);
    assert!(r.trace.last().unwrap().grad_norm <= 1e-6);
}
