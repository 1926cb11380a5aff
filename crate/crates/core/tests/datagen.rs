use mlnbound::datagen::{
    db_to_world, derive_seed, fs_signature, generate_fs, parse_db, serialize_db, subsample,
    subsample_with, Database, SampleSpec,
};
use mlnbound::worlds::{restrict, Domain};
use proptest::prelude::*;

const SMOKES: usize = 0;
const FRIENDS: usize = 2;

#[test]
fn friendship_rates_follow_habits() {
    let (mut same, mut same_n, mut diff, mut diff_n) = (0u64, 0u64, 0u64, 0u64);
    let (mut smokers, mut persons) = (0usize, 0usize);
    for s in 0..2000 {
        let (db, meta) = generate_fs(10, derive_seed(99, s)).unwrap();
        assert_eq!(meta.smokers, 4);
        persons += 10;
        let smokes: Vec<bool> = (0..10).map(|p| db.contains(SMOKES, &[p])).collect();
        smokers += smokes.iter().filter(|&&b| b).count();
        for a in 0..10 {
            assert!(!db.contains(FRIENDS, &[a, a]));
            for b in (0..10).filter(|&b| b != a) {
                let f = db.contains(FRIENDS, &[a, b]) as u64;
                if smokes[a] == smokes[b] {
                    same += f;
                    same_n += 1;
                } else {
                    diff += f;
                    diff_n += 1;
                }
            }
        }
    }
    assert_eq!(smokers * 10, persons * 4);
    let ps = same as f64 / same_n as f64;
    let pd = diff as f64 / diff_n as f64;
    // four standard errors
    assert!(
        (ps - 0.8).abs() < 4.0 * (0.8f64 * 0.2 / same_n as f64).sqrt(),
        "same-habit rate {}",
        ps
    );
    assert!(
        (pd - 0.1).abs() < 4.0 * (0.1f64 * 0.9 / diff_n as f64).sqrt(),
        "cross-habit rate {}",
        pd
    );
}

#[test]
fn same_seed_same_bytes() {
    let a = serialize_db(&generate_fs(40, 5).unwrap().0);
    let b = serialize_db(&generate_fs(40, 5).unwrap().0);
    assert_eq!(a, b);
    assert_ne!(a, serialize_db(&generate_fs(40, 6).unwrap().0));
}

fn fs_world(db: &Database) -> (Domain, mlnbound::World) {
    let domain = Domain::new(&fs_signature(), db.sizes()).unwrap();
    let w = db_to_world(db, &domain).unwrap();
    (domain, w)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn subsample_equals_restriction(seed in any::<u64>(), size in 1usize..6) {
        let (db, _) = generate_fs(12, seed).unwrap();
        let (domain, world) = fs_world(&db);
        let spec = SampleSpec { ty: 0, size, seed: derive_seed(seed, 1) };
        let sub = subsample(&db, &spec).unwrap();
        prop_assert_eq!(sub.sizes(), vec![size]);
        let chosen: Vec<usize> = sub.constants(0).iter().map(|c| db.constant_id(0, c).unwrap()).collect();
        prop_assert!(chosen.windows(2).all(|w| w[0] < w[1]));
        let (restricted, _) = restrict(&world, &domain, std::slice::from_ref(&chosen)).unwrap();
        let (_, sampled) = fs_world(&sub);
        prop_assert_eq!(&restricted, &sampled);
        let again = subsample_with(&db, 0, &chosen).unwrap();
        prop_assert_eq!(serialize_db(&again), serialize_db(&sub));
    }

    #[test]
    fn serialization_round_trips(seed in any::<u64>(), pop in 1usize..15) {
        let (db, _) = generate_fs(pop, seed).unwrap();
        let text = serialize_db(&db);
        let back = parse_db(&fs_signature(), &text).unwrap();
        prop_assert_eq!(serialize_db(&back), text);
        prop_assert_eq!(back.len(), db.len());
    }
}
