//! Ground-atom databases: the `.db` text format, conversion to worlds,
//! typed subsampling and the synthetic Friends & Smokers generator.
//!
//! A `.db` file lists one true ground atom per line, `Pred(c1, c2)`, with
//! `//` comments. Everything unlisted is false. An optional line
//! `constants <type>: a, b, c` registers constants in id order, which keeps
//! constants that occur in no true atom; constants met first in atoms are
//! registered after those, in order of appearance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::logic::{PredId, Signature, TypeId};
use crate::worlds::{Domain, World};

/// Name of the generator recorded in metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng/seed_from_u64";

/// A closed-world set of true ground atoms over named constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Database {
    signature: Signature,
    constants: Vec<Vec<String>>,
    index: Vec<BTreeMap<String, usize>>,
    atoms: BTreeSet<(PredId, Vec<usize>)>,
}

impl Database {
    pub fn new(signature: &Signature) -> Self {
        Database {
            signature: signature.clone(),
            constants: vec![Vec::new(); signature.types().len()],
            index: vec![BTreeMap::new(); signature.types().len()],
            atoms: BTreeSet::new(),
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    /// Id of `name` in type `ty`, registering it if new.
    pub fn add_constant(&mut self, ty: TypeId, name: &str) -> usize {
        match self.constant_id(ty, name) {
            Some(id) => id,
            None => {
                self.constants[ty].push(name.to_string());
                let id = self.constants[ty].len() - 1;
                self.index[ty].insert(name.to_string(), id);
                id
            }
        }
    }

    pub fn constant_id(&self, ty: TypeId, name: &str) -> Option<usize> {
        self.index[ty].get(name).copied()
    }

    pub fn constants(&self, ty: TypeId) -> &[String] {
        &self.constants[ty]
    }

    /// Constant count per type.
    pub fn sizes(&self) -> Vec<usize> {
        self.constants.iter().map(Vec::len).collect()
    }

    /// Marks an atom true. Arguments are constant ids of the declared types.
    pub fn insert(&mut self, pred: PredId, args: Vec<usize>) -> Result<()> {
        let decl = self.signature.predicate(pred);
        if decl.arity() != args.len() {
            return Err(Error::ArityMismatch {
                line: 0,
                name: decl.name.clone(),
                expected: decl.arity(),
                found: args.len(),
            });
        }
        for (&c, &t) in args.iter().zip(&decl.args) {
            if c >= self.constants[t].len() {
                return Err(Error::InvalidSubset(format!(
                    "constant id {} not registered for type `{}`",
                    c,
                    self.signature.types()[t].name
                )));
            }
        }
        self.atoms.insert((pred, args));
        Ok(())
    }

    pub fn contains(&self, pred: PredId, args: &[usize]) -> bool {
        self.atoms.contains(&(pred, args.to_vec()))
    }

    /// True atoms in sorted order.
    pub fn atoms(&self) -> impl Iterator<Item = &(PredId, Vec<usize>)> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Database of a world, naming constant `i` of each type `c<i>`.
    pub fn from_world(domain: &Domain, world: &World) -> Result<Self> {
        if world.len() != domain.num_atoms() {
            return Err(Error::WorldSize {
                expected: domain.num_atoms(),
                found: world.len(),
            });
        }
        let mut db = Database::new(domain.signature());
        for (t, &n) in domain.sizes().iter().enumerate() {
            for i in 0..n {
                db.add_constant(t, &format!("c{}", i));
            }
        }
        for i in world.true_atoms() {
            let (p, args) = domain.atom(i);
            db.atoms.insert((p, args));
        }
        Ok(db)
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphanumeric() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.')
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Parses a `.db` file against `signature`.
pub fn parse_db(signature: &Signature, text: &str) -> Result<Database> {
    let mut db = Database::new(signature);
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split("//").next().unwrap_or("");
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col = line.len() - line.trim_start().len() + 1;
        if let Some(rest) = trimmed.strip_prefix("constants ") {
            let (ty_name, list) = rest
                .split_once(':')
                .ok_or_else(|| syntax(line_no, col, "expected `constants <type>: names`"))?;
            let ty_name = ty_name.trim();
            let ty = signature
                .type_id(ty_name)
                .ok_or_else(|| Error::UnknownType {
                    line: line_no,
                    name: ty_name.to_string(),
                })?;
            for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                if !is_ident(name) {
                    return Err(syntax(line_no, col, format!("bad constant `{}`", name)));
                }
                db.add_constant(ty, name);
            }
            continue;
        }
        let open = trimmed
            .find('(')
            .ok_or_else(|| syntax(line_no, col, "expected `Pred(constants)`"))?;
        if !trimmed.ends_with(')') {
            return Err(syntax(
                line_no,
                col + trimmed.len(),
                "expected `)` at end of line",
            ));
        }
        let name = trimmed[..open].trim();
        let pred = signature
            .predicate_id(name)
            .ok_or_else(|| Error::UnknownPredicate {
                line: line_no,
                name: name.to_string(),
            })?;
        let inner = &trimmed[open + 1..trimmed.len() - 1];
        let args: Vec<&str> = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(str::trim).collect()
        };
        let decl = signature.predicate(pred);
        if args.len() != decl.arity() {
            return Err(Error::ArityMismatch {
                line: line_no,
                name: name.to_string(),
                expected: decl.arity(),
                found: args.len(),
            });
        }
        let mut ids = Vec::with_capacity(args.len());
        for (a, &t) in args.iter().zip(&decl.args) {
            if !is_ident(a) {
                return Err(syntax(
                    line_no,
                    col + open + 1,
                    format!("bad constant `{}`", a),
                ));
            }
            ids.push(db.add_constant(t, a));
        }
        db.atoms.insert((pred, ids));
    }
    Ok(db)
}

/// Canonical text: one `constants` line per type, then atom lines sorted.
pub fn serialize_db(db: &Database) -> String {
    let mut out = String::new();
    for (t, names) in db.constants.iter().enumerate() {
        if !names.is_empty() {
            let _ = writeln!(
                out,
                "constants {}: {}",
                db.signature.types()[t].name,
                names.join(", ")
            );
        }
    }
    let sig = &db.signature;
    let mut lines: Vec<String> = db
        .atoms
        .iter()
        .map(|(p, args)| {
            let decl = sig.predicate(*p);
            let names: Vec<&str> = args
                .iter()
                .zip(&decl.args)
                .map(|(&c, &t)| db.constants[t][c].as_str())
                .collect();
            format!("{}({})", decl.name, names.join(", "))
        })
        .collect();
    lines.sort();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

/// Closed-world truth vector of `db` over `domain`. Predicates are matched
/// by name; the domain may hold more constants than the database.
pub fn db_to_world(db: &Database, domain: &Domain) -> Result<World> {
    let dsig = domain.signature();
    let mut type_map = Vec::with_capacity(db.signature.types().len());
    for (t, decl) in db.signature.types().iter().enumerate() {
        let dt = dsig.type_id(&decl.name).ok_or_else(|| Error::UnknownType {
            line: 0,
            name: decl.name.clone(),
        })?;
        let found = db.constants[t].len();
        if found > domain.size(dt) {
            return Err(Error::ConstantOverflow {
                ty: decl.name.clone(),
                found,
                capacity: domain.size(dt),
            });
        }
        type_map.push(dt);
    }
    let mut pred_map = Vec::with_capacity(db.signature.predicates().len());
    for p in db.signature.predicates() {
        let dp = dsig
            .predicate_id(&p.name)
            .ok_or_else(|| Error::UnknownPredicate {
                line: 0,
                name: p.name.clone(),
            })?;
        let mapped: Vec<TypeId> = p.args.iter().map(|&t| type_map[t]).collect();
        if dsig.predicate(dp).args != mapped {
            return Err(Error::ArityMismatch {
                line: 0,
                name: p.name.clone(),
                expected: dsig.predicate(dp).arity(),
                found: p.arity(),
            });
        }
        pred_map.push(dp);
    }
    let mut world = World::all_false(domain.num_atoms());
    for (p, args) in &db.atoms {
        world.set(domain.atom_index(pred_map[*p], args), true);
    }
    Ok(world)
}

/// Which constants to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSpec {
    pub ty: TypeId,
    pub size: usize,
    pub seed: u64,
}

/// Keeps the chosen constants of type `ty` (renumbered in increasing id
/// order) and exactly the atoms whose type-`ty` arguments are all chosen.
/// Constants of other types are kept entirely.
pub fn subsample_with(db: &Database, ty: TypeId, chosen: &[usize]) -> Result<Database> {
    let pop = db.constants[ty].len();
    let mut chosen: Vec<usize> = chosen.to_vec();
    chosen.sort_unstable();
    chosen.dedup();
    if let Some(&c) = chosen.iter().find(|&&c| c >= pop) {
        return Err(Error::InvalidSubset(format!(
            "constant id {} outside population {}",
            c, pop
        )));
    }
    let mut rename = vec![None; pop];
    for (new, &old) in chosen.iter().enumerate() {
        rename[old] = Some(new);
    }
    let mut out = Database::new(&db.signature);
    for (t, names) in db.constants.iter().enumerate() {
        if t == ty {
            for &c in &chosen {
                out.add_constant(t, &names[c]);
            }
        } else {
            for n in names {
                out.add_constant(t, n);
            }
        }
    }
    for (p, args) in &db.atoms {
        let decl = db.signature.predicate(*p);
        let mapped: Option<Vec<usize>> = args
            .iter()
            .zip(&decl.args)
            .map(|(&c, &t)| if t == ty { rename[c] } else { Some(c) })
            .collect();
        if let Some(a) = mapped {
            out.atoms.insert((*p, a));
        }
    }
    Ok(out)
}

/// Uniform sample of `spec.size` constants of `spec.ty`, then
/// [`subsample_with`].
pub fn subsample(db: &Database, spec: &SampleSpec) -> Result<Database> {
    let pop = db
        .constants
        .get(spec.ty)
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidSubset(format!("no type with id {}", spec.ty)))?;
    if spec.size > pop {
        return Err(Error::SampleTooLarge {
            requested: spec.size,
            population: pop,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let chosen = sample(&mut rng, pop, spec.size).into_vec();
    subsample_with(db, spec.ty, &chosen)
}

/// Independent child seed number `index` of `base` (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Signature of the Friends & Smokers domain.
pub fn fs_signature() -> Signature {
    let mut s = Signature::new();
    let person = s.add_type("person", 1).expect("fresh signature");
    s.add_predicate("Smokes", vec![person])
        .expect("fresh signature");
    s.add_predicate("Cancer", vec![person])
        .expect("fresh signature");
    s.add_predicate("Friends", vec![person, person])
        .expect("fresh signature");
    s
}

pub const FS_SMOKER_RATE: f64 = 0.4;
pub const FS_CANCER_SMOKER_RATE: f64 = 0.3;
pub const FS_CANCER_OTHER_RATE: f64 = 0.1;
pub const FS_FRIEND_SAME: f64 = 0.8;
pub const FS_FRIEND_DIFFERENT: f64 = 0.1;

/// Description of one generated Friends & Smokers database.
#[derive(Debug, Clone, PartialEq)]
pub struct FsMetadata {
    pub population: usize,
    pub seed: u64,
    pub smokers: usize,
    pub cancer_smokers: usize,
    pub cancer_non_smokers: usize,
    pub friendships: usize,
}

impl FsMetadata {
    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "generator = friends-smokers");
        let _ = writeln!(s, "rng = {}", RNG_ALGORITHM);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "population = {}", self.population);
        let _ = writeln!(s, "smoker_rate = {}", FS_SMOKER_RATE);
        let _ = writeln!(s, "cancer_rate_smokers = {}", FS_CANCER_SMOKER_RATE);
        let _ = writeln!(s, "cancer_rate_non_smokers = {}", FS_CANCER_OTHER_RATE);
        let _ = writeln!(s, "friend_prob_same_habit = {}", FS_FRIEND_SAME);
        let _ = writeln!(s, "friend_prob_different_habit = {}", FS_FRIEND_DIFFERENT);
        let _ = writeln!(s, "friendships = directed, no self loops");
        let _ = writeln!(s, "rounding = half away from zero");
        let _ = writeln!(s, "smokers = {}", self.smokers);
        let _ = writeln!(s, "cancer_smokers = {}", self.cancer_smokers);
        let _ = writeln!(s, "cancer_non_smokers = {}", self.cancer_non_smokers);
        let _ = writeln!(s, "friendship_atoms = {}", self.friendships);
        s
    }
}

/// Synthetic Friends & Smokers population. Persons are `p0, p1, ..`.
pub fn generate_fs(population: usize, seed: u64) -> Result<(Database, FsMetadata)> {
    if population == 0 {
        return Err(Error::Config("population must be at least 1".into()));
    }
    let sig = fs_signature();
    let mut db = Database::new(&sig);
    for i in 0..population {
        db.add_constant(0, &format!("p{}", i));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_smokers = (FS_SMOKER_RATE * population as f64).round() as usize;
    let mut smoker = vec![false; population];
    for i in sample(&mut rng, population, n_smokers) {
        smoker[i] = true;
    }
    let smokers: Vec<usize> = (0..population).filter(|&i| smoker[i]).collect();
    let others: Vec<usize> = (0..population).filter(|&i| !smoker[i]).collect();
    let cs = (FS_CANCER_SMOKER_RATE * smokers.len() as f64).round() as usize;
    let co = (FS_CANCER_OTHER_RATE * others.len() as f64).round() as usize;
    let mut cancer = Vec::new();
    for j in sample(&mut rng, smokers.len(), cs) {
        cancer.push(smokers[j]);
    }
    for j in sample(&mut rng, others.len(), co) {
        cancer.push(others[j]);
    }
    for &i in &smokers {
        db.atoms.insert((0, vec![i]));
    }
    for &i in &cancer {
        db.atoms.insert((1, vec![i]));
    }
    let mut friendships = 0;
    for a in 0..population {
        for b in 0..population {
            if a == b {
                continue;
            }
            let p = if smoker[a] == smoker[b] {
                FS_FRIEND_SAME
            } else {
                FS_FRIEND_DIFFERENT
            };
            if rng.gen_bool(p) {
                db.atoms.insert((2, vec![a, b]));
                friendships += 1;
            }
        }
    }
    let meta = FsMetadata {
        population,
        seed,
        smokers: smokers.len(),
        cancer_smokers: cs,
        cancer_non_smokers: co,
        friendships,
    };
    Ok((db, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worlds::restrict;

    #[test]
    fn parse_simple_file() {
        let sig = fs_signature();
        let db = parse_db(&sig, "Smokes(alice)\nFriends(alice,bob)").unwrap();
        assert_eq!(db.len(), 2);
        assert_eq!(db.constants(0), ["alice", "bob"]);
        assert!(parse_db(&sig, "").unwrap().is_empty());
        assert!(matches!(
            parse_db(&sig, "Drinks(alice)"),
            Err(Error::UnknownPredicate { line: 1, .. })
        ));
        assert!(matches!(
            parse_db(&sig, "// people\nFriends(alice)"),
            Err(Error::ArityMismatch { line: 2, .. })
        ));
        assert!(matches!(
            parse_db(&sig, "Smokes alice"),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn round_trip_is_identity() {
        let (db, _) = generate_fs(7, 3).unwrap();
        let text = serialize_db(&db);
        let back = parse_db(db.signature(), &text).unwrap();
        assert_eq!(back, db);
        assert_eq!(serialize_db(&back), text);
    }

    #[test]
    fn fs_counts_follow_rounding() {
        for seed in 0..5 {
            let (db, meta) = generate_fs(10, seed).unwrap();
            assert_eq!(meta.smokers, 4);
            assert_eq!(meta.cancer_smokers, 1);
            assert_eq!(meta.cancer_non_smokers, 1);
            assert_eq!(db.atoms().filter(|(p, _)| *p == 0).count(), 4);
            assert!(!db.atoms().any(|(p, a)| *p == 2 && a[0] == a[1]));
        }
        assert_eq!(generate_fs(10, 9).unwrap(), generate_fs(10, 9).unwrap());
    }

    #[test]
    fn subsample_keeps_contained_atoms() {
        let (db, _) = generate_fs(10, 1).unwrap();
        let sub = subsample(
            &db,
            &SampleSpec {
                ty: 0,
                size: 3,
                seed: 5,
            },
        )
        .unwrap();
        assert_eq!(sub.sizes(), vec![3]);
        let names = sub.constants(0).to_vec();
        let ids: Vec<usize> = names
            .iter()
            .map(|n| db.constant_id(0, n).unwrap())
            .collect();
        let expected = db
            .atoms()
            .filter(|(_, args)| args.iter().all(|c| ids.contains(c)))
            .count();
        assert_eq!(sub.len(), expected);
        let all = subsample(
            &db,
            &SampleSpec {
                ty: 0,
                size: 10,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(all, db);
        assert!(subsample(
            &db,
            &SampleSpec {
                ty: 0,
                size: 0,
                seed: 0
            }
        )
        .unwrap()
        .is_empty());
        assert!(matches!(
            subsample(
                &db,
                &SampleSpec {
                    ty: 0,
                    size: 11,
                    seed: 0
                }
            ),
            Err(Error::SampleTooLarge {
                requested: 11,
                population: 10
            })
        ));
    }

    #[test]
    fn worlds_of_databases() {
        let sig = fs_signature();
        let d = Domain::single(&sig, 3).unwrap();
        assert_eq!(d.num_atoms(), 15);
        assert_eq!(
            db_to_world(&Database::new(&sig), &d).unwrap(),
            World::all_false(15)
        );
        let full = Database::from_world(&d, &World::all_true(15)).unwrap();
        assert_eq!(db_to_world(&full, &d).unwrap(), World::all_true(15));
        let (db, _) = generate_fs(5, 2).unwrap();
        assert!(matches!(
            db_to_world(&db, &d),
            Err(Error::ConstantOverflow { .. })
        ));
        // restriction compatibility
        let d5 = Domain::single(&sig, 5).unwrap();
        let w = db_to_world(&db, &d5).unwrap();
        let chosen = vec![0, 2, 4];
        let sub = subsample_with(&db, 0, &chosen).unwrap();
        let (rw, rd) = restrict(&w, &d5, &[chosen]).unwrap();
        assert_eq!(db_to_world(&sub, &rd).unwrap(), rw);
    }

    #[test]
    fn derived_seeds_differ() {
        let s: BTreeSet<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        assert_eq!(s.len(), 100);
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
    }
}
