//! Interpretations over finite typed domains.
//!
//! Constants of each type are the integers `0..size`. Ground atoms are indexed
//! densely, predicate by predicate in declaration order and, within a
//! predicate, by argument tuple in lexicographic order (first argument most
//! significant). A world is a truth vector over that index; worlds with at
//! most 64 atoms are also identified with the integer whose bit `i` is the
//! truth value of atom `i`, so enumerating `Ω` is counting.

use bitvec::prelude::*;

use crate::error::{Error, Result};
use crate::logic::{PredId, Signature, TypeId};

/// Ground-atom count above which enumeration is refused unless forced.
pub const DEFAULT_MAX_ATOMS: usize = 28;
/// Hard ceiling on enumeration.
pub const FORCED_MAX_ATOMS: usize = 34;

/// Limit on the number of ground atoms of an enumerated domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumGuard {
    pub max_atoms: usize,
}

impl Default for EnumGuard {
    fn default() -> Self {
        EnumGuard {
            max_atoms: DEFAULT_MAX_ATOMS,
        }
    }
}

impl EnumGuard {
    pub fn forced() -> Self {
        EnumGuard {
            max_atoms: FORCED_MAX_ATOMS,
        }
    }

    pub fn with_limit(max_atoms: usize) -> Self {
        EnumGuard {
            max_atoms: max_atoms.min(63),
        }
    }

    pub fn check(&self, atoms: usize) -> Result<()> {
        if atoms > self.max_atoms {
            Err(Error::DomainTooLarge {
                atoms,
                limit: self.max_atoms,
            })
        } else {
            Ok(())
        }
    }
}

/// A signature together with a size per type: the atom index of `Ω`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    signature: Signature,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    num_atoms: usize,
}

impl Domain {
    pub fn new(signature: &Signature, sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() != signature.types().len() {
            return Err(Error::InvalidDomain(format!(
                "{} sizes given for {} types",
                sizes.len(),
                signature.types().len()
            )));
        }
        let mut offsets = Vec::with_capacity(signature.predicates().len());
        let mut total = 0usize;
        for p in signature.predicates() {
            offsets.push(total);
            let count = p
                .args
                .iter()
                .try_fold(1usize, |acc, &t| acc.checked_mul(sizes[t]))
                .ok_or_else(|| Error::InvalidDomain("atom count overflows".into()))?;
            total = total
                .checked_add(count)
                .ok_or_else(|| Error::InvalidDomain("atom count overflows".into()))?;
        }
        Ok(Domain {
            signature: signature.clone(),
            sizes,
            offsets,
            num_atoms: total,
        })
    }

    /// Domain of a single-type signature with `n` constants.
    pub fn single(signature: &Signature, n: usize) -> Result<Self> {
        let types = signature.types().len();
        if types != 1 {
            return Err(Error::MultipleTypes(types));
        }
        Domain::new(signature, vec![n])
    }

    /// Same signature, different sizes.
    pub fn resized(&self, sizes: Vec<usize>) -> Result<Self> {
        Domain::new(&self.signature, sizes)
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, ty: TypeId) -> usize {
        self.sizes[ty]
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn atom_index(&self, pred: PredId, args: &[usize]) -> usize {
        let p = self.signature.predicate(pred);
        debug_assert_eq!(p.args.len(), args.len());
        let mut idx = 0usize;
        for (&c, &t) in args.iter().zip(&p.args) {
            debug_assert!(c < self.sizes[t]);
            idx = idx * self.sizes[t] + c;
        }
        self.offsets[pred] + idx
    }

    /// Inverse of [`Domain::atom_index`].
    pub fn atom(&self, index: usize) -> (PredId, Vec<usize>) {
        assert!(index < self.num_atoms, "atom index out of range");
        let pred = match self.offsets.binary_search(&index) {
            Ok(mut p) => {
                // skip predicates with zero ground atoms sharing this offset
                while p + 1 < self.offsets.len() && self.offsets[p + 1] == index {
                    p += 1;
                }
                p
            }
            Err(p) => p - 1,
        };
        let decl = self.signature.predicate(pred);
        let mut rem = index - self.offsets[pred];
        let mut args = vec![0; decl.args.len()];
        for (j, &t) in decl.args.iter().enumerate().rev() {
            args[j] = rem % self.sizes[t];
            rem /= self.sizes[t];
        }
        (pred, args)
    }

    /// Ground atoms in index order.
    pub fn atoms(&self) -> impl Iterator<Item = (PredId, Vec<usize>)> + '_ {
        (0..self.num_atoms).map(move |i| self.atom(i))
    }

    /// Positions (sorted) of the atoms whose constants all lie in `subsets`.
    pub fn restriction_positions(&self, subsets: &[Vec<usize>]) -> Result<Vec<usize>> {
        self.check_subsets(subsets)?;
        let member: Vec<Vec<bool>> = subsets
            .iter()
            .zip(&self.sizes)
            .map(|(s, &n)| {
                let mut m = vec![false; n];
                for &c in s {
                    m[c] = true;
                }
                m
            })
            .collect();
        let mut out = Vec::new();
        for i in 0..self.num_atoms {
            let (p, args) = self.atom(i);
            let decl = self.signature.predicate(p);
            if args.iter().zip(&decl.args).all(|(&c, &t)| member[t][c]) {
                out.push(i);
            }
        }
        Ok(out)
    }

    fn check_subsets(&self, subsets: &[Vec<usize>]) -> Result<()> {
        if subsets.len() != self.sizes.len() {
            return Err(Error::InvalidSubset(format!(
                "{} subsets for {} types",
                subsets.len(),
                self.sizes.len()
            )));
        }
        for (t, (s, &n)) in subsets.iter().zip(&self.sizes).enumerate() {
            if s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSubset(format!(
                    "constants of type {} must be strictly increasing",
                    t
                )));
            }
            if let Some(&c) = s.iter().find(|&&c| c >= n) {
                return Err(Error::InvalidSubset(format!(
                    "constant {} of type {} outside domain of size {}",
                    c, t, n
                )));
            }
        }
        Ok(())
    }
}

/// Read access to atom truth values.
pub trait Truth {
    fn truth(&self, atom: usize) -> bool;
}

impl Truth for u64 {
    #[inline(always)]
    fn truth(&self, atom: usize) -> bool {
        (self >> atom) & 1 == 1
    }
}

/// An interpretation: one truth value per ground atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct World {
    bits: BitVec<u64, Lsb0>,
}

impl Truth for World {
    #[inline]
    fn truth(&self, atom: usize) -> bool {
        self.bits[atom]
    }
}

impl World {
    pub fn all_false(len: usize) -> Self {
        World {
            bits: BitVec::repeat(false, len),
        }
    }

    pub fn all_true(len: usize) -> Self {
        World {
            bits: BitVec::repeat(true, len),
        }
    }

    /// World whose atom `i` is bit `i` of `index`.
    pub fn from_index(index: u64, len: usize) -> Self {
        assert!(len <= 64, "integer worlds hold at most 64 atoms");
        let mut bits = BitVec::repeat(false, len);
        for i in 0..len {
            bits.set(i, (index >> i) & 1 == 1);
        }
        World { bits }
    }

    pub fn from_bools(values: &[bool]) -> Self {
        World {
            bits: values.iter().copied().collect(),
        }
    }

    /// Integer form, when the world has at most 64 atoms.
    pub fn to_index(&self) -> Option<u64> {
        if self.bits.len() > 64 {
            return None;
        }
        Some(self.bits.iter_ones().fold(0u64, |acc, i| acc | (1u64 << i)))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, atom: usize) -> bool {
        self.bits[atom]
    }

    pub fn set(&mut self, atom: usize, value: bool) {
        self.bits.set(atom, value);
    }

    pub fn count_true(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn true_atoms(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones()
    }
}

/// Compresses the bits at a fixed sorted set of positions of a `u64` into the
/// low bits of the result (a software `pext`).
#[derive(Debug, Clone)]
pub struct Gather {
    positions: Vec<usize>,
    tables: Vec<[u64; 256]>,
}

impl Gather {
    pub fn new(positions: Vec<usize>) -> Self {
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        let top = positions.last().map_or(0, |&p| p / 8 + 1);
        let mut tables = vec![[0u64; 256]; top];
        for (byte, table) in tables.iter_mut().enumerate() {
            let kept: Vec<(usize, usize)> = positions
                .iter()
                .enumerate()
                .filter(|(_, &p)| p / 8 == byte)
                .map(|(rank, &p)| (p % 8, rank))
                .collect();
            for (value, slot) in table.iter_mut().enumerate() {
                *slot = kept
                    .iter()
                    .filter(|(bit, _)| (value >> bit) & 1 == 1)
                    .fold(0u64, |acc, &(_, rank)| acc | (1u64 << rank));
            }
        }
        Gather { positions, tables }
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn apply(&self, world: u64) -> u64 {
        let mut out = 0u64;
        for (byte, table) in self.tables.iter().enumerate() {
            out |= table[((world >> (8 * byte)) & 0xff) as usize];
        }
        out
    }

    /// Inverse direction: spreads the low bits of `sub` over the positions.
    pub fn scatter(&self, sub: u64) -> u64 {
        self.positions
            .iter()
            .enumerate()
            .filter(|(rank, _)| (sub >> rank) & 1 == 1)
            .fold(0u64, |acc, (_, &p)| acc | (1u64 << p))
    }

    pub fn apply_world(&self, world: &World) -> World {
        let mut out = World::all_false(self.positions.len());
        for (rank, &p) in self.positions.iter().enumerate() {
            out.set(rank, world.get(p));
        }
        out
    }
}

/// Spreads the low bits of an index over a fixed sorted set of positions
/// (a software `pdep`), the inverse of [`Gather`].
#[derive(Debug, Clone)]
pub struct Scatter {
    tables: Vec<[u64; 256]>,
}

impl Scatter {
    pub fn new(positions: &[usize]) -> Self {
        let tables = positions
            .chunks(8)
            .map(|chunk| {
                let mut table = [0u64; 256];
                for (value, slot) in table.iter_mut().enumerate() {
                    *slot = chunk
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| (value >> b) & 1 == 1)
                        .fold(0u64, |acc, (_, &p)| acc | (1u64 << p));
                }
                table
            })
            .collect();
        Scatter { tables }
    }

    #[inline]
    pub fn apply(&self, sub: u64) -> u64 {
        let mut out = 0u64;
        for (byte, table) in self.tables.iter().enumerate() {
            out |= table[((sub >> (8 * byte)) & 0xff) as usize];
        }
        out
    }
}

/// Every world of the domain, in increasing integer order.
pub fn enumerate_worlds(domain: &Domain, guard: EnumGuard) -> Result<impl Iterator<Item = World>> {
    let g = domain.num_atoms();
    guard.check(g)?;
    Ok((0..1u64 << g).map(move |i| World::from_index(i, g)))
}

/// `ω↓I`: keeps the atoms whose constants all lie in `subsets` (one sorted
/// constant list per type), renaming kept constants to `0..|subset|` in order.
pub fn restrict(world: &World, domain: &Domain, subsets: &[Vec<usize>]) -> Result<(World, Domain)> {
    if world.len() != domain.num_atoms() {
        return Err(Error::WorldSize {
            expected: domain.num_atoms(),
            found: world.len(),
        });
    }
    let positions = domain.restriction_positions(subsets)?;
    let sub = domain.resized(subsets.iter().map(Vec::len).collect())?;
    let mut out = World::all_false(positions.len());
    for (rank, &p) in positions.iter().enumerate() {
        out.set(rank, world.get(p));
    }
    debug_assert_eq!(out.len(), sub.num_atoms());
    Ok((out, sub))
}

/// `⟨n⟩^d`: strictly increasing `d`-tuples over `0..n`.
pub fn ordered_tuples(n: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if d == 0 || d > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..d).collect();
    loop {
        out.push(cur.clone());
        // advance the rightmost position that can still grow
        let mut i = d;
        while i > 0 && cur[i - 1] == n - d + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..d {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Tuples of `⟨n+m⟩^d` lying neither inside `0..n` nor inside `n..n+m`.
pub fn cross_tuples(n: usize, m: usize, d: usize) -> Vec<Vec<usize>> {
    ordered_tuples(n + m, d)
        .into_iter()
        .filter(|t| t.iter().any(|&c| c < n) && t.iter().any(|&c| c >= n))
        .collect()
}

/// Applies per-type constant permutations: `R(σc)` holds in the result iff
/// `R(c)` holds in `world`.
pub fn permute(world: &World, domain: &Domain, perms: &[Vec<usize>]) -> Result<World> {
    if perms.len() != domain.sizes().len() {
        return Err(Error::NotABijection(format!(
            "{} permutations for {} types",
            perms.len(),
            domain.sizes().len()
        )));
    }
    for (t, (p, &n)) in perms.iter().zip(domain.sizes()).enumerate() {
        let mut seen = vec![false; n];
        if p.len() != n {
            return Err(Error::NotABijection(format!(
                "type {} has {} constants",
                t, n
            )));
        }
        for &c in p {
            if c >= n || seen[c] {
                return Err(Error::NotABijection(format!(
                    "type {}: {:?} is not a permutation",
                    t, p
                )));
            }
            seen[c] = true;
        }
    }
    let mut out = World::all_false(world.len());
    let sig = domain.signature();
    for i in world.true_atoms() {
        let (pred, args) = domain.atom(i);
        let image: Vec<usize> = args
            .iter()
            .zip(&sig.predicate(pred).args)
            .map(|(&c, &t)| perms[t][c])
            .collect();
        out.set(domain.atom_index(pred, &image), true);
    }
    Ok(out)
}

/// A domain whose designated type is split into `[n]` and `[n̄] = n..n+m`.
/// Other types belong wholly to both halves.
#[derive(Debug, Clone)]
pub struct Split {
    full: Domain,
    ty: TypeId,
    n: usize,
}

impl Split {
    pub fn new(full: Domain, ty: TypeId, n: usize) -> Result<Self> {
        if ty >= full.sizes().len() {
            return Err(Error::InvalidDomain(format!("no type with id {}", ty)));
        }
        if n > full.size(ty) {
            return Err(Error::InvalidDomain(format!(
                "split point {} exceeds size {}",
                n,
                full.size(ty)
            )));
        }
        Ok(Split { full, ty, n })
    }

    /// Single-type split of `[n+m]`.
    pub fn single(signature: &Signature, n: usize, m: usize) -> Result<Self> {
        Split::new(Domain::single(signature, n + m)?, 0, n)
    }

    pub fn full(&self) -> &Domain {
        &self.full
    }

    pub fn split_type(&self) -> TypeId {
        self.ty
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.full.size(self.ty) - self.n
    }

    fn subsets(&self, range: std::ops::Range<usize>) -> Vec<Vec<usize>> {
        self.full
            .sizes()
            .iter()
            .enumerate()
            .map(|(t, &s)| {
                if t == self.ty {
                    range.clone().collect()
                } else {
                    (0..s).collect()
                }
            })
            .collect()
    }

    /// Subsets selecting `[n]`.
    pub fn lower_subsets(&self) -> Vec<Vec<usize>> {
        self.subsets(0..self.n)
    }

    /// Subsets selecting `[n̄]`.
    pub fn upper_subsets(&self) -> Vec<Vec<usize>> {
        self.subsets(self.n..self.full.size(self.ty))
    }

    pub fn lower(&self) -> Domain {
        let mut sizes = self.full.sizes().to_vec();
        sizes[self.ty] = self.n;
        self.full
            .resized(sizes)
            .expect("sub-domain of a valid domain")
    }

    pub fn upper(&self) -> Domain {
        let mut sizes = self.full.sizes().to_vec();
        sizes[self.ty] = self.m();
        self.full
            .resized(sizes)
            .expect("sub-domain of a valid domain")
    }

    pub fn lower_positions(&self) -> Vec<usize> {
        self.full
            .restriction_positions(&self.lower_subsets())
            .expect("valid subsets")
    }

    pub fn upper_positions(&self) -> Vec<usize> {
        self.full
            .restriction_positions(&self.upper_subsets())
            .expect("valid subsets")
    }

    /// Atoms whose split-type constants meet both halves.
    pub fn cross_positions(&self) -> Vec<usize> {
        let sig = self.full.signature();
        (0..self.full.num_atoms())
            .filter(|&i| {
                let (p, args) = self.full.atom(i);
                let mut low = false;
                let mut high = false;
                for (&c, &t) in args.iter().zip(&sig.predicate(p).args) {
                    if t == self.ty {
                        if c < self.n {
                            low = true;
                        } else {
                            high = true;
                        }
                    }
                }
                low && high
            })
            .collect()
    }

    /// `log₂ C_{n,m}`: the number of worlds extending a fixed pair of
    /// `[n]`- and `[n̄]`-worlds is two to the number of cross atoms.
    pub fn extension_count_log2(&self) -> usize {
        self.cross_positions().len()
    }
}

/// Free-function form of [`Split::extension_count_log2`].
pub fn extension_count(split: &Split) -> usize {
    split.extension_count_log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_mln;

    fn sig(text: &str) -> Signature {
        parse_mln(text).unwrap().signature
    }

    fn gb() -> Signature {
        sig("type t = 4\npredicate G(t,t)\npredicate B(t,t)")
    }

    /// Example world over [4] (0-based): G(1,0), G(2,2), B(1,3), B(2,3).
    fn example_world(d: &Domain) -> World {
        let mut w = World::all_false(d.num_atoms());
        for (p, a, b) in [(0, 1, 0), (0, 2, 2), (1, 1, 3), (1, 2, 3)] {
            w.set(d.atom_index(p, &[a, b]), true);
        }
        w
    }

    #[test]
    fn atom_index_roundtrip() {
        let s = sig("type a = 2\ntype b = 3\npredicate P(a)\npredicate R(a,b)\npredicate Q(b,b,a)");
        let d = Domain::new(&s, vec![2, 3]).unwrap();
        assert_eq!(d.num_atoms(), 2 + 6 + 18);
        for i in 0..d.num_atoms() {
            let (p, args) = d.atom(i);
            assert_eq!(d.atom_index(p, &args), i);
        }
        assert_eq!(d.atom_index(1, &[0, 2]), 4);
        assert_eq!(d.atom_index(1, &[1, 0]), 5);
    }

    #[test]
    fn world_counts() {
        let s = sig("type t = 2\npredicate S(t)");
        let d = Domain::single(&s, 2).unwrap();
        assert_eq!(
            enumerate_worlds(&d, EnumGuard::default()).unwrap().count(),
            4
        );
        let s = sig("type t = 2\npredicate R(t,t)");
        let d = Domain::single(&s, 2).unwrap();
        assert_eq!(
            enumerate_worlds(&d, EnumGuard::default()).unwrap().count(),
            16
        );
        let d = Domain::single(&gb(), 2).unwrap();
        let worlds: Vec<World> = enumerate_worlds(&d, EnumGuard::default())
            .unwrap()
            .collect();
        assert_eq!(worlds.len(), 256);
        assert!(worlds.windows(2).all(|w| w[0].to_index() < w[1].to_index()));
    }

    #[test]
    fn guard_rejects_large_domains() {
        let d = Domain::single(&gb(), 4).unwrap();
        assert!(matches!(
            enumerate_worlds(&d, EnumGuard::with_limit(31)),
            Err(Error::DomainTooLarge {
                atoms: 32,
                limit: 31
            })
        ));
    }

    #[test]
    fn restriction_of_example_world() {
        let d = Domain::single(&gb(), 4).unwrap();
        let w = example_world(&d);
        let (lo, ld) = restrict(&w, &d, &[vec![0, 1]]).unwrap();
        let truths: Vec<(usize, Vec<usize>)> = lo.true_atoms().map(|i| ld.atom(i)).collect();
        assert_eq!(truths, vec![(0, vec![1, 0])]);
        let (hi, hd) = restrict(&w, &d, &[vec![2, 3]]).unwrap();
        let truths: Vec<(usize, Vec<usize>)> = hi.true_atoms().map(|i| hd.atom(i)).collect();
        // renamed 2 -> 0, 3 -> 1: green self loop on 2, blue edge 2 -> 3
        assert_eq!(truths, vec![(0, vec![0, 0]), (1, vec![0, 1])]);
        let (all, _) = restrict(&w, &d, &[vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(all, w);
        assert!(restrict(&w, &d, &[vec![0, 7]]).is_err());
    }

    #[test]
    fn tuples() {
        assert_eq!(ordered_tuples(4, 2).len(), 6);
        assert_eq!(ordered_tuples(3, 3), vec![vec![0, 1, 2]]);
        assert!(ordered_tuples(2, 3).is_empty());
        assert_eq!(
            cross_tuples(2, 2, 2),
            vec![vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3]]
        );
        assert!(cross_tuples(3, 4, 1).is_empty());
        assert_eq!(cross_tuples(3, 2, 3).len(), 9);
    }

    #[test]
    fn permutation_swaps_edge() {
        let d = Domain::single(&gb(), 4).unwrap();
        let w = example_world(&d);
        assert_eq!(permute(&w, &d, &[vec![0, 1, 2, 3]]).unwrap(), w);
        let swap = vec![vec![1, 0, 2, 3]];
        let once = permute(&w, &d, &swap).unwrap();
        assert!(once.get(d.atom_index(0, &[0, 1])));
        assert!(!once.get(d.atom_index(0, &[1, 0])));
        assert_eq!(permute(&once, &d, &swap).unwrap(), w);
        assert!(permute(&w, &d, &[vec![0, 0, 2, 3]]).is_err());
    }

    #[test]
    fn extension_counts() {
        let s = sig("type t = 4\npredicate R(t,t)");
        assert_eq!(Split::single(&s, 2, 2).unwrap().extension_count_log2(), 8);
        let s = sig("type t = 4\npredicate S(t)\npredicate C(t)");
        assert_eq!(Split::single(&s, 2, 2).unwrap().extension_count_log2(), 0);
        assert_eq!(
            Split::single(&gb(), 2, 2).unwrap().extension_count_log2(),
            16
        );
    }

    #[test]
    fn gather_matches_restrict() {
        let d = Domain::single(&gb(), 3).unwrap();
        let split = Split::new(d.clone(), 0, 2).unwrap();
        let g = Gather::new(split.lower_positions());
        let sc = Scatter::new(g.positions());
        for idx in [0u64, 1, 0b1011_0110_1100_0011, (1 << 18) - 1, 0x2_5a5a] {
            let w = World::from_index(idx, d.num_atoms());
            let (r, _) = restrict(&w, &d, &split.lower_subsets()).unwrap();
            assert_eq!(Some(g.apply(idx)), r.to_index());
            assert_eq!(g.apply(g.scatter(g.apply(idx))), g.apply(idx));
            assert_eq!(sc.apply(g.apply(idx)), g.scatter(g.apply(idx)));
        }
    }
}
