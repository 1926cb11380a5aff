//! Quantifier-free, function-free formulas over clause-local variables.

use std::fmt;

use super::Signature;

pub type VarId = usize;
pub type PredId = usize;

/// Boolean combination of atoms and variable disequalities.
///
/// Variables are indices into the owning clause's variable list. Conjunctions
/// and disjunctions are n-ary and kept flat by the parser and by [`Formula::fold`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom { pred: PredId, args: Vec<VarId> },
    Neq(VarId, VarId),
    Const(bool),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(pred: PredId, args: Vec<VarId>) -> Self {
        Formula::Atom { pred, args }
    }

    pub fn negation(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// Conjunction, flattening nested conjunctions.
    pub fn and(parts: Vec<Formula>) -> Self {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        Formula::And(out)
    }

    /// Disjunction, flattening nested disjunctions.
    pub fn or(parts: Vec<Formula>) -> Self {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        Formula::Or(out)
    }

    /// Evaluates the formula given truth values for atoms and disequalities.
    pub fn eval<A, N>(&self, atom: &A, neq: &N) -> bool
    where
        A: Fn(PredId, &[VarId]) -> bool,
        N: Fn(VarId, VarId) -> bool,
    {
        match self {
            Formula::Atom { pred, args } => atom(*pred, args),
            Formula::Neq(a, b) => neq(*a, *b),
            Formula::Const(c) => *c,
            Formula::Not(f) => !f.eval(atom, neq),
            Formula::And(fs) => fs.iter().all(|f| f.eval(atom, neq)),
            Formula::Or(fs) => fs.iter().any(|f| f.eval(atom, neq)),
            Formula::Implies(a, b) => !a.eval(atom, neq) || b.eval(atom, neq),
            Formula::Iff(a, b) => a.eval(atom, neq) == b.eval(atom, neq),
        }
    }

    /// Renames every variable `v` to `map[v]`.
    pub fn substitute(&self, map: &[VarId]) -> Formula {
        match self {
            Formula::Atom { pred, args } => Formula::Atom {
                pred: *pred,
                args: args.iter().map(|&v| map[v]).collect(),
            },
            Formula::Neq(a, b) => Formula::Neq(map[*a], map[*b]),
            Formula::Const(c) => Formula::Const(*c),
            Formula::Not(f) => Formula::negation(f.substitute(map)),
            Formula::And(fs) => Formula::and(fs.iter().map(|f| f.substitute(map)).collect()),
            Formula::Or(fs) => Formula::or(fs.iter().map(|f| f.substitute(map)).collect()),
            Formula::Implies(a, b) => Formula::implies(a.substitute(map), b.substitute(map)),
            Formula::Iff(a, b) => Formula::iff(a.substitute(map), b.substitute(map)),
        }
    }

    /// Replaces every disequality by the constant chosen by `rule`.
    pub fn resolve_neq<R: Fn(VarId, VarId) -> bool>(&self, rule: &R) -> Formula {
        match self {
            Formula::Neq(a, b) => Formula::Const(rule(*a, *b)),
            Formula::Atom { .. } | Formula::Const(_) => self.clone(),
            Formula::Not(f) => Formula::negation(f.resolve_neq(rule)),
            Formula::And(fs) => Formula::and(fs.iter().map(|f| f.resolve_neq(rule)).collect()),
            Formula::Or(fs) => Formula::or(fs.iter().map(|f| f.resolve_neq(rule)).collect()),
            Formula::Implies(a, b) => Formula::implies(a.resolve_neq(rule), b.resolve_neq(rule)),
            Formula::Iff(a, b) => Formula::iff(a.resolve_neq(rule), b.resolve_neq(rule)),
        }
    }

    /// Constant folding. Also flattens nested n-ary nodes and collapses
    /// single-child conjunctions and disjunctions.
    pub fn fold(self) -> Formula {
        match self {
            Formula::Not(f) => match f.fold() {
                Formula::Const(c) => Formula::Const(!c),
                g => Formula::negation(g),
            },
            Formula::And(fs) => {
                let mut kept = Vec::new();
                for f in fs {
                    match f.fold() {
                        Formula::Const(false) => return Formula::Const(false),
                        Formula::Const(true) => {}
                        g => kept.push(g),
                    }
                }
                match kept.len() {
                    0 => Formula::Const(true),
                    1 => kept.pop().unwrap(),
                    _ => Formula::and(kept),
                }
            }
            Formula::Or(fs) => {
                let mut kept = Vec::new();
                for f in fs {
                    match f.fold() {
                        Formula::Const(true) => return Formula::Const(true),
                        Formula::Const(false) => {}
                        g => kept.push(g),
                    }
                }
                match kept.len() {
                    0 => Formula::Const(false),
                    1 => kept.pop().unwrap(),
                    _ => Formula::or(kept),
                }
            }
            Formula::Implies(a, b) => match (a.fold(), b.fold()) {
                (Formula::Const(false), _) | (_, Formula::Const(true)) => Formula::Const(true),
                (Formula::Const(true), g) => g,
                (g, Formula::Const(false)) => Formula::negation(g),
                (g, h) => Formula::implies(g, h),
            },
            Formula::Iff(a, b) => match (a.fold(), b.fold()) {
                (Formula::Const(x), Formula::Const(y)) => Formula::Const(x == y),
                (Formula::Const(true), g) | (g, Formula::Const(true)) => g,
                (Formula::Const(false), g) | (g, Formula::Const(false)) => Formula::negation(g),
                (g, h) => Formula::iff(g, h),
            },
            other => other,
        }
    }

    /// Distinct atoms in order of first occurrence.
    pub fn atoms(&self) -> Vec<(PredId, Vec<VarId>)> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<(PredId, Vec<VarId>)>) {
        match self {
            Formula::Atom { pred, args } => {
                if !out.iter().any(|(p, a)| p == pred && a == args) {
                    out.push((*pred, args.clone()));
                }
            }
            Formula::Neq(..) | Formula::Const(_) => {}
            Formula::Not(f) => f.collect_atoms(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_atoms(out)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Top-level conjuncts (the formula itself when it is not a conjunction).
    pub fn conjuncts(&self) -> &[Formula] {
        match self {
            Formula::And(fs) => fs,
            other => std::slice::from_ref(other),
        }
    }

    fn is_compound(&self) -> bool {
        matches!(
            self,
            Formula::And(_) | Formula::Or(_) | Formula::Implies(..) | Formula::Iff(..)
        )
    }

    /// Display adaptor resolving predicate and variable names.
    pub fn display<'a>(&'a self, sig: &'a Signature, vars: &'a [String]) -> FormulaDisplay<'a> {
        FormulaDisplay {
            formula: self,
            sig,
            vars,
        }
    }
}

pub struct FormulaDisplay<'a> {
    formula: &'a Formula,
    sig: &'a Signature,
    vars: &'a [String],
}

impl FormulaDisplay<'_> {
    fn child<'b>(&'b self, f: &'b Formula) -> FormulaDisplay<'b> {
        FormulaDisplay {
            formula: f,
            sig: self.sig,
            vars: self.vars,
        }
    }

    fn write_operand(&self, f: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if f.is_compound() {
            write!(out, "({})", self.child(f))
        } else {
            write!(out, "{}", self.child(f))
        }
    }
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.formula {
            Formula::Atom { pred, args } => {
                write!(out, "{}(", self.sig.predicate(*pred).name)?;
                for (i, v) in args.iter().enumerate() {
                    if i > 0 {
                        write!(out, ", ")?;
                    }
                    write!(out, "{}", self.vars[*v])?;
                }
                write!(out, ")")
            }
            Formula::Neq(a, b) => write!(out, "{} != {}", self.vars[*a], self.vars[*b]),
            Formula::Const(c) => write!(out, "{}", c),
            Formula::Not(f) => {
                write!(out, "!")?;
                self.write_operand(f, out)
            }
            Formula::And(fs) | Formula::Or(fs) => {
                let op = if matches!(self.formula, Formula::And(_)) {
                    " ^ "
                } else {
                    " v "
                };
                for (i, f) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(out, "{}", op)?;
                    }
                    self.write_operand(f, out)?;
                }
                Ok(())
            }
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                let op = if matches!(self.formula, Formula::Implies(..)) {
                    " => "
                } else {
                    " <=> "
                };
                self.write_operand(a, out)?;
                write!(out, "{}", op)?;
                self.write_operand(b, out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: VarId) -> Formula {
        Formula::atom(0, vec![v])
    }

    #[test]
    fn fold_removes_constants() {
        let f = Formula::or(vec![s(0), Formula::Const(false)]).fold();
        assert_eq!(f, s(0));
        let f = Formula::and(vec![s(0), Formula::Const(false)]).fold();
        assert_eq!(f, Formula::Const(false));
        let f = Formula::implies(Formula::Const(true), s(1)).fold();
        assert_eq!(f, s(1));
        let f = Formula::iff(s(0), Formula::Const(false)).fold();
        assert_eq!(f, Formula::negation(s(0)));
    }

    #[test]
    fn fold_is_idempotent_on_nested() {
        let f = Formula::and(vec![
            Formula::or(vec![s(0), Formula::Const(false)]),
            Formula::and(vec![s(1), Formula::Const(true)]),
        ])
        .fold();
        assert_eq!(f, Formula::and(vec![s(0), s(1)]));
        assert_eq!(f.clone().fold(), f);
    }

    #[test]
    fn atoms_deduplicates() {
        let f = Formula::and(vec![s(0), Formula::negation(s(0)), s(1)]);
        assert_eq!(f.atoms(), vec![(0, vec![0]), (0, vec![1])]);
    }
}
