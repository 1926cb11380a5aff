//! First-order language, weighted clauses and the MLN text format.

mod formula;
mod normalize;
mod parser;

use std::collections::BTreeMap;
use std::fmt;

pub use formula::{Formula, FormulaDisplay, PredId, VarId};
pub use normalize::{normalize_clause, normalize_distinct, set_partitions};
pub use parser::parse_mln;

use crate::error::{Error, Result};

pub type TypeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: String,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub args: Vec<TypeId>,
}

impl Predicate {
    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

/// Declared types (with default domain sizes) and predicates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Signature {
    types: Vec<TypeDecl>,
    predicates: Vec<Predicate>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_type(&mut self, name: &str, size: usize) -> Result<TypeId> {
        if self.type_id(name).is_some() {
            return Err(Error::Declaration {
                line: 0,
                message: format!("type `{}` declared twice", name),
            });
        }
        if size == 0 {
            return Err(Error::Declaration {
                line: 0,
                message: format!("type `{}` must have size >= 1", name),
            });
        }
        self.types.push(TypeDecl {
            name: name.to_string(),
            size,
        });
        Ok(self.types.len() - 1)
    }

    pub fn add_predicate(&mut self, name: &str, args: Vec<TypeId>) -> Result<PredId> {
        if self.predicate_id(name).is_some() {
            return Err(Error::Declaration {
                line: 0,
                message: format!("predicate `{}` declared twice", name),
            });
        }
        if args.is_empty() {
            return Err(Error::Declaration {
                line: 0,
                message: format!("predicate `{}` needs at least one argument", name),
            });
        }
        if let Some(&bad) = args.iter().find(|&&t| t >= self.types.len()) {
            return Err(Error::InvalidDomain(format!("undeclared type id {}", bad)));
        }
        self.predicates.push(Predicate {
            name: name.to_string(),
            args,
        });
        Ok(self.predicates.len() - 1)
    }

    pub fn types(&self) -> &[TypeDecl] {
        &self.types
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn predicate(&self, id: PredId) -> &Predicate {
        &self.predicates[id]
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn predicate_id(&self, name: &str) -> Option<PredId> {
        self.predicates.iter().position(|p| p.name == name)
    }

    /// Declared size of every type, in declaration order.
    pub fn default_sizes(&self) -> Vec<usize> {
        self.types.iter().map(|t| t.size).collect()
    }

    pub fn max_predicate_arity(&self) -> usize {
        self.predicates
            .iter()
            .map(Predicate::arity)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Var {
    pub name: String,
    pub ty: TypeId,
}

/// A weighted formula together with its free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub formula: Formula,
    pub vars: Vec<Var>,
    pub weight: f64,
    /// Index of the clause this one was derived from by normalization
    /// (its own index for parsed clauses).
    pub origin: usize,
}

impl Clause {
    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn var_names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.name.clone()).collect()
    }

    /// True when every pair of same-typed variables is constrained to be
    /// distinct by a top-level disequality.
    pub fn is_distinct(&self) -> bool {
        let conj = self.formula.conjuncts();
        for a in 0..self.vars.len() {
            for b in a + 1..self.vars.len() {
                if self.vars[a].ty != self.vars[b].ty {
                    continue;
                }
                let found = conj.iter().any(|f| {
                    matches!(f, Formula::Neq(x, y) if (*x == a && *y == b) || (*x == b && *y == a))
                });
                if !found {
                    return false;
                }
            }
        }
        true
    }

    /// σ-determinacy of a single clause: every atom mentions every variable.
    pub fn is_sigma_determinate(&self) -> bool {
        let n = self.vars.len();
        self.formula.atoms().iter().all(|(_, args)| {
            let mut seen = vec![false; n];
            for &v in args {
                seen[v] = true;
            }
            seen.into_iter().all(|s| s)
        })
    }

    pub fn display<'a>(&'a self, sig: &'a Signature) -> ClauseDisplay<'a> {
        ClauseDisplay { clause: self, sig }
    }
}

pub struct ClauseDisplay<'a> {
    clause: &'a Clause,
    sig: &'a Signature,
}

impl fmt::Display for ClauseDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.clause.var_names();
        write!(
            f,
            "{:.16e} {}",
            self.clause.weight,
            self.clause.formula.display(self.sig, &names)
        )
    }
}

/// A Markov Logic Network: a signature and a list of weighted clauses.
#[derive(Debug, Clone, PartialEq)]
pub struct MlnModel {
    pub signature: Signature,
    pub clauses: Vec<Clause>,
}

impl MlnModel {
    pub fn new(signature: Signature, clauses: Vec<Clause>) -> Self {
        MlnModel { signature, clauses }
    }

    /// Whether every clause grounds only to distinct constants.
    pub fn is_normalized(&self) -> bool {
        self.clauses.iter().all(Clause::is_distinct)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.clauses.iter().map(|c| c.weight).collect()
    }

    /// Same clauses with the given weights.
    pub fn with_weights(&self, weights: &[f64]) -> Result<MlnModel> {
        if weights.len() != self.clauses.len() {
            return Err(Error::ClauseMismatch {
                expected: self.clauses.len(),
                found: weights.len(),
            });
        }
        let mut out = self.clone();
        for (c, &w) in out.clauses.iter_mut().zip(weights) {
            c.weight = w;
        }
        Ok(out)
    }

    /// Largest clause arity `d` (0 for an empty model).
    pub fn max_arity(&self) -> usize {
        self.clauses.iter().map(Clause::arity).max().unwrap_or(0)
    }

    /// Groups clause indices by arity. Requires a normalized model.
    pub fn arity_partition(&self) -> Result<BTreeMap<usize, Vec<usize>>> {
        if !self.is_normalized() {
            return Err(Error::NotNormalized);
        }
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, c) in self.clauses.iter().enumerate() {
            out.entry(c.arity()).or_default().push(i);
        }
        Ok(out)
    }

    pub fn is_sigma_determinate(&self) -> bool {
        self.clauses.iter().all(Clause::is_sigma_determinate)
    }

    /// Renders the model in the MLN file format.
    pub fn to_mln_string(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for MlnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.signature.types {
            writeln!(f, "type {} = {}", t.name, t.size)?;
        }
        for p in &self.signature.predicates {
            let args: Vec<&str> = p
                .args
                .iter()
                .map(|&t| self.signature.types[t].name.as_str())
                .collect();
            writeln!(f, "predicate {}({})", p.name, args.join(", "))?;
        }
        for c in &self.clauses {
            writeln!(f, "{}", c.display(&self.signature))?;
        }
        Ok(())
    }
}

/// Free-function form of [`MlnModel::arity_partition`].
pub fn arity_partition(model: &MlnModel) -> Result<BTreeMap<usize, Vec<usize>>> {
    model.arity_partition()
}

/// Free-function form of [`MlnModel::is_sigma_determinate`].
pub fn is_sigma_determinate(model: &MlnModel) -> bool {
    model.is_sigma_determinate()
}
