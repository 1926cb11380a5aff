use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}: unknown predicate `{name}`")]
    UnknownPredicate { line: usize, name: String },

    #[error("line {line}: unknown type `{name}`")]
    UnknownType { line: usize, name: String },

    #[error("line {line}: predicate `{name}` expects {expected} arguments, got {found}")]
    ArityMismatch {
        line: usize,
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: variable `{var}` used with conflicting types `{first}` and `{second}`")]
    TypeConflict {
        line: usize,
        var: String,
        first: String,
        second: String,
    },

    #[error("line {line}: {message}")]
    Declaration { line: usize, message: String },

    #[error("model is not normalized to distinct-constant groundings")]
    NotNormalized,

    #[error("domain too large: {atoms} ground atoms exceed the enumeration limit of {limit}")]
    DomainTooLarge { atoms: usize, limit: usize },

    #[error("operation requires a single-type signature, found {0} types")]
    MultipleTypes(usize),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("subset is not contained in the domain: {0}")]
    InvalidSubset(String),

    #[error("not a bijection: {0}")]
    NotABijection(String),

    #[error("world has {found} atoms, expected {expected}")]
    WorldSize { expected: usize, found: usize },

    #[error("clause list mismatch: expected {expected} clauses, got {found}")]
    ClauseMismatch { expected: usize, found: usize },

    #[error("clause has {0} distinct atoms; at most 20 are supported")]
    ClauseTooWide(usize),

    #[error(
        "constant overflow: type `{ty}` has {found} constants but the domain holds {capacity}"
    )]
    ConstantOverflow {
        ty: String,
        found: usize,
        capacity: usize,
    },

    #[error("sample size {requested} exceeds population {population}")]
    SampleTooLarge { requested: usize, population: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
