//! Markov Logic Networks over finite domains, with exact inference by
//! enumeration and bounds on how distributions change across domain sizes.
//!
//! Modules, bottom up:
//! - [`logic`]: signatures, formulas, the MLN text format, distinct-constant
//!   normalization.
//! - [`worlds`]: typed domains, atom indexing, worlds, restriction.
//! - [`model`]: grounding counts, weights, partition functions, marginals,
//!   domain-size aware scaling.
//! - [`bounds`]: extremal k-weights, `M_max`, `M_min`, `Δ` and the
//!   exhaustive inequality checks.
//! - [`learning`]: exact likelihood, gradients, regularized learning.
//! - [`datagen`]: ground-atom databases and the Friends & Smokers generator.

pub mod bounds;
pub mod datagen;
pub mod error;
pub mod learning;
pub mod logic;
pub mod model;
pub mod numeric;
pub mod worlds;

pub use error::{Error, Result};
pub use logic::{normalize_distinct, parse_mln, MlnModel};
pub use worlds::{Domain, EnumGuard, Split, World};
