//! Domain-size aware weight scaling.
//!
//! Clause `i` is divided by `s_i = max_P max(1, Π_{x ∉ vars(P)} |Δ_x|)`, the
//! maximum over its atoms `P` of the product of target domain sizes of the
//! clause variables missing from `P`.

use crate::error::{Error, Result};
use crate::logic::MlnModel;

#[derive(Debug, Clone, PartialEq)]
pub struct DaMlnScaling {
    /// `s_i ≥ 1`, one per clause.
    pub factors: Vec<f64>,
}

/// Scale factors for target domain sizes `sizes` (one per type).
pub fn da_scale_factors(model: &MlnModel, sizes: &[usize]) -> Result<DaMlnScaling> {
    let types = model.signature.types().len();
    if sizes.len() != types {
        return Err(Error::InvalidDomain(format!(
            "{} target sizes given for {} types",
            sizes.len(),
            types
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidDomain(
            "target sizes must be at least 1".into(),
        ));
    }
    let factors = model
        .clauses
        .iter()
        .map(|c| {
            c.formula
                .atoms()
                .iter()
                .map(|(_, args)| {
                    c.vars
                        .iter()
                        .enumerate()
                        .filter(|(v, _)| !args.contains(v))
                        .map(|(_, var)| sizes[var.ty] as f64)
                        .product::<f64>()
                        .max(1.0)
                })
                .fold(1.0, f64::max)
        })
        .collect();
    Ok(DaMlnScaling { factors })
}

/// The model with each weight `a_i` replaced by `a_i / s_i`.
pub fn apply_da_scaling(model: &MlnModel, scaling: &DaMlnScaling) -> Result<MlnModel> {
    if scaling.factors.len() != model.clauses.len() {
        return Err(Error::ClauseMismatch {
            expected: model.clauses.len(),
            found: scaling.factors.len(),
        });
    }
    let weights: Vec<f64> = model
        .clauses
        .iter()
        .zip(&scaling.factors)
        .map(|(c, s)| c.weight / s)
        .collect();
    model.with_weights(&weights)
}
