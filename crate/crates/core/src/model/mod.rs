//! Model definition and exact quantities of the regime chain.

mod chain;
mod config;
mod rates;
mod spec;

pub use chain::{drift_index, invariant_measure, is_irreducible, is_reversible, InvariantMeasure};
pub use config::{Model, ModelFile};
pub use rates::{bound_matrix, BoundMatrix, RateFn, StateDepModel};
pub use spec::{validate, Condition, ConditionResult, ModelSpec, ValidationReport};
