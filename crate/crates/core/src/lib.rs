//! Likelihood-ratio estimation for discrete N-grams.
//!
//! Given a corpus annotated with entity spans, [`counts::build_model`]
//! counts every N-gram window (the denominator sample) and the windows
//! directly left of entities of one type (the numerator sample). The
//! estimators in [`estimators`] turn those counts into ratio estimates,
//! including estimates for N-grams never seen in training, and
//! [`evaluation`] ranks test N-grams by estimate and measures recall of
//! true entity contexts.

pub mod corpus;
pub mod counts;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod scenarios;
pub mod sweeps;

pub use corpus::{Document, EntitySpan, SplitSet, Token};
pub use counts::{build_model, EntityTypeFilter, FrequencyModel, NGram, UnitPattern};
pub use error::{ArgumentError, Error, EstimatorError, ParseError};
pub use estimators::{Estimate, EstimateValue, EstimatorConfig, EstimatorKind};
