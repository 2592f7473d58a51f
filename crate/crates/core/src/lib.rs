//! Fast-rate classification with a reject option on finite domains.
//!
//! Everything is exact over an enumerated domain `{0, .., m-1}`: hypotheses
//! are bit vectors, distributions are finite weight tables, and population
//! risks are finite sums. On top of that sit
//!
//! * [`erm`]: empirical risk minimization and the almost-ERM set,
//! * [`reject`]: the abstaining learner aggregating almost-ERMs,
//! * [`misspecified`]: binary conversions (majority vote, covering nets) and
//!   the memorizing learner,
//! * [`theory`]: Monte Carlo checks of the supporting inequalities,
//! * [`experiments`]: synthetic constructions and learning curves,
//! * [`cli`]: the `rejectlab` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod class;
pub mod cli;
pub mod domain;
pub mod erm;
pub mod error;
pub mod experiments;
pub mod misspecified;
pub mod reject;
pub mod theory;

pub use class::HypothesisClass;
pub use domain::{
    AbstainingHypothesis, FiniteDistribution, Hypothesis, LabeledPoint, LabeledSample, Prediction,
};
pub use error::{Error, Result};
pub use reject::{abstaining_learner, AbstainerModel};
