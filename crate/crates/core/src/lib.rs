//! Metric projections, attractive points and ergodic averages for discrete
//! semigroups of nonexpansive (and generalized hybrid) maps.

pub mod attractive;
pub mod cli;
pub mod convex;
pub mod ergodic;
pub mod error;
pub mod hilbert;
pub mod mappings;
pub mod means;
pub mod semigroup;

pub use convex::{ConvexSet, Space};
pub use error::{Error, Result};
pub use hilbert::Vector;
pub use mappings::{Mapping, PropertyReport, Witness};
pub use semigroup::{Address, SemigroupAction};
