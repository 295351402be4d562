//! Privacy funnel tools: leakage metrics for discrete channels, explicit
//! protocols, and exact optimal protocols found by enumerating polytope
//! vertices.

pub mod data;
pub mod error;
pub mod float_serde;
pub mod lp;
pub mod mechanisms;
pub mod optimal;
pub mod polytope;
pub mod prob;

pub use error::{Error, Result};
pub use mechanisms::{Channel, Metric, PrivacyReport, Protocol, SecretAwareChannel};
pub use polytope::{EnumerationOptions, InsertionOrder, Polytope, VertexSet};
pub use prob::{Distribution, JointDistribution};
