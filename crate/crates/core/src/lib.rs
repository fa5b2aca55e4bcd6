//! Exact-arithmetic cake division under entitlements in the
//! Robertson-Webb query model.
//!
//! The engine runs proportional protocols against concrete valuation
//! measures on the interval cake (0,1], computes the clonage, precision,
//! and fineness of entitlement profiles together with the query-complexity
//! bound formulas, and plays a constructive adversary that keeps its
//! knowledge state level-deficient along a schedule, forcing any mediator
//! past a target query count. All values live in Q(√d) and every decision
//! is made by exact comparison.

pub mod adversary;
pub mod arena;
pub mod deficiency;
pub mod exact;
pub mod indices;
pub mod kitchen;
pub mod protocols;
pub mod records;
pub mod sampling;

pub use exact::{Radicand, Scalar};
pub use indices::EntitlementProfile;
pub use kitchen::{KitchenMeasure, Query, Serving};
pub use records::PartitionRecord;
