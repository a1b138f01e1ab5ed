//! Online learning to transport over discrete probability measures.
//!
//! The player's decision each round is a uniform point cloud `μ_t`. Nature
//! reveals a potential (or an interaction kernel) only on the decision points
//! and a fixed grid of hubs. This crate provides:
//!
//! - [`measures`]: discrete measures and exact Wasserstein-2 couplings,
//! - [`selection`]: the min-norm subgradient program, its slack relaxation,
//!   infeasibility certificates and a brute-force enumeration oracle,
//! - [`algorithms`]: one round of minimal selection, MSoE, relaxed and
//!   interaction play, with optional projection onto a convex domain,
//! - [`environments`]: adversary scenarios and the zeroth-order view,
//! - [`analysis`]: regret ledgers and every regret bound as a checkable
//!   inequality,
//! - [`harness`]: presets, the run loop, CSV/JSON output and bound checks.

pub mod algorithms;
pub mod analysis;
pub mod environments;
pub mod harness;
pub mod linalg;
pub mod measures;
pub mod selection;
pub mod tolerances;

pub use algorithms::{AlgorithmConfig, DomainSpec, PlayerState, StepReport, Variant};
pub use environments::{OracleView, Scenario};
pub use measures::{Coupling, DiscreteMeasure, GridSet, Point};
pub use selection::{ConstraintSet, RelaxedOutcome, SelectionOutcome};
