//! Numerical tolerances shared across the crate.

/// Weights of a discrete measure must sum to one within this amount.
pub const NORMALIZATION: f64 = 1e-12;

/// Row and column sums of a coupling must match the marginals within this amount.
pub const MARGINAL: f64 = 1e-9;

/// Grid points closer than this (coordinatewise) are duplicates.
pub const GRID_DUPLICATE: f64 = 1e-12;

/// Relative feasibility tolerance of the selection program, multiplied by
/// [`crate::selection::ConstraintSet::scale`].
pub const FEASIBILITY: f64 = 1e-8;

/// Relative complementary-slackness tolerance of a selection certificate.
pub const COMPLEMENTARITY: f64 = 1e-6;

/// Relative stopping tolerance used inside the dual active-set iterations.
/// Kept well below [`FEASIBILITY`] so returned points certify comfortably.
pub const SOLVER_STOP: f64 = 1e-12;

/// Absolute slack allowed when checking a deterministic regret bound.
pub const BOUND_CHECK: f64 = 1e-8;

/// Cumulative ledger columns must equal prefix sums within this amount.
pub const LEDGER: f64 = 1e-9;
