//! The min-norm subgradient program at a single decision point:
//!
//! ```text
//!     minimize ‖ξ‖²   subject to   ⟨ξ, a_i⟩ ≥ b_i   for i = 1..n
//! ```
//!
//! i.e. the Euclidean projection of the origin onto a polyhedron. For the
//! potential game `a_i = x − z_i` and `b_i = V(x) − V(z_i)`; for the
//! interaction game the offsets come from pairwise kernel values.
//!
//! [`min_norm_select`] runs a dual active-set method and returns either the
//! unique minimizer with nonnegative multipliers `λ` (so that `ξ = Σ λ_i a_i`),
//! or a Farkas certificate of infeasibility. [`relaxed_select`] solves the
//! slack relaxation and [`oracle_min_norm`] is a brute-force enumeration used
//! to cross-check the solver.

mod dual_active_set;
mod oracle;
mod relaxed;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::measures::{GridSet, Point};
use crate::tolerances;

pub use oracle::{oracle_min_norm, ORACLE_MAX_CONSTRAINTS, ORACLE_MAX_DIM};
pub use relaxed::relaxed_select;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite input in constraint {0}")]
    NonFinite(usize),
    #[error("constraint set has {directions} directions but {offsets} offsets")]
    LengthMismatch { directions: usize, offsets: usize },
    #[error("missing kernel value: {0}")]
    MissingKernelValue(String),
    #[error("stepsize must be positive, got {0}")]
    InvalidStepsize(f64),
    #[error("oracle budget exceeded: n = {n}, d = {d}")]
    BudgetExceeded { n: usize, d: usize },
}

/// Half-spaces `⟨ξ, a_i⟩ ≥ b_i` in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    dim: usize,
    directions: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl ConstraintSet {
    pub fn new(
        dim: usize,
        directions: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    ) -> Result<Self, SelectionError> {
        if directions.len() != offsets.len() {
            return Err(SelectionError::LengthMismatch {
                directions: directions.len(),
                offsets: offsets.len(),
            });
        }
        for (i, (a, b)) in directions.iter().zip(&offsets).enumerate() {
            if a.len() != dim {
                return Err(SelectionError::DimensionMismatch { expected: dim, found: a.len() });
            }
            if !b.is_finite() || a.iter().any(|x| !x.is_finite()) {
                return Err(SelectionError::NonFinite(i));
            }
        }
        Ok(ConstraintSet { dim, directions, offsets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `1 + max_i (‖a_i‖² + |b_i|)`, the unit for all selection tolerances.
    pub fn scale(&self) -> f64 {
        1.0 + self
            .directions
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| linalg::norm_sq(a) + b.abs())
            .fold(0.0, f64::max)
    }

    /// `max_i [b_i]_+`
    pub fn max_positive_offset(&self) -> f64 {
        self.offsets.iter().fold(0.0, |acc, &b| acc.max(b))
    }

    /// Largest violation `b_i − s − ⟨ξ, a_i⟩` (negative when all hold strictly).
    pub fn max_violation(&self, xi: &[f64], slack: f64) -> f64 {
        self.directions
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| b - slack - linalg::dot(xi, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_satisfied_by(&self, xi: &[f64]) -> bool {
        self.max_violation(xi, 0.0) <= tolerances::FEASIBILITY * self.scale()
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "directions": self.directions, "offsets": self.offsets }).to_string()
    }
}

/// Result of [`min_norm_select`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SelectionOutcome {
    /// Minimum-norm feasible `ξ` with multipliers `λ ≥ 0`, one per constraint,
    /// such that `ξ = Σ λ_i a_i` and `λ_i (⟨ξ, a_i⟩ − b_i) = 0`.
    Feasible { xi: Vec<f64>, multipliers: Vec<f64> },
    /// The polyhedron is empty. When present, the certificate `λ ≥ 0`
    /// satisfies `Σ λ_i a_i = 0` and `Σ λ_i b_i > 0`. It is absent only when the
    /// iteration stalled numerically.
    Infeasible { certificate: Option<Vec<f64>> },
}

impl SelectionOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SelectionOutcome::Feasible { .. })
    }

    pub fn xi(&self) -> Option<&[f64]> {
        match self {
            SelectionOutcome::Feasible { xi, .. } => Some(xi),
            SelectionOutcome::Infeasible { .. } => None,
        }
    }

    /// Checks the KKT conditions (feasible) or the Farkas certificate
    /// (infeasible) against `c` at the crate tolerances.
    pub fn certify(&self, c: &ConstraintSet) -> Result<(), String> {
        let scale = c.scale();
        match self {
            SelectionOutcome::Feasible { xi, multipliers } => {
                if multipliers.len() != c.len() {
                    return Err("multiplier count does not match constraint count".into());
                }
                let viol = c.max_violation(xi, 0.0);
                if viol > tolerances::FEASIBILITY * scale {
                    return Err(format!("constraint violated by {viol}"));
                }
                let mut recon = vec![0.0; c.dim()];
                for (i, (&lam, a)) in multipliers.iter().zip(c.directions()).enumerate() {
                    if lam < 0.0 {
                        return Err(format!("negative multiplier {lam} at {i}"));
                    }
                    let gap = lam * (linalg::dot(xi, a) - c.offsets()[i]);
                    // Rounding in ⟨ξ, a_i⟩ alone is about ε‖ξ‖‖a_i‖, which huge
                    // multipliers amplify past any fixed absolute tolerance.
                    let floor = 64.0 * f64::EPSILON * lam * linalg::norm(xi) * linalg::norm(a);
                    if gap.abs() > (tolerances::COMPLEMENTARITY * scale).max(floor) {
                        return Err(format!("complementary slackness off by {gap} at {i}"));
                    }
                    for (r, ak) in recon.iter_mut().zip(a) {
                        *r += lam * ak;
                    }
                }
                let err = linalg::dist_sq(&recon, xi).sqrt();
                if err > tolerances::COMPLEMENTARITY * scale {
                    return Err(format!("ξ differs from Σ λ_i a_i by {err}"));
                }
                Ok(())
            }
            SelectionOutcome::Infeasible { certificate: None } => Ok(()),
            SelectionOutcome::Infeasible { certificate: Some(lam) } => {
                if lam.iter().any(|&l| l < 0.0) {
                    return Err("negative certificate entry".into());
                }
                let mut comb = vec![0.0; c.dim()];
                let mut rhs = 0.0;
                let mut mass = 0.0;
                for ((&l, a), b) in lam.iter().zip(c.directions()).zip(c.offsets()) {
                    for (r, ak) in comb.iter_mut().zip(a) {
                        *r += l * ak;
                    }
                    rhs += l * b;
                    mass += l;
                }
                let resid = linalg::norm(&comb);
                if resid > 1e-9 * scale * mass.max(1.0) {
                    return Err(format!("Σ λ_i a_i has norm {resid}"));
                }
                if rhs <= 0.0 {
                    return Err(format!("Σ λ_i b_i = {rhs} is not positive"));
                }
                Ok(())
            }
        }
    }
}

/// Result of [`relaxed_select`]: the unique minimizer of `‖ξ‖² + (2/η) s`
/// subject to `⟨ξ, a_i⟩ ≥ b_i − s`, `s ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxedOutcome {
    pub xi: Vec<f64>,
    pub slack: f64,
}

impl RelaxedOutcome {
    pub fn objective(&self, eta: f64) -> f64 {
        linalg::norm_sq(&self.xi) + 2.0 * self.slack / eta
    }
}

/// Potential-game constraints at `x`: `a_i = x − z_i`, `b_i = V(x) − V(z_i)`.
pub fn build_potential_constraints(
    x: &Point,
    grid: &GridSet,
    v_at_x: f64,
    v_at_grid: &[f64],
) -> Result<ConstraintSet, SelectionError> {
    if x.dim() != grid.dim() {
        return Err(SelectionError::DimensionMismatch { expected: grid.dim(), found: x.dim() });
    }
    if v_at_grid.len() != grid.len() {
        return Err(SelectionError::LengthMismatch {
            directions: grid.len(),
            offsets: v_at_grid.len(),
        });
    }
    let directions = grid.points().iter().map(|z| linalg::sub(x.coords(), z.coords())).collect();
    let offsets = v_at_grid.iter().map(|vz| v_at_x - vz).collect();
    ConstraintSet::new(x.dim(), directions, offsets)
}

/// Pairwise kernel values `W(x_j − x_k)`, `W(z_i − z_k)` and `W(x_j − z_i)`
/// over the decision points and grid of one round, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelValues {
    pub m: usize,
    pub n: usize,
    pub point_point: Vec<f64>,
    pub grid_grid: Vec<f64>,
    pub point_grid: Vec<f64>,
}

impl KernelValues {
    pub fn check(&self) -> Result<(), SelectionError> {
        let (m, n) = (self.m, self.n);
        if self.point_point.len() != m * m {
            return Err(SelectionError::MissingKernelValue(format!(
                "{} point-point values for m = {m}",
                self.point_point.len()
            )));
        }
        if self.grid_grid.len() != n * n {
            return Err(SelectionError::MissingKernelValue(format!(
                "{} grid-grid values for n = {n}",
                self.grid_grid.len()
            )));
        }
        if self.point_grid.len() != m * n {
            return Err(SelectionError::MissingKernelValue(format!(
                "{} point-grid values for m = {m}, n = {n}",
                self.point_grid.len()
            )));
        }
        Ok(())
    }

    pub fn pp(&self, j: usize, k: usize) -> f64 {
        self.point_point[j * self.m + k]
    }

    pub fn gg(&self, i: usize, k: usize) -> f64 {
        self.grid_grid[i * self.n + k]
    }
}

/// Interaction-game constraints for decision point `j`:
/// `a_i = x_j − z_i`, `b_i = (1/m) Σ_k W(x_j − x_k) − min_{k} W(z_i − z_k)`.
/// The minimum ranges over every grid index, including `k = i`.
pub fn build_interaction_constraints(
    j: usize,
    points: &[Point],
    grid: &GridSet,
    kernel: &KernelValues,
) -> Result<ConstraintSet, SelectionError> {
    let m = points.len();
    let n = grid.len();
    if kernel.m != m || kernel.n != n {
        return Err(SelectionError::MissingKernelValue(format!(
            "kernel table is {}x{} but the round has m = {m}, n = {n}",
            kernel.m, kernel.n
        )));
    }
    kernel.check()?;
    let x = &points[j];
    if x.dim() != grid.dim() {
        return Err(SelectionError::DimensionMismatch { expected: grid.dim(), found: x.dim() });
    }
    let self_energy = (0..m).map(|k| kernel.pp(j, k)).sum::<f64>() / m as f64;
    let directions = grid.points().iter().map(|z| linalg::sub(x.coords(), z.coords())).collect();
    let offsets = (0..n)
        .map(|i| {
            let min_w = (0..n).map(|k| kernel.gg(i, k)).fold(f64::INFINITY, f64::min);
            self_energy - min_w
        })
        .collect();
    ConstraintSet::new(x.dim(), directions, offsets)
}

/// Minimum-norm point of `{ξ : ⟨ξ, a_i⟩ ≥ b_i}` or an infeasibility certificate.
pub fn min_norm_select(c: &ConstraintSet) -> SelectionOutcome {
    dual_active_set::solve(c, 0.0).outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w_shape(a: f64, x: f64) -> f64 {
        if x < 0.0 {
            a * (x + 1.0) * (x + 1.0)
        } else {
            a * (x - 1.0) * (x - 1.0)
        }
    }

    fn w_constraints(x: f64) -> ConstraintSet {
        let grid = GridSet::new(vec![Point::from(-1.0), Point::from(1.0)]).unwrap();
        let vz = [w_shape(1.0, -1.0), w_shape(1.0, 1.0)];
        build_potential_constraints(&Point::from(x), &grid, w_shape(1.0, x), &vz).unwrap()
    }

    #[test]
    fn potential_constraints_on_w_shape() {
        let c = w_constraints(1.25);
        assert_eq!(c.directions(), &[vec![2.25], vec![0.25]]);
        assert_eq!(c.offsets(), &[0.0625, 0.0625]);
    }

    #[test]
    fn coincident_grid_point_gives_zero_row() {
        let grid = GridSet::new(vec![Point::from([0.5, 0.5]), Point::from([1.0, 0.0])]).unwrap();
        let c = build_potential_constraints(&Point::from([0.5, 0.5]), &grid, 3.0, &[3.0, 1.0]).unwrap();
        assert_eq!(c.directions()[0], vec![0.0, 0.0]);
        assert_eq!(c.offsets()[0], 0.0);
    }

    #[test]
    fn potential_constraints_in_two_dimensions() {
        let grid = GridSet::new(vec![Point::from([1.0, 0.0])]).unwrap();
        let c = build_potential_constraints(&Point::from([0.0, 0.0]), &grid, 2.0, &[1.0]).unwrap();
        assert_eq!(c.directions(), &[vec![-1.0, 0.0]]);
        assert_eq!(c.offsets(), &[1.0]);
        let err = build_potential_constraints(&Point::from(0.0), &grid, 2.0, &[1.0]);
        assert!(matches!(err, Err(SelectionError::DimensionMismatch { .. })));
    }

    fn quad_kernel(points: &[Point], grid: &GridSet) -> KernelValues {
        let w = |a: &Point, b: &Point| a.dist_sq(b);
        let m = points.len();
        let n = grid.len();
        let g = grid.points();
        KernelValues {
            m,
            n,
            point_point: (0..m * m).map(|q| w(&points[q / m], &points[q % m])).collect(),
            grid_grid: (0..n * n).map(|q| w(&g[q / n], &g[q % n])).collect(),
            point_grid: (0..m * n).map(|q| w(&points[q / n], &g[q % n])).collect(),
        }
    }

    #[test]
    fn interaction_constraints() {
        let pts = vec![Point::from(0.0), Point::from(2.0)];
        let grid = GridSet::new(vec![Point::from(0.0)]).unwrap();
        let c = build_interaction_constraints(0, &pts, &grid, &quad_kernel(&pts, &grid)).unwrap();
        assert_eq!(c.offsets(), &[2.0]);
        assert_eq!(c.directions(), &[vec![0.0]]);
        assert!(!min_norm_select(&c).is_feasible());

        // Self-pairs take part in the grid minimum.
        let grid = GridSet::new(vec![Point::from(0.0), Point::from(2.0)]).unwrap();
        let pts = vec![Point::from(0.0)];
        let c = build_interaction_constraints(0, &pts, &grid, &quad_kernel(&pts, &grid)).unwrap();
        assert_eq!(c.offsets(), &[0.0, 0.0]);

        // W ≡ 0 with a single point on the grid.
        let zero = KernelValues { m: 1, n: 2, point_point: vec![0.0], grid_grid: vec![0.0; 4], point_grid: vec![0.0; 2] };
        let c = build_interaction_constraints(0, &pts, &grid, &zero).unwrap();
        assert_eq!(c.offsets(), &[0.0, 0.0]);

        let short = KernelValues { m: 1, n: 2, point_point: vec![0.0], grid_grid: vec![0.0; 3], point_grid: vec![0.0; 2] };
        assert!(matches!(
            build_interaction_constraints(0, &pts, &grid, &short),
            Err(SelectionError::MissingKernelValue(_))
        ));
    }

    #[test]
    fn nonpositive_offsets_select_the_origin() {
        let c = ConstraintSet::new(2, vec![vec![1.0, 0.0], vec![0.3, -2.0]], vec![-1.0, 0.0]).unwrap();
        let out = min_norm_select(&c);
        assert_eq!(out.xi().unwrap(), &[0.0, 0.0]);
        out.certify(&c).unwrap();
    }

    #[test]
    fn w_shape_feasible_point_binds_the_near_grid_point() {
        let c = w_constraints(1.25);
        let out = min_norm_select(&c);
        let xi = out.xi().expect("x = 1.25 is feasible");
        assert!((xi[0] - 0.25).abs() < 1e-12, "{xi:?}");
        out.certify(&c).unwrap();
        if let SelectionOutcome::Feasible { multipliers, .. } = &out {
            assert_eq!(multipliers[0], 0.0);
            assert!(multipliers[1] > 0.0);
        }
    }

    #[test]
    fn w_shape_barrier_is_infeasible_with_certificate() {
        let c = w_constraints(0.0);
        let out = min_norm_select(&c);
        assert!(matches!(out, SelectionOutcome::Infeasible { certificate: Some(_) }));
        out.certify(&c).unwrap();
    }

    #[test]
    fn zero_direction_with_positive_offset_is_infeasible() {
        let c = ConstraintSet::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.2]).unwrap();
        let out = min_norm_select(&c);
        assert_eq!(out, SelectionOutcome::Infeasible { certificate: Some(vec![1.0, 0.0]) });
        out.certify(&c).unwrap();
    }

    #[test]
    fn duplicated_rows_are_merged() {
        let c = ConstraintSet::new(
            2,
            vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![1.0, 2.0, 0.5],
        )
        .unwrap();
        let out = min_norm_select(&c);
        let xi = out.xi().unwrap();
        assert!((xi[0] - 1.0).abs() < 1e-12 && (xi[1] - 1.0).abs() < 1e-12);
        out.certify(&c).unwrap();
    }

    #[test]
    fn constraint_set_rejects_bad_input() {
        assert!(matches!(
            ConstraintSet::new(1, vec![vec![f64::NAN]], vec![0.0]),
            Err(SelectionError::NonFinite(0))
        ));
        assert!(matches!(
            ConstraintSet::new(1, vec![vec![1.0]], vec![]),
            Err(SelectionError::LengthMismatch { .. })
        ));
        let c = ConstraintSet::new(1, vec![vec![1.0]], vec![2.0]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(v["offsets"][0], 2.0);
    }
}
