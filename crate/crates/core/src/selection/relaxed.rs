//! Slack relaxation `min ‖ξ‖² + (2/η) s  s.t.  ⟨ξ, a_i⟩ ≥ b_i − s, s ≥ 0`.
//!
//! For a fixed slack `s` the best `ξ` is the min-norm point of the shifted
//! polyhedron, so the problem reduces to minimizing the convex function
//! `f(s) = g(s) + 2s/η` where `g(s)` is the squared min-norm value. Its right
//! derivative is `2/η − 2 Σ u_i(s)` with `u` the multipliers of `½‖ξ‖²`, and on
//! each piece with a fixed active set `A` the multipliers are affine in `s`:
//!
//! ```text
//!     u(s) = G⁻¹ (b_A − s·1),   G = N_Aᵀ N_A
//! ```
//!
//! so the stationary slack `Σ u(s) = 1/η` of a piece has a closed form. The
//! search brackets the optimum between `0` and `max_i [b_i]_+` (where `ξ = 0`
//! is feasible), probes with the closed-form candidate of the current piece,
//! and returns the first candidate that satisfies the full KKT system.

use nalgebra::{DMatrix, DVector};

use super::dual_active_set::{self, Solved};
use super::{ConstraintSet, RelaxedOutcome, SelectionError, SelectionOutcome};
use crate::linalg;
use crate::tolerances;

pub fn relaxed_select(c: &ConstraintSet, eta: f64) -> Result<RelaxedOutcome, SelectionError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(SelectionError::InvalidStepsize(eta));
    }
    let d = c.dim();
    let s_hi = c.max_positive_offset();
    if s_hi == 0.0 {
        return Ok(RelaxedOutcome { xi: vec![0.0; d], slack: 0.0 });
    }
    let target = 1.0 / eta;
    let sum_tol = 1e-12 * (1.0 + target);

    let base = dual_active_set::solve(c, 0.0);
    if let SelectionOutcome::Feasible { xi, .. } = &base.outcome {
        if base.multipliers.iter().sum::<f64>() <= target + sum_tol {
            return Ok(RelaxedOutcome { xi: xi.clone(), slack: 0.0 });
        }
    }

    let (mut lo, mut hi) = (0.0_f64, s_hi);
    let mut hi_xi = vec![0.0; d];
    let mut probe = match certificate_bound(c, &base) {
        // Only slacks at or above `s_hi` are feasible, and there ξ = 0.
        Some(bound) if bound >= hi => return Ok(RelaxedOutcome { xi: hi_xi, slack: hi }),
        Some(bound) => {
            lo = bound;
            (bound, None)
        }
        None => next_probe(c, &base, target, lo, hi),
    };
    for _ in 0..200 {
        if let Some(out) = probe.1.take() {
            return Ok(out);
        }
        let s = probe.0;
        let sol = dual_active_set::solve(c, s);
        let mut jump = None;
        match &sol.outcome {
            SelectionOutcome::Feasible { xi, .. } => {
                if sol.multipliers.iter().sum::<f64>() > target + sum_tol {
                    lo = s;
                } else {
                    hi = s;
                    hi_xi = xi.clone();
                }
            }
            SelectionOutcome::Infeasible { .. } => {
                lo = lo.max(s);
                // A certificate pins the boundary of the feasible slacks from
                // below; probing it exactly avoids stopping a tolerance short.
                if let Some(bound) = certificate_bound(c, &sol) {
                    if bound >= hi {
                        lo = hi;
                    } else if bound > lo {
                        lo = bound;
                        jump = Some(bound);
                    }
                }
            }
        }
        if hi - lo <= 1e-15 * (1.0 + s_hi) {
            break;
        }
        probe = match jump {
            Some(bound) => (bound, None),
            None => next_probe(c, &sol, target, lo, hi),
        };
    }
    // The optimum sits on the feasibility boundary of the slack, where the
    // multipliers are unbounded; the bracket has collapsed onto it.
    if hi > lo {
        let sol = dual_active_set::solve(c, lo);
        if let SelectionOutcome::Feasible { xi, .. } = sol.outcome {
            return Ok(RelaxedOutcome { xi, slack: lo });
        }
    }
    Ok(RelaxedOutcome { xi: hi_xi, slack: hi })
}

/// Lower bound `Σ λ_i b_i / Σ λ_i` on every feasible slack, from a Farkas
/// certificate `λ ≥ 0, Σ λ_i a_i = 0`.
fn certificate_bound(c: &ConstraintSet, sol: &Solved) -> Option<f64> {
    let SelectionOutcome::Infeasible { certificate: Some(lam) } = &sol.outcome else {
        return None;
    };
    let total: f64 = lam.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let weighted: f64 = lam.iter().zip(c.offsets()).map(|(l, b)| l * b).sum();
    Some(weighted / total)
}

/// Next slack to try, or a finished outcome if the current piece's candidate
/// satisfies the KKT system.
fn next_probe(
    c: &ConstraintSet,
    sol: &Solved,
    target: f64,
    lo: f64,
    hi: f64,
) -> (f64, Option<RelaxedOutcome>) {
    let mid = 0.5 * (lo + hi);
    if !sol.outcome.is_feasible() || sol.active.is_empty() {
        return (mid, None);
    }
    let Some((s, xi)) = piece_candidate(c, &sol.active, target) else {
        return (mid, None);
    };
    if s >= 0.0 && kkt_holds(c, &xi, s, &sol.active) {
        return (s, Some(RelaxedOutcome { xi, slack: s }));
    }
    if s > lo && s < hi {
        (s, None)
    } else {
        (mid, None)
    }
}

/// Closed-form stationary slack of the piece with active set `active`.
fn piece_candidate(c: &ConstraintSet, active: &[usize], target: f64) -> Option<(f64, Vec<f64>)> {
    let d = c.dim();
    let k = active.len();
    let dirs = c.directions();
    let basis = DMatrix::from_fn(d, k, |row, col| dirs[active[col]][row]);
    let chol = (basis.transpose() * &basis).cholesky()?;
    let b = DVector::from_iterator(k, active.iter().map(|&i| c.offsets()[i]));
    let w_b = chol.solve(&b);
    let w_1 = chol.solve(&DVector::from_element(k, 1.0));
    let denom = w_1.sum();
    if !(denom > 0.0) {
        return None;
    }
    let s = (w_b.sum() - target) / denom;
    let u = w_b - w_1 * s;
    if u.iter().any(|&x| x < -1e-12 * (1.0 + x.abs()) * (1.0 + target)) {
        return None;
    }
    let xi = &basis * u.map(|x| x.max(0.0));
    Some((s, xi.iter().copied().collect()))
}

/// Primal feasibility and tightness of the active rows. Stationarity and
/// `u ≥ 0` hold by construction of the candidate.
fn kkt_holds(c: &ConstraintSet, xi: &[f64], s: f64, active: &[usize]) -> bool {
    let tol = 0.01 * tolerances::FEASIBILITY * c.scale();
    if c.max_violation(xi, s) > tol {
        return false;
    }
    active.iter().all(|&i| (linalg::dot(xi, &c.directions()[i]) - (c.offsets()[i] - s)).abs() <= tol)
}
