//! Dual active-set iteration for `min ½‖ξ‖²  s.t.  ⟨ξ, a_i⟩ ≥ b_i − shift`.
//!
//! Starts from the unconstrained minimizer `ξ = 0` with an empty active set
//! and repeatedly adds the most violated constraint, keeping the multipliers
//! of the active constraints nonnegative and the active directions linearly
//! independent. Stationarity `ξ = Σ_active u_k a_k` holds throughout, so the
//! multipliers double as the KKT certificate. When a violated constraint lies
//! in the span of the active ones and no active multiplier can shrink, the
//! combination `a_p − Σ r_k a_k = 0` with `r ≤ 0` is a Farkas certificate.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{ConstraintSet, SelectionOutcome};
use crate::linalg;
use crate::tolerances;

pub(super) struct Solved {
    pub outcome: SelectionOutcome,
    /// Active constraint indices (into the caller's constraint set) and their
    /// multipliers. Empty when infeasible.
    pub active: Vec<usize>,
    pub multipliers: Vec<f64>,
}

fn infeasible(certificate: Option<Vec<f64>>) -> Solved {
    Solved {
        outcome: SelectionOutcome::Infeasible { certificate },
        active: Vec::new(),
        multipliers: Vec::new(),
    }
}

/// Solves the program with every offset lowered by `shift`.
pub(super) fn solve(c: &ConstraintSet, shift: f64) -> Solved {
    let d = c.dim();
    let n = c.len();
    let scale = c.scale();
    let feas_tol = tolerances::FEASIBILITY * scale;
    let stop_tol = tolerances::SOLVER_STOP * scale;
    let dirs = c.directions();
    let offsets: Vec<f64> = c.offsets().iter().map(|b| b - shift).collect();

    // Zero directions decide feasibility on their own; duplicate directions
    // keep only their largest offset.
    let mut rows: Vec<usize> = Vec::with_capacity(n);
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for i in 0..n {
        if linalg::norm_sq(&dirs[i]) == 0.0 {
            if offsets[i] > feas_tol {
                let mut cert = vec![0.0; n];
                cert[i] = 1.0;
                return infeasible(Some(cert));
            }
            continue;
        }
        let key: Vec<u64> = dirs[i].iter().map(|x| (x + 0.0).to_bits()).collect();
        match seen.get(&key) {
            Some(&slot) => {
                if offsets[i] > offsets[rows[slot]] {
                    rows[slot] = i;
                }
            }
            None => {
                seen.insert(key, rows.len());
                rows.push(i);
            }
        }
    }
    let norms: Vec<f64> = rows.iter().map(|&i| linalg::norm(&dirs[i])).collect();

    let mut xi = vec![0.0; d];
    // Positions into `rows`.
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let max_iter = 50 * (rows.len() + d) + 100;
    let mut iter = 0;

    loop {
        // Most violated constraint, measured by distance to its half-space.
        let mut p = None;
        let mut worst = 0.0;
        for (pos, &i) in rows.iter().enumerate() {
            if active.contains(&pos) {
                continue;
            }
            let viol = offsets[i] - linalg::dot(&xi, &dirs[i]);
            if viol > stop_tol && viol / norms[pos] > worst {
                worst = viol / norms[pos];
                p = Some(pos);
            }
        }
        let Some(p) = p else { break };
        let ap = &dirs[rows[p]];
        let mut up = 0.0;

        loop {
            iter += 1;
            if iter > max_iter {
                log_stall(c, shift);
                return infeasible(None);
            }
            let k = active.len();
            let (r, z) = if k == 0 {
                (Vec::new(), ap.clone())
            } else {
                let basis = DMatrix::from_fn(d, k, |row, col| dirs[rows[active[col]]][row]);
                let gram = basis.transpose() * &basis;
                let rhs = basis.transpose() * DVector::from_column_slice(ap);
                let Some(chol) = gram.cholesky() else {
                    log_stall(c, shift);
                    return infeasible(None);
                };
                let r = chol.solve(&rhs);
                let z = if k >= d {
                    vec![0.0; d]
                } else {
                    let proj = &basis * &r;
                    let z: Vec<f64> = ap.iter().zip(proj.iter()).map(|(a, q)| a - q).collect();
                    if linalg::norm(&z) <= 1e-10 * norms[p] {
                        vec![0.0; d]
                    } else {
                        z
                    }
                };
                (r.iter().copied().collect(), z)
            };
            let z_sq = linalg::norm_sq(&z);

            // Largest dual step keeping active multipliers nonnegative.
            let mut t_dual = f64::INFINITY;
            let mut blocking = usize::MAX;
            for (slot, &rk) in r.iter().enumerate() {
                if rk > 1e-14 {
                    let t = u[slot] / rk;
                    if t < t_dual {
                        t_dual = t;
                        blocking = slot;
                    }
                }
            }
            let viol = offsets[rows[p]] - linalg::dot(&xi, ap);
            let t_primal = if z_sq > 0.0 { viol / z_sq } else { f64::INFINITY };

            if t_primal.is_infinite() && t_dual.is_infinite() {
                let mut cert = vec![0.0; n];
                cert[rows[p]] = 1.0;
                for (slot, &pos) in active.iter().enumerate() {
                    cert[rows[pos]] = (-r[slot]).max(0.0);
                }
                return infeasible(Some(cert));
            }

            let t = t_primal.min(t_dual);
            for (slot, uk) in u.iter_mut().enumerate() {
                *uk = (*uk - t * r[slot]).max(0.0);
            }
            up += t;
            if z_sq > 0.0 {
                for (x, zk) in xi.iter_mut().zip(&z) {
                    *x += t * zk;
                }
            }
            if t_primal <= t_dual {
                active.push(p);
                u.push(up);
                break;
            }
            active.remove(blocking);
            u.remove(blocking);
        }
    }

    let (xi_out, u) = finalize(dirs, &offsets, &rows, &active, &u, d);
    let mut multipliers = vec![0.0; n];
    for (&pos, &uk) in active.iter().zip(&u) {
        multipliers[rows[pos]] = uk;
    }
    let active_idx = active.iter().map(|&pos| rows[pos]).collect();
    let active_u = u.clone();
    Solved {
        outcome: SelectionOutcome::Feasible { xi: xi_out, multipliers },
        active: active_idx,
        multipliers: active_u,
    }
}

/// Recomputes `ξ` and `u` on the final active set from a QR factorization
/// `N_A = Q R`: `ξ = Q R⁻ᵀ b_A` and `u = R⁻¹ R⁻ᵀ b_A`. Rebuilding `ξ` as
/// `Σ u_k a_k` cancels badly when the active directions are nearly dependent
/// and the multipliers are large, leaving the active rows visibly slack.
fn finalize(
    dirs: &[Vec<f64>],
    offsets: &[f64],
    rows: &[usize],
    active: &[usize],
    u: &[f64],
    d: usize,
) -> (Vec<f64>, Vec<f64>) {
    let k = active.len();
    let fallback = || {
        let mut xi = vec![0.0; d];
        for (&pos, &uk) in active.iter().zip(u) {
            for (x, a) in xi.iter_mut().zip(&dirs[rows[pos]]) {
                *x += uk * a;
            }
        }
        (xi, u.to_vec())
    };
    if k == 0 {
        return (vec![0.0; d], Vec::new());
    }
    let basis = DMatrix::from_fn(d, k, |row, col| dirs[rows[active[col]]][row]);
    let qr = basis.qr();
    let r = qr.r();
    let b = DVector::from_iterator(k, active.iter().map(|&pos| offsets[rows[pos]]));
    let Some(y) = r.transpose().solve_lower_triangular(&b) else { return fallback() };
    let Some(w) = r.solve_upper_triangular(&y) else { return fallback() };
    if w.iter().any(|x| !x.is_finite() || *x < -1e-9 * (1.0 + x.abs())) {
        return fallback();
    }
    let xi = qr.q() * y;
    (xi.iter().copied().collect(), w.iter().map(|x| x.max(0.0)).collect())
}

fn log_stall(c: &ConstraintSet, shift: f64) {
    log::warn!(
        "min-norm selection stalled (n = {}, d = {}, shift = {shift}); classifying as infeasible",
        c.len(),
        c.dim()
    );
}
