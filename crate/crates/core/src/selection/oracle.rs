//! Brute-force reference for [`super::min_norm_select`].
//!
//! Every KKT point of the min-norm program is `ξ = N_S u` for some set `S` of
//! at most `d` linearly independent constraints that are tight at `ξ`, with
//! `u ≥ 0`. The oracle enumerates all such subsets, solves the equality system
//! `N_Sᵀ N_S u = b_S` by LU, and keeps the candidates that are nonnegative and
//! feasible for every constraint. No candidate means the polyhedron is empty.

use nalgebra::{DMatrix, DVector};

use super::{ConstraintSet, SelectionError, SelectionOutcome};
use crate::linalg;
use crate::tolerances;

pub const ORACLE_MAX_CONSTRAINTS: usize = 12;
pub const ORACLE_MAX_DIM: usize = 4;

pub fn oracle_min_norm(c: &ConstraintSet) -> Result<SelectionOutcome, SelectionError> {
    let (n, d) = (c.len(), c.dim());
    if n > ORACLE_MAX_CONSTRAINTS || d > ORACLE_MAX_DIM {
        return Err(SelectionError::BudgetExceeded { n, d });
    }
    let scale = c.scale();
    let tol = tolerances::FEASIBILITY * scale;

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut subset = Vec::with_capacity(d);
    for k in 0..=d.min(n) {
        for_each_subset(n, k, 0, &mut subset, &mut |s| {
            if let Some((xi, lam)) = candidate(c, s, tol) {
                let norm = linalg::norm_sq(&xi);
                if best.as_ref().is_none_or(|(b, _, _)| norm < *b) {
                    best = Some((norm, xi, lam));
                }
            }
        });
    }
    Ok(match best {
        Some((_, xi, multipliers)) => SelectionOutcome::Feasible { xi, multipliers },
        None => SelectionOutcome::Infeasible { certificate: None },
    })
}

fn for_each_subset(
    n: usize,
    k: usize,
    start: usize,
    current: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    if current.len() == k {
        f(current);
        return;
    }
    for i in start..n {
        current.push(i);
        for_each_subset(n, k, i + 1, current, f);
        current.pop();
    }
}

fn candidate(c: &ConstraintSet, s: &[usize], tol: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let d = c.dim();
    let k = s.len();
    let mut lam = vec![0.0; c.len()];
    let xi: Vec<f64> = if k == 0 {
        vec![0.0; d]
    } else {
        let dirs = c.directions();
        let basis = DMatrix::from_fn(d, k, |r, col| dirs[s[col]][r]);
        let gram = basis.transpose() * &basis;
        // Reject (near-)dependent subsets; an independent subset reaching the
        // same point always exists by Carathéodory.
        let diag = (0..k).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        let lu = gram.clone().full_piv_lu();
        let det = lu.determinant().abs();
        if diag == 0.0 || det <= 1e-12 * diag.powi(k as i32) {
            return None;
        }
        let rhs = DVector::from_iterator(k, s.iter().map(|&i| c.offsets()[i]));
        let u = lu.solve(&rhs)?;
        if u.iter().any(|&x| x < -1e-12 * (1.0 + x.abs())) {
            return None;
        }
        for (slot, &i) in s.iter().enumerate() {
            lam[i] = u[slot].max(0.0);
        }
        (&basis * u.map(|x| x.max(0.0))).iter().copied().collect()
    };
    if c.max_violation(&xi, 0.0) > tol {
        return None;
    }
    Some((xi, lam))
}
