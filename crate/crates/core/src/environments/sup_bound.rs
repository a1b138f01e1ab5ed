//! `B = max_{t ≤ T} sup_{x ∈ Ω} |V_t(x)|` in closed form.
//!
//! All built-in potentials are nonnegative, so `|V_t| = V_t`. A quadratic
//! attains its supremum over a ball on the far side of the sphere and over a
//! box at the farthest corner. For `min(‖x − u‖², ‖x − v‖²)` the bisector of
//! `u` and `v` splits the region into two convex pieces, on each of which the
//! potential is one convex quadratic; the supremum over a piece is attained at
//! an extreme point of that piece. For a box these are the box corners plus the
//! points where the bisector crosses box edges; for a ball they are sphere
//! points, and the best one is either the antipode of the center or lies on
//! the sphere ∩ bisector.

use super::{EnvironmentError, InteractionScenario, PotentialScenario, Scenario};
use crate::algorithms::DomainSpec;
use crate::linalg;

pub fn sup_abs_bound(
    scenario: &Scenario,
    horizon: usize,
    region: &DomainSpec,
) -> Result<f64, EnvironmentError> {
    if !region.is_bounded() {
        return Err(EnvironmentError::UnboundedRegion);
    }
    region.validate().map_err(EnvironmentError::InvalidScenario)?;
    let d = scenario.dim();
    let rd = region.dim().expect("bounded region has a dimension");
    if rd != d {
        return Err(EnvironmentError::DimensionMismatch { expected: d, found: rd });
    }
    // A one-dimensional ball is an interval; the box formulas cover it.
    let region = match region {
        DomainSpec::Ball { center, radius } if d == 1 => DomainSpec::Box {
            lo: (center[0] - radius).into(),
            hi: (center[0] + radius).into(),
        },
        r => r.clone(),
    };
    match scenario {
        Scenario::Potential(p) => {
            let mut best: f64 = 0.0;
            for t in 1..=horizon.max(1) {
                best = best.max(potential_sup(p, t, &region));
            }
            Ok(best)
        }
        Scenario::Interaction(i) => interaction_sup(i, &region),
    }
}

fn potential_sup(p: &PotentialScenario, t: usize, region: &DomainSpec) -> f64 {
    let centers = p.centers(t);
    let amp = p.amplitude(t).unwrap_or(1.0);
    match centers.as_slice() {
        [u] => quadratic_sup(u, region),
        [u, v] => amp * min_quadratic_sup(u, v, region),
        _ => unreachable!("scenarios have one or two centers"),
    }
}

fn quadratic_sup(u: &[f64], region: &DomainSpec) -> f64 {
    match region {
        DomainSpec::Ball { center, radius } => {
            let r = linalg::dist_sq(u, center.coords()).sqrt() + radius;
            r * r
        }
        DomainSpec::Box { lo, hi } => u
            .iter()
            .zip(lo.coords().iter().zip(hi.coords()))
            .map(|(c, (l, h))| (c - l).powi(2).max((c - h).powi(2)))
            .sum(),
        DomainSpec::WholeSpace => f64::INFINITY,
    }
}

fn min_quadratic_sup(u: &[f64], v: &[f64], region: &DomainSpec) -> f64 {
    let f = |x: &[f64]| linalg::dist_sq(x, u).min(linalg::dist_sq(x, v));
    if linalg::dist_sq(u, v) == 0.0 {
        return quadratic_sup(u, region);
    }
    // Bisector {x : ⟨x, w⟩ = c} with w = v − u; u's side is ⟨x, w⟩ ≤ c.
    let w = linalg::sub(v, u);
    let c = 0.5 * (linalg::norm_sq(v) - linalg::norm_sq(u));
    match region {
        DomainSpec::Box { lo, hi } => {
            let d = u.len();
            let (lo, hi) = (lo.coords(), hi.coords());
            let mut best: f64 = 0.0;
            for mask in 0u64..(1 << d) {
                let corner: Vec<f64> =
                    (0..d).map(|k| if mask & (1 << k) != 0 { hi[k] } else { lo[k] }).collect();
                best = best.max(f(&corner));
                // Edges from this corner along each axis where it sits at lo.
                for k in 0..d {
                    if mask & (1 << k) != 0 || w[k] == 0.0 {
                        continue;
                    }
                    let rest = linalg::dot(&corner, &w) - corner[k] * w[k];
                    let xk = (c - rest) / w[k];
                    if xk >= lo[k] && xk <= hi[k] {
                        let mut p = corner.clone();
                        p[k] = xk;
                        best = best.max(f(&p));
                    }
                }
            }
            best
        }
        DomainSpec::Ball { center, radius } => {
            let ctr = center.coords();
            let r = *radius;
            let mut best: f64 = 0.0;
            for (a, side) in [(u, -1.0), (v, 1.0)] {
                // Farthest sphere point from `a` is the antipode of `a`'s direction.
                let dir = linalg::sub(ctr, a);
                let len = linalg::norm(&dir);
                let antipode = if len > 0.0 {
                    linalg::axpy(ctr, r / len, &dir)
                } else {
                    let mut e = ctr.to_vec();
                    e[0] += r;
                    e
                };
                if side * (linalg::dot(&antipode, &w) - c) >= 0.0 {
                    best = best.max(linalg::dist_sq(&antipode, a));
                } else if let Some(val) = farthest_on_cut_sphere(a, ctr, r, &w, c) {
                    best = best.max(val);
                }
            }
            best
        }
        DomainSpec::WholeSpace => f64::INFINITY,
    }
}

/// `max ‖x − a‖²` over `{‖x − ctr‖ = r, ⟨x, w⟩ = c}`, or `None` when the
/// hyperplane misses the sphere.
fn farthest_on_cut_sphere(a: &[f64], ctr: &[f64], r: f64, w: &[f64], c: f64) -> Option<f64> {
    let wn2 = linalg::norm_sq(w);
    let offset = (c - linalg::dot(ctr, w)) / wn2;
    let p0 = linalg::axpy(ctr, offset, w);
    let rho_sq = r * r - offset * offset * wn2;
    if rho_sq < 0.0 {
        return None;
    }
    let rho = rho_sq.sqrt();
    // Component of a − p0 within the hyperplane.
    let diff = linalg::sub(a, &p0);
    let along = linalg::dot(&diff, w) / wn2;
    let inplane = linalg::axpy(&diff, -along, w);
    let norm_in = linalg::norm(&inplane);
    Some(rho_sq + linalg::norm_sq(&diff) + 2.0 * rho * norm_in)
}

fn interaction_sup(i: &InteractionScenario, region: &DomainSpec) -> Result<f64, EnvironmentError> {
    let diameter = match region {
        DomainSpec::Ball { radius, .. } => 2.0 * radius,
        DomainSpec::Box { lo, hi } => linalg::dist_sq(lo.coords(), hi.coords()).sqrt(),
        DomainSpec::WholeSpace => return Err(EnvironmentError::UnboundedRegion),
    };
    match i.kernel.name.as_str() {
        "zero" => Ok(0.0),
        "quadratic" => Ok(diameter * diameter),
        "norm" => Ok(diameter),
        other => Err(EnvironmentError::Unsupported(format!("kernel {other:?}"))),
    }
}
