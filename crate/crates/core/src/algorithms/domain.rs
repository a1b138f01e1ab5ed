use serde::{Deserialize, Serialize};

use crate::measures::Point;

/// Closed convex domain `Ω` with a closed-form Euclidean projection.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainSpec {
    #[default]
    WholeSpace,
    Ball { center: Point, radius: f64 },
    Box { lo: Point, hi: Point },
}

impl DomainSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            DomainSpec::WholeSpace => Ok(()),
            DomainSpec::Ball { center, radius } => {
                if !center.is_finite() || center.dim() == 0 {
                    return Err("ball center must be a finite point".into());
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(format!("ball radius must be positive, got {radius}"));
                }
                Ok(())
            }
            DomainSpec::Box { lo, hi } => {
                if lo.dim() != hi.dim() || lo.dim() == 0 {
                    return Err("box corners must share a positive dimension".into());
                }
                if !lo.is_finite() || !hi.is_finite() {
                    return Err("box corners must be finite".into());
                }
                if lo.coords().iter().zip(hi.coords()).any(|(l, h)| l > h) {
                    return Err("box requires lo ≤ hi componentwise".into());
                }
                Ok(())
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, DomainSpec::WholeSpace)
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            DomainSpec::WholeSpace => None,
            DomainSpec::Ball { center, .. } => Some(center.dim()),
            DomainSpec::Box { lo, .. } => Some(lo.dim()),
        }
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        match self {
            DomainSpec::WholeSpace => true,
            DomainSpec::Ball { center, radius } => p.dist_sq(center).sqrt() <= radius + tol,
            DomainSpec::Box { lo, hi } => p
                .coords()
                .iter()
                .zip(lo.coords().iter().zip(hi.coords()))
                .all(|(x, (l, h))| *x >= l - tol && *x <= h + tol),
        }
    }
}

/// `P_Ω(p) = argmin_{ω ∈ Ω} ‖p − ω‖`.
pub fn project(p: &Point, domain: &DomainSpec) -> Point {
    match domain {
        DomainSpec::WholeSpace => p.clone(),
        DomainSpec::Ball { center, radius } => {
            let dist = p.dist_sq(center).sqrt();
            if dist <= *radius {
                return p.clone();
            }
            let s = radius / dist;
            Point::from_raw(
                center.coords().iter().zip(p.coords()).map(|(c, x)| c + s * (x - c)).collect(),
            )
        }
        DomainSpec::Box { lo, hi } => Point::from_raw(
            p.coords()
                .iter()
                .zip(lo.coords().iter().zip(hi.coords()))
                .map(|(x, (l, h))| x.clamp(*l, *h))
                .collect(),
        ),
    }
}
