//! Adversary scenarios and the zeroth-order information model.
//!
//! Algorithms only ever see an [`OracleView`]: the round's potential on the
//! decision points and the grid, or for interaction games the kernel on
//! pairwise differences within `{x_j} ∪ Z`. [`eval_potential`] evaluates a
//! potential anywhere and exists for the harness and for tests; every call is
//! counted so tests can assert that no round ever reaches for it.

mod kernel;
mod sup_bound;

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{DomainSpec, PlayerState};
use crate::linalg;
use crate::measures::{GridSet, Point};
use crate::selection::KernelValues;

pub use kernel::Kernel;
pub use sup_bound::sup_abs_bound;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvironmentError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("unknown kernel {0:?}")]
    UnknownKernel(String),
    #[error("region must be bounded for this scenario")]
    UnboundedRegion,
    #[error("no closed-form bound for {0}")]
    Unsupported(String),
    #[error("dimension mismatch: scenario has d = {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Potential families. Rounds are 1-based and every center moves linearly:
/// `u_t = u_1 + (t − 1)·drift`, so `u_1` is the center of the first round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialScenario {
    /// `V_t(x) = ‖x − u_t‖²`.
    MovingQuadratic { u1: Point, drift: Point },
    /// `V_t(x) = min(‖x − u_t‖², ‖x − v_t‖²)`.
    MinOfQuadratics { u1: Point, u_drift: Point, v1: Point, v_drift: Point },
    /// One-dimensional `V_t(x) = a_t (x + 1)²` for `x < 0`, `a_t (x − 1)²` for
    /// `x ≥ 0`. Round `t` uses `a[t − 1]`; the last entry repeats past the end.
    /// `epsilon` is the declared lower bound `a_t ≥ ε > 0`.
    WShape { a: Vec<f64>, epsilon: f64 },
}

fn center(p1: &Point, drift: &Point, t: usize) -> Vec<f64> {
    linalg::axpy(p1.coords(), (t as f64) - 1.0, drift.coords())
}

impl PotentialScenario {
    pub fn validate(&self) -> Result<(), EnvironmentError> {
        let bad = |msg: String| Err(EnvironmentError::InvalidScenario(msg));
        match self {
            PotentialScenario::MovingQuadratic { u1, drift } => {
                if u1.dim() == 0 || u1.dim() != drift.dim() {
                    return bad("u1 and drift must share a positive dimension".into());
                }
                if !u1.is_finite() || !drift.is_finite() {
                    return bad("non-finite center".into());
                }
            }
            PotentialScenario::MinOfQuadratics { u1, u_drift, v1, v_drift } => {
                let d = u1.dim();
                if d == 0 || [u_drift, v1, v_drift].iter().any(|p| p.dim() != d) {
                    return bad("centers and drifts must share a positive dimension".into());
                }
                if [u1, u_drift, v1, v_drift].iter().any(|p| !p.is_finite()) {
                    return bad("non-finite center".into());
                }
            }
            PotentialScenario::WShape { a, epsilon } => {
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return bad(format!("epsilon must be positive, got {epsilon}"));
                }
                if a.is_empty() {
                    return bad("empty amplitude schedule".into());
                }
                if let Some(t) = a.iter().position(|&at| !(at >= *epsilon && at.is_finite())) {
                    return bad(format!("a[{t}] = {} is below epsilon = {epsilon}", a[t]));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            PotentialScenario::MovingQuadratic { u1, .. } => u1.dim(),
            PotentialScenario::MinOfQuadratics { u1, .. } => u1.dim(),
            PotentialScenario::WShape { .. } => 1,
        }
    }

    /// Amplitude `a_t` of the w-shape scenario.
    pub fn amplitude(&self, t: usize) -> Option<f64> {
        match self {
            PotentialScenario::WShape { a, .. } => Some(a[(t.max(1) - 1).min(a.len() - 1)]),
            _ => None,
        }
    }

    /// The minimizers of round `t`: `u_t` (and `v_t`), or `±1` for the w-shape.
    pub fn centers(&self, t: usize) -> Vec<Vec<f64>> {
        match self {
            PotentialScenario::MovingQuadratic { u1, drift } => vec![center(u1, drift, t)],
            PotentialScenario::MinOfQuadratics { u1, u_drift, v1, v_drift } => {
                vec![center(u1, u_drift, t), center(v1, v_drift, t)]
            }
            PotentialScenario::WShape { .. } => vec![vec![-1.0], vec![1.0]],
        }
    }

    fn value(&self, t: usize, x: &[f64]) -> f64 {
        match self {
            PotentialScenario::MovingQuadratic { u1, drift } => {
                linalg::dist_sq(x, &center(u1, drift, t))
            }
            PotentialScenario::MinOfQuadratics { u1, u_drift, v1, v_drift } => {
                let a = linalg::dist_sq(x, &center(u1, u_drift, t));
                let b = linalg::dist_sq(x, &center(v1, v_drift, t));
                a.min(b)
            }
            PotentialScenario::WShape { .. } => {
                let a = self.amplitude(t).expect("w-shape has an amplitude");
                let x = x[0];
                if x < 0.0 {
                    a * (x + 1.0) * (x + 1.0)
                } else {
                    a * (x - 1.0) * (x - 1.0)
                }
            }
        }
    }
}

/// Interaction game with loss `(1/m²) Σ_{j,k} W(x_j − x_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionScenario {
    pub kernel: Kernel,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "kebab-case")]
pub enum Scenario {
    Potential(PotentialScenario),
    Interaction(InteractionScenario),
}

impl Scenario {
    pub fn validate(&self) -> Result<(), EnvironmentError> {
        match self {
            Scenario::Potential(p) => p.validate(),
            Scenario::Interaction(i) => {
                if i.dim == 0 {
                    return Err(EnvironmentError::InvalidScenario("dimension must be positive".into()));
                }
                i.kernel.resolve().map(|_| ())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Scenario::Potential(p) => p.dim(),
            Scenario::Interaction(i) => i.dim,
        }
    }

    pub fn is_interaction(&self) -> bool {
        matches!(self, Scenario::Interaction(_))
    }
}

/// What the player observes at round `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleView {
    pub round: usize,
    /// `V_t(x_j^t)` for potential games; empty for interaction games.
    pub values_at_decision_points: Vec<f64>,
    /// `V_t(z_i)` for potential games; empty for interaction games.
    pub values_at_grid: Vec<f64>,
    /// Kernel on all pairwise differences within `{x_j} ∪ Z`.
    pub kernel: Option<KernelValues>,
}

thread_local! {
    static EVALUATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of [`eval_potential`] calls made on this thread so far.
pub fn evaluation_count() -> u64 {
    EVALUATIONS.with(Cell::get)
}

/// `V_t(x)` anywhere. Not part of the information model; see the module docs.
pub fn eval_potential(scenario: &PotentialScenario, t: usize, x: &Point) -> f64 {
    EVALUATIONS.with(|c| c.set(c.get() + 1));
    scenario.value(t, x.coords())
}

/// Reveals round `t` on the decision points of `state` and on `grid`.
pub fn reveal(
    scenario: &Scenario,
    t: usize,
    state: &PlayerState,
    grid: &GridSet,
) -> Result<OracleView, EnvironmentError> {
    let d = scenario.dim();
    for found in [state.dim(), grid.dim()] {
        if found != d {
            return Err(EnvironmentError::DimensionMismatch { expected: d, found });
        }
    }
    match scenario {
        Scenario::Potential(p) => Ok(OracleView {
            round: t,
            values_at_decision_points: state
                .decision_points
                .iter()
                .map(|x| eval_potential(p, t, x))
                .collect(),
            values_at_grid: grid.points().iter().map(|z| eval_potential(p, t, z)).collect(),
            kernel: None,
        }),
        Scenario::Interaction(i) => {
            let w = i.kernel.resolve()?;
            let xs = &state.decision_points;
            let zs = grid.points();
            let table = |a: &[Point], b: &[Point]| -> Vec<f64> {
                a.iter()
                    .flat_map(|p| b.iter().map(move |q| (p, q)))
                    .map(|(p, q)| w(&linalg::sub(p.coords(), q.coords())))
                    .collect()
            };
            Ok(OracleView {
                round: t,
                values_at_decision_points: Vec::new(),
                values_at_grid: Vec::new(),
                kernel: Some(KernelValues {
                    m: xs.len(),
                    n: zs.len(),
                    point_point: table(xs, xs),
                    grid_grid: table(zs, zs),
                    point_grid: table(xs, zs),
                }),
            })
        }
    }
}

/// `Box[−2, 2]^d`: where `B` is evaluated when the play domain is unbounded.
pub fn default_bound_region(d: usize) -> DomainSpec {
    DomainSpec::Box { lo: Point::from_raw(vec![-2.0; d]), hi: Point::from_raw(vec![2.0; d]) }
}
