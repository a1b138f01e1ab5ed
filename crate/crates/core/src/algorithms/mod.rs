//! One round of play for each update rule.
//!
//! Every round takes the current decision points and the zeroth-order view of
//! the round, solves one selection program per point, moves each point and
//! projects it back onto the domain. The rules differ only in how a point
//! with an infeasible program is treated:
//!
//! | rule                | infeasible point                                   |
//! |---------------------|----------------------------------------------------|
//! | minimal selection   | error ([`AlgorithmError::InfeasiblePoint`])        |
//! | MSoE                | Gaussian step scaled by `√(η max_i [V(x)−V(z_i)]_+ / d)` |
//! | relaxed             | never happens: the slack program is always feasible |
//! | interaction         | error                                              |

mod domain;
mod rng;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environments::OracleView;
use crate::linalg;
use crate::measures::{DiscreteMeasure, GridSet, MeasureError, Point};
use crate::selection::{
    self, build_interaction_constraints, build_potential_constraints, relaxed_select,
    SelectionError, SelectionOutcome,
};

pub use domain::{project, DomainSpec};
pub use rng::GaussianStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgorithmError {
    #[error("decision point {0} has an infeasible selection program")]
    InfeasiblePoint(usize),
    #[error("stepsize must be positive and finite, got {0}")]
    InvalidStepsize(f64),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid player state: {0}")]
    InvalidState(String),
    #[error("view does not match the round: {0}")]
    ViewMismatch(String),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    MinimalSelection,
    #[serde(rename = "msoe")]
    MSoE,
    Relaxed,
    Interaction,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::MinimalSelection => "minimal-selection",
            Variant::MSoE => "msoe",
            Variant::Relaxed => "relaxed",
            Variant::Interaction => "interaction",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub eta: f64,
    pub variant: Variant,
    pub domain: DomainSpec,
}

impl AlgorithmConfig {
    pub fn new(eta: f64, variant: Variant, domain: DomainSpec) -> Result<Self, AlgorithmError> {
        let cfg = AlgorithmConfig { eta, variant, domain };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AlgorithmError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(AlgorithmError::InvalidStepsize(self.eta));
        }
        self.domain.validate().map_err(AlgorithmError::InvalidDomain)
    }
}

/// Decision points `x_1^t … x_m^t` before round `t` is played.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub decision_points: Vec<Point>,
    pub round: usize,
}

impl PlayerState {
    /// State before the first round.
    pub fn new(decision_points: Vec<Point>) -> Result<Self, AlgorithmError> {
        let state = PlayerState { decision_points, round: 1 };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<(), AlgorithmError> {
        let Some(first) = self.decision_points.first() else {
            return Err(AlgorithmError::InvalidState("no decision points".into()));
        };
        let d = first.dim();
        if d == 0 {
            return Err(AlgorithmError::InvalidState("zero-dimensional points".into()));
        }
        for (j, p) in self.decision_points.iter().enumerate() {
            if p.dim() != d {
                return Err(AlgorithmError::InvalidState(format!(
                    "point {j} has dimension {} instead of {d}",
                    p.dim()
                )));
            }
            if !p.is_finite() {
                return Err(AlgorithmError::InvalidState(format!("point {j} is not finite")));
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.decision_points.len()
    }

    pub fn dim(&self) -> usize {
        self.decision_points[0].dim()
    }

    /// The uniform measure `(1/m) Σ δ_{x_j}`.
    pub fn measure(&self) -> Result<DiscreteMeasure, MeasureError> {
        DiscreteMeasure::uniform(self.decision_points.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PointAction {
    MinSel {
        xi: Vec<f64>,
    },
    /// `magnitude` is `max_i [V(x) − V(z_i)]_+`, so `scale = √(η·magnitude/d)`.
    Explore {
        gaussian: Vec<f64>,
        scale: f64,
        magnitude: f64,
    },
    Relax {
        xi: Vec<f64>,
        slack: f64,
    },
}

impl PointAction {
    /// `‖ξ‖²` for selection steps, 0 for exploration.
    pub fn xi_sq(&self) -> f64 {
        match self {
            PointAction::MinSel { xi } | PointAction::Relax { xi, .. } => linalg::norm_sq(xi),
            PointAction::Explore { .. } => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub round: usize,
    /// `S^t`: indices whose minimal-selection program is feasible, ascending.
    pub feasible_set: Vec<usize>,
    pub actions: Vec<PointAction>,
    pub pre_projection_points: Vec<Point>,
}

impl StepReport {
    pub fn m(&self) -> usize {
        self.actions.len()
    }

    pub fn infeasible_count(&self) -> usize {
        self.m() - self.feasible_set.len()
    }

    /// `(1/m) Σ_j ‖ξ_j‖²` over the points that took a selection step.
    pub fn sum_xi_sq_over_m(&self) -> f64 {
        self.actions.iter().map(PointAction::xi_sq).sum::<f64>() / self.m() as f64
    }

    pub fn slack_sum(&self) -> f64 {
        self.actions
            .iter()
            .map(|a| match a {
                PointAction::Relax { slack, .. } => *slack,
                _ => 0.0,
            })
            .sum()
    }

    /// `Σ_{j ∉ S^t} max_i [V(x_j) − V(z_i)]_+`.
    pub fn explore_magnitude_sum(&self) -> f64 {
        self.actions
            .iter()
            .map(|a| match a {
                PointAction::Explore { magnitude, .. } => *magnitude,
                _ => 0.0,
            })
            .sum()
    }

    pub fn explore_scale_max(&self) -> f64 {
        self.actions
            .iter()
            .map(|a| match a {
                PointAction::Explore { scale, .. } => *scale,
                _ => 0.0,
            })
            .fold(0.0, f64::max)
    }
}

/// `√(η · max_i [v_x − v_i]_+ / d)`.
pub fn exploration_scale(v_at_x: f64, v_at_grid: &[f64], eta: f64, d: usize) -> f64 {
    (eta * positive_gap(v_at_x, v_at_grid) / d as f64).sqrt()
}

fn positive_gap(v_at_x: f64, v_at_grid: &[f64]) -> f64 {
    v_at_grid.iter().map(|v| v_at_x - v).fold(0.0, f64::max)
}

fn check_inputs(
    state: &PlayerState,
    view: &OracleView,
    grid: &GridSet,
    cfg: &AlgorithmConfig,
    potential: bool,
) -> Result<(), AlgorithmError> {
    cfg.validate()?;
    state.validate()?;
    if view.round != state.round {
        return Err(AlgorithmError::ViewMismatch(format!(
            "view is for round {} but the state is at round {}",
            view.round, state.round
        )));
    }
    if grid.dim() != state.dim() {
        return Err(AlgorithmError::ViewMismatch(format!(
            "grid dimension {} differs from point dimension {}",
            grid.dim(),
            state.dim()
        )));
    }
    if potential
        && (view.values_at_decision_points.len() != state.m()
            || view.values_at_grid.len() != grid.len())
    {
        return Err(AlgorithmError::ViewMismatch(format!(
            "view has {} point values and {} grid values for m = {}, n = {}",
            view.values_at_decision_points.len(),
            view.values_at_grid.len(),
            state.m(),
            grid.len()
        )));
    }
    Ok(())
}

fn finish(
    state: &PlayerState,
    cfg: &AlgorithmConfig,
    feasible_set: Vec<usize>,
    actions: Vec<PointAction>,
    moved: Vec<Vec<f64>>,
) -> (PlayerState, StepReport) {
    let pre: Vec<Point> = moved.into_iter().map(Point::from_raw).collect();
    let next = pre.iter().map(|p| project(p, &cfg.domain)).collect();
    let report = StepReport {
        round: state.round,
        feasible_set,
        actions,
        pre_projection_points: pre,
    };
    (PlayerState { decision_points: next, round: state.round + 1 }, report)
}

/// `x_j^{t+1} = P(x_j^t − η ξ_j^t)` with `ξ_j^t` the min-norm selection.
pub fn minimal_selection_round(
    state: &PlayerState,
    view: &OracleView,
    grid: &GridSet,
    cfg: &AlgorithmConfig,
) -> Result<(PlayerState, StepReport), AlgorithmError> {
    check_inputs(state, view, grid, cfg, true)?;
    let mut actions = Vec::with_capacity(state.m());
    let mut moved = Vec::with_capacity(state.m());
    for (j, x) in state.decision_points.iter().enumerate() {
        let c = build_potential_constraints(
            x,
            grid,
            view.values_at_decision_points[j],
            &view.values_at_grid,
        )?;
        let SelectionOutcome::Feasible { xi, .. } = selection::min_norm_select(&c) else {
            return Err(AlgorithmError::InfeasiblePoint(j));
        };
        moved.push(linalg::axpy(x.coords(), -cfg.eta, &xi));
        actions.push(PointAction::MinSel { xi });
    }
    Ok(finish(state, cfg, (0..state.m()).collect(), actions, moved))
}

/// Minimal selection where feasible, Gaussian exploration elsewhere. The
/// normal vector of point `j` comes from substream `(t, j)` of `stream`.
pub fn msoe_round(
    state: &PlayerState,
    view: &OracleView,
    grid: &GridSet,
    cfg: &AlgorithmConfig,
    stream: &GaussianStream,
) -> Result<(PlayerState, StepReport), AlgorithmError> {
    check_inputs(state, view, grid, cfg, true)?;
    let d = state.dim();
    let mut feasible = Vec::new();
    let mut actions = Vec::with_capacity(state.m());
    let mut moved = Vec::with_capacity(state.m());
    for (j, x) in state.decision_points.iter().enumerate() {
        let v_x = view.values_at_decision_points[j];
        let c = build_potential_constraints(x, grid, v_x, &view.values_at_grid)?;
        match selection::min_norm_select(&c) {
            SelectionOutcome::Feasible { xi, .. } => {
                feasible.push(j);
                moved.push(linalg::axpy(x.coords(), -cfg.eta, &xi));
                actions.push(PointAction::MinSel { xi });
            }
            SelectionOutcome::Infeasible { .. } => {
                let magnitude = positive_gap(v_x, &view.values_at_grid);
                let scale = exploration_scale(v_x, &view.values_at_grid, cfg.eta, d);
                let gaussian = stream.normal_vector(state.round, j, d);
                moved.push(linalg::axpy(x.coords(), -scale, &gaussian));
                actions.push(PointAction::Explore { gaussian, scale, magnitude });
            }
        }
    }
    Ok(finish(state, cfg, feasible, actions, moved))
}

/// `x_j^{t+1} = P(x_j^t − η ξ_j^t)` with `(ξ_j^t, s_j^t)` from the slack program.
/// `S^t` still records which points have a feasible unrelaxed program.
pub fn relaxed_round(
    state: &PlayerState,
    view: &OracleView,
    grid: &GridSet,
    cfg: &AlgorithmConfig,
) -> Result<(PlayerState, StepReport), AlgorithmError> {
    check_inputs(state, view, grid, cfg, true)?;
    let mut feasible = Vec::new();
    let mut actions = Vec::with_capacity(state.m());
    let mut moved = Vec::with_capacity(state.m());
    for (j, x) in state.decision_points.iter().enumerate() {
        let c = build_potential_constraints(
            x,
            grid,
            view.values_at_decision_points[j],
            &view.values_at_grid,
        )?;
        if selection::min_norm_select(&c).is_feasible() {
            feasible.push(j);
        }
        let out = relaxed_select(&c, cfg.eta)?;
        moved.push(linalg::axpy(x.coords(), -cfg.eta, &out.xi));
        actions.push(PointAction::Relax { xi: out.xi, slack: out.slack });
    }
    Ok(finish(state, cfg, feasible, actions, moved))
}

/// Minimal selection on the interaction constraints.
pub fn interaction_round(
    state: &PlayerState,
    view: &OracleView,
    grid: &GridSet,
    cfg: &AlgorithmConfig,
) -> Result<(PlayerState, StepReport), AlgorithmError> {
    check_inputs(state, view, grid, cfg, false)?;
    let Some(kernel) = &view.kernel else {
        return Err(AlgorithmError::ViewMismatch("view carries no kernel values".into()));
    };
    let mut actions = Vec::with_capacity(state.m());
    let mut moved = Vec::with_capacity(state.m());
    for (j, x) in state.decision_points.iter().enumerate() {
        let c = build_interaction_constraints(j, &state.decision_points, grid, kernel)?;
        let SelectionOutcome::Feasible { xi, .. } = selection::min_norm_select(&c) else {
            return Err(AlgorithmError::InfeasiblePoint(j));
        };
        moved.push(linalg::axpy(x.coords(), -cfg.eta, &xi));
        actions.push(PointAction::MinSel { xi });
    }
    Ok(finish(state, cfg, (0..state.m()).collect(), actions, moved))
}

/// Dispatches on `cfg.variant`. `stream` is only read by MSoE.
pub fn play_round(
    state: &PlayerState,
    view: &OracleView,
    grid: &GridSet,
    cfg: &AlgorithmConfig,
    stream: &GaussianStream,
) -> Result<(PlayerState, StepReport), AlgorithmError> {
    match cfg.variant {
        Variant::MinimalSelection => minimal_selection_round(state, view, grid, cfg),
        Variant::MSoE => msoe_round(state, view, grid, cfg, stream),
        Variant::Relaxed => relaxed_round(state, view, grid, cfg),
        Variant::Interaction => interaction_round(state, view, grid, cfg),
    }
}
