//! Losses, reference measures, regret ledgers and regret bounds.
//!
//! Every bound is evaluated from ledger terms only, at any prefix `T`, and
//! compared with the cumulative regret through [`check_inequality`].

mod ledger;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{PlayerState, StepReport};
use crate::environments::OracleView;
use crate::measures::{DiscreteMeasure, GridSet, MeasureError};
use crate::selection::KernelValues;

pub use ledger::{BoundKind, LedgerRow, RegretLedger};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("view is for round {view} but the state is at round {state}")]
    RoundMismatch { view: usize, state: usize },
    #[error("view has {found} values for {expected} decision points")]
    MissingValues { expected: usize, found: usize },
    #[error("view carries no kernel values")]
    MissingKernel,
    #[error("reference measure puts mass off the grid at {0}")]
    SupportViolation(String),
    #[error("ledger incomplete: {0}")]
    LedgerIncomplete(String),
    #[error("gamma must lie in (0, 1], got {0}")]
    GammaOutOfRange(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// `𝒱_t(μ_t) = (1/m) Σ_j V_t(x_j^t)`.
pub fn potential_loss(state: &PlayerState, view: &OracleView) -> Result<f64, AnalysisError> {
    if view.round != state.round {
        return Err(AnalysisError::RoundMismatch { view: view.round, state: state.round });
    }
    let values = &view.values_at_decision_points;
    if values.len() != state.m() {
        return Err(AnalysisError::MissingValues { expected: state.m(), found: values.len() });
    }
    Ok(values.iter().sum::<f64>() / state.m() as f64)
}

/// `𝒲_t(μ_t) = (1/m²) Σ_{j,k} W_t(x_j − x_k)`, diagonal included.
pub fn interaction_loss(state: &PlayerState, view: &OracleView) -> Result<f64, AnalysisError> {
    if view.round != state.round {
        return Err(AnalysisError::RoundMismatch { view: view.round, state: state.round });
    }
    let k = view.kernel.as_ref().ok_or(AnalysisError::MissingKernel)?;
    let m = state.m();
    if k.m != m || k.point_point.len() != m * m {
        return Err(AnalysisError::MissingValues { expected: m * m, found: k.point_point.len() });
    }
    Ok(k.point_point.iter().sum::<f64>() / (m * m) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    BestGridDirac,
    Uniform,
    UserSupplied,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::BestGridDirac => "best-grid-dirac",
            Provenance::Uniform => "uniform",
            Provenance::UserSupplied => "user-supplied",
        }
    }
}

/// A comparator `ν = Σ_i a_i δ_{z_i}` on the grid, stored by grid weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeasure {
    pub grid_weights: Vec<f64>,
    pub provenance: Provenance,
}

impl ReferenceMeasure {
    pub fn dirac(grid: &GridSet, index: usize) -> Self {
        let mut w = vec![0.0; grid.len()];
        w[index] = 1.0;
        ReferenceMeasure { grid_weights: w, provenance: Provenance::BestGridDirac }
    }

    pub fn uniform(grid: &GridSet) -> Self {
        let n = grid.len();
        ReferenceMeasure { grid_weights: vec![1.0 / n as f64; n], provenance: Provenance::Uniform }
    }

    /// Maps every atom of `measure` to its grid index; atoms that share a grid
    /// point are merged.
    pub fn user_supplied(grid: &GridSet, measure: &DiscreteMeasure) -> Result<Self, AnalysisError> {
        measure.validate().map_err(|v| AnalysisError::InvalidInput(v.to_string()))?;
        let mut w = vec![0.0; grid.len()];
        for (p, a) in measure.points.iter().zip(&measure.weights) {
            if *a == 0.0 {
                continue;
            }
            let i = grid
                .index_of(p)
                .ok_or_else(|| AnalysisError::SupportViolation(format!("{:?}", p.coords())))?;
            w[i] += a;
        }
        Ok(ReferenceMeasure { grid_weights: w, provenance: Provenance::UserSupplied })
    }

    /// The measure restricted to grid points of positive weight.
    pub fn measure(&self, grid: &GridSet) -> Result<DiscreteMeasure, AnalysisError> {
        if self.grid_weights.len() != grid.len() {
            return Err(AnalysisError::InvalidInput(format!(
                "{} weights for a grid of {} points",
                self.grid_weights.len(),
                grid.len()
            )));
        }
        let (points, weights): (Vec<_>, Vec<_>) = grid
            .points()
            .iter()
            .zip(&self.grid_weights)
            .filter(|(_, a)| **a > 0.0)
            .map(|(p, a)| (p.clone(), *a))
            .unzip();
        Ok(DiscreteMeasure::new(points, weights)?)
    }
}

/// `𝒱_t(ν) = Σ_i a_i V_t(z_i)`.
pub fn reference_loss(nu: &ReferenceMeasure, view: &OracleView) -> Result<f64, AnalysisError> {
    let values = &view.values_at_grid;
    if values.len() != nu.grid_weights.len() {
        return Err(AnalysisError::MissingValues {
            expected: nu.grid_weights.len(),
            found: values.len(),
        });
    }
    Ok(nu.grid_weights.iter().zip(values).map(|(a, v)| a * v).sum())
}

/// `𝒲_t(ν) = Σ_{i,k} a_i a_k W_t(z_i − z_k)`.
pub fn reference_interaction_loss(
    nu: &ReferenceMeasure,
    kernel: &KernelValues,
) -> Result<f64, AnalysisError> {
    let n = nu.grid_weights.len();
    if kernel.n != n || kernel.grid_grid.len() != n * n {
        return Err(AnalysisError::MissingValues { expected: n * n, found: kernel.grid_grid.len() });
    }
    let a = &nu.grid_weights;
    let mut total = 0.0;
    for i in (0..n).filter(|&i| a[i] != 0.0) {
        for k in (0..n).filter(|&k| a[k] != 0.0) {
            total += a[i] * a[k] * kernel.gg(i, k);
        }
    }
    Ok(total)
}

/// Dirac at `argmin_i Σ_t V_t(z_i)` over the recorded rounds, lowest index
/// on ties. Since `𝒱_t(ν)` is linear in `ν`, this minimizes the cumulative
/// comparator loss over all measures on the grid.
pub fn best_grid_reference(
    grid: &GridSet,
    grid_values_per_round: &[Vec<f64>],
) -> Result<ReferenceMeasure, AnalysisError> {
    let Some(first) = grid_values_per_round.first() else {
        return Err(AnalysisError::LedgerIncomplete("no rounds recorded".into()));
    };
    let n = grid.len();
    let mut cum = vec![0.0; n];
    for row in grid_values_per_round {
        if row.len() != n {
            return Err(AnalysisError::MissingValues { expected: n, found: row.len() });
        }
        for (c, v) in cum.iter_mut().zip(row) {
            *c += v;
        }
    }
    debug_assert_eq!(first.len(), n);
    let mut best = 0;
    for (i, c) in cum.iter().enumerate() {
        if *c < cum[best] {
            best = i;
        }
    }
    Ok(ReferenceMeasure::dirac(grid, best))
}

/// `γ = Φ(−1/√(εη))`, the probability that one Gaussian exploration step
/// lands a w-shape point in the feasible region. `Φ(z) = erfc(−z/√2)/2` with
/// the `libm` (musl) `erfc`, accurate to a few ulp.
pub fn gamma_lower_bound(epsilon: f64, eta: f64) -> Result<f64, AnalysisError> {
    if !(epsilon > 0.0 && eta > 0.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "epsilon and eta must be positive, got {epsilon} and {eta}"
        )));
    }
    let z = -1.0 / (epsilon * eta).sqrt();
    Ok(0.5 * libm::erfc(-z / std::f64::consts::SQRT_2))
}

/// `|[m] \ S^t| / m` per round.
pub fn infeasible_fraction_series(reports: &[StepReport]) -> Vec<f64> {
    reports.iter().map(|r| r.infeasible_count() as f64 / r.m() as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Passes iff `lhs ≤ rhs + tol`.
pub fn check_inequality(lhs: f64, rhs: f64, tol: f64) -> InequalityCheck {
    InequalityCheck { lhs, rhs, slack: rhs - lhs, tol, pass: lhs <= rhs + tol }
}
