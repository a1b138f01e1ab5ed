use serde::{Deserialize, Serialize};

use super::{check_inequality, AnalysisError, InequalityCheck, Provenance};
use crate::algorithms::StepReport;
use crate::tolerances;

/// Which regret bound a ledger's `bound_rhs_cum` column tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Minimal selection on convex potentials, with or without projection.
    Convex,
    Relaxed,
    Interaction,
    /// Per-path surrogate of the MSoE bound; holds in expectation only.
    MSoE,
}

impl BoundKind {
    pub fn is_deterministic(self) -> bool {
        !matches!(self, BoundKind::MSoE)
    }
}

/// One round of the ledger. `w2sq_to_ref` is `W2²(μ_{t+1}, ν)`, the distance
/// after the update; MSoE ledgers may leave it out because their bound only
/// uses `W2²(μ_1, ν)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: usize,
    pub loss: f64,
    pub ref_loss: f64,
    pub regret_cum: f64,
    pub w2sq_to_ref: Option<f64>,
    pub sum_xi_sq_over_m: f64,
    pub slack_sum: f64,
    pub infeasible_count: usize,
    pub explore_scale_max: f64,
    /// `(1/m) Σ_{j ∉ S^t} max_i [V_t(x_j) − V_t(z_i)]_+`.
    pub explore_magnitude_over_m: f64,
    pub bound_rhs_cum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub kind: BoundKind,
    pub provenance: Provenance,
    pub eta: f64,
    pub m: usize,
    /// `W2²(μ_1, ν)`.
    pub w2sq_initial: f64,
    pub rows: Vec<LedgerRow>,
}

pub const CSV_HEADER: [&str; 10] = [
    "t",
    "loss",
    "ref_loss",
    "regret_cum",
    "w2sq_to_ref",
    "sum_xi_sq_over_m",
    "slack_sum",
    "infeasible_count",
    "explore_scale_max",
    "bound_rhs_cum",
];

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

impl RegretLedger {
    pub fn new(kind: BoundKind, provenance: Provenance, eta: f64, m: usize, w2sq_initial: f64) -> Self {
        RegretLedger { kind, provenance, eta, m, w2sq_initial, rows: Vec::new() }
    }

    /// Appends round `rows.len() + 1`. `w2sq_next` is `W2²(μ_{t+1}, ν)`,
    /// required for every kind except MSoE.
    pub fn record(
        &mut self,
        loss: f64,
        ref_loss: f64,
        report: &StepReport,
        w2sq_next: Option<f64>,
    ) -> Result<&LedgerRow, AnalysisError> {
        let t = self.rows.len() + 1;
        if report.round != t {
            return Err(AnalysisError::LedgerIncomplete(format!(
                "expected round {t}, got a report for round {}",
                report.round
            )));
        }
        if report.m() != self.m {
            return Err(AnalysisError::InvalidInput(format!(
                "report has {} points, ledger expects {}",
                report.m(),
                self.m
            )));
        }
        if w2sq_next.is_none() && self.kind.is_deterministic() {
            return Err(AnalysisError::LedgerIncomplete(format!("W2² after round {t} is required for a telescoped bound")));
        }
        let prev = self.rows.last().map_or(0.0, |r| r.regret_cum);
        let m = self.m as f64;
        let row = LedgerRow {
            t,
            loss,
            ref_loss,
            regret_cum: prev + (loss - ref_loss),
            w2sq_to_ref: w2sq_next,
            sum_xi_sq_over_m: report.sum_xi_sq_over_m(),
            slack_sum: report.slack_sum(),
            infeasible_count: report.infeasible_count(),
            explore_scale_max: report.explore_scale_max(),
            explore_magnitude_over_m: report.explore_magnitude_sum() / m,
            bound_rhs_cum: 0.0,
        };
        self.rows.push(row);
        let rhs = self.bound_rhs(t)?;
        let row = self.rows.last_mut().expect("just pushed");
        row.bound_rhs_cum = rhs;
        Ok(row)
    }

    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    /// Cumulative regret after `t` rounds; 0 at `t = 0`.
    pub fn regret(&self, t: usize) -> Result<f64, AnalysisError> {
        self.prefix(t)?;
        Ok(if t == 0 { 0.0 } else { self.rows[t - 1].regret_cum })
    }

    fn prefix(&self, t: usize) -> Result<&[LedgerRow], AnalysisError> {
        self.rows.get(..t).ok_or_else(|| {
            AnalysisError::LedgerIncomplete(format!("prefix {t} requested, {} rounds recorded", self.rows.len()))
        })
    }

    /// `W2²(μ_{t+1}, ν)`.
    fn w2sq_after(&self, t: usize) -> Option<f64> {
        if t == 0 {
            Some(self.w2sq_initial)
        } else {
            self.rows[t - 1].w2sq_to_ref
        }
    }

    /// `(W2²(μ_1, ν) − W2²(μ_{T+1}, ν)) / 2η`.
    fn telescoped(&self, t: usize) -> Result<f64, AnalysisError> {
        let last = self
            .w2sq_after(t)
            .ok_or_else(|| AnalysisError::LedgerIncomplete(format!("W2² after round {t} was not recorded")))?;
        Ok((self.w2sq_initial - last) / (2.0 * self.eta))
    }

    fn xi_term(rows: &[LedgerRow], eta: f64) -> f64 {
        0.5 * eta * rows.iter().map(|r| r.sum_xi_sq_over_m).sum::<f64>()
    }

    /// `(W2²(μ_1,ν) − W2²(μ_{T+1},ν))/2η + (η/2) Σ_t (1/m) Σ_j ‖ξ_j^t‖²`.
    pub fn bound_rhs_convex(&self, t: usize) -> Result<f64, AnalysisError> {
        let rows = self.prefix(t)?;
        Ok(self.telescoped(t)? + Self::xi_term(rows, self.eta))
    }

    /// Same shape as the convex bound for interaction games.
    pub fn bound_rhs_interaction(&self, t: usize) -> Result<f64, AnalysisError> {
        self.bound_rhs_convex(t)
    }

    /// Convex bound with `‖ξ_j‖²` replaced by `‖ξ_j‖² + 2 s_j / η`.
    pub fn bound_rhs_relaxed(&self, t: usize) -> Result<f64, AnalysisError> {
        let rows = self.prefix(t)?;
        let m = self.m as f64;
        let slack: f64 = rows.iter().map(|r| r.slack_sum / m).sum();
        Ok(self.telescoped(t)? + Self::xi_term(rows, self.eta) + slack)
    }

    /// `W2²(μ_1,ν)/2η + (η/2) Σ_t (1/m) Σ_{j∈S^t} ‖ξ_j^t‖²
    ///  + (3/2) Σ_t (1/m) Σ_{j∉S^t} max_i [V_t(x_j^t) − V_t(z_i)]_+`.
    pub fn bound_rhs_msoe(&self, t: usize) -> Result<f64, AnalysisError> {
        let rows = self.prefix(t)?;
        let explore: f64 = rows.iter().map(|r| r.explore_magnitude_over_m).sum();
        Ok(self.w2sq_initial / (2.0 * self.eta) + Self::xi_term(rows, self.eta) + 1.5 * explore)
    }

    /// `W2²(μ_1,ν)/2η + (η/2) Σ_t (1/m) Σ_{j∈S^t} ‖ξ_j^t‖² + 3Bγ⁻¹ |[m]\S^1|/m`.
    pub fn bound_rhs_shrinking(&self, t: usize, gamma: f64, b: f64) -> Result<f64, AnalysisError> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(AnalysisError::GammaOutOfRange(gamma));
        }
        if !(b >= 0.0) {
            return Err(AnalysisError::InvalidInput(format!("B must be nonnegative, got {b}")));
        }
        let rows = self.prefix(t)?;
        let first = self
            .rows
            .first()
            .ok_or_else(|| AnalysisError::LedgerIncomplete("round 1 not recorded".into()))?;
        let frac = first.infeasible_count as f64 / self.m as f64;
        Ok(self.w2sq_initial / (2.0 * self.eta) + Self::xi_term(rows, self.eta) + 3.0 * b / gamma * frac)
    }

    /// The RHS of this ledger's own bound kind.
    pub fn bound_rhs(&self, t: usize) -> Result<f64, AnalysisError> {
        match self.kind {
            BoundKind::Convex => self.bound_rhs_convex(t),
            BoundKind::Relaxed => self.bound_rhs_relaxed(t),
            BoundKind::Interaction => self.bound_rhs_interaction(t),
            BoundKind::MSoE => self.bound_rhs_msoe(t),
        }
    }

    /// `regret(T) ≤ rhs(T) + tol` at every prefix `T = 1..=horizon`.
    pub fn check_prefixes(&self, tol: f64) -> Vec<InequalityCheck> {
        self.rows.iter().map(|r| check_inequality(r.regret_cum, r.bound_rhs_cum, tol)).collect()
    }

    /// Largest deviation between cumulative columns and freshly summed
    /// per-round terms, including the W2 telescoping identity.
    pub fn consistency_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut regret = 0.0;
        let mut tele = 0.0;
        for (k, r) in self.rows.iter().enumerate() {
            regret += r.loss - r.ref_loss;
            worst = worst.max((regret - r.regret_cum).abs());
            if let (Some(before), Some(after)) = (self.w2sq_after(k), r.w2sq_to_ref) {
                tele += before - after;
                worst = worst.max((tele - (self.w2sq_initial - after)).abs());
            }
            if let Ok(rhs) = self.bound_rhs(r.t) {
                worst = worst.max((rhs - r.bound_rhs_cum).abs());
            }
        }
        worst
    }

    pub fn is_consistent(&self) -> bool {
        self.consistency_residual() <= tolerances::LEDGER
    }

    /// CSV with the fixed column order of [`CSV_HEADER`] and floats in
    /// `{:.16e}` (17 significant digits).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                fmt(r.loss),
                fmt(r.ref_loss),
                fmt(r.regret_cum),
                r.w2sq_to_ref.map_or(String::new(), fmt),
                fmt(r.sum_xi_sq_over_m),
                fmt(r.slack_sum),
                r.infeasible_count.to_string(),
                fmt(r.explore_scale_max),
                fmt(r.bound_rhs_cum),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
