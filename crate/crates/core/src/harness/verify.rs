use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{HarnessError, RunRecord};
use crate::algorithms::Variant;
use crate::analysis::{Provenance, RegretLedger};
use crate::tolerances;

/// Regret bounds that [`verify_bounds`] can check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Minimal selection, convex potentials, `Ω = R^d`.
    Convex,
    /// Minimal selection with projection onto a bounded convex domain.
    Projected,
    /// Relaxed minimal selection, any potential.
    Relaxed,
    /// Interaction games with a convex kernel.
    Interaction,
    /// MSoE, in expectation over the exploration noise.
    MsoeExpectation,
    /// MSoE with the shrinking-fraction term, in expectation.
    Shrinking,
}

impl Theorem {
    pub fn name(self) -> &'static str {
        match self {
            Theorem::Convex => "convex",
            Theorem::Projected => "projected",
            Theorem::Relaxed => "relaxed",
            Theorem::Interaction => "interaction",
            Theorem::MsoeExpectation => "msoe-expectation",
            Theorem::Shrinking => "shrinking",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Theorem::Convex,
            Theorem::Projected,
            Theorem::Relaxed,
            Theorem::Interaction,
            Theorem::MsoeExpectation,
            Theorem::Shrinking,
        ]
        .into_iter()
        .find(|t| t.name() == s)
    }

    fn applies_to(self, r: &RunRecord) -> bool {
        let bounded = r.config.domain.is_bounded();
        match self {
            Theorem::Convex => r.config.variant == Variant::MinimalSelection && !bounded,
            Theorem::Projected => r.config.variant == Variant::MinimalSelection && bounded,
            Theorem::Relaxed => r.config.variant == Variant::Relaxed,
            Theorem::Interaction => r.config.variant == Variant::Interaction,
            Theorem::MsoeExpectation => r.config.variant == Variant::MSoE,
            Theorem::Shrinking => r.config.variant == Variant::MSoE && r.shrinking.is_some(),
        }
    }

    fn is_expectation(self) -> bool {
        matches!(self, Theorem::MsoeExpectation | Theorem::Shrinking)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One line of the verification table. Deterministic bounds report the
/// prefix with the smallest slack over all replicates; expectation bounds
/// report the prefix where `mean(lhs − rhs) − tol` is largest, with `tol`
/// three standard errors of the per-path difference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub theorem: Theorem,
    pub run: String,
    pub reference: Provenance,
    pub replicates: usize,
    pub prefix: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tol: f64,
    pub pass: bool,
    pub note: String,
}

fn default_theorems(r: &RunRecord) -> Vec<Theorem> {
    [
        Theorem::Convex,
        Theorem::Projected,
        Theorem::Relaxed,
        Theorem::Interaction,
        Theorem::MsoeExpectation,
        Theorem::Shrinking,
    ]
    .into_iter()
    .filter(|t| t.applies_to(r))
    .collect()
}

fn rhs_for(theorem: Theorem, r: &RunRecord, l: &RegretLedger, t: usize) -> Result<f64, HarnessError> {
    Ok(match theorem {
        Theorem::Convex | Theorem::Projected => l.bound_rhs_convex(t)?,
        Theorem::Relaxed => l.bound_rhs_relaxed(t)?,
        Theorem::Interaction => l.bound_rhs_interaction(t)?,
        Theorem::MsoeExpectation => l.bound_rhs_msoe(t)?,
        Theorem::Shrinking => {
            let s = r.shrinking.as_ref().expect("checked by applies_to");
            l.bound_rhs_shrinking(t, s.gamma, s.b)?
        }
    })
}

/// Checks `theorems` (or every applicable bound when `None`) on `records`.
/// Records are grouped into ensembles by run name.
pub fn verify_bounds(records: &[RunRecord], theorems: Option<&[Theorem]>) -> Result<Vec<VerifyRow>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyEnsemble);
    }
    let mut groups: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.config.name.as_str()).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (name, group) in groups {
        let first = group[0];
        let wanted = match theorems {
            Some(ts) => {
                if let Some(t) = ts.iter().find(|t| !t.applies_to(first)) {
                    return Err(HarnessError::TheoremMismatch {
                        theorem: t.name().into(),
                        variant: first.config.variant.name().into(),
                    });
                }
                ts.to_vec()
            }
            None => default_theorems(first),
        };
        for theorem in wanted {
            for l in &first.ledgers {
                let row = if theorem.is_expectation() {
                    expectation_row(theorem, name, &group, l.provenance)?
                } else {
                    deterministic_row(theorem, name, &group, l.provenance)?
                };
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

fn ledger_of(r: &RunRecord, p: Provenance) -> Result<&RegretLedger, HarnessError> {
    r.ledger(p)
        .ok_or_else(|| HarnessError::Config(format!("replicate {} lacks a {} ledger", r.replicate, p.name())))
}

fn deterministic_row(theorem: Theorem, name: &str, group: &[&RunRecord], p: Provenance) -> Result<VerifyRow, HarnessError> {
    let tol = tolerances::BOUND_CHECK;
    let mut worst: Option<(f64, usize, f64, f64)> = None;
    for r in group {
        let l = ledger_of(r, p)?;
        for t in 1..=l.horizon() {
            let (lhs, rhs) = (l.regret(t)?, rhs_for(theorem, r, l, t)?);
            if worst.is_none_or(|w| rhs - lhs < w.0) {
                worst = Some((rhs - lhs, t, lhs, rhs));
            }
        }
    }
    let (slack, prefix, lhs, rhs) = worst.unwrap_or((0.0, 0, 0.0, 0.0));
    Ok(VerifyRow {
        theorem,
        run: name.into(),
        reference: p,
        replicates: group.len(),
        prefix,
        lhs,
        rhs,
        slack,
        tol,
        pass: slack >= -tol,
        note: String::new(),
    })
}

fn expectation_row(theorem: Theorem, name: &str, group: &[&RunRecord], p: Provenance) -> Result<VerifyRow, HarnessError> {
    let k = group.len();
    let horizon = ledger_of(group[0], p)?.horizon();
    let mut worst: Option<(f64, VerifyRow)> = None;
    for t in 1..=horizon {
        let mut lhs = Vec::with_capacity(k);
        let mut rhs = Vec::with_capacity(k);
        for r in group {
            let l = ledger_of(r, p)?;
            lhs.push(l.regret(t)?);
            rhs.push(rhs_for(theorem, r, l, t)?);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / k as f64;
        let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let md = mean(&diff);
        let se = if k > 1 {
            (diff.iter().map(|x| (x - md).powi(2)).sum::<f64>() / (k - 1) as f64 / k as f64).sqrt()
        } else {
            0.0
        };
        let tol = 3.0 * se;
        let excess = md - tol;
        if worst.as_ref().is_none_or(|w| excess > w.0) {
            let mut note = if k > 1 { String::new() } else { "single replicate: per-path check".into() };
            if let (Theorem::Shrinking, Some(s)) = (theorem, &group[0].shrinking) {
                if s.restricted {
                    note = format!("B = {} evaluated on a restricted region", s.b);
                }
                if !s.assumptions_hold {
                    note.push_str("; shrinking assumptions do not hold");
                }
            }
            worst = Some((
                excess,
                VerifyRow {
                    theorem,
                    run: name.into(),
                    reference: p,
                    replicates: k,
                    prefix: t,
                    lhs: mean(&lhs),
                    rhs: mean(&rhs),
                    slack: -md,
                    tol,
                    pass: md <= tol,
                    note,
                },
            ));
        }
    }
    worst
        .map(|w| w.1)
        .ok_or_else(|| HarnessError::Analysis(crate::analysis::AnalysisError::LedgerIncomplete("no rounds".into())))
}
