use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, ReferenceSpec, RunConfig};
use crate::algorithms::{play_round, DomainSpec, GaussianStream, PlayerState, StepReport};
use crate::analysis::{
    best_grid_reference, gamma_lower_bound, interaction_loss, potential_loss,
    reference_interaction_loss, reference_loss, BoundKind, Provenance, ReferenceMeasure, RegretLedger,
};
use crate::environments::{
    default_bound_region, reveal, sup_abs_bound, OracleView, PotentialScenario, Scenario,
};
use crate::measures::{w2_squared, GridSet};
use crate::tolerances;

/// Everything a run produced before any accounting.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub seed: u64,
    pub grid: GridSet,
    /// `μ_1 … μ_{T+1}`.
    pub states: Vec<PlayerState>,
    pub reports: Vec<StepReport>,
    pub views: Vec<OracleView>,
}

/// Plays `cfg.horizon` rounds from the initial points drawn with `seed`.
pub fn simulate(cfg: &RunConfig, seed: u64) -> Result<Trajectory, HarnessError> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    if let Some(n) = cfg.expect_grid_len {
        if grid.len() != n {
            return Err(HarnessError::Config(format!("grid has {} points, expected {n}", grid.len())));
        }
    }
    let alg = cfg.algorithm()?;
    let stream = GaussianStream::new(seed);
    let mut state = cfg.initial.sample(seed)?;
    if state.dim() != cfg.scenario.dim() {
        return Err(HarnessError::Config("initial points and scenario differ in dimension".into()));
    }
    let mut states = vec![state.clone()];
    let mut reports = Vec::with_capacity(cfg.horizon);
    let mut views = Vec::with_capacity(cfg.horizon);
    for t in 1..=cfg.horizon {
        let view = reveal(&cfg.scenario, t, &state, &grid)?;
        let (next, report) = play_round(&state, &view, &grid, &alg, &stream)?;
        log::debug!("round {t}: {} infeasible of {}", report.infeasible_count(), report.m());
        views.push(view);
        reports.push(report);
        states.push(next.clone());
        state = next;
    }
    Ok(Trajectory { seed, grid, states, reports, views })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: BoundKind,
    pub reference: Provenance,
    pub prefixes: usize,
    /// Smallest `rhs − lhs` over all prefixes.
    pub worst_slack: f64,
    pub tol: f64,
    /// `None` for bounds that hold in expectation only.
    pub pass: Option<bool>,
}

/// Inputs of the shrinking-fraction bound, available for w-shape games.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkingInputs {
    pub gamma: f64,
    pub b: f64,
    pub region: DomainSpec,
    /// `B` was evaluated on a declared region because the domain is unbounded.
    pub restricted: bool,
    /// `a_t ≥ ε` and `a_t η < 1/2` for every round.
    pub assumptions_hold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub seed: u64,
    pub replicate: usize,
    pub version: String,
    pub wall_clock_secs: f64,
    pub grid_len: usize,
    /// SHA-256 of each round's JSON-serialized step report.
    pub step_digests: Vec<String>,
    pub ledgers: Vec<RegretLedger>,
    pub checks: Vec<BoundCheck>,
    pub shrinking: Option<ShrinkingInputs>,
}

impl RunRecord {
    pub fn ledger(&self, reference: Provenance) -> Option<&RegretLedger> {
        self.ledgers.iter().find(|l| l.provenance == reference)
    }

    /// `|S^t|` per round.
    pub fn feasible_counts(&self) -> Vec<usize> {
        let m = self.ledgers[0].m;
        self.ledgers[0].rows.iter().map(|r| m - r.infeasible_count).collect()
    }

    pub fn all_deterministic_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass != Some(false))
    }
}

/// Per-round point cloud for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: usize,
    pub points: Vec<Vec<f64>>,
    /// `S^t`; absent for the state after the last round.
    pub feasible_set: Option<Vec<usize>>,
    pub report: Option<StepReport>,
}

fn snapshots(traj: &Trajectory) -> Vec<Snapshot> {
    traj.states
        .iter()
        .enumerate()
        .map(|(k, s)| Snapshot {
            t: k + 1,
            points: s.decision_points.iter().map(|p| p.coords().to_vec()).collect(),
            feasible_set: traj.reports.get(k).map(|r| r.feasible_set.clone()),
            report: traj.reports.get(k).cloned(),
        })
        .collect()
}

fn digest(report: &StepReport) -> String {
    let bytes = serde_json::to_vec(report).expect("report serializes");
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `𝒱_t(δ_{z_i})` per grid point, used to pick the best grid Dirac.
fn dirac_losses(view: &OracleView, n: usize) -> Vec<f64> {
    match &view.kernel {
        Some(k) => (0..n).map(|i| k.gg(i, i)).collect(),
        None => view.values_at_grid.clone(),
    }
}

fn build_reference(spec: &ReferenceSpec, traj: &Trajectory) -> Result<ReferenceMeasure, HarnessError> {
    let n = traj.grid.len();
    Ok(match spec {
        ReferenceSpec::BestGridDirac => {
            let per_round: Vec<Vec<f64>> = traj.views.iter().map(|v| dirac_losses(v, n)).collect();
            best_grid_reference(&traj.grid, &per_round)?
        }
        ReferenceSpec::Uniform => ReferenceMeasure::uniform(&traj.grid),
        ReferenceSpec::UserSupplied { .. } => {
            let m = spec.user_measure().expect("user-supplied")?;
            ReferenceMeasure::user_supplied(&traj.grid, &m)?
        }
    })
}

fn build_ledger(
    cfg: &RunConfig,
    traj: &Trajectory,
    nu: &ReferenceMeasure,
) -> Result<RegretLedger, HarnessError> {
    let kind = cfg.bound_kind();
    let nu_measure = nu.measure(&traj.grid)?;
    let cheap = nu_measure.len() == 1;
    let w2 = |s: &PlayerState| -> Result<f64, HarnessError> { Ok(w2_squared(&s.measure()?, &nu_measure)?) };
    let mut ledger = RegretLedger::new(kind, nu.provenance, cfg.eta, traj.states[0].m(), w2(&traj.states[0])?);
    for (k, (report, view)) in traj.reports.iter().zip(&traj.views).enumerate() {
        let state = &traj.states[k];
        let (loss, ref_loss) = match &view.kernel {
            Some(kv) => (interaction_loss(state, view)?, reference_interaction_loss(nu, kv)?),
            None => (potential_loss(state, view)?, reference_loss(nu, view)?),
        };
        let next = if cfg.track_w2 || cheap || kind.is_deterministic() {
            Some(w2(&traj.states[k + 1])?)
        } else {
            None
        };
        ledger.record(loss, ref_loss, report, next)?;
    }
    Ok(ledger)
}

fn shrinking_inputs(cfg: &RunConfig) -> Result<Option<ShrinkingInputs>, HarnessError> {
    let Scenario::Potential(PotentialScenario::WShape { a, epsilon }) = &cfg.scenario else {
        return Ok(None);
    };
    if cfg.bound_kind() != BoundKind::MSoE {
        return Ok(None);
    }
    let restricted = !cfg.domain.is_bounded();
    let region = if restricted {
        cfg.bound_region.clone().unwrap_or_else(|| default_bound_region(1))
    } else {
        cfg.domain.clone()
    };
    let b = sup_abs_bound(&cfg.scenario, cfg.horizon, &region)?;
    let gamma = gamma_lower_bound(*epsilon, cfg.eta)?;
    let assumptions_hold = a.iter().all(|&at| at >= *epsilon && at * cfg.eta < 0.5);
    Ok(Some(ShrinkingInputs { gamma, b, region, restricted, assumptions_hold }))
}

/// Accounting for one trajectory: one ledger per reference plus checks.
pub fn account(cfg: &RunConfig, traj: &Trajectory, replicate: usize, started: Instant) -> Result<RunRecord, HarnessError> {
    let kind = cfg.bound_kind();
    let mut ledgers = Vec::with_capacity(cfg.references.len());
    let mut checks = Vec::new();
    for spec in &cfg.references {
        let nu = build_reference(spec, traj)?;
        let ledger = build_ledger(cfg, traj, &nu)?;
        let slacks = ledger.check_prefixes(tolerances::BOUND_CHECK);
        let worst = slacks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
        checks.push(BoundCheck {
            bound: kind,
            reference: nu.provenance,
            prefixes: slacks.len(),
            worst_slack: worst,
            tol: tolerances::BOUND_CHECK,
            pass: kind.is_deterministic().then(|| slacks.iter().all(|c| c.pass)),
        });
        ledgers.push(ledger);
    }
    Ok(RunRecord {
        config: cfg.clone(),
        seed: traj.seed,
        replicate,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
        grid_len: traj.grid.len(),
        step_digests: traj.reports.iter().map(digest).collect(),
        ledgers,
        checks,
        shrinking: shrinking_inputs(cfg)?,
    })
}

/// Simulates and accounts one replicate.
pub fn run_replicate(cfg: &RunConfig, seed: u64, replicate: usize) -> Result<(RunRecord, Trajectory), HarnessError> {
    let started = Instant::now();
    let traj = simulate(cfg, seed)?;
    let record = account(cfg, &traj, replicate, started)?;
    Ok((record, traj))
}

fn replicate_dir(out: &Path, replicate: usize) -> PathBuf {
    out.join(format!("rep_{replicate:04}"))
}

/// Writes the ledgers, snapshots and record of one replicate.
pub fn write_replicate(out: &Path, record: &RunRecord, traj: &Trajectory) -> Result<PathBuf, HarnessError> {
    let dir = replicate_dir(out, record.replicate);
    fs::create_dir_all(&dir)?;
    for ledger in &record.ledgers {
        let f = fs::File::create(dir.join(format!("ledger_{}.csv", ledger.provenance.name())))?;
        ledger.write_csv(std::io::BufWriter::new(f))?;
    }
    fs::write(dir.join("snapshots.json"), serde_json::to_vec(&snapshots(traj))?)?;
    fs::write(dir.join("record.json"), serde_json::to_vec_pretty(record)?)?;
    Ok(dir)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub records: Vec<RunRecord>,
}

impl Ensemble {
    /// Mean infeasible fraction per round across replicates.
    pub fn mean_infeasible_fraction(&self) -> Vec<f64> {
        let k = self.records.len() as f64;
        let horizon = self.records.first().map_or(0, |r| r.ledgers[0].rows.len());
        (0..horizon)
            .map(|t| {
                self.records
                    .iter()
                    .map(|r| r.ledgers[0].rows[t].infeasible_count as f64 / r.ledgers[0].m as f64)
                    .sum::<f64>()
                    / k
            })
            .collect()
    }
}

/// Runs every replicate concurrently. With `out`, each replicate writes its
/// own directory as soon as it finishes.
pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<Ensemble, HarnessError> {
    cfg.validate()?;
    let seeds = cfg.replicate_seeds();
    let records = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let (record, traj) = run_replicate(cfg, seed, k)?;
            if let Some(out) = out {
                write_replicate(out, &record, &traj)?;
            }
            Ok(record)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(Ensemble { records })
}

/// Reads every `record.json` below `dir`, sorted by path.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let mut paths = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == "record.json") {
                paths.push(p);
            }
        }
    }
    paths.sort();
    paths
        .iter()
        .map(|p| Ok(serde_json::from_slice(&fs::read(p)?)?))
        .collect()
}
