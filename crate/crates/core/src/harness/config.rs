use std::path::PathBuf;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::algorithms::{AlgorithmConfig, DomainSpec, PlayerState, Variant};
use crate::analysis::BoundKind;
use crate::environments::Scenario;
use crate::linalg;
use crate::measures::{DiscreteMeasure, GridSet, Point};

pub const SCHEMA_VERSION: u32 = 1;

/// ChaCha stream reserved for initial decision points. Exploration streams
/// are `(t << 32) | j` with `t ≥ 1`, which never reach it.
const INITIAL_STREAM: u64 = u64::MAX;
/// ChaCha stream reserved for deriving replicate seeds.
const REPLICATE_STREAM: u64 = u64::MAX - 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    /// `center + pitch·k` for integer vectors `k`, kept when inside the closed
    /// ball of `radius` (with a relative slack of 1e-12 for boundary points).
    DiskLattice { center: Point, radius: f64, pitch: f64 },
    Explicit { points: Vec<Point> },
}

impl GridSpec {
    pub fn build(&self) -> Result<GridSet, HarnessError> {
        let points = match self {
            GridSpec::Explicit { points } => points.clone(),
            GridSpec::DiskLattice { center, radius, pitch } => {
                if !(*radius > 0.0 && *pitch > 0.0 && radius.is_finite()) {
                    return Err(HarnessError::Config("lattice needs positive radius and pitch".into()));
                }
                let k = (radius / pitch).floor() as i64;
                let d = center.dim();
                if d == 0 || (2 * k + 1).checked_pow(d as u32).is_none_or(|c| c > 10_000_000) {
                    return Err(HarnessError::Config("lattice too large".into()));
                }
                let limit = radius * radius * (1.0 + 1e-12);
                let mut out = Vec::new();
                let mut idx = vec![-k; d];
                loop {
                    let offset: Vec<f64> = idx.iter().map(|&i| i as f64 * pitch).collect();
                    if linalg::norm_sq(&offset) <= limit {
                        out.push(Point::new(linalg::axpy(center.coords(), 1.0, &offset))?);
                    }
                    // Odometer over {−k..k}^d, last coordinate fastest.
                    let mut pos = d;
                    loop {
                        if pos == 0 {
                            return Ok(GridSet::new(out)?);
                        }
                        pos -= 1;
                        if idx[pos] < k {
                            idx[pos] += 1;
                            break;
                        }
                        idx[pos] = -k;
                    }
                }
            }
        };
        Ok(GridSet::new(points)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    UniformBall { center: Point, radius: f64, m: usize },
    UniformBox { lo: Point, hi: Point, m: usize },
    Explicit { points: Vec<Point> },
}

impl InitialSpec {
    pub fn m(&self) -> usize {
        match self {
            InitialSpec::UniformBall { m, .. } | InitialSpec::UniformBox { m, .. } => *m,
            InitialSpec::Explicit { points } => points.len(),
        }
    }

    /// Draws the initial points from the reserved stream of `seed`.
    pub fn sample(&self, seed: u64) -> Result<PlayerState, HarnessError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(INITIAL_STREAM);
        let points = match self {
            InitialSpec::Explicit { points } => points.clone(),
            InitialSpec::UniformBall { center, radius, m } => {
                let d = center.dim();
                (0..*m)
                    .map(|_| {
                        // Uniform direction times radius·U^{1/d}.
                        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                        let r = radius * rng.gen::<f64>().powf(1.0 / d as f64);
                        let n = linalg::norm(&g);
                        Point::new(linalg::axpy(center.coords(), r / n, &g))
                    })
                    .collect::<Result<_, _>>()?
            }
            InitialSpec::UniformBox { lo, hi, m } => {
                if lo.dim() != hi.dim() {
                    return Err(HarnessError::Config("box corners differ in dimension".into()));
                }
                (0..*m)
                    .map(|_| {
                        let c = lo
                            .coords()
                            .iter()
                            .zip(hi.coords())
                            .map(|(l, h)| l + (h - l) * rng.gen::<f64>())
                            .collect();
                        Point::new(c)
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        Ok(PlayerState::new(points)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSpec {
    BestGridDirac,
    Uniform,
    UserSupplied { points: Vec<Point>, weights: Vec<f64> },
}

impl ReferenceSpec {
    pub fn user_measure(&self) -> Option<Result<DiscreteMeasure, HarnessError>> {
        match self {
            ReferenceSpec::UserSupplied { points, weights } => {
                Some(DiscreteMeasure::new(points.clone(), weights.clone()).map_err(Into::into))
            }
            _ => None,
        }
    }
}

fn default_references() -> Vec<ReferenceSpec> {
    vec![ReferenceSpec::BestGridDirac, ReferenceSpec::Uniform]
}

fn default_replicates() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// One experiment. Serialized as TOML; see `examples/configs` for samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub name: String,
    pub scenario: Scenario,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    pub variant: Variant,
    pub eta: f64,
    /// Number of rounds `T`.
    pub horizon: usize,
    pub seed: u64,
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default = "default_references")]
    pub references: Vec<ReferenceSpec>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Where `B = max_t sup |V_t|` is evaluated when `domain` is unbounded.
    #[serde(default)]
    pub bound_region: Option<DomainSpec>,
    /// Required grid size; a preset guard.
    #[serde(default)]
    pub expect_grid_len: Option<usize>,
    /// Compute `W2²(μ_{t+1}, ν)` every round for every reference. When off,
    /// MSoE runs only compute it against cheap (Dirac) references; the MSoE
    /// bound itself needs only `W2²(μ_1, ν)`.
    #[serde(default = "default_true")]
    pub track_w2: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.initial.m() == 0 {
            return bad("need at least one decision point".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.references.is_empty() {
            return bad("need at least one reference measure".into());
        }
        self.algorithm().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.scenario.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let d = self.scenario.dim();
        match (&self.scenario, self.variant) {
            (Scenario::Interaction(_), Variant::Interaction) => {}
            (Scenario::Interaction(_), v) => {
                return bad(format!("interaction games need the interaction variant, got {}", v.name()))
            }
            (_, Variant::Interaction) => return bad("the interaction variant needs an interaction game".into()),
            _ => {}
        }
        for (what, dim) in [("domain", self.domain.dim()), ("bound_region", self.bound_region.as_ref().and_then(DomainSpec::dim))] {
            if dim.is_some_and(|k| k != d) {
                return bad(format!("{what} dimension differs from the scenario's d = {d}"));
            }
        }
        if let Some(r) = &self.bound_region {
            r.validate().map_err(HarnessError::Config)?;
        }
        Ok(())
    }

    pub fn algorithm(&self) -> Result<AlgorithmConfig, HarnessError> {
        Ok(AlgorithmConfig::new(self.eta, self.variant, self.domain.clone())?)
    }

    pub fn bound_kind(&self) -> BoundKind {
        match self.variant {
            Variant::MinimalSelection => BoundKind::Convex,
            Variant::MSoE => BoundKind::MSoE,
            Variant::Relaxed => BoundKind::Relaxed,
            Variant::Interaction => BoundKind::Interaction,
        }
    }

    /// Seeds of the replicates. A single replicate uses `seed` itself; an
    /// ensemble draws its seeds from a reserved ChaCha stream of `seed`.
    pub fn replicate_seeds(&self) -> Vec<u64> {
        if self.replicates == 1 {
            return vec![self.seed];
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(REPLICATE_STREAM);
        (0..self.replicates).map(|_| rng.next_u64()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disk_lattice_has_797_points() {
        let g = GridSpec::DiskLattice { center: Point::from([0.0, 0.0]), radius: 1.0, pitch: 1.0 / 16.0 };
        let grid = g.build().unwrap();
        assert_eq!(grid.len(), 797);
        // Independent count: integer pairs with i² + j² ≤ 256.
        let count = (-16i32..=16).flat_map(|i| (-16i32..=16).map(move |j| (i, j))).filter(|(i, j)| i * i + j * j <= 256).count();
        assert_eq!(count, 797);
        assert!(grid.points().iter().all(|p| linalg::norm(p.coords()) <= 1.0 + 1e-12));
    }

    #[test]
    fn seeded_initial_points() {
        let spec = InitialSpec::UniformBall { center: Point::from([0.0, 0.0]), radius: 1.0, m: 500 };
        let a = spec.sample(3).unwrap();
        assert_eq!(a, spec.sample(3).unwrap());
        assert_ne!(a, spec.sample(4).unwrap());
        assert!(a.decision_points.iter().all(|p| linalg::norm(p.coords()) <= 1.0));
        // Uniform in the disk: P(‖x‖ ≤ 1/2) = 1/4, five standard errors.
        let inner = a.decision_points.iter().filter(|p| linalg::norm(p.coords()) <= 0.5).count() as f64 / 500.0;
        assert!((inner - 0.25).abs() < 5.0 * (0.25f64 * 0.75 / 500.0).sqrt());
        let bx = InitialSpec::UniformBox { lo: Point::from(-1.0), hi: Point::from(1.0), m: 100 };
        assert!(bx.sample(1).unwrap().decision_points.iter().all(|p| p[0].abs() <= 1.0));
    }
}
