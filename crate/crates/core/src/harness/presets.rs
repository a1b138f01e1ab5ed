//! Built-in experiments. The two `fig-*` presets follow the simulation
//! section: unit-disk grid of 797 hubs, `m = 10` decision points drawn
//! uniformly in the disk, targets starting at `(−1/√2, −1/√2)`.
//!
//! Centers move as `u_t = u_1 + (t − 1)·drift`, so `u_1` is the center of the
//! first round.

use std::f64::consts::FRAC_1_SQRT_2;

use super::{GridSpec, HarnessError, InitialSpec, ReferenceSpec, RunConfig, SCHEMA_VERSION};
use crate::algorithms::{DomainSpec, Variant};
use crate::environments::{InteractionScenario, Kernel, PotentialScenario, Scenario};
use crate::measures::Point;

const NAMES: [&str; 7] = [
    "fig-convex",
    "fig-convex-projected",
    "fig-nonconvex",
    "w-shape",
    "interaction",
    "relaxed-w-shape",
    "relaxed-nonconvex",
];

pub fn preset_names() -> &'static [&'static str] {
    &NAMES
}

fn start() -> Point {
    Point::from([-FRAC_1_SQRT_2, -FRAC_1_SQRT_2])
}

fn unit_disk_grid() -> GridSpec {
    GridSpec::DiskLattice { center: Point::from([0.0, 0.0]), radius: 1.0, pitch: 1.0 / 16.0 }
}

fn unit_disk() -> DomainSpec {
    DomainSpec::Ball { center: Point::from([0.0, 0.0]), radius: 1.0 }
}

fn ten_in_disk() -> InitialSpec {
    InitialSpec::UniformBall { center: Point::from([0.0, 0.0]), radius: 1.0, m: 10 }
}

fn two_targets() -> Scenario {
    Scenario::Potential(PotentialScenario::MinOfQuadratics {
        u1: start(),
        u_drift: Point::from([0.165, 0.11]),
        v1: start(),
        v_drift: Point::from([0.11, 0.165]),
    })
}

fn w_shape() -> Scenario {
    Scenario::Potential(PotentialScenario::WShape { a: vec![1.0], epsilon: 1.0 })
}

fn five_hubs() -> GridSpec {
    GridSpec::Explicit { points: [-1.0, -0.5, 0.0, 0.5, 1.0].map(Point::from).to_vec() }
}

fn base(name: &str, scenario: Scenario, grid: GridSpec, initial: InitialSpec) -> RunConfig {
    RunConfig {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        scenario,
        grid,
        initial,
        variant: Variant::MinimalSelection,
        eta: 0.2,
        horizon: 7,
        seed: 0,
        domain: DomainSpec::WholeSpace,
        references: vec![ReferenceSpec::BestGridDirac, ReferenceSpec::Uniform],
        replicates: 1,
        bound_region: None,
        expect_grid_len: None,
        track_w2: true,
        out_dir: None,
    }
}

pub fn preset(name: &str) -> Result<RunConfig, HarnessError> {
    let moving = Scenario::Potential(PotentialScenario::MovingQuadratic {
        u1: start(),
        drift: Point::from([0.15, 0.15]),
    });
    let cfg = match name {
        "fig-convex" => RunConfig {
            expect_grid_len: Some(797),
            ..base(name, moving, unit_disk_grid(), ten_in_disk())
        },
        // The target leaves the disk after round 8.
        "fig-convex-projected" => RunConfig {
            horizon: 12,
            domain: unit_disk(),
            expect_grid_len: Some(797),
            ..base(name, moving, unit_disk_grid(), ten_in_disk())
        },
        "fig-nonconvex" => RunConfig {
            variant: Variant::MSoE,
            eta: 0.05,
            horizon: 19,
            domain: unit_disk(),
            expect_grid_len: Some(797),
            ..base(name, two_targets(), unit_disk_grid(), ten_in_disk())
        },
        "w-shape" => RunConfig {
            variant: Variant::MSoE,
            eta: 0.1,
            horizon: 10,
            ..base(
                name,
                w_shape(),
                five_hubs(),
                InitialSpec::UniformBox { lo: Point::from(-1.0), hi: Point::from(1.0), m: 200 },
            )
        },
        // Hubs sit on a 3×3 lattice of pitch 1/4 around (8, 0). The programs stay
        // feasible while every point is outside the hubs' convex hull, and
        // the cloud drifts toward the hubs by about ηE_j/‖x_j − z‖ per round.
        "interaction" => RunConfig {
            variant: Variant::Interaction,
            eta: 0.05,
            horizon: 50,
            ..base(
                name,
                Scenario::Interaction(InteractionScenario { kernel: Kernel::quadratic(), dim: 2 }),
                GridSpec::Explicit {
                    points: (-1..=1)
                        .flat_map(|i| (-1..=1).map(move |j| Point::from([8.0 + 0.25 * i as f64, 0.25 * j as f64])))
                        .collect(),
                },
                ten_in_disk(),
            )
        },
        "relaxed-w-shape" => RunConfig {
            variant: Variant::Relaxed,
            eta: 0.1,
            horizon: 20,
            ..base(
                name,
                w_shape(),
                five_hubs(),
                InitialSpec::UniformBox { lo: Point::from(-1.0), hi: Point::from(1.0), m: 20 },
            )
        },
        "relaxed-nonconvex" => RunConfig {
            variant: Variant::Relaxed,
            eta: 0.05,
            horizon: 19,
            expect_grid_len: Some(797),
            ..base(name, two_targets(), unit_disk_grid(), ten_in_disk())
        },
        other => return Err(HarnessError::UnknownPreset(other.into())),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
        assert!(matches!(preset("nope"), Err(HarnessError::UnknownPreset(_))));
    }
}
