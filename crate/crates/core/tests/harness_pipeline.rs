use std::path::Path;
use std::process::Command;

use olt::analysis::{BoundKind, Provenance};
use olt::harness::{
    load_records, oracle_suite, preset, run, run_replicate, simulate, verify_bounds,
    GridSpec, HarnessError, InitialSpec, RunConfig, Theorem,
};
use olt::measures::{w2_squared, Point};

fn olt(args: &[&str], out_root: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_olt"))
        .args(args)
        .env("OLT_OUT_DIR", out_root)
        .output()
        .expect("binary runs")
}

#[test]
fn ledger_telescopes_against_recomputed_distances() {
    let cfg = preset("fig-convex").unwrap();
    let (record, traj) = run_replicate(&cfg, cfg.seed, 0).unwrap();
    for ledger in &record.ledgers {
        assert!(ledger.is_consistent(), "{:?}", ledger.provenance);
        let nu = match ledger.provenance {
            Provenance::Uniform => olt::DiscreteMeasure::uniform(traj.grid.points().to_vec()).unwrap(),
            _ => continue,
        };
        // Independent route: W2 recomputed from the stored states.
        let w: Vec<f64> = traj.states.iter().map(|s| w2_squared(&s.measure().unwrap(), &nu).unwrap()).collect();
        let tele: f64 = w.windows(2).map(|p| p[0] - p[1]).sum();
        assert!((tele - (w[0] - w[w.len() - 1])).abs() <= 1e-9);
        assert!((ledger.w2sq_initial - w[0]).abs() <= 1e-12);
        for (row, wt) in ledger.rows.iter().zip(&w[1..]) {
            assert!((row.w2sq_to_ref.unwrap() - wt).abs() <= 1e-12);
        }
    }
    assert!(record.all_deterministic_checks_pass());
}

#[test]
fn resting_single_point_stays_put() {
    // m = 1 at the minimizer of V_1, so every offset is ≤ 0 and ξ = 0.
    let mut cfg = preset("fig-convex").unwrap();
    let h = -std::f64::consts::FRAC_1_SQRT_2;
    cfg.initial = InitialSpec::Explicit { points: vec![Point::from([h, h])] };
    cfg.horizon = 1;
    cfg.expect_grid_len = None;
    let traj = simulate(&cfg, 0).unwrap();
    assert_eq!(traj.states[1].decision_points, traj.states[0].decision_points);
}

#[test]
fn records_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("w-shape").unwrap();
    cfg.replicates = 3;
    cfg.track_w2 = false;
    let ensemble = run(&cfg, Some(dir.path())).unwrap();
    let loaded = load_records(dir.path()).unwrap();
    assert_eq!(loaded, ensemble.records);
    for rep in 0..3 {
        let d = dir.path().join(format!("rep_{rep:04}"));
        for f in ["ledger_best-grid-dirac.csv", "ledger_uniform.csv", "snapshots.json", "record.json"] {
            assert!(d.join(f).is_file(), "{f}");
        }
    }
    // Uniform over five hubs is multi-atom, so per-round W2 was skipped.
    let csv = std::fs::read_to_string(dir.path().join("rep_0000/ledger_uniform.csv")).unwrap();
    let second = csv.lines().nth(1).unwrap();
    assert_eq!(second.split(',').nth(4), Some(""));
}

#[test]
fn verify_rejects_mismatches_and_empty_input() {
    let cfg = preset("w-shape").unwrap();
    let (record, _) = run_replicate(&cfg, 1, 0).unwrap();
    assert!(matches!(verify_bounds(&[], None), Err(HarnessError::EmptyEnsemble)));
    assert!(matches!(
        verify_bounds(std::slice::from_ref(&record), Some(&[Theorem::Convex])),
        Err(HarnessError::TheoremMismatch { .. })
    ));
    let rows = verify_bounds(std::slice::from_ref(&record), None).unwrap();
    let names: Vec<_> = rows.iter().map(|r| r.theorem).collect();
    assert!(names.contains(&Theorem::MsoeExpectation) && names.contains(&Theorem::Shrinking));
    let shrinking = rows.iter().find(|r| r.theorem == Theorem::Shrinking).unwrap();
    assert!(shrinking.note.contains("restricted region"), "{}", shrinking.note);
}

#[test]
fn deterministic_bounds_pass_on_matching_presets() {
    for (name, theorem) in [
        ("fig-convex", Theorem::Convex),
        ("fig-convex-projected", Theorem::Projected),
        ("relaxed-w-shape", Theorem::Relaxed),
    ] {
        let cfg = preset(name).unwrap();
        let (record, _) = run_replicate(&cfg, cfg.seed, 0).unwrap();
        let rows = verify_bounds(&[record], Some(&[theorem])).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.pass), "{name}: {rows:?}");
    }
}

#[test]
fn minimal_selection_escalates_infeasibility() {
    let mut cfg = preset("w-shape").unwrap();
    cfg.variant = olt::Variant::MinimalSelection;
    assert_eq!(cfg.bound_kind(), BoundKind::Convex);
    let err = simulate(&cfg, 0).unwrap_err();
    assert!(matches!(err, HarnessError::Algorithm(olt::algorithms::AlgorithmError::InfeasiblePoint(_))), "{err}");
}

#[test]
fn config_errors() {
    let text = preset("fig-convex").unwrap().to_toml();
    assert!(RunConfig::from_toml(&text.replace("horizon = 7", "horizon = 0")).is_err());
    let unknown = format!("colour = \"red\"\n{text}");
    let err = RunConfig::from_toml(&unknown).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let mut cfg = preset("fig-convex").unwrap();
    cfg.grid = GridSpec::Explicit { points: vec![Point::from([0.0, 0.0])] };
    assert!(matches!(simulate(&cfg, 0), Err(HarnessError::Config(_))));
}

#[test]
fn oracle_digest_is_pinned() {
    // Pinned from the first full run of the regression corpus.
    let r = oracle_suite(0, 1000);
    assert!(r.pass(), "{:?}", r.failures);
    assert_eq!(r.digest, "3f9d5dbe1eeba0b6286405aa26564e1a7f3a98fcbb82cac205749427d7b1a95f");
}

#[test]
fn cli_surface() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let out = olt(&["presets"], root);
    assert!(out.status.success());
    let listed = String::from_utf8(out.stdout).unwrap();
    assert!(listed.lines().any(|l| l == "fig-nonconvex"));

    let out = olt(&["presets", "--show", "fig-convex"], root);
    let toml = String::from_utf8(out.stdout).unwrap();
    assert_eq!(RunConfig::from_toml(&toml).unwrap(), preset("fig-convex").unwrap());

    assert_eq!(olt(&["run", "--preset", "nope"], root).status.code(), Some(2));
    let bad = root.join("bad.toml");
    std::fs::write(&bad, "schema_version = 99\n").unwrap();
    assert_eq!(olt(&["run", "--config", bad.to_str().unwrap()], root).status.code(), Some(2));

    let out = olt(&["run", "--preset", "fig-convex"], root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("fig-convex/rep_0000/ledger_uniform.csv").is_file());

    let records = root.join("fig-convex");
    let out = olt(&["verify", "--records", records.to_str().unwrap()], root);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("convex"));
    let out = olt(&["verify", "--records", records.to_str().unwrap(), "--theorem", "msoe-expectation"], root);
    assert_eq!(out.status.code(), Some(1));

    let out = olt(&["oracle", "--count", "50", "--seed", "3"], root);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("50/50"));
}
