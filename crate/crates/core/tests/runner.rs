use std::fs;
use std::path::Path;

use haldane_kinetic::diagnostics::read_csv;
use haldane_kinetic::runner::{run_convergence_study, run_single, RunConfig};

fn small() -> RunConfig {
    RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/small.toml").as_ref()).unwrap()
}

fn csv(dir: &Path) -> String {
    fs::read_to_string(dir.join("diagnostics.csv")).unwrap()
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = small();
    let sa = run_single(&cfg, &a, None).unwrap();
    let sb = run_single(&cfg, &b, None).unwrap();
    assert_eq!(csv(&a), csv(&b));
    assert_eq!(sa.final_moments, sb.final_moments);
    assert_eq!(fs::read(a.join("checkpoint.bin")).unwrap(), fs::read(b.join("checkpoint.bin")).unwrap());
}

#[test]
fn resumed_run_matches_straight_run() {
    let dir = tempfile::tempdir().unwrap();
    let (full, part) = (dir.path().join("full"), dir.path().join("part"));
    let mut cfg = small();
    cfg.output.checkpoint_every = 3;
    run_single(&cfg, &full, None).unwrap();
    let end = cfg.solver.t_end;
    cfg.solver.t_end = 0.2;
    run_single(&cfg, &part, None).unwrap();
    cfg.solver.t_end = end;
    let s = run_single(&cfg, &part, Some(&part.join("checkpoint_000003.bin"))).unwrap();
    assert_eq!(s.steps, 10);
    assert_eq!(csv(&full), csv(&part));
    assert_eq!(fs::read(full.join("checkpoint.bin")).unwrap(), fs::read(part.join("checkpoint.bin")).unwrap());
}

#[test]
fn zero_end_time_reports_mollified_moments() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.solver.t_end = 0.0;
    let s = run_single(&cfg, dir.path(), None).unwrap();
    assert_eq!(s.steps, 0);
    assert_eq!(s.initial, s.final_moments);
    assert_eq!(s.max_mass_drift, 0.0);
    let rec = read_csv(&csv(dir.path())).unwrap();
    assert_eq!(rec.len(), 1);
    assert_eq!(rec[0].mass, s.initial.mass);
}

#[test]
fn config_survives_a_round_trip() {
    let cfg = small();
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    let std = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/standard.toml").as_ref()).unwrap();
    assert_eq!(RunConfig::from_toml_str(&std.to_toml_string().unwrap()).unwrap(), std);
}

#[test]
fn equal_levels_give_zero_distance() {
    let mut cfg = small();
    cfg.solver.t_end = 0.25;
    cfg.study.sample_times = vec![0.1, 0.25];
    let r = run_convergence_study(&cfg, &[2.0, 2.0, 3.0]).unwrap();
    for row in &r.distances {
        assert_eq!(row[0], 0.0);
        assert!(row[1] > 0.0);
    }
    assert!(!r.strictly_decreasing);
}

#[test]
fn convergence_study_needs_three_levels() {
    assert!(run_convergence_study(&small(), &[2.0, 3.0]).is_err());
    assert!(run_convergence_study(&small(), &[3.0, 2.0, 1.5]).is_err());
}
