use penning::scenario::{preset, replay, run_scenario, sweep, RunManifest, ScenarioKind, MANIFEST_FILE};
use penning::Error;

#[test]
fn manifest_replay_is_bit_exact() {
    for kind in [ScenarioKind::Fig2Cycling, ScenarioKind::DopplerEquilibrium] {
        let s = preset(kind, 7).unwrap();
        let a = tempfile::tempdir().unwrap();
        let first = run_scenario(&s, a.path()).unwrap();
        let on_disk = RunManifest::load(&a.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(on_disk, first);
        assert_eq!(on_disk.seed, 7);
        assert!(on_disk.code_version.starts_with("penning-core "));
        let sim = on_disk.scenario.config.sim.as_ref().unwrap();
        assert!(sim.dt_s.is_some());
        assert!(on_disk.scenario.config.trap.unwrap().v_volts.is_some());

        let b = tempfile::tempdir().unwrap();
        let (again, same) = replay(&on_disk, b.path()).unwrap();
        assert!(same, "{kind}");
        assert_eq!(again.outputs, first.outputs);
        for o in &first.outputs {
            let x = std::fs::read(a.path().join(&o.path)).unwrap();
            let y = std::fs::read(b.path().join(&o.path)).unwrap();
            assert_eq!(x, y, "{}", o.path);
        }
    }
}

#[test]
fn one_point_sweep_matches_run_scenario() {
    let s = preset(ScenarioKind::Fig2Cycling, 3).unwrap();
    let direct = tempfile::tempdir().unwrap();
    let m = run_scenario(&s, direct.path()).unwrap();
    let swept = tempfile::tempdir().unwrap();
    let r = s.config.ions.magnetron_radius_m;
    let points = sweep(&s, &[("config.ions.magnetron_radius_m".into(), vec![r])], swept.path()).unwrap();
    assert_eq!(points.len(), 1);
    let p = points[0].result.as_ref().unwrap();
    assert_eq!(p.outputs, m.outputs);
    assert_eq!(p.metrics, m.metrics);
}

#[test]
fn sweep_keeps_going_past_failed_points() {
    let s = preset(ScenarioKind::Fig2Cycling, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let grid = vec![(
        "config.sim.detection_efficiency".to_string(),
        vec![0.5, 2.0, 0.1],
    )];
    let points = sweep(&s, &grid, dir.path()).unwrap();
    assert_eq!(points.len(), 3);
    assert!(points[0].result.is_ok());
    assert!(matches!(
        points[1].result,
        Err(Error::Scenario { ref scenario, .. }) if scenario == "fig2-cycling"
    ));
    assert!(points[2].result.is_ok());
    assert_eq!(points[2].result.as_ref().unwrap().seed, 3);

    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert!(rows[0].starts_with("point,config.sim.detection_efficiency,status,error,"));
    // sorted by grid value, not by submission order
    assert!(rows[1].starts_with("2,0.1,ok"));
    assert!(rows[2].starts_with("0,0.5,ok"));
    assert!(rows[3].starts_with("1,2,error,\"InvalidParameter"));
}

#[test]
fn concurrent_sweeps_are_reproducible() {
    let s = preset(ScenarioKind::Fig2Axialise, 1).unwrap();
    let grid = vec![
        ("config.laser.saturation".to_string(), vec![1.0, 0.5]),
        ("config.ions.magnetron_radius_m".to_string(), vec![2e-6, 4e-6]),
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = sweep(&s, &grid, a.path()).unwrap();
    sweep(&s, &grid, b.path()).unwrap();
    assert_eq!(pa.len(), 4);
    assert!(pa.iter().all(|p| p.result.is_ok()));
    let read = |d: &std::path::Path| std::fs::read(d.join("summary.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn empty_grid_is_rejected() {
    let s = preset(ScenarioKind::Fig2Cycling, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(sweep(&s, &[], dir.path()), Err(Error::Config(_))));
}

#[test]
fn module_errors_carry_scenario_context() {
    let mut s = preset(ScenarioKind::Fig2Cycling, 1).unwrap();
    s.config.sim.as_mut().unwrap().dt_s = Some(1e-3);
    let dir = tempfile::tempdir().unwrap();
    match run_scenario(&s, dir.path()) {
        Err(e @ Error::Scenario { .. }) => {
            assert_eq!(e.kind(), "InvalidParameter");
            assert!(e.to_string().starts_with("scenario fig2-cycling:"));
        }
        other => panic!("{other:?}"),
    }
}
