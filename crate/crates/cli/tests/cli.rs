use std::path::Path;
use std::process::{Command, Output};

fn penning(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penning"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const TRAP: &str = r#"
[trap]
b_tesla = 1.0
magnetron_hz = 31600.0

[laser]
detuning_hz = -21.5e6
saturation = 0.5
waist_m = 50e-6
offset_m = 25e-6
direction = [0.816, 0.0, 0.577]

[ions]
magnetron_radius_m = 5e-6

[sim]
duration_s = 0.002
seed = 4
detection_efficiency = 0.05
background_rate_hz = 5e4
"#;

#[test]
fn frequencies_in_hz() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "trap.toml", TRAP);
    let o = penning(&["frequencies", "--config", &cfg]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!((value(&s, "f_m_hz") - 31.6e3).abs() < 1e-6);
    assert!((value(&s, "f_c_prime_hz") / 608.6e3 - 1.0).abs() < 1e-3);
    assert!((value(&s, "v_volts") - 4.72).abs() < 0.01);
}

#[test]
fn envelope_csv_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "env.toml",
        "[envelope]\ndelta_per_s = 1000.0\ngamma_c_per_s = 0.0\ngamma_m_per_s = 0.0\n\
         r_c0_m = 0.0\nr_m0_m = 1e-5\nduration_s = 0.002\ndt_s = 1e-5\n",
    );
    let out = dir.path().join("env.csv");
    let o = penning(&["envelope", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("regime=cycling"));
    let csv = std::fs::read_to_string(out).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t_s,r_c_m,r_m_m,regime");
    assert_eq!(csv.lines().count(), 202);
}

#[test]
fn simulate_image_spot_size_and_correlate_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "trap.toml", TRAP);
    let run = dir.path().join("run");
    let o = penning(&["simulate", "--config", &cfg, "--out", run.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let traj = std::fs::read_to_string(run.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "t_s,ion_id,x_m,y_m,z_m,vx,vy,vz");
    let photons = std::fs::read(run.join("photons.bin")).unwrap();
    let n = u64::from_le_bytes(photons[..8].try_into().unwrap());
    assert_eq!(photons.len() as u64, 8 + 8 * n);
    assert_eq!(value(&stdout(&o), "photons") as u64, n);

    let img = run.join("img.pgm");
    let o = penning(&[
        "image",
        "--config",
        &cfg,
        "--trajectory",
        run.join("trajectory.csv").to_str().unwrap(),
        "--out",
        img.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(std::fs::read(&img).unwrap().starts_with(b"P5"));
    assert!(run.join("img.pgm.txt").exists());

    let o = penning(&["spot-size", "--image", img.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    for key in ["rms_x_m", "rms_z_m", "fwhm_x_m", "fwhm_z_m"] {
        assert!(value(&s, key) > 0.0);
    }

    let corr = dir.path().join("corr");
    let o = penning(&[
        "correlate",
        "--photons",
        run.join("photons.bin").to_str().unwrap(),
        "--out",
        corr.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let h = std::fs::read_to_string(corr.join("histogram.csv")).unwrap();
    assert_eq!(h.lines().next().unwrap(), "lag_s,counts,detrended");
    let f = std::fs::read_to_string(corr.join("spectrum.csv")).unwrap();
    assert_eq!(f.lines().next().unwrap(), "freq_hz,power");
}

#[test]
fn scenario_run_and_manifest_replay() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = penning(&["scenario", "fig2-cycling", "--seed", "5", "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    assert!(s.contains("output=envelope.csv sha256="));
    assert!((value(&s, "quarter_period_s") - 1.5708e-3).abs() < 1e-6);

    let b = dir.path().join("b");
    let o = penning(&[
        "scenario",
        "--manifest",
        a.join("manifest.toml").to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("reproduced=true"));
}

#[test]
fn sweep_summary_and_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let o = penning(&[
        "sweep",
        "fig2-cycling",
        "--set",
        "config.ions.magnetron_radius_m=8e-6,4e-6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(value(&stdout(&o), "points"), 2.0);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert!(lines[1].starts_with("1,0.000004,ok"));
    assert!(lines[2].starts_with("0,0.000008,ok"));
    assert!(out.join("point-000/manifest.toml").exists());

    let o = penning(&["sweep", "fig2-cycling", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error kind=Config msg="), "{err}");
}

#[test]
fn failures_print_one_machine_readable_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[trap]\nb_tesla = 1.0\nv_volts = 1e6\n");
    for (args, kind) in [
        (vec!["frequencies", "--config", bad.as_str()], "UnstableTrap"),
        (vec!["scenario", "fig9", "--out", "x"], "Config"),
        (vec!["spot-size", "--image", "/nonexistent.pgm"], "Io"),
    ] {
        let o = penning(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with(&format!("error kind={kind} msg=")), "{err}");
    }
}
