use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn geotraj(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geotraj"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("GEOTRAJ_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn synth_reports_gate_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = geotraj(&["synth", "--gate", "H", "--chi1", "0.05pi", "--chi3", "0.73pi"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("gamma_g = 0.5000pi"), "{s}");
    assert!(s.contains("total area"));
    assert!(s.contains("gate time"));
    let sched = fs::read_to_string(dir.path().join("schedule_H.csv")).unwrap();
    assert!(sched.starts_with("t,omega,phi,delta\n"));
    let traj = fs::read_to_string(dir.path().join("trajectory_H.csv")).unwrap();
    assert_eq!(traj.lines().count(), 6);
}

#[test]
fn explicit_parameters_match_gate_alias() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let w = ["--chi1", "0.2pi", "--chi3", "0.8pi"];
    let oa = geotraj(&[&["synth", "--chi0", "0.5pi", "--xi0", "pi", "--gamma", "0.5pi"][..], &w].concat(), a.path());
    let ob = geotraj(&[&["synth", "--gate", "Xpi"][..], &w].concat(), b.path());
    assert!(oa.status.success() && ob.status.success());
    let ca = fs::read(a.path().join("schedule_custom.csv")).unwrap();
    let cb = fs::read(b.path().join("schedule_Xpi.csv")).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn degenerate_first_segment_warns() {
    let dir = tempfile::tempdir().unwrap();
    let o = geotraj(&["synth", "--gate", "H", "--chi1", "0.25pi", "--chi3", "0.8pi"], dir.path());
    assert!(o.status.success());
    assert!(stderr(&o).contains("degenerate"));
    // the identity loop has chi0 on the equator, so chi1 = chi0 cannot close
    let o = geotraj(&["synth", "--gate", "I", "--chi1", "0.5pi", "--chi3", "0.8pi"], dir.path());
    assert!(stderr(&o).contains("degenerate"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["synth", "--gate", "Q"][..],
        &["synth", "--gate", "H", "--chi1", "0.9pi", "--chi3", "0.5pi"],
        &["synth", "--gate", "H", "--chi1", "abc"],
        &["scan", "--gate", "H", "--error", "bogus"],
        &["transmon", "--gate", "iSWAP"],
        &["transmon", "--gate", "H", "--levels", "2"],
        &["transmon", "--gate", "H", "--levels", "9"],
        &["twoqubit", "--gate", "H"],
    ] {
        let o = geotraj(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn scan_writes_two_curves_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = geotraj(
        &["scan", "--gate", "Xpi", "--error", "detuning", "--chi1", "0.2pi", "--chi3", "0.8pi", "--points", "11"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for which in ["geometric", "conventional"] {
        let p = dir.path().join(format!("scan_Xpi_detuning_{which}.csv"));
        assert!(fs::read_to_string(&p).unwrap().starts_with("delta,infidelity\n"));
        assert_eq!(csv_rows(&p).len(), 11);
    }
    let svg = fs::read_to_string(dir.path().join("scan_Xpi_detuning.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn amplitude_scan_and_zero_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = geotraj(&["scan", "--gate", "H", "--error", "amplitude", "--points", "5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("scan_H_amplitude_geometric.csv").exists());

    let o = geotraj(&["scan", "--gate", "I", "--delta-max", "0", "--chi1", "0.2pi", "--chi3", "0.8pi", "--points", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for which in ["geometric", "conventional"] {
        for row in csv_rows(&dir.path().join(format!("scan_I_detuning_{which}.csv"))) {
            assert_eq!(row[0], 0.0);
            assert!(row[1].abs() < 1e-9);
        }
    }
}

#[test]
fn output_is_byte_identical_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["optimize", "--gate", "H", "--resolution", "0.1", "--no-refine"];
    assert!(geotraj(&args, a.path()).status.success());
    assert!(geotraj(&args, b.path()).status.success());
    for f in ["landscape_H.csv", "optimum_H.json", "landscape_H.svg"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let json = fs::read_to_string(a.path().join("optimum_H.json")).unwrap();
    assert!(json.contains("\"chi1\"") && json.contains("\"chi3\"") && json.contains("\"metric\""));
    assert!(fs::read_to_string(a.path().join("landscape_H.csv")).unwrap().starts_with("chi1,chi3,infidelity\n"));
}

#[test]
fn two_level_transmon_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = geotraj(
        &["transmon", "--gate", "H", "--levels", "2", "--t1", "inf", "--tphi", "inf", "--points", "4"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let p = dir.path().join("transmon_H.csv");
    assert!(fs::read_to_string(&p).unwrap().starts_with("omega_m,infidelity_nodrag,infidelity_drag\n"));
    for row in csv_rows(&p) {
        assert!(row[1] < 1e-8 && row[2] < 1e-8);
    }
}

#[test]
fn transmon_sweep_prints_progress() {
    let dir = tempfile::tempdir().unwrap();
    let o = geotraj(&["transmon", "--gate", "Xpi2", "--drag", "on", "--points", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("loop candidate"));
    assert_eq!(csv_rows(&dir.path().join("transmon_Xpi2.csv")).len(), 2);
}

#[test]
fn twoqubit_small_map() {
    let dir = tempfile::tempdir().unwrap();
    let o = geotraj(
        &["--threads", "1", "twoqubit", "--gate", "iSWAP", "--branch", "shortest", "--nu-points", "2", "--beta-points", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let p = dir.path().join("twoqubit_iSWAP_nu_beta.csv");
    assert!(fs::read_to_string(&p).unwrap().starts_with("nu,beta,fidelity\n"));
    assert_eq!(csv_rows(&p).len(), 4);
    assert!(dir.path().join("twoqubit_iSWAP_nu_beta.svg").exists());
    assert!(dir.path().join("twoqubit_iSWAP_sensitivity_geometric.csv").exists());
}

#[test]
fn config_file_is_applied_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[scan]\npoints = 7\n").unwrap();
    let o = geotraj(
        &["--config", cfg.to_str().unwrap(), "scan", "--gate", "Xpi", "--chi1", "0.2pi", "--chi3", "0.8pi"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv_rows(&dir.path().join("scan_Xpi_detuning_geometric.csv")).len(), 7);

    fs::write(&cfg, "[scan]\npointz = 7\n").unwrap();
    let o = geotraj(&["--config", cfg.to_str().unwrap(), "scan", "--gate", "Xpi"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn threads_env_fallback_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_geotraj"))
        .args(["synth", "--gate", "H", "--out"])
        .arg(dir.path())
        .env("GEOTRAJ_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn step_cap_is_a_convergence_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[twoqubit]\nmax_steps = 10\n").unwrap();
    let o = geotraj(
        &["--config", cfg.to_str().unwrap(), "twoqubit", "--gate", "CZ", "--branch", "shortest", "--nu-points", "1", "--beta-points", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
