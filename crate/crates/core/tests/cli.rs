use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_qmagnet");

fn run(sub: &str, config: Option<&str>, out: &Path, seed: u64) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = Command::new(BIN);
    cmd.arg(sub).arg("--out").arg(out).arg("--seed").arg(seed.to_string());
    if let Some(text) = config {
        let path = dir.path().join("run.cfg");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn report_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

#[test]
fn ramp_writes_one_row_per_point() {
    let out = tempfile::tempdir().unwrap();
    let status = run("ramp", Some(""), out.path(), 0);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = read(out.path(), "ramp.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "ratio,P_dd,P_uu,P_mixed,magnetization,eigenstate_overlap");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.last().unwrap()[4] >= 0.96);
}

#[test]
fn csv_numbers_carry_enough_digits() {
    let out = tempfile::tempdir().unwrap();
    assert!(run("gap", None, out.path(), 0).status.success());
    let csv = read(out.path(), "gap.csv");
    let value = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    let mantissa = value.split('e').next().unwrap().replace(['.', '-'], "");
    assert!(mantissa.len() >= 12, "{value}");
}

#[test]
fn unknown_key_exits_with_config_error() {
    let out = tempfile::tempdir().unwrap();
    let status = run("ramp", Some("isign.bx = 4\n"), out.path(), 0);
    assert_eq!(status.status.code(), Some(1));
    let err = String::from_utf8_lossy(&status.stderr);
    assert!(err.contains("isign.bx") && err.contains("ising.bx_khz"), "{err}");
    assert!(!out.path().join("ramp.csv").exists());
}

#[test]
fn missing_config_is_config_error() {
    let out = tempfile::tempdir().unwrap();
    let status = Command::new(BIN)
        .args(["gap", "--config", "/nonexistent/qmagnet.cfg", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
}

#[test]
fn truncation_overflow_is_numerical_failure() {
    let out = tempfile::tempdir().unwrap();
    let status = run("phonon", Some("phonon.g_up_khz = 400\nphonon.fock_levels = 8\n"), out.path(), 0);
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("fock_levels"));
    assert!(!out.path().join("phonon.csv").exists());
}

#[test]
fn flat_coupling_is_accepted() {
    let out = tempfile::tempdir().unwrap();
    let status = run("ramp", Some("ising.j_max_over_bx = 0\nsweep.points = 3\nramp.self_check = false\n"), out.path(), 0);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = read(out.path(), "ramp.csv");
    assert_eq!(csv.lines().count(), 4);
    for line in csv.lines().skip(1) {
        let ratio: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert_eq!(ratio, 0.0);
    }
}

#[test]
fn every_subcommand_is_byte_identical_on_rerun() {
    for sub in ["ramp", "parity", "phonon", "detect", "gap"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert!(run(sub, None, a.path(), 17).status.success(), "{sub}");
        assert!(run(sub, None, b.path(), 17).status.success(), "{sub}");
        let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{sub} {name:?}");
        }
    }
}

#[test]
fn detect_report_recovers_configured_populations() {
    let out = tempfile::tempdir().unwrap();
    let cfg = "detect.p_dd = 0.49\ndetect.p_uu = 0.49\ndetect.p_mixed = 0.02\n";
    assert!(run("detect", Some(cfg), out.path(), 3).status.success());
    let report = read(out.path(), "detect_report.txt");
    for key in ["P_dd", "P_uu", "P_mixed", "stderr_P_dd", "stderr_P_uu", "stderr_P_mixed", "loglik", "n_shots"] {
        report_value(&report, key);
    }
    assert!((report_value(&report, "P_dd") - 0.49).abs() < 0.02);
    assert_eq!(report_value(&report, "n_shots"), 10_000.0);
    let hist = read(out.path(), "histogram.csv");
    assert!(hist.starts_with("photons,count\n"));
    let total: u64 = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 10_000);
}

#[test]
fn different_seeds_change_detection() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run("detect", None, a.path(), 1).status.success());
    assert!(run("detect", None, b.path(), 2).status.success());
    assert_ne!(read(a.path(), "histogram.csv"), read(b.path(), "histogram.csv"));
}

#[test]
fn parity_and_phonon_reports() {
    let out = tempfile::tempdir().unwrap();
    assert!(run("parity", None, out.path(), 0).status.success());
    assert_eq!(read(out.path(), "parity.csv").lines().count(), 25);
    let report = read(out.path(), "parity_report.txt");
    for key in ["C", "stderr_C", "offset", "F"] {
        report_value(&report, key);
    }
    assert!(run("phonon", None, out.path(), 0).status.success());
    let phonon = read(out.path(), "phonon_report.txt");
    let a = report_value(&phonon, "J_eff_analytic_rad_s");
    let n = report_value(&phonon, "J_eff_numeric_rad_s");
    assert!(((a - n) / a).abs() < 0.05);
    assert!(read(out.path(), "phonon.csv").starts_with("time_us,spin_purity,mean_phonon\n"));
}
