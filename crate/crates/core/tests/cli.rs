use std::path::Path;
use std::process::{Command, Output};

const EXP1D: &str = "experiment = \"exp1d\"\nalpha = 2.0\nbeta = 0.0\n";

fn degot(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_degot"))
        .args(args)
        .env("DEGOT_OUT", out)
        .output()
        .expect("degot runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_artifacts_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "exp1d.toml", EXP1D);
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let a = degot(&out_a, &["run", &cfg]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(String::from_utf8_lossy(&a.stdout).starts_with("PASS"));
    for f in ["report.csv", "manifest.toml", "config.toml", "exp1d_map.svg"] {
        assert!(out_a.join("exp1d").join(f).is_file(), "missing {f}");
    }
    assert!(degot(&out_b, &["run", &cfg]).status.success());
    let csv_a = std::fs::read(out_a.join("exp1d/report.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("exp1d/report.csv")).unwrap();
    assert_eq!(csv_a, csv_b);

    // the canonical config reruns to the same report
    let canon = out_a.join("exp1d/config.toml");
    let out_c = tmp.path().join("c");
    assert!(degot(&out_c, &["run", canon.to_str().unwrap()]).status.success());
    assert_eq!(csv_a, std::fs::read(out_c.join("exp1d/report.csv")).unwrap());

    let rep = degot(&out_a, &["report", out_a.to_str().unwrap()]);
    assert!(rep.status.success());
    assert!(String::from_utf8_lossy(&rep.stdout).contains("report.csv"));
}

#[test]
fn bad_config_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", "experiment = \"exp1d\"\nalpha = -1.0\nbeta = 0.0\n");
    let r = degot(tmp.path(), &["run", &bad]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("alpha"));

    let typo = write(tmp.path(), "typo.toml", "experiment = \"exp1d\"\nalpha = 1.0\nbeta = 0.0\nsede = 3\n");
    let r = degot(tmp.path(), &["run", &typo]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("sede"));
}

#[test]
fn report_without_reports_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let r = degot(tmp.path(), &["report", tmp.path().to_str().unwrap()]);
    assert!(!r.status.success());
}
