use std::fs;
use std::path::Path;
use std::process::Command;

use ricci_lab::CSV_HEADER;

fn ricci_lab(args: &[&str], threads: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ricci-lab"))
        .args(args)
        .env("RICCI_LAB_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.conf");
    fs::write(&path, format!("{body}\noutput.dir = out\n")).unwrap();
    path.to_str().unwrap().to_string()
}

const FLAT: &str = "grid.n = 16\npreset.name = flat-const\npreset.phi = 0.3\npreset.u = 1.5\nflow.a = 0.5\nflow.b = 0.3\nflow.steps = 3";

const RANDOM: &str = "seed = 7\ngrid.n = 16\npreset.name = random-smooth\nflow.a = 0.5\nflow.b = 0.3\nflow.steps = 2";

#[test]
fn run_writes_a_report_with_every_check_once() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &format!("{FLAT}\nchecks.list = all"));
    let out = ricci_lab(&["run", &conf], "2");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    let checks = report.as_object().unwrap();
    assert_eq!(checks.len(), 15);
    for (name, entry) in checks {
        for key in ["terms", "eps_slope", "h_order", "verdict"] {
            assert!(entry.get(key).is_some(), "{name} lacks {key}");
        }
        for norms in entry["terms"].as_object().unwrap().values() {
            assert!(norms.get("linf").is_some() && norms.get("l2").is_some());
        }
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in checks.keys() {
        assert_eq!(stdout.lines().filter(|l| l.split_whitespace().next() == Some(name)).count(), 1);
    }
}

#[test]
fn csvs_have_the_exact_header_and_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &format!("{RANDOM}\nchecks.list = i3"));
    assert!(ricci_lab(&["run", &conf], "0").status.success());
    for name in ["series.csv", "series_ds_oracle.csv"] {
        let text = fs::read_to_string(dir.path().join("out").join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 3);
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &format!("{RANDOM}\nchecks.list = besse, i5, ibp, thm1-scalar"));
    let read = |f: &str| fs::read(dir.path().join("out").join(f)).unwrap();
    assert!(ricci_lab(&["run", &conf], "1").status.success());
    let first = (read("report.json"), read("series.csv"));
    assert!(ricci_lab(&["run", &conf], "4").status.success());
    assert_eq!(first, (read("report.json"), read("series.csv")));
}

#[test]
fn exit_status_contract() {
    let dir = tempfile::tempdir().unwrap();
    // a strict check with a formula discrepancy fails the run
    let conf = write_config(dir.path(), &format!("{RANDOM}\nchecks.list = ds-dt\nchecks.strict = ds-dt\nchecks.levels = 2"));
    let out = ricci_lab(&["run", &conf], "0");
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    // the same discrepancy outside the strict set is only reported
    let conf = write_config(dir.path(), &format!("{RANDOM}\nchecks.list = ds-dt\nchecks.strict = ibp\nchecks.levels = 2"));
    assert_eq!(ricci_lab(&["run", &conf], "0").status.code(), Some(0));
    // configuration errors
    let conf = write_config(dir.path(), "grid.n = 16\ngrid.colour = red");
    let out = ricci_lab(&["run", &conf], "0");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.colour"));
    assert_eq!(ricci_lab(&["run", &conf], "many").status.code(), Some(2));
}

#[test]
fn sweep_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &format!("{RANDOM}\nchecks.list = besse2, i3"));
    assert!(ricci_lab(&["run", &conf], "0").status.success());
    let out = ricci_lab(&["sweep", &conf, "--levels", "2"], "0");
    assert!(out.status.success());
    let table: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/sweep.json")).unwrap()).unwrap();
    assert_eq!(table["i3"]["n"], serde_json::json!([16, 32]));
    assert_eq!(ricci_lab(&["sweep", &conf, "--levels", "1"], "0").status.code(), Some(2));

    let csv = dir.path().join("out/series.csv");
    assert!(ricci_lab(&["plot", csv.to_str().unwrap()], "0").status.success());
    let gp = fs::read_to_string(dir.path().join("out/series.gp")).unwrap();
    assert!(gp.contains("using 1:2") && gp.contains("using 1:7"));
    assert!(gp.contains("strcol(1) eq 'besse2'"));

    let report = dir.path().join("out/report.json");
    assert_eq!(ricci_lab(&["plot", report.to_str().unwrap()], "0").status.code(), Some(2));
}

fn preset_config(name: &str) -> ricci_lab::ExperimentConfig {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    ricci_lab::ExperimentConfig::load(&dir.join(name)).unwrap()
}

#[test]
fn flat_constant_preset_verifies_everything() {
    let cfg = preset_config("flat-const.conf");
    let out = ricci_lab::run(&cfg).unwrap();
    for e in &out.evaluations {
        assert_eq!(e.report.verdict, ricci_lab::Verdict::Verified, "{}", e.check);
        let finest = e.levels.last().unwrap().residual;
        // the curvature variations difference O(1) curvature-free
        // quantities at steps ~1e-5, leaving a roundoff floor near 1e-10
        let floor = match e.check {
            ricci_lab::CheckName::Besse(2..=4) => 1e-10,
            _ => 1e-11,
        };
        assert!(finest <= floor, "{}: {finest:e}", e.check);
    }
}

#[test]
fn conformal_bump_variation_has_second_order_eps_slope() {
    let mut cfg = preset_config("conformal-bump.conf");
    cfg.checks = vec![ricci_lab::CheckName::Besse(4)];
    let out = ricci_lab::run(&cfg).unwrap();
    let slope = out.report.checks["besse4"].eps_slope.unwrap();
    assert!((1.8..=2.2).contains(&slope), "{slope}");
}
