use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn pt_rotor(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pt-rotor"))
        .args(args)
        .current_dir(dir)
        .env_remove("PT_ROTOR_CONFIG_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn antiresonance_spectrum_is_two_valued() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pt_rotor(
        &["spectrum", "--beta-rational", "1/2", "--K", "3", "--lambda", "0.3", "--Ns", "100", "--out", "s"],
        tmp.path(),
    );
    ok(&out);
    let rows = csv_rows(&tmp.path().join("s/spectrum.csv"));
    assert_eq!(rows[0], ["re_epsT", "im_epsT", "R", "center", "edge_flagged"]);
    assert_eq!(rows.len(), 202);
    for r in &rows[1..] {
        if r[4] == "false" {
            let re: f64 = r[0].parse().unwrap();
            let im: f64 = r[1].parse().unwrap();
            assert!(re.abs().min(std::f64::consts::PI - re.abs()) < 1e-8 && im.abs() < 1e-8);
        }
    }
}

#[test]
fn fig1a_spectrum_is_unbroken_at_small_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pt_rotor(
        &["spectrum", "--two-pi-beta", "0.7", "--K", "3", "--lambda", "0.1", "--Ns", "1000", "--out", "s"],
        tmp.path(),
    );
    ok(&out);
    assert_eq!(csv_rows(&tmp.path().join("s/spectrum.csv")).len(), 2002);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("s/summary.json")).unwrap()).unwrap();
    assert!(summary["mean_abs_im_eps_t"].as_f64().unwrap() < 1e-4);
}

#[test]
fn missing_beta_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pt_rotor(&["spectrum", "--K", "3"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
    let out = pt_rotor(&["spectrum", "--K"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = pt_rotor(&["spectrum", "--beta", "1/2", "--two-pi-beta", "0.7", "--K", "3"], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn bad_config_reports_file_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("a.conf"), "K = 3\nbeta = 1/2\ncolour = red\n").unwrap();
    let out = pt_rotor(&["spectrum", "--config", "a.conf"], tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("a.conf:3") && err.contains("colour"), "{err}");

    fs::write(tmp.path().join("b.conf"), "K = 3\nthis line is garbage\n").unwrap();
    let out = pt_rotor(&["spectrum", "--config", "b.conf"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn layers_apply_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let confdir = tmp.path().join("defaults");
    fs::create_dir(&confdir).unwrap();
    fs::write(confdir.join("evolve.conf"), "K = 1\nbeta = 1/4pi\nNs = 30\nkicks = 5\n").unwrap();
    fs::write(tmp.path().join("mine.conf"), "K = 2\n").unwrap();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["evolve", "--config", "mine.conf", "--out", out];
        args.extend_from_slice(extra);
        let o = Command::new(env!("CARGO_BIN_EXE_pt-rotor"))
            .args(&args)
            .current_dir(tmp.path())
            .env("PT_ROTOR_CONFIG_DIR", &confdir)
            .output()
            .unwrap();
        ok(&o);
        manifest(&tmp.path().join(out))
    };
    let m = run(&[], "a");
    assert_eq!(m["params"]["K"], 2.0);
    assert_eq!(m["params"]["kicks"], 5);
    assert_eq!(m["params"]["Ns"], 30);
    let m = run(&["--K", "2.5", "--set", "kicks=7"], "b");
    assert_eq!(m["params"]["K"], 2.5);
    assert_eq!(m["params"]["kicks"], 7);
    assert_eq!(m["config_sources"].as_array().unwrap().len(), 3);
}

#[test]
fn runs_are_deterministic_and_manifests_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "evolve", "--beta", "1/12", "--K", "3", "--lambda", "1/30", "--Ns", "300", "--kicks", "60",
            "--snapshots", "0,10,60", "--out", out,
        ]
    };
    ok(&pt_rotor(&args("a"), tmp.path()));
    ok(&pt_rotor(&args("b"), tmp.path()));
    let ma = manifest(&tmp.path().join("a"));
    assert_eq!(ma["params"]["quasi_momentum"], 0.0);
    assert_eq!(ma["params"]["beta"]["rational"], "1/12");
    let listed: Vec<String> = ma["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["file"].as_str().unwrap().to_string())
        .collect();
    let mut on_disk: Vec<String> = fs::read_dir(tmp.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(sorted, on_disk);
    assert_eq!(listed.len(), 4);
    for entry in ma["outputs"].as_array().unwrap() {
        let name = entry["file"].as_str().unwrap();
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
        assert_eq!(entry["sha256"].as_str().unwrap(), hex_digest(&a));
    }
    let series = csv_rows(&tmp.path().join("a/series.csv"));
    assert_eq!(series[0], ["n", "P", "mean_l", "spread", "raw_spread"]);
    assert_eq!(series.len(), 62);
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn fig2_bands_preset() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&pt_rotor(&["bands", "--preset", "fig2", "--out", "b"], tmp.path()));
    let rows = csv_rows(&tmp.path().join("b/bands.csv"));
    assert_eq!(rows[0], ["band", "q", "re_epsT", "im_epsT"]);
    assert_eq!(rows.len(), 12 * 201 + 1);
    let out = pt_rotor(&["bands", "--beta", "0.7/2pi", "--K", "3"], tmp.path());
    assert!(!out.status.success());
    let out = pt_rotor(&["bands", "--preset", "fig6"], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn threshold_sweep_is_sorted_by_beta() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&pt_rotor(
        &["threshold", "--K", "3", "--beta", "1/2,1/12", "--Ns", "100", "--workers", "2", "--out", "t"],
        tmp.path(),
    ));
    let rows = csv_rows(&tmp.path().join("t/threshold.csv"));
    assert_eq!(rows[0], ["two_pi_beta", "beta", "lambda_pt", "outcome"]);
    let b1: f64 = rows[1][1].parse().unwrap();
    let b2: f64 = rows[2][1].parse().unwrap();
    assert!(b1 < b2);
    // flat bands at antiresonance never break
    assert_eq!(rows[2][3], "unbroken");
    assert!(tmp.path().join("t/scan_00.csv").is_file());
    assert_eq!(manifest(&tmp.path().join("t"))["workers"], 2);
}

#[test]
fn resonance_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&pt_rotor(&["resonance", "--kicks", "20", "--out", "r"], tmp.path()));
    let saddle: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("r/saddle.json")).unwrap()).unwrap();
    assert!((saddle["group_velocity"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    let rows = csv_rows(&tmp.path().join("r/comparison_n00020.csv"));
    assert_eq!(rows[0], ["l", "abs2_exact", "abs2_asymptotic"]);
    let m = manifest(&tmp.path().join("r"));
    assert!(m["params"]["Ns"].as_u64().unwrap() > 90);
    assert_eq!(csv_rows(&tmp.path().join("r/dispersion.csv")).len(), 1025);
}

#[test]
fn cavity_small_grid() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&pt_rotor(
        &[
            "cavity",
            "--preset",
            "fig7",
            "--set",
            "waist_over_period=6",
            "--set",
            "extent_periods=64",
            "--set",
            "points=4096",
            "--trips",
            "4",
            "--out",
            "c",
        ],
        tmp.path(),
    ));
    let trips = csv_rows(&tmp.path().join("c/trips.csv"));
    assert_eq!(trips[0], ["n", "power", "meanX_over_spacing", "stdX_over_spacing"]);
    assert_eq!(trips.len(), 6);
    assert!(tmp.path().join("c/far_field_n000.csv").is_file());
    assert!(tmp.path().join("c/far_field_n004.csv").is_file());
    let units: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("c/units.json")).unwrap()).unwrap();
    assert!((units["beta"].as_f64().unwrap() - 1.0 / 12.0).abs() < 1e-12);
    let m = manifest(&tmp.path().join("c"));
    assert_eq!(m["params"]["round_trips"], 4);
    assert_eq!(m["params"]["far_field_trips"], serde_json::json!([0, 4]));
}

#[test]
fn verify_fast_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pt_rotor(&["verify", "--level", "fast"], tmp.path());
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    assert!(!text.contains("FAIL"));
}
