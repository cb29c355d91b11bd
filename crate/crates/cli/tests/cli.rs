use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn hcwand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcwand"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let o = hcwand(args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&stdout(&o)).unwrap()
}

#[test]
fn solve_examples() {
    let v = json(&["solve", "--mode", "ti-q4", "--k", "2", "--lambda", "3", "--lambda2", "1", "--format", "json"]);
    assert_eq!(v["count"], 3);
    assert_eq!(v["critical"].as_f64().unwrap(), 2.0);
    assert_eq!(v["normalisable"], false);

    let v = json(&["solve", "--mode", "bip-q2", "--k", "2", "--lambda", "1", "--format", "json"]);
    assert_eq!(v["count"], 3);
    assert_eq!(v["critical"].as_f64().unwrap(), 2.0);
    assert_eq!(v["solutions"][1]["descriptor"].as_array().unwrap().len(), 2);

    let v = json(&["solve", "--mode", "ti-q2", "--k", "4", "--lambda", "0.7", "--format", "json"]);
    assert_eq!(v["count"], 1);
    assert!(v["critical"].is_null());

    let o = hcwand(&["solve", "--mode", "ti-q4", "--k", "2", "--lambda", "3", "--lambda2", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("normalisable: false"));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["solve", "--mode", "q3", "--k", "2", "--lambda", "1"][..],
        &["solve", "--mode", "ti-q2", "--k", "1", "--lambda", "1"],
        &["solve", "--mode", "ti-q4", "--k", "2", "--lambda", "1"],
        &["scan", "--mode", "bip-q2", "--k", "2", "--lambda-min", "2", "--lambda-max", "1"],
        &["scan", "--mode", "bip-q2", "--k", "2", "--lambda-min", "1", "--lambda-max", "2", "--steps", "1"],
        &["verify", "--k-min", "5", "--k-max", "3"],
        &["verify", "--k-min", "1"],
        &["frobnicate"],
        &["solve", "-k", "2"],
    ] {
        assert_eq!(hcwand(args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn verify_reports() {
    let o = hcwand(&["verify", "--k-max", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("x4=6"));
    let v = json(&["verify", "--k-max", "12", "--format", "json"]);
    assert_eq!(v["passed"], true);
    assert_eq!(v["reports"].as_array().unwrap().len(), 11);
}

#[test]
fn scan_csv_and_json_agree() {
    let base = ["scan", "--mode", "ti-q4", "--k", "2", "--lambda2", "1", "--lambda-min", "1", "--lambda-max", "3", "--steps", "21"];
    let csv_text = stdout(&hcwand(&base));
    let mut args = base.to_vec();
    args.extend(["--format", "json"]);
    let v = json(&args);

    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["lambda", "count", "a_star", "a1", "a2", "deriv_at_x0"]
    );
    let rows = v["rows"].as_array().unwrap();
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), rows.len());
    for (rec, row) in records.iter().zip(rows) {
        for (i, key) in ["lambda", "count", "a_star", "a1", "a2", "deriv_at_x0"].iter().enumerate() {
            let field = &rec[i];
            if row[key].is_null() {
                assert_eq!(field, "");
            } else {
                assert_eq!(field.parse::<f64>().unwrap(), row[key].as_f64().unwrap(), "{key}");
            }
        }
    }
    let crit = &v["critical"];
    assert_eq!(crit["closed_form"].as_f64().unwrap(), 2.0);
    assert!(crit["rel_err"].as_f64().unwrap() < 1e-6);
}

#[test]
fn scans_are_byte_identical() {
    let args = ["scan", "--mode", "bip-q4-I4", "--k", "3", "--gamma", "0.5", "--lambda-min", "1", "--lambda-max", "10", "--steps", "50"];
    let a = hcwand(&args).stdout;
    let b = Command::new(env!("CARGO_BIN_EXE_hcwand"))
        .args(args)
        .env("HCWAND_THREADS", "1")
        .output()
        .unwrap()
        .stdout;
    assert_eq!(a, b);
}

#[test]
fn gamma_one_scan_matches_period_two() {
    let common = ["--k", "2", "--lambda-min", "1", "--lambda-max", "3", "--steps", "41"];
    let mut a = vec!["scan", "--mode", "bip-q4-I4", "--gamma", "1"];
    a.extend(common);
    let mut b = vec!["scan", "--mode", "bip-q2"];
    b.extend(common);
    assert_eq!(hcwand(&a).stdout, hcwand(&b).stdout);
}

#[test]
fn curve_output() {
    let v = json(&["curve", "--k", "3", "--lambda2", "0.4", "--format", "json"]);
    assert!((v["minimum"]["t"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let lmin = v["minimum"]["lambda"].as_f64().unwrap();
    assert!((lmin - 11.2 / 54.0).abs() < 1e-12 * lmin);
    let o = hcwand(&["curve", "--k", "3", "--lambda2", "1.6", "--steps", "11"]);
    assert!(stdout(&o).starts_with("t,lambda,a,c\n"));
    assert_eq!(stdout(&o).lines().count(), 12);
}

#[test]
fn simulate_statuses() {
    let v = json(&["simulate", "--k", "2", "--lambda", "3", "--boundary", "exact", "--format", "json"]);
    assert!(v["metrics"].as_array().unwrap().iter().all(|m| m.as_f64().unwrap() < 1e-10));

    let v = json(&["simulate", "--k", "2", "--lambda", "1", "--depth", "300", "--truncate", "310", "--format", "json"]);
    assert_eq!(v["target"], "alternating 2-cycle");
    assert!(v["final_metric"].as_f64().unwrap() < 1e-6);

    let o = hcwand(&["simulate", "--k", "2", "--lambda", "1e12", "--depth", "4", "--clip", "1e10", "--boundary", "constant"]);
    assert_eq!(o.status.code(), Some(3));

    let o = hcwand(&["simulate", "--k", "2", "--lambda", "1", "--depth", "60"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_and_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# point\nmode=bip-q2\nk=2\nlambda=3\nformat=json\n").unwrap();
    let out = dir.path().join("out.json");
    let o = hcwand(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--lambda",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["lambda"].as_f64().unwrap(), 1.0);
    assert_eq!(v["count"], 3);

    let o = hcwand(&["solve", "--config", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
