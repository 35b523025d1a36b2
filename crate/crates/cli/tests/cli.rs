use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn lpconc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpconc")).args(args).env_remove("LPCONC_WORKERS").output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(lpconc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lpconc(&["rates", "--dist", "normal", "--p", "1", "--delta", "0.1", "--bogus"]).status.code(), Some(2));
    assert_eq!(lpconc(&["rates", "--dist", "normal"]).status.code(), Some(2));
    assert_eq!(lpconc(&["--help"]).status.code(), Some(0));
}

#[test]
fn input_errors_exit_1() {
    assert_eq!(lpconc(&["rates", "--dist", "cauchy", "--p", "1", "--delta", "0.1"]).status.code(), Some(1));
    assert_eq!(lpconc(&["diagnose", "--input", "/nonexistent/file.csv"]).status.code(), Some(1));
    assert_eq!(lpconc(&["pstar", "--dist", "normal", "--n", "10", "--delta", "0.1", "--Delta", "0.2"]).status.code(), Some(1));
}

#[test]
fn pstar_report() {
    let v = json(&lpconc(&["pstar", "--dist", "twopoint:a=0.5,r=1", "--n", "100", "--delta", "0.1", "--Delta", "0.2"]));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["command"]["pstar"]["Delta"], 0.2);
    assert_eq!(v["result"]["method"], "exact-binomial");
    assert!(v["result"]["exact_prob_at_p_star"].as_f64().unwrap() <= 0.2);
}

#[test]
fn rates_csv_has_config_header_and_long_rows() {
    let out = lpconc(&["rates", "--dist", "uniform:b=1", "--p", "0.01,0.1,1", "--delta", "0.2", "--closed-form"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert_eq!(lines.next().unwrap(), "p,delta,sign,quantity,value");
    assert_eq!(lines.filter(|l| l.contains(",rate,")).count(), 6);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let args = ["curve", "--dist", "twopoint:a=0.5,r=1", "--p", "0.01,0.5", "--n", "10,100", "--M", "3000", "--seed", "7"];
    let with = |w: &str| {
        let mut a = vec!["--workers", w];
        a.extend(args);
        json(&lpconc(&a))["result"].clone()
    };
    assert_eq!(with("1"), with("3"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "a,b,c").unwrap();
    for i in 0..60 {
        writeln!(f, "{},{},{}", (i % 7) as f64 * 0.3, (i as f64 * 0.77).sin(), 1.0 + (i % 3) as f64).unwrap();
    }
    drop(f);
    let p = path.to_str().unwrap();
    for args in [
        vec!["perturb", "--input", p, "--gap", "0.05,0.1", "--p", "0.1,1,4", "--seed", "3", "--format", "csv"],
        vec!["diagnose", "--input", p, "--standardize", "--mode-shift", "5"],
        vec!["embedsim", "--M", "200", "--p", "0.5,2"],
        vec!["contrast", "--dist", "normal", "--n", "20", "--p", "0.5", "--M", "500"],
        vec!["validate", "--dist", "zeroinflated:a=0.1,base=uniform:b=1"],
    ] {
        let (a, b) = (lpconc(&args), lpconc(&args));
        assert!(a.status.success(), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn synthetic_perturb_trends() {
    let v = json(&lpconc(&["perturb", "--synthetic", "500x30", "--gap", "0.01,0.1", "--p", "0.01"]));
    let r = v["result"]["reports"].as_array().unwrap();
    assert!(r[1]["wasserstein_total"].as_f64().unwrap() > r[0]["wasserstein_total"].as_f64().unwrap());
}

#[test]
fn output_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.json");
    let out = lpconc(&["validate", "--dist", "normal", "--out", path.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["result"]["assumptions"]["a1_holds"], true);
}
