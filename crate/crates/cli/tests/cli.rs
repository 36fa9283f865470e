use std::path::Path;
use std::process::{Command, Output};

fn dwig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dwig"))
        .args(args)
        .env_remove("DWIG_WORKERS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn mc_edge_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    let args = ["mc-edge", "--n", "40", "--N", "60", "--seed", "7"];
    assert!(dwig(&[&args[..], &["--out", &a]].concat()).status.success());
    assert!(dwig(&[&args[..], &["--out", &b, "--workers", "1"]].concat()).status.success());
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().nth(1), Some("sample,k,value,e_plus_hat,gamma0"));
    assert_eq!(text.lines().count(), 42);
}

#[test]
fn malformed_measure_is_a_config_error() {
    let out = dwig(&["fc-solve", "--measure", r#"{"type":"atomic","atomz":[[0,1]]}"#]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("atomz"));
    let out = dwig(&["fc-solve", "--measure", r#"{"type":"atomic","atoms":[[0,0.7]]}"#]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "c.json");
    std::fs::write(&cfg, r#"{"measure":"two-atom","lambda":0.2,"colour":1}"#).unwrap();
    assert_eq!(dwig(&["edge-scaling", "--config", &cfg]).status.code(), Some(2));
    std::fs::write(&cfg, r#"{"measure":"two-atom","lambda":0.2,"seed":11}"#).unwrap();
    let out = dwig(&["edge-scaling", "--config", &cfg, "--lambda", "0.4"]);
    let doc = json(&out);
    assert_eq!(doc["config"]["lambda"], 0.4);
    assert_eq!(doc["seed"], 11);
    assert_eq!(doc["schema_version"], 1);
}

#[test]
fn semicircle_density_from_fc_solve() {
    let out = dwig(&["fc-solve", "--measure", "semicircle", "--lo", "-1.9", "--hi", "1.9", "--points", "39"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(2) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let exact = (4.0 - f[0] * f[0]).sqrt() / (2.0 * std::f64::consts::PI);
        assert!((f[3] - exact).abs() < 1e-5, "E = {}", f[0]);
        rows += 1;
    }
    assert_eq!(rows, 39);
}

#[test]
fn two_atom_at_large_lambda_has_a_gap() {
    let out = dwig(&["fc-solve", "--measure", "two-atom", "--lambda", "1.5", "--lo", "-3", "--hi", "3", "--points", "61"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let density: Vec<(f64, f64)> = text
        .lines()
        .skip(2)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[3])
        })
        .collect();
    let at = |e: f64| density.iter().find(|r| (r.0 - e).abs() < 1e-9).unwrap().1;
    assert!(at(0.0) < 1e-8);
    assert!(at(1.5) > 0.1 && at(-1.5) > 0.1);
}

#[test]
fn edge_scaling_statuses() {
    let doc = json(&dwig(&["edge-scaling", "--measure", "two-atom", "--lambda", "0"]));
    assert_eq!(doc["status"], "pass");
    assert!((doc["scaling"]["zeta"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((doc["scaling"]["gamma"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let out = dwig(&["edge-scaling", "--measure", "jacobi:1,2", "--lambda", "3"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["status"], "assumption_failed");
}

#[test]
fn regime_names_the_convolution_law() {
    let out = dwig(&["regime", "--delta", "0.166667", "--N", "60", "--n", "40", "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    assert_eq!(doc["law"], "tw1_gauss_conv");
    assert_eq!(doc["results"][0]["regime"], "convolution");
    assert!(doc["runtime"].as_f64().is_some());
}

#[test]
fn verify_identities_passes() {
    let out = dwig(&["verify", "--suite", "identities"]);
    assert!(out.status.success());
    let doc = json(&out);
    assert_eq!(doc["pass"], true);
    for key in ["resolvent", "ward"] {
        assert!(doc["identities"][key]["residual"]["max"].as_f64().unwrap() < 1e-9);
    }
}

#[test]
fn verify_exit_code_on_failure() {
    // a negative exponent makes the local-law bound unattainable
    let out = dwig(&["verify", "--suite", "local-law", "--N", "40", "--seeds", "4", "--bound-exponent=-3"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn tw_table_columns() {
    let out = dwig(&["tw-table", "--lo", "-2", "--hi", "2", "--step", "0.5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines().skip(1);
    assert_eq!(lines.next(), Some("s,F1,F2"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.windows(2).all(|w| w[1][1] > w[0][1] && w[1][2] > w[0][2]));
}

#[test]
fn sample_binary_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let bin = path(dir.path(), "s.bin");
    let out = dwig(&["sample", "--N", "8", "--count", "3", "--format", "binary", "--out", &bin, "--lambda0", "0.3"]);
    assert!(out.status.success());
    let spectra = dwig_core::ensemble::read_spectra_binary(std::fs::File::open(&bin).unwrap()).unwrap();
    assert_eq!(spectra.len(), 3);
    assert!(spectra.iter().all(|s| s.eigenvalues.len() == 8 && s.eigenvalues.windows(2).all(|w| w[0] >= w[1])));
}

#[test]
fn dbm_csv_layout() {
    let out = dwig(&["dbm", "--N", "30", "--trajectories", "2", "--times", "0,0.5,1", "--lambda0", "0.2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().nth(1), Some("trajectory,t,value"));
    assert_eq!(text.lines().count(), 2 + 6);
}
