use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_STUDY: &str = "seed = 3
replications = 3
methods = [\"tmle\", \"de\", \"ndi\", \"ani\"]
oracle_n_mc = 4000
[sim]
n_nodes = 60
rho0 = 0.3
[bootstrap]
n_boot = 20
outer = 4
inner = 4
";

fn nartmle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nartmle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn ring_data(dir: &Path, n: usize) -> (String, String) {
    let mut data = String::from("id,y,z,x1,x2\n");
    let mut edges = String::from("i,j\n");
    for i in 0..n {
        let x1 = (i as f64 * 0.7).sin();
        let x2 = (i % 3) as f64;
        let z = i % 2;
        let y = 0.5 + z as f64 + 0.3 * x1 + 0.1 * (i as f64).cos();
        data.push_str(&format!("{},{y},{z},{x1},{x2}\n", 10 * i));
        edges.push_str(&format!("{},{}\n", 10 * i, 10 * ((i + 1) % n)));
    }
    (
        write(dir, "data.csv", &data),
        write(dir, "edges.csv", &edges),
    )
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&nartmle(&["--help"])), 0);
    assert_eq!(code(&nartmle(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&nartmle(&["frobnicate"])), 1);
    assert_eq!(code(&nartmle(&["simulate", "--config"])), 1);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let unknown = write(
        dir.path(),
        "a.toml",
        "replications = 2\nfrobnicate = true\n",
    );
    let res = nartmle(&["simulate", "--config", &unknown, "--out", out]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("frobnicate"));

    let bad = write(dir.path(), "b.toml", "level = 1.5\n");
    assert_eq!(code(&nartmle(&["oracle", "--config", &bad])), 1);
    let missing = dir.path().join("nope.toml");
    assert_eq!(
        code(&nartmle(&["oracle", "--config", missing.to_str().unwrap()])),
        1
    );
}

#[test]
fn simulate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "study.toml", SMALL_STUDY);
    let out = dir.path().join("out");
    let res = nartmle(&[
        "simulate",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,bias,se,cp,mean_se,runtime_s"));
    let methods: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["tmle", "de", "ndi", "ani"]);

    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["replications"].as_array().unwrap().len(), 3);
    assert_eq!(json["config"]["seed"], 3);
    assert!(json["seeds"]["derivation"]
        .as_str()
        .unwrap()
        .contains("ChaCha8"));
    assert!(out.join("timing.json").exists());
}

#[test]
fn oracle_matches_study_truth() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "study.toml", SMALL_STUDY);
    let res = nartmle(&["oracle", "--config", &config]);
    assert_eq!(code(&res), 0);
    let oracle: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(oracle["n_nodes"], 60);

    let out = dir.path().join("out");
    nartmle(&[
        "simulate",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["metrics"]["psi_true"], oracle["psi"]);
}

#[test]
fn estimate_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (data, edges) = ring_data(dir.path(), 50);
    let config = write(
        dir.path(),
        "est.toml",
        "methods = [\"tmle\", \"de\", \"ndi\", \"ani\"]\n[bootstrap]\nn_boot = 20\nouter = 4\ninner = 4\n",
    );
    let out = dir.path().join("out");
    let res = nartmle(&[
        "estimate",
        "--data",
        &data,
        "--edges",
        &edges,
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("method,psi_hat,se,ci_lo,ci_hi,runtime_s\n"));
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["n_nodes"], 50);
    assert_eq!(json["n_edges"], 50);
    let tmle = &json["methods"]["tmle"];
    assert_eq!(tmle["status"], "ok");
    let (lo, psi, hi) = (
        tmle["ci_lo"].as_f64().unwrap(),
        tmle["psi_hat"].as_f64().unwrap(),
        tmle["ci_hi"].as_f64().unwrap(),
    );
    assert!(lo < psi && psi < hi);
}

#[test]
fn bad_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = ring_data(dir.path(), 20);
    let edges = write(dir.path(), "bad_edges.csv", "i,j\n0,10\n10,999\n");
    let config = write(dir.path(), "est.toml", "methods = [\"tmle\"]\n");
    let out = dir.path().join("out");
    let res = nartmle(&[
        "estimate",
        "--data",
        &data,
        "--edges",
        &edges,
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("999"));

    let garbled = write(dir.path(), "garbled.csv", "id,y,z,x1\n0,1.0,maybe,0.2\n");
    let res = nartmle(&[
        "estimate",
        "--data",
        &garbled,
        "--edges",
        &edges,
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn selftest_passes() {
    let res = nartmle(&["selftest"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));
    assert!(!String::from_utf8_lossy(&res.stdout).contains("FAIL"));
}
