use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn btnslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btnslab")).args(args).env_remove("BTNSLAB_THREADS").output().expect("spawn btnslab")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = r#"{
  "experiment": "separation-descent",
  "len": 5,
  "ansatz": {"kind": "btns", "bond": 1, "a": 1},
  "optimizer": {"max_iters": 6, "translation_invariant": true},
  "seeds": [3, 1]
}"#;

fn numeric_columns(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            format!("{},{},{},{}", cols[0], cols[1], cols[2], cols[4])
        })
        .collect()
}

#[test]
fn run_writes_traces_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let o = btnslab(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    for seed in [1, 3] {
        let text = fs::read_to_string(out.join("seeds").join(format!("seed-{seed}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,objective,grad_norm,wall_ms,seed"));
        let iters: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(!iters.is_empty());
        assert!(iters.windows(2).all(|w| w[1] > w[0]), "iteration column not increasing: {iters:?}");
    }

    let merged = fs::read_to_string(out.join("trace.csv")).unwrap();
    let seeds: Vec<&str> = merged.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    let first_one = seeds.iter().position(|&s| s == "1").unwrap();
    assert!(seeds[..first_one].iter().all(|&s| s == "3"), "merged trace not in config seed order");

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "separation-descent");
    assert!(summary["best_objective"].as_f64().unwrap().is_finite());
    assert!([1, 3].contains(&summary["best_seed"].as_u64().unwrap()));
    let hash = summary["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 40);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut traces = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "3")] {
        let out = tmp.path().join(name);
        let o = btnslab(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        traces.push(numeric_columns(&fs::read_to_string(out.join("trace.csv")).unwrap()));
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn output_directory_falls_back_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("from-config");
    let body = SMALL.replace("\"seeds\"", &format!("\"output\": {:?},\n  \"seeds\"", target.to_str().unwrap()));
    let cfg = write_config(tmp.path(), &body);
    let o = btnslab(&["run", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(target.join("summary.json").exists());
}

#[test]
fn invalid_ansatz_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL.replace(r#""a": 1}"#, r#""a": 1, "dloc": 2}"#);
    let cfg = write_config(tmp.path(), &body);
    let out = tmp.path().join("out");
    let o = btnslab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn malformed_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for body in ["{", r#"{"experiment": "nope", "ansatz": {"kind": "tns", "bond": 1}, "seeds": [1]}"#, &SMALL.replace("\"len\": 5", "\"len\": 4"), &SMALL.replace("[3, 1]", "[]")] {
        let cfg = write_config(tmp.path(), body);
        let o = btnslab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "config {body}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists());
    }
    let o = btnslab(&["run", "--config", tmp.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn list_models_names_every_model_and_experiment() {
    let o = btnslab(&["list-models"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["heisenberg", "separation", "tstate", "wstate", "ghz3", "tstate-descent", "separation-descent", "heisenberg-ite"] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn dump_state_writes_json() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("psi.json");
    let o = btnslab(&["dump-state", "separation", "--len", "5", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["name"].as_str().unwrap().is_empty(), false);
    assert!(v["btns"].is_object());
    assert_eq!(v["shape"]["vertex_count"], 5);

    let o = btnslab(&["dump-state", "separation", "--len", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn p_sweep_reports_csv() {
    let o = btnslab(&["p-sweep", "separation", "--padded", "--bond", "2", "--p", "0.3", "1.0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0][1] > 1.0 - 1e-10);
    assert_eq!(rows[1][1], 0.0);
}

#[test]
fn check_passes() {
    let o = btnslab(&["check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8(o.stdout).unwrap().contains("FAIL"));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg: btnslab::ExperimentConfig = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert_eq!(seen, 3);
}
