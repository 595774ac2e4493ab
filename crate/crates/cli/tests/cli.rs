use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin(out: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_critic-lab"));
    c.env("CRITIC_LAB_OUT", out);
    c
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin(out).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifest(out: &Path) -> Vec<Value> {
    fs::read_to_string(out.join("manifest.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn last_output(out: &Path, file: &str) -> PathBuf {
    let m = manifest(out);
    let outputs = m.last().unwrap()["outputs"].as_array().unwrap();
    let rel = outputs.iter().map(|v| v.as_str().unwrap()).find(|p| p.ends_with(file)).unwrap();
    out.join(rel)
}

fn sidecar(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(last_output(out, "histories.json")).unwrap()).unwrap()
}

fn id_of(map: &Value, label: &str) -> String {
    map.as_object().unwrap().iter().find(|(_, v)| v.as_str() == Some(label)).map(|(k, _)| k.clone()).unwrap()
}

fn rows(path: &Path) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.deserialize().map(|x| x.unwrap()).collect()
}

#[test]
fn dectiger_tables_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", "dectiger", "dectiger-tables"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("Q(s=L, listen²): computed -18.175"), "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn counterexample_flags_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", "oscillating", "counterexample"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("PASS [counterexample/oscillating_chain] p_TV converged: computed 0"));
    assert!(text.contains("PASS [counterexample/oscillating_chain] p_DV converged: computed 1"));
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", "--domain", "dectiger", "theorems"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL")));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["verify", "nowhere"][..],
        &["verify", "climb", "nonsense"],
        &["verify", "climb", "counterexample"],
        &["train", "climb", "--variant", "xyz"],
        &["train", "climb", "--gamma-override", "1.5"],
        &["export", "--model", "/no/such/file.json", "model"],
    ] {
        assert_eq!(run(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
    assert!(!dir.path().join("manifest.jsonl").exists());
}

#[test]
fn exported_model_matches_golden_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["export", "climb", "model"]);
    assert_eq!(o.status.code(), Some(0));
    let path = last_output(dir.path(), "model.json");
    let golden = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/models/climb_game.json");
    assert_eq!(fs::read_to_string(&path).unwrap(), fs::read_to_string(golden).unwrap());

    let o = run(dir.path(), &["verify", "--model", path.to_str().unwrap(), "values"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn dectiger_qtable_export_holds_history_table() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["export", "dectiger", "qtables"]).status.code(), Some(0));
    let side = sidecar(dir.path());
    let ll = "(listen,hear-left,listen,hear-left)";
    let h = id_of(&side["joint"], &format!("{ll}{ll}"));
    let table = rows(&last_output(dir.path(), "qtables.csv"));
    let value = |action: &str| -> f64 {
        table
            .iter()
            .find(|r| r["variant"] == "joint-history" && r["history_id"] == h && r["action_id"] == action)
            .map(|r| r["value"].parse().unwrap())
            .unwrap()
    };
    // joint action ids: agent 0 most significant, open-left = 1, open-right = 2
    assert!((value("4") - -49.93).abs() < 1e-2);
    assert!((value("8") - 19.93).abs() < 1e-2);
    assert!((value("5") - -100.0).abs() < 1e-2);
}

#[test]
fn dectiger_gradient_export_holds_biased_dimension() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["export", "dectiger", "gradients"]).status.code(), Some(0));
    let side = sidecar(dir.path());
    let h1 = id_of(&side["individual"]["0"], "listen,hear-left,listen,hear-left");
    let grads = rows(&last_output(dir.path(), "gradients.csv"));
    let g = |variant: &str| -> f64 {
        grads
            .iter()
            .find(|r| r["variant"] == variant && r["agent"] == "0" && r["history_id"] == h1 && r["action_id"] == "2")
            .map(|r| r["mean"].parse().unwrap())
            .unwrap()
    };
    assert!((g("iacc-h") - -0.319).abs() < 1e-3);
    assert!((g("iac") - g("iacc-h")).abs() < 1e-9);
}

#[test]
fn training_is_reproducible_and_manifested() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["train", "morning", "--variant", "iacc-h", "--seeds", "3", "--episodes", "300", "--mode", "sgd"];
    assert_eq!(run(dir.path(), &args).status.code(), Some(0));
    let first = fs::read(last_output(dir.path(), "iacc-h-sgd-trace.csv")).unwrap();
    assert_eq!(run(dir.path(), &args).status.code(), Some(0));
    let second = fs::read(last_output(dir.path(), "iacc-h-sgd-trace.csv")).unwrap();
    assert_eq!(first, second);

    let m = manifest(dir.path());
    assert_eq!(m.len(), 2);
    assert_eq!(m[0]["config_hash"], m[1]["config_hash"]);
    assert_eq!(m[0]["seeds"], serde_json::json!([0, 1, 2]));
    let mut seen = std::collections::HashSet::new();
    for line in &m {
        for p in line["outputs"].as_array().unwrap() {
            assert!(seen.insert(p.as_str().unwrap().to_string()), "output listed twice: {p}");
            assert!(dir.path().join(p.as_str().unwrap()).exists());
        }
    }
}

#[test]
fn sweep_writes_curves_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["sweep", "climb", "--variant", "iac,jac", "--seeds", "2", "--episodes", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let agg = rows(&last_output(dir.path(), "aggregate.csv"));
    assert_eq!(agg.iter().filter(|r| r["episode"] == "200").count(), 2);
    let curves = rows(&last_output(dir.path(), "jac-curves.csv"));
    let finals: Vec<f64> = curves.iter().filter(|r| r["iterate"] == "200").map(|r| r["j_exact"].parse().unwrap()).collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let row = agg.iter().find(|r| r["variant"] == "jac" && r["episode"] == "200").unwrap();
    assert!((row["mean"].parse::<f64>().unwrap() - mean).abs() < 1e-9);
}
