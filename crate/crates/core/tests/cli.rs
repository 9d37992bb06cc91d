use std::path::Path;
use std::process::{Command, Output};

fn langlab(args: &[&str], env_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_langlab"));
    cmd.args(args).env_remove("LANGLAB_OUT_DIR");
    if let Some(dir) = env_dir {
        cmd.env("LANGLAB_OUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn appendix_example_row() {
    let o = langlab(&["appendix-example", "--n", "1000"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,index,value,lower,upper,within"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "1000");
    assert_eq!(row[1], "13");
    assert_eq!(row[5], "true");
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(langlab(&["id-rate", "--bogus"], None).status.code(), Some(2));
    assert_eq!(langlab(&["no-such-command"], None).status.code(), Some(2));
    assert_eq!(langlab(&["--config", "/nonexistent/cfg.json", "id-rate"], None).status.code(), Some(2));
    assert_eq!(langlab(&["id-rate", "--n-grid", "0"], None).status.code(), Some(2));
    assert_eq!(langlab(&["--help"], None).status.code(), Some(0));
}

#[test]
fn config_schema_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema":1,"trails":5}"#).unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(langlab(&["--config", c, "id-rate"], None).status.code(), Some(2));
    std::fs::write(&cfg, r#"{"schema":9}"#).unwrap();
    assert_eq!(langlab(&["--config", c, "id-rate"], None).status.code(), Some(2));
    std::fs::write(&cfg, r#"{"schema":1,"n_grid":[4,8],"method":"exact"}"#).unwrap();
    let o = langlab(&["--config", c, "id-rate"], None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains(",IdErr,")).count(), 2);
}

#[test]
fn construction_failure_exits_3() {
    let o = langlab(&["lemma512", "--rate", "inverse-log", "--depth", "10"], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("construction failed"));
}

#[test]
fn out_dir_receives_output_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = langlab(&["gen-rate", "--n-grid", "1,2,4"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("gen-rate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("gen-rate.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "gen-rate");
    assert_eq!(manifest["all_passed"], true);
}

#[test]
fn json_output_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lemma.json");
    let o = langlab(
        &["lemma512", "--rate", "inverse-sqrt", "--depth", "3", "--format", "json", "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["schema"], 1);
    assert_eq!(v["artifacts"]["depth"], 3);
    assert_eq!(v["all_hold"], true);
}

#[test]
fn same_seed_same_bytes() {
    let run = |seed: &str| {
        stdout(&langlab(&["nfl", "--epsilon", "0.5", "--trials", "200", "--seed", seed, "--n-grid", "1,2"], None))
    };
    assert_eq!(run("5"), run("5"));
}
