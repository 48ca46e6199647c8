use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrl-sched")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn csv_is_byte_identical_across_processes() {
    let args = ["train", "--seed", "4", "--slots", "1500"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("iteration,slot,reward,ma_reward,drop_rate,p_0,p_1,j_tilde\n"));
}

#[test]
fn ablating_rule_component_drops_a_column() {
    let text = String::from_utf8(ok(&["train", "--slots", "300", "--ablate-dk"])).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "iteration,slot,reward,ma_reward,drop_rate,p_0,j_tilde");
}

#[test]
fn old_policy_roundtrip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let old = dir.path().join("old.bin");
    ok(&["make-old-policy", "--slots", "800", "--lambda-scale", "1.2", "--save-policy", path(&old)]);
    let saved = dir.path().join("new.bin");
    let csv = dir.path().join("train.csv");
    ok(&[
        "train", "--slots", "800", "--old-policy", path(&old), "--save-policy", path(&saved), "--out", path(&csv),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().next().unwrap().contains("p_2"));
    let a = ok(&["eval", "--slots", "600", "--policy", path(&saved)]);
    assert_eq!(a, ok(&["eval", "--slots", "600", "--policy", path(&saved)]));
}

#[test]
fn scenario_files_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let preset = ok(&["presets", "desk"]);
    let file = dir.path().join("quiet.toml");
    let text = String::from_utf8(preset).unwrap().replace("arrival_prob = 0.3", "arrival_prob = 0.0");
    assert!(text.contains("arrival_prob = 0.0"));
    std::fs::write(&file, text).unwrap();
    let csv = String::from_utf8(ok(&["eval", "--config", path(&file), "--slots", "400"])).unwrap();
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.0);
    }

    let bad = cli(&["eval", "--baseline", "oracle"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("oracle"));

    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, "[[user]]\ndeadline = 0\nlambda_kbit = 10.0\npath_loss_db = 130.0\n").unwrap();
    let out = cli(&["train", "--config", path(&broken), "--slots", "10"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("user[0].deadline"));

    assert!(!cli(&["train", "--config", "nowhere"]).status.success());
}
