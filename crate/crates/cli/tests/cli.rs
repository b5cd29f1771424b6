use std::path::Path;
use std::process::{Command, Output};

fn hmappo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmappo")).args(args).output().expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

/// A tiny but complete training configuration.
fn write_config(dir: &Path, agents: usize) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(
        &path,
        format!(
            "# smoke run\nenv = hazardous-nav\nagents = {agents}\ntotal_episodes = 16\nepisodes_per_batch = 8\n\
             epochs = 1\nminibatches = 2\npolicy_hidden = 8\ncritic_hidden = 8,8\nlocal_critic_hidden = 8\n\
             episode_length = 10\ntrials = 2\ncheckpoint_interval = 1\nout = {}\n",
            dir.join("out").display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn verify_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = hmappo(&["verify", "--report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("[PASS] zero-bias"));
    let json = std::fs::read_to_string(report).unwrap();
    assert!(json.contains("\"checks\""));
}

#[test]
fn verify_over_budget_fails() {
    let o = hmappo(&["verify", "--budget", "10"]);
    assert!(!o.status.success());
    assert!(text(&o).contains("budget"));
}

#[test]
fn check_env_passes_on_both_hazard_scenarios() {
    for env in ["hazardous-nav", "hazardous-comm"] {
        let o = hmappo(&["check-env", "--env", env, "--samples", "2000"]);
        assert!(o.status.success(), "{}", text(&o));
        assert_eq!(text(&o).matches("[PASS]").count(), 4);
    }
    assert!(!hmappo(&["check-env", "--env", "atari"]).status.success());
}

#[test]
fn train_eval_aggregate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 2);
    let o = hmappo(&["train", "--config", cfg.to_str().unwrap(), "--variant", "central-critic"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = dir.path().join("out");
    for f in ["config.txt", "aggregate.csv", "trial_0.csv", "trial_1.csv", "trial_0_iterations.csv", "trial_1_final.bin", "trial_0_ckpt_8.bin"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(std::fs::read_to_string(out.join("config.txt")).unwrap().contains("variant = central-critic"));
    let trial = std::fs::read_to_string(out.join("trial_1.csv")).unwrap();
    assert_eq!(trial.lines().next(), Some("episode,trial,mean_return"));
    assert_eq!(trial.lines().count(), 3);

    let before = std::fs::read(out.join("aggregate.csv")).unwrap();
    let o = hmappo(&["aggregate", "--runs", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(std::fs::read(out.join("aggregate.csv")).unwrap(), before);

    let ckpt = out.join("trial_0_final.bin");
    let o = hmappo(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "5", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("mean return"));
    let o = hmappo(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "0"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("empty"));

    // A checkpoint trained with two agents does not fit a three-agent world.
    let other_dir = dir.path().join("three");
    std::fs::create_dir_all(&other_dir).unwrap();
    let other = write_config(&other_dir, 3);
    let o = hmappo(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--config", other.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o).contains("configuration error"));
}

#[test]
fn train_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 2);
    let mut logs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = hmappo(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--trials", "1"]);
        assert!(o.status.success(), "{}", text(&o));
        logs.push((
            std::fs::read(out.join("trial_0.csv")).unwrap(),
            std::fs::read(out.join("trial_0_iterations.csv")).unwrap(),
            std::fs::read(out.join("trial_0_final.bin")).unwrap(),
        ));
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn bad_arguments_fail() {
    assert!(!hmappo(&["train", "--variant", "coma", "--episodes", "1"]).status.success());
    assert!(!hmappo(&["train", "--set", "novalue", "--episodes", "1"]).status.success());
    assert!(!hmappo(&["frobnicate"]).status.success());
}
