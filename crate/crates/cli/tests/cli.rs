use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
[run]
checkpoint_every = 0
[agent]
hidden = [16, 8]
batch_size = 16
replay_start = 16
";

fn ices(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ices"))
        .current_dir(dir)
        .env_remove("ICES_CONFIG")
        .args(args)
        .output()
        .unwrap()
}

fn small_config(dir: &Path) {
    fs::write(dir.join("small.toml"), SMALL).unwrap();
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ices(tmp.path(), &["--help"])), 0);
    assert_eq!(code(&ices(tmp.path(), &["--version"])), 0);
    assert_eq!(code(&ices(tmp.path(), &["train", "--no-such-flag"])), 1);
    assert_eq!(code(&ices(tmp.path(), &[])), 1);
}

#[test]
fn zero_episodes_gives_header_only_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ices(tmp.path(), &["train", "--episodes", "0", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = tmp.path().join("run");
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1);
    assert!(metrics.starts_with("episode,cumulative_reward,cumulative_cost,"));
    assert!(run.join("checkpoint.json").is_file());

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "train");
    assert_eq!(meta["seeds"], serde_json::json!([1]));
    assert_eq!(meta["day"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(meta["topology"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(meta["config"]["run"]["episodes"], 0);

    let resolved = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(resolved.contains("episodes = 0"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    for out in ["a", "b"] {
        let o = ices(
            tmp.path(),
            &[
                "--config",
                "small.toml",
                "train",
                "--episodes",
                "3",
                "--seed",
                "7",
                "--out",
                out,
            ],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = fs::read(tmp.path().join("a/metrics.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/metrics.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 4);
    assert_eq!(a, b);
}

#[test]
fn existing_run_is_not_overwritten_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    fs::create_dir(&run).unwrap();
    fs::write(run.join("keep.txt"), "x").unwrap();
    let o = ices(tmp.path(), &["train", "--episodes", "0", "--out", "run"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--force"));
    assert!(run.join("keep.txt").is_file());
    assert!(!run.join("metrics.csv").exists());

    let o = ices(
        tmp.path(),
        &["train", "--episodes", "0", "--out", "run", "--force"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!run.join("keep.txt").exists());
    assert!(run.join("metrics.csv").is_file());
}

#[test]
fn config_comes_from_the_environment_variable() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("env.toml"),
        "[run]\nseed = 42\nepisodes = 0\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ices"))
        .current_dir(tmp.path())
        .env("ICES_CONFIG", "env.toml")
        .args(["train", "--out", "run"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let resolved = fs::read_to_string(tmp.path().join("run/config.toml")).unwrap();
    assert!(resolved.contains("seed = 42"));
}

#[test]
fn configuration_problems_exit_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ices(
        tmp.path(),
        &["train", "--day", "missing.csv", "--out", "run"],
    );
    assert_eq!(code(&o), 1);
    assert!(!tmp.path().join("run").exists());

    fs::write(tmp.path().join("typo.toml"), "[agent]\nactor_rate = 1\n").unwrap();
    let o = ices(
        tmp.path(),
        &["--config", "typo.toml", "train", "--out", "run"],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("actor_rate"));

    fs::write(tmp.path().join("bad.csv"), "hour,price\n0,1\n").unwrap();
    let o = ices(tmp.path(), &["train", "--day", "bad.csv", "--out", "run"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn diverging_training_exits_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace(
        "[agent]\n",
        "[agent]\nactor_lr = 1e300\ncritic_lr = 1e300\n",
    );
    fs::write(tmp.path().join("diverge.toml"), cfg).unwrap();
    let o = ices(
        tmp.path(),
        &[
            "--config",
            "diverge.toml",
            "train",
            "--episodes",
            "3",
            "--out",
            "run",
        ],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("training fault"));
    assert!(tmp.path().join("run/fault_checkpoint.json").is_file());
}

#[test]
fn eval_writes_averages_and_a_day_trace() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let o = ices(
        tmp.path(),
        &[
            "--config",
            "small.toml",
            "train",
            "--episodes",
            "2",
            "--out",
            "run",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = ices(
        tmp.path(),
        &[
            "eval",
            "--checkpoint",
            "run/checkpoint.json",
            "--episodes",
            "3",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dir = tmp.path().join("run/eval");
    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 25);
    assert!(trace.starts_with("hour,x_e,x_g,x_h,"));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["episodes"], 3);
    assert_eq!(report["trained_episodes"], 2);
    assert_eq!(report["per_episode"].as_array().unwrap().len(), 3);
    let mean: f64 = report["per_episode"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["reward"].as_f64().unwrap())
        .sum::<f64>()
        / 3.0;
    let reward = report["reward"].as_f64().unwrap();
    assert!(reward.is_finite() && report["cost"].as_f64().unwrap().is_finite());
    assert!((mean - reward).abs() <= 1e-9 * reward.abs());
    assert!(String::from_utf8_lossy(&o.stdout).contains("mean reward"));
}

#[test]
fn eval_rejects_bad_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ices(tmp.path(), &["train", "--episodes", "0", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("run/checkpoint.json")).unwrap();
    let mut cp: serde_json::Value = serde_json::from_str(&text).unwrap();
    cp["version"] = serde_json::json!(999);
    fs::write(tmp.path().join("old.json"), cp.to_string()).unwrap();

    let o = ices(
        tmp.path(),
        &["eval", "--checkpoint", "old.json", "--episodes", "1"],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("version"));

    let o = ices(
        tmp.path(),
        &[
            "eval",
            "--checkpoint",
            "run/checkpoint.json",
            "--episodes",
            "1",
            "--augment-state",
            "--out",
            "e",
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn sweep_writes_one_run_per_cell_and_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let args = [
        "--config",
        "small.toml",
        "sweep",
        "--parameter",
        "penalty",
        "--values",
        "1,10,100,1000",
        "--seeds",
        "1",
        "--episodes",
        "2",
        "--workers",
        "2",
        "--out",
        "sw",
    ];
    let o = ices(tmp.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let root = tmp.path().join("sw");
    for v in ["1", "10", "100", "1000"] {
        let m = fs::read_to_string(root.join(format!("penalty_{v}/seed_1/metrics.csv"))).unwrap();
        assert_eq!(m.lines().count(), 3);
        let meta =
            fs::read_to_string(root.join(format!("penalty_{v}/seed_1/metadata.json"))).unwrap();
        assert!(meta.contains("td3-penalty"));
    }
    let summary = fs::read_to_string(root.join("summary.csv")).unwrap();
    let lines: Vec<_> = summary.lines().collect();
    assert_eq!(lines[0], "parameter,value,metric,seeds,ep_1,ep_2,final_2");
    assert_eq!(lines.len(), 9);
    let finals: Vec<f64> = lines[1..]
        .iter()
        .filter(|l| l.contains(",reward,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(finals.windows(2).all(|w| w[0] >= w[1]));

    fs::remove_file(root.join("summary.csv")).unwrap();
    let o = ices(tmp.path(), &["summarize", "sw"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(root.join("summary.csv")).unwrap(),
        summary
    );
}

#[test]
fn sweep_needs_values() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("empty.toml"), "[sweep]\nvalues = []\n").unwrap();
    let o = ices(
        tmp.path(),
        &["--config", "empty.toml", "sweep", "--out", "sw"],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("at least one value"));

    let o = ices(
        tmp.path(),
        &[
            "sweep",
            "--parameter",
            "gamma",
            "--values",
            "1",
            "--out",
            "sw",
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn failed_sweep_cells_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let o = ices(
        tmp.path(),
        &[
            "--config",
            "small.toml",
            "sweep",
            "--parameter",
            "critic_lr",
            "--values",
            "0.001,1e300",
            "--seeds",
            "1",
            "--episodes",
            "2",
            "--out",
            "sw",
        ],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let failures = fs::read_to_string(tmp.path().join("sw/failures.csv")).unwrap();
    assert_eq!(failures.lines().count(), 2);
    assert!(failures.contains("critic_lr_1e300"));
    let summary = fs::read_to_string(tmp.path().join("sw/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.contains("critic_lr,0.001,reward"));
}

#[test]
fn ablation_compares_both_models() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let o = ices(
        tmp.path(),
        &[
            "--config",
            "small.toml",
            "ablate-chp",
            "--seeds",
            "1,2",
            "--episodes",
            "2",
            "--out",
            "ab",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(tmp.path().join("ab/ablation.csv")).unwrap();
    let lines: Vec<_> = table.lines().collect();
    assert_eq!(
        lines[0],
        "model,seed,episodes,reward,cost,cost_e,cost_g,cost_h,chp_power,chp_heat,chp_cost"
    );
    assert_eq!(lines.len(), 7);
    assert!(lines.iter().any(|l| l.starts_with("detailed,mean,")));
    assert!(lines.iter().any(|l| l.starts_with("simplified,mean,")));
    let simplified =
        fs::read_to_string(tmp.path().join("ab/simplified/seed_1/config.toml")).unwrap();
    assert!(simplified.contains("simplified_chp = true"));
}

#[test]
fn all_cells_failing_still_reports_the_fault() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let o = ices(
        tmp.path(),
        &[
            "--config",
            "small.toml",
            "sweep",
            "--parameter",
            "critic_lr",
            "--values",
            "1e300",
            "--seeds",
            "1,2",
            "--episodes",
            "2",
            "--out",
            "sw",
        ],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("2 of 2 runs failed"));
}

#[test]
fn repeated_seeds_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ices(
        tmp.path(),
        &[
            "ablate-chp",
            "--seeds",
            "1,1",
            "--episodes",
            "1",
            "--out",
            "ab",
        ],
    );
    assert_eq!(code(&o), 1);
    assert!(!tmp.path().join("ab").exists());
}
