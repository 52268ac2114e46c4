use ices::assets;
use ices::environment::EnvConfig;
use ices::saferl::{read_metrics, train, AgentConfig, Checkpoint, RunFiles, METRICS_HEADER};

fn small() -> AgentConfig {
    AgentConfig {
        hidden: vec![16, 8],
        batch_size: 16,
        replay_start: 16,
        ..AgentConfig::default()
    }
}

#[test]
fn metrics_file_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let files = RunFiles {
        dir: tmp.path().to_path_buf(),
        checkpoint_every: Some(2),
    };
    let model = assets::sample_model(EnvConfig::default()).unwrap();
    let out = train(&model, &small(), 3, 3, Some(&files)).unwrap();

    let text = std::fs::read_to_string(files.metrics()).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], METRICS_HEADER.join(","));
    assert_eq!(lines.len(), 4);
    assert_eq!(read_metrics(&files.metrics()).unwrap(), out.metrics);

    let timing = std::fs::read_to_string(files.timing()).unwrap();
    assert!(timing.starts_with("episode,wall_ms\n"));
    assert_eq!(timing.lines().count(), 4);

    assert!(tmp.path().join("checkpoint_2.json").is_file());
    let cp = Checkpoint::load(&files.final_checkpoint()).unwrap();
    assert_eq!(cp.episodes_done, 3);
    let agent = cp.agent().unwrap();
    let s = vec![0.3; agent.state_dim];
    assert_eq!(agent.act(&s).unwrap(), out.trainer.agent.act(&s).unwrap());
}

#[test]
fn empty_run_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let files = RunFiles {
        dir: tmp.path().to_path_buf(),
        checkpoint_every: None,
    };
    let model = assets::sample_model(EnvConfig::default()).unwrap();
    train(&model, &small(), 1, 0, Some(&files)).unwrap();
    let text = std::fs::read_to_string(files.metrics()).unwrap();
    assert_eq!(text, METRICS_HEADER.join(",") + "\n");
    assert!(read_metrics(&files.metrics()).unwrap().is_empty());
    assert!(files.final_checkpoint().is_file());
}

#[test]
fn repeated_runs_write_identical_metrics() {
    let model = assets::sample_model(EnvConfig::default()).unwrap();
    let texts: Vec<String> = (0..2)
        .map(|_| {
            let tmp = tempfile::tempdir().unwrap();
            let files = RunFiles {
                dir: tmp.path().to_path_buf(),
                checkpoint_every: None,
            };
            train(&model, &small(), 9, 3, Some(&files)).unwrap();
            std::fs::read_to_string(files.metrics()).unwrap()
        })
        .collect();
    assert_eq!(texts[0], texts[1]);
}
