use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use ste_skill::classify::TrainedModel;
use ste_skill::ingest::load_manifest;
use ste_skill::synthetic::{write_corpus, write_raw_layout, CorpusSpec};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ste-skill"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn error_of(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line on stderr");
    serde_json::from_str::<Value>(line).unwrap()["error"].clone()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn fixture(dir: &Path, matches: usize, players: usize) -> PathBuf {
    write_corpus(
        dir,
        &CorpusSpec {
            matches,
            players_per_match: players,
            duration_s: 600,
            events_per_player: 48,
            seed: 1,
            ..CorpusSpec::default()
        },
    )
    .unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert!(cli(&["--help"]).status.success());
    assert!(cli(&["--version"]).status.success());
    assert!(cli(&["evaluate", "--help"]).status.success());
}

#[test]
fn usage_errors_exit_two_with_json() {
    let out = cli(&["evaluate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "usage");
    let out = cli(&["evaluate", "--td", "eleven"]);
    assert_eq!(out.status.code(), Some(2));
    let out = cli(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = cli(&["--manifest", missing.to_str().unwrap(), "evaluate"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["kind"], "missing_file");

    let out = cli(&["evaluate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_of(&out)["message"].as_str().unwrap().contains("manifest"));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "k_all = 1\n").unwrap();
    let out = cli(&["--config", cfg.to_str().unwrap(), "evaluate"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_of(&out);
    assert_eq!(err["kind"], "invalid_parameter");
    assert!(err["message"].as_str().unwrap().contains("k_all"));

    std::fs::write(&cfg, "[cncv]\nn_inner = 4\nn_consensus = 6\n").unwrap();
    let err = error_of(&cli(&["--config", cfg.to_str().unwrap(), "evaluate"]));
    assert!(err["message"].as_str().unwrap().contains("cncv.n_consensus"));

    std::fs::write(&cfg, "[window]\nhalf_width = 3\n").unwrap();
    let err = error_of(&cli(&["--config", cfg.to_str().unwrap(), "evaluate"]));
    assert!(err["message"].as_str().unwrap().contains("half_width"));

    let err = error_of(&cli(&["--td", "11", "evaluate"]));
    assert_eq!(err["kind"], "invalid_parameter");
    assert!(err["message"].as_str().unwrap().contains("window.td"));
}

#[test]
fn evaluate_select_and_models() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(&dir.path().join("corpus"), 4, 2);
    let out = dir.path().join("out");
    let base = ["--manifest", m.to_str().unwrap(), "--out", out.to_str().unwrap()];
    ok(&[&base[..], &["evaluate"]].concat());
    let metrics = read_json(&out.join("metrics.json"));
    assert_eq!(metrics["classifier"], "svm");
    assert_eq!(metrics["n_folds"], 5);
    assert!(metrics["accuracy"]["mean"].as_f64().unwrap() > 0.5);
    assert!(metrics["accuracy"]["std"].is_number());
    for j in 0..5 {
        let text = std::fs::read_to_string(out.join("models").join(format!("fold{j}_svm.json"))).unwrap();
        let model = TrainedModel::from_json(&text).unwrap();
        assert_eq!(model.feature_indices.len(), 8);
    }
    let echoed = std::fs::read_to_string(out.join("config.effective.toml")).unwrap();
    assert!(echoed.contains("k_all = 5"));

    ok(&[&base[..], &["select"]].concat());
    let ranking = read_json(&out.join("ranking.json"));
    assert_eq!(ranking["mode"], "whole_dataset");
    let features = ranking["features"].as_array().unwrap();
    assert_eq!(features.len(), 8);
    assert!(features[0]["feature"].as_str().unwrap().starts_with("STE_"));
}

#[test]
fn loso_has_one_fold_per_player() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(&dir.path().join("corpus"), 4, 1);
    let out = dir.path().join("out");
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, "[cncv]\nk_train = 3\ninner_folds = 2\n").unwrap();
    let args = [
        "--config",
        cfg.to_str().unwrap(),
        "--manifest",
        m.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--classifier",
        "knn",
        "loso",
    ];
    ok(&args);
    let metrics = read_json(&out.join("loso_metrics.json"));
    assert_eq!(metrics["n_folds"], 4);
    assert_eq!(metrics["fold_scheme"], "leave_one_subject_out");
    let mut held: Vec<&str> = metrics["folds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["held_out_players"][0].as_str().unwrap())
        .collect();
    held.sort();
    held.dedup();
    assert_eq!(held.len(), 4);

    // With one player per class every training split holds a single class.
    let two = fixture(&dir.path().join("two"), 2, 1);
    let mut args = args;
    args[3] = two.to_str().unwrap();
    let err = error_of(&cli(&args));
    assert_eq!(err["kind"], "single_class");
}

#[test]
fn features_needs_a_fixed_td_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(&dir.path().join("corpus"), 2, 1);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let err = error_of(&cli(&["--manifest", m.to_str().unwrap(), "--out", out_s, "--td", "tune", "features"]));
    assert!(err["message"].as_str().unwrap().contains("window.td"));
    ok(&["--manifest", m.to_str().unwrap(), "--out", out_s, "--td", "3", "--events", "kill+assist", "features"]);
    let text = std::fs::read_to_string(out.join("features.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 4 + 144);
}

#[test]
fn adapt_dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    write_raw_layout(
        &raw,
        &CorpusSpec {
            matches: 3,
            players_per_match: 2,
            seed: 4,
            ..CorpusSpec::default()
        },
    )
    .unwrap();
    let man = dir.path().join("adapted").join("manifest.json");
    ok(&["adapt-dataset", "--input", raw.to_str().unwrap(), "--output", man.to_str().unwrap()]);
    let manifest = load_manifest(&man).unwrap();
    assert_eq!(manifest.matches.len(), 3);
    assert_eq!(manifest.player_count(), 6);
    let out = dir.path().join("out");
    ok(&["--manifest", man.to_str().unwrap(), "--out", out.to_str().unwrap(), "features"]);
    let rows = std::fs::read_to_string(out.join("features.csv")).unwrap().lines().count();
    assert!(rows > 1);

    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let out = cli(&["adapt-dataset", "--input", empty.to_str().unwrap(), "--output", man.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["kind"], "unrecognized_layout");
}

#[test]
fn synth_fixture_command_writes_a_loadable_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("fx");
    ok(&["synth-fixture", "--output", target.to_str().unwrap(), "--matches", "2", "--players", "1"]);
    let manifest = load_manifest(&target.join("manifest.json")).unwrap();
    assert_eq!(manifest.player_count(), 2);
}
