//! End-to-end tests against the compiled binary: exit codes, artifact
//! flow between stages, and report determinism.

use std::path::{Path, PathBuf};
use std::process::Output;

use erg_cli::{PipelineConfig, PredictionRow};
use erg_core::ClassLabel;

fn erg(dir: &Path, args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_erg"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn report_json(dir: &Path, command: &str) -> serde_json::Value {
    let path = dir.join("erg-cache/reports").join(format!("{command}.json"));
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

const PIPELINE_CONFIG: &str = r#"
seed = 5

[data]
labeled = "data/labeled.jsonl"
annotated = "data/annotated.jsonl"
split_mode = "media_source"
source_counts = { conspiracy = [2, 1, 1], benign = [2, 1, 1] }
synth_labeled = 12
synth_annotated = 6
annotated_dev = 1

[erg]
width = 8
epochs = 2

[distill]
epochs = 2

[classifier]
epochs = 2
hidden_width = 8

[eval]
split = "test"
coref = true
"#;

#[test]
fn full_pipeline_runs_end_to_end_on_synthetic_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), PIPELINE_CONFIG);
    let stages = [
        "synth",
        "ingest",
        "split",
        "train-erg",
        "build-graphs",
        "profile",
        "distill",
        "train-classifier",
        "predict",
        "evaluate",
    ];
    for stage in stages {
        let out = erg(dir.path(), &[stage, "--config", "config.toml"]);
        assert_ok(&out, stage);
        let json = report_json(dir.path(), stage);
        assert_eq!(json["command"], stage);
        assert!(json["timing"]["wall_ms"].is_number());
        let text = dir.path().join("erg-cache/reports").join(format!("{stage}.txt"));
        assert!(text.exists(), "{stage} text report missing");
    }

    let evaluate = report_json(dir.path(), "evaluate");
    for metric in ["binary", "macro"] {
        for field in ["precision", "recall", "f1"] {
            assert!(
                evaluate["metrics"][metric][field].is_number(),
                "evaluate missing {metric}.{field}"
            );
        }
    }
    for metric in ["muc", "b3", "ceaf_e", "blanc"] {
        assert!(evaluate["metrics"]["coref"][metric]["f1"].is_number());
    }

    let profile = report_json(dir.path(), "profile");
    for class in ["overall", "conspiracy", "benign"] {
        assert!(profile["metrics"][class]["singleton_pct"].is_number());
    }

    let erg_report = report_json(dir.path(), "train-erg");
    assert!(erg_report["metrics"]["dev"]["event"]["f1"].is_number());

    let predictions: Vec<PredictionRow> = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("erg-cache/predictions.json")).unwrap(),
    )
    .unwrap();
    assert!(!predictions.is_empty());
    let mut ids: Vec<&str> = predictions.iter().map(|r| r.doc_id.as_str()).collect();
    let sorted = {
        let mut s = ids.clone();
        s.sort_unstable();
        s
    };
    assert_eq!(ids, sorted, "predictions not in doc_id order");
    ids.dedup();
    assert_eq!(ids.len(), predictions.len());
}

#[test]
fn baseline_variant_skips_graph_and_distill_prerequisites() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), PIPELINE_CONFIG);
    for stage in ["synth", "ingest", "split"] {
        assert_ok(&erg(dir.path(), &[stage, "--config", "config.toml"]), stage);
    }
    let set = "classifier.variant=\"baseline\"";
    for stage in ["train-classifier", "predict"] {
        let out = erg(dir.path(), &[stage, "--config", "config.toml", "--set", set]);
        assert_ok(&out, stage);
    }
    let out = erg(
        dir.path(),
        &["evaluate", "--config", "config.toml", "--set", set, "--set", "eval.coref=false"],
    );
    assert_ok(&out, "evaluate");
}

#[test]
fn missing_prerequisites_exit_two_with_the_producing_command() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), PIPELINE_CONFIG);
    for (stage, producer) in [
        ("split", "ingest"),
        ("train-erg", "ingest"),
        ("build-graphs", "ingest"),
        ("evaluate", "ingest"),
    ] {
        let out = erg(dir.path(), &[stage, "--config", "config.toml"]);
        assert_eq!(exit_code(&out), 2, "{stage} should exit 2");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(
            stderr.contains(&format!("`erg {producer}`")),
            "{stage} stderr not actionable: {stderr}"
        );
    }
    // With the corpus ingested but no checkpoint, the hint moves upstream.
    assert_ok(&erg(dir.path(), &["synth", "--config", "config.toml"]), "synth");
    assert_ok(&erg(dir.path(), &["ingest", "--config", "config.toml"]), "ingest");
    let out = erg(dir.path(), &["build-graphs", "--config", "config.toml"]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("`erg train-erg`"));
}

#[test]
fn config_problems_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = erg(dir.path(), &["ingest", "--config", "missing.toml"]);
    assert_eq!(exit_code(&out), 1);

    write_config(dir.path(), "[erg]\nwidht = 8\n");
    let out = erg(dir.path(), &["ingest", "--config", "config.toml"]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("widht"));

    write_config(dir.path(), PIPELINE_CONFIG);
    let out = erg(
        dir.path(),
        &["ingest", "--config", "config.toml", "--set", "erg.lr=not-a-number"],
    );
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn infeasible_media_split_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // Two media sources per class cannot cover three disjoint splits.
    let lines = [
        r#"{"doc_id": "a", "media_source": "s1", "text": "one", "label": "conspiracy"}"#,
        r#"{"doc_id": "b", "media_source": "s2", "text": "two", "label": "conspiracy"}"#,
        r#"{"doc_id": "c", "media_source": "s3", "text": "three", "label": "benign"}"#,
        r#"{"doc_id": "d", "media_source": "s4", "text": "four", "label": "benign"}"#,
    ];
    std::fs::create_dir_all(dir.path().join("data")).unwrap();
    std::fs::write(dir.path().join("data/labeled.jsonl"), lines.join("\n")).unwrap();
    write_config(
        dir.path(),
        r#"
[data]
labeled = "data/labeled.jsonl"
source_counts = { conspiracy = [1, 1, 1], benign = [1, 1, 1] }
"#,
    );
    assert_ok(&erg(dir.path(), &["ingest", "--config", "config.toml"]), "ingest");
    let out = erg(dir.path(), &["split", "--config", "config.toml"]);
    assert_eq!(exit_code(&out), 2, "infeasible split should exit 2");
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn rerunning_a_stage_reproduces_the_report_byte_for_byte_modulo_timing() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), PIPELINE_CONFIG);
    for stage in ["synth", "ingest", "split"] {
        assert_ok(&erg(dir.path(), &[stage, "--config", "config.toml"]), stage);
    }
    let json_path = dir.path().join("erg-cache/reports/split.json");
    let text_path = dir.path().join("erg-cache/reports/split.txt");
    let first_json = std::fs::read_to_string(&json_path).unwrap();
    let first_text = std::fs::read(&text_path).unwrap();

    assert_ok(&erg(dir.path(), &["split", "--config", "config.toml"]), "split again");
    let second_json = std::fs::read_to_string(&json_path).unwrap();
    let second_text = std::fs::read(&text_path).unwrap();

    assert_eq!(first_text, second_text, "text reports must be byte-identical");
    let strip = |raw: &str| -> String {
        let mut value: serde_json::Value = serde_json::from_str(raw).unwrap();
        assert!(value.as_object_mut().unwrap().remove("timing").is_some());
        serde_json::to_string_pretty(&value).unwrap()
    };
    assert_eq!(strip(&first_json), strip(&second_json));

    let manifest = std::fs::read(dir.path().join("erg-cache/split.json")).unwrap();
    assert_ok(&erg(dir.path(), &["split", "--config", "config.toml"]), "split thrice");
    assert_eq!(manifest, std::fs::read(dir.path().join("erg-cache/split.json")).unwrap());
}

#[test]
fn dotted_overrides_are_recorded_in_the_report_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), PIPELINE_CONFIG);
    assert_ok(
        &erg(dir.path(), &["synth", "--config", "config.toml", "--set", "seed=99"]),
        "synth",
    );
    let report = report_json(dir.path(), "synth");
    assert_eq!(report["config"]["seed"], 99);
}

#[test]
fn cache_directory_precedence_is_config_then_env_then_default() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), PIPELINE_CONFIG);
    assert_ok(&erg(dir.path(), &["synth", "--config", "config.toml"]), "synth");

    let env_cache = dir.path().join("env-cache");
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_erg"))
        .current_dir(dir.path())
        .env("ERG_CACHE_DIR", &env_cache)
        .args(["ingest", "--config", "config.toml"])
        .output()
        .unwrap();
    assert_ok(&out, "ingest with env cache");
    assert!(env_cache.join("corpus.jsonl").exists());
    assert!(!dir.path().join("erg-cache/corpus.jsonl").exists());

    let out = std::process::Command::new(env!("CARGO_BIN_EXE_erg"))
        .current_dir(dir.path())
        .env("ERG_CACHE_DIR", &env_cache)
        .args([
            "ingest",
            "--config",
            "config.toml",
            "--set",
            "data.cache_dir=\"config-cache\"",
        ])
        .output()
        .unwrap();
    assert_ok(&out, "ingest with config cache");
    assert!(dir.path().join("config-cache/corpus.jsonl").exists());
}

#[test]
fn ablation_suite_emits_ten_strict_configs() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_config(dir.path(), PIPELINE_CONFIG);
    assert_ok(&erg(dir.path(), &["ablations", "--config", "config.toml"]), "ablations");

    let base = PipelineConfig::load(&config_path, &[]).unwrap();
    let ablations = dir.path().join("erg-cache/ablations");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&ablations)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert_eq!(files.len(), 10);

    for file in &files {
        let derived = PipelineConfig::load(file, &[]).unwrap();
        let mut scrubbed = derived.clone();
        scrubbed.classifier.ablate = base.classifier.ablate.clone();
        scrubbed.classifier.variant = base.classifier.variant;
        assert_eq!(scrubbed, base, "{} differs beyond ablate/variant", file.display());
    }
    let names: Vec<String> = files
        .iter()
        .map(|f| f.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    for expected in
        ["full", "no-temporal", "no-causal", "no-subevent", "no-coref", "no-event-identify"]
    {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
    for expected in ["variant-baseline", "variant-features", "variant-soft", "variant-hard"] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
}

#[test]
fn all_positive_predictions_on_the_reference_distribution_score_as_counted() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("data")).unwrap();

    // 1581 positive and 5095 negative articles, the reference test set
    // class balance; every document predicted positive.
    let mut corpus = String::new();
    let mut test_ids = Vec::new();
    let mut predictions = Vec::new();
    for i in 0..6676 {
        let label = if i < 1581 { "conspiracy" } else { "benign" };
        let id = format!("d{i:04}");
        corpus.push_str(&format!(
            "{{\"doc_id\": \"{id}\", \"media_source\": \"m\", \"text\": \"w\", \"label\": \"{label}\"}}\n"
        ));
        predictions.push(PredictionRow {
            doc_id: id.clone(),
            label: ClassLabel::Conspiracy,
            probability: 0.9,
        });
        test_ids.push(id);
    }
    std::fs::write(dir.path().join("data/labeled.jsonl"), corpus).unwrap();
    std::fs::write(
        dir.path().join("data/test_ids.json"),
        serde_json::to_string(&test_ids).unwrap(),
    )
    .unwrap();
    write_config(
        dir.path(),
        r#"
[data]
labeled = "data/labeled.jsonl"
split_mode = "random"
train_size = 0
dev_size = 0
fixed_test = "data/test_ids.json"
"#,
    );
    assert_ok(&erg(dir.path(), &["ingest", "--config", "config.toml"]), "ingest");
    assert_ok(&erg(dir.path(), &["split", "--config", "config.toml"]), "split");
    std::fs::create_dir_all(dir.path().join("erg-cache")).unwrap();
    std::fs::write(
        dir.path().join("erg-cache/predictions.json"),
        serde_json::to_string_pretty(&predictions).unwrap(),
    )
    .unwrap();
    assert_ok(&erg(dir.path(), &["evaluate", "--config", "config.toml"]), "evaluate");

    let report = report_json(dir.path(), "evaluate");
    let binary = &report["metrics"]["binary"];
    // P = 1581/6676, R = 1, F1 = 2*1581/(6676+1581) = 38.2948..., which
    // rounds to 38.29.
    assert_eq!(binary["precision"], 23.68);
    assert_eq!(binary["recall"], 100.0);
    assert_eq!(binary["f1"], 38.29);
}
