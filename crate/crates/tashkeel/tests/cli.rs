//! Drives the installed binary end to end: every subcommand, the exit-code
//! contract, config/flag precedence, and byte-level determinism of training
//! artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tashkeel"))
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).expect("test file writes");
    path
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("the binary runs")
}

const TOY: &str = "كَتَبَ يَدٌ\nصَفّ نَمْ\nيَدٌ صَفّ\nنَمْ كَتَبَ\n";

#[test]
fn strip_removes_every_mark_and_keeps_bare_text() {
    let dir = tempfile::tempdir().expect("temp dir");
    let input = write_file(dir.path(), "in.txt", "هَيَّا لِنَذْهَبْ\nقلم\n");
    let out = run(bin().arg("strip").arg("--input").arg(&input));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert_eq!(stdout_of(&out), "هيا لنذهب\nقلم\n");
}

#[test]
fn segment_emits_one_json_object_per_line() {
    let dir = tempfile::tempdir().expect("temp dir");
    let input = write_file(dir.path(), "in.txt", "كَتَبَ يَدٌ\n");
    let out = run(bin().arg("segment").arg("--input").arg(&input));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    let parsed: serde_json::Value = serde_json::from_str(lines[0]).expect("line parses as JSON");
    assert_eq!(parsed["tokens"].as_array().expect("tokens array").len(), 2);
    assert_eq!(parsed["tokens"][0]["bases"], "كتب");
}

#[test]
fn evaluate_scores_identical_files_at_zero() {
    let dir = tempfile::tempdir().expect("temp dir");
    let reference = write_file(dir.path(), "ref.txt", TOY);
    let pred = write_file(dir.path(), "pred.txt", TOY);
    let out = run(bin()
        .arg("evaluate")
        .arg("--pred")
        .arg(&pred)
        .arg("--ref")
        .arg(&reference)
        .arg("--json"));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("JSON report");
    assert_eq!(report["wer"]["errors"], 0);
    assert_eq!(report["wer"]["total"], 8);
    assert_eq!(report["der"]["all"]["errors"], 0);
}

#[test]
fn exit_codes_separate_usage_data_and_success() {
    let dir = tempfile::tempdir().expect("temp dir");

    // Usage errors: unknown flag, unknown config key, inconsistent window.
    let out = run(bin().arg("strip").arg("--no-such-flag"));
    assert_eq!(out.status.code(), Some(1));

    let bad_config = write_file(dir.path(), "bad.toml", "not_a_setting = 1\n");
    let out = run(bin().arg("--config").arg(&bad_config).arg("strip"));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("usage error"), "stderr: {}", stderr_of(&out));

    let input = write_file(dir.path(), "in.txt", "كتب\n");
    let out = run(bin()
        .args(["--window", "50", "--step", "60"])
        .arg("strip")
        .arg("--input")
        .arg(&input));
    assert_eq!(out.status.code(), Some(1), "step beyond window is a usage error");

    // Data errors: missing file, malformed corpus line.
    let out = run(bin()
        .arg("evaluate")
        .arg("--pred")
        .arg(dir.path().join("absent.txt"))
        .arg("--ref")
        .arg(dir.path().join("absent.txt")));
    assert_eq!(out.status.code(), Some(2));

    let malformed = write_file(dir.path(), "mal.txt", "كَتَبَ\n\u{064E}كتب\n");
    let out = run(bin().arg("stats").arg("--corpus").arg(&malformed));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("line 2"), "stderr: {}", stderr_of(&out));

    // The same corpus passes once bad lines may be skipped.
    let out = run(bin().arg("--skip-bad-lines").arg("stats").arg("--corpus").arg(&malformed));
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    // Help is not an error.
    let out = run(bin().arg("--help"));
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().expect("temp dir");
    // The config alone is valid; the flag pair breaks it, so a usage error
    // proves the flags won.
    let config = write_file(dir.path(), "run.toml", "window = 300\nstep = 100\n");
    let input = write_file(dir.path(), "in.txt", "كَتَبَ\n");
    let out = run(bin()
        .arg("--config")
        .arg(&config)
        .args(["--step", "400"])
        .arg("strip")
        .arg("--input")
        .arg(&input));
    assert_eq!(out.status.code(), Some(1));

    let out = run(bin()
        .arg("--config")
        .arg(&config)
        .args(["--window", "40", "--step", "20"])
        .arg("strip")
        .arg("--input")
        .arg(&input));
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
}

#[test]
fn prepare_writes_vocab_and_example_streams() {
    let dir = tempfile::tempdir().expect("temp dir");
    let train = write_file(dir.path(), "train.txt", TOY);
    let src = write_file(dir.path(), "bitext.ar", "كتب يد\nصف نم\n");
    let tgt = write_file(dir.path(), "bitext.en", "wrote hand\nrow sleep\n");
    let config = write_file(
        dir.path(),
        "run.toml",
        &format!(
            "train_path = {:?}\nbitext_src_path = {:?}\nbitext_tgt_path = {:?}\n",
            train, src, tgt
        ),
    );
    let out_dir = dir.path().join("prepared");
    let out = run(bin()
        .arg("--config")
        .arg(&config)
        .arg("prepare")
        .arg("--out-dir")
        .arg(&out_dir)
        .arg("--json"));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    for name in ["vocab.json", "diac.jsonl", "ar2en.jsonl", "en2ar.jsonl"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let diac = std::fs::read_to_string(out_dir.join("diac.jsonl")).expect("stream reads");
    assert_eq!(diac.lines().count(), 4);
    for line in diac.lines() {
        let ex: serde_json::Value = serde_json::from_str(line).expect("examples are JSON");
        assert!(ex["src"].as_array().expect("src ids").len() > 1);
    }
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("JSON report");
    assert!(report["vocab_symbols"].as_u64().is_some(), "report: {report}");
    assert_eq!(report["streams"].as_array().expect("streams").len(), 3);
}

/// One tiny training config shared by the round-trip tests below.
fn training_config(dir: &Path, train: &Path, seed: u64) -> PathBuf {
    write_file(
        dir,
        &format!("train-{seed}.toml"),
        &format!(
            "train_path = {train:?}\ndev_path = {train:?}\n\
             d_model = 32\nffn_dim = 64\nn_heads = 2\nenc_layers = 1\ndec_layers = 1\n\
             epochs = 8\nwarmup_steps = 10\nseed = {seed}\n"
        ),
    )
}

#[test]
fn train_diacritize_evaluate_round_trip_preserves_input_text() {
    let dir = tempfile::tempdir().expect("temp dir");
    let train = write_file(dir.path(), "train.txt", TOY);
    let config = training_config(dir.path(), &train, 5);
    let ckpt_dir = dir.path().join("run");

    let out = run(bin()
        .arg("--config")
        .arg(&config)
        .arg("train")
        .arg("--out-dir")
        .arg(&ckpt_dir));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    for name in ["model.ckpt", "vocab.json", "train_report.json"] {
        assert!(ckpt_dir.join(name).exists(), "{name} missing");
    }
    assert!(stderr_of(&out).contains("epoch"), "progress goes to stderr");

    // Diacritize bare text with the checkpoint; output must strip back.
    let bare = write_file(dir.path(), "bare.txt", "كتب يد\nصف نم\n");
    let decoded = dir.path().join("out.txt");
    let out = run(bin()
        .arg("diacritize")
        .arg("--checkpoint")
        .arg(ckpt_dir.join("model.ckpt"))
        .arg("--input")
        .arg(&bare)
        .arg("--output")
        .arg(&decoded));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let strip_out = run(bin().arg("strip").arg("--input").arg(&decoded));
    assert_eq!(stdout_of(&strip_out), "كتب يد\nصف نم\n");

    // The decoded file evaluates cleanly against a reference.
    let reference = write_file(dir.path(), "ref.txt", "كَتَبَ يَدٌ\nصَفّ نَمْ\n");
    let out = run(bin()
        .arg("evaluate")
        .arg("--pred")
        .arg(&decoded)
        .arg("--ref")
        .arg(&reference));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("word error rate"), "stdout: {}", stdout_of(&out));
}

#[test]
fn same_seed_training_runs_write_identical_artifacts() {
    let dir = tempfile::tempdir().expect("temp dir");
    let train = write_file(dir.path(), "train.txt", TOY);
    let config = training_config(dir.path(), &train, 9);

    let mut bytes = Vec::new();
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let ckpt_dir = dir.path().join(name);
        let out = run(bin()
            .arg("--config")
            .arg(&config)
            .arg("train")
            .arg("--out-dir")
            .arg(&ckpt_dir));
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
        bytes.push(std::fs::read(ckpt_dir.join("model.ckpt")).expect("checkpoint reads"));
        reports.push(
            std::fs::read(ckpt_dir.join("train_report.json")).expect("report reads"),
        );
    }
    assert_eq!(bytes[0], bytes[1], "same config and seed must write identical weights");
    assert_eq!(reports[0], reports[1], "same config and seed must write identical reports");
}

#[test]
fn diacritize_rejects_a_vocabulary_that_does_not_match_the_checkpoint() {
    let dir = tempfile::tempdir().expect("temp dir");
    let train = write_file(dir.path(), "train.txt", TOY);
    let config = training_config(dir.path(), &train, 13);
    let ckpt_dir = dir.path().join("run");
    let out = run(bin()
        .arg("--config")
        .arg(&config)
        .arg("train")
        .arg("--out-dir")
        .arg(&ckpt_dir));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    // A foreign vocabulary file fails the digest check before any decoding.
    let foreign = write_file(
        dir.path(),
        "other-vocab.json",
        r#"{"task_tags":["<diac>"],"chars":"ab"}"#,
    );
    let bare = write_file(dir.path(), "bare.txt", "كتب\n");
    let out = run(bin()
        .arg("diacritize")
        .arg("--checkpoint")
        .arg(ckpt_dir.join("model.ckpt"))
        .arg("--vocab")
        .arg(&foreign)
        .arg("--input")
        .arg(&bare));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("vocab"), "stderr: {}", stderr_of(&out));
}

#[test]
fn analyze_emits_the_requested_breakdown_sections() {
    let dir = tempfile::tempdir().expect("temp dir");
    let reference = write_file(dir.path(), "ref.txt", "كَتَبَ يَدٌ\n");
    let pred = write_file(dir.path(), "pred.txt", "كَتُبَ يَدٌ\n");
    let train = write_file(dir.path(), "train.txt", TOY);
    let ann = write_file(
        dir.path(),
        "ann.tsv",
        "0\t0\tverb-perfect\tmale\tverb\t1\n0\t1\tnoun-other\tfemale\tsuffix\t1\n",
    );

    let out = run(bin()
        .arg("analyze")
        .arg("--pred")
        .arg(&pred)
        .arg("--ref")
        .arg(&reference)
        .arg("--train-corpus")
        .arg(&train)
        .arg("--annotations")
        .arg(&ann)
        .arg("--pos")
        .arg("--gender")
        .arg("--json"));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("JSON report");
    for key in ["length", "bucket", "pos", "gender"] {
        assert!(report.get(key).is_some(), "missing section {key}: {report}");
    }
    // The planted error shows up in the verb row.
    let pos_rows = report["pos"]["rows"].as_array().expect("pos rows");
    let verb = pos_rows
        .iter()
        .find(|r| r["category"] == "verb-perfect")
        .expect("verb row");
    assert_eq!(verb["errors"], 1);

    // Asking for a part-of-speech breakdown without annotations is a data
    // error, not a crash.
    let out = run(bin()
        .arg("analyze")
        .arg("--pred")
        .arg(&pred)
        .arg("--ref")
        .arg(&reference)
        .arg("--pos"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stats_reports_frequencies_and_oov_both_ways() {
    let dir = tempfile::tempdir().expect("temp dir");
    let train = write_file(dir.path(), "train.txt", TOY);
    let test = write_file(dir.path(), "test.txt", "كَتَبَ بابٌ\n");
    let out = run(bin()
        .arg("stats")
        .arg("--corpus")
        .arg(&train)
        .arg("--against")
        .arg(&test)
        .arg("--top")
        .arg("3")
        .arg("--json"));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("JSON report");
    assert_eq!(report["lines"], 4);
    assert_eq!(report["top_forms"].as_array().expect("top forms").len(), 3);
    assert!(report["oov_token"]["encoder_oov_rate"].as_f64().is_some(), "report: {report}");
    assert!(report["oov_type"]["decoder_oov_rate"].as_f64().is_some(), "report: {report}");
}
