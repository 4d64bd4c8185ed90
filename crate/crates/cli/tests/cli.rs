//! End-to-end tests of the `causecat` binary: exit codes, stderr prefixes,
//! output files, and the determinism guarantees of each subcommand.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_causecat")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn code_of(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn path_str(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

/// Small freestanding corpus whose texts contain no connectives, so RDA
/// empties every post.
const CONNECTIVE_FREE: &str = "\
id,text,cd,category,explanation
p1,quiet morning walk,1,1,
p2,slow train ride home,1,2,
p3,cold coffee again,1,3,
p4,raining all week,1,4,
p5,empty house tonight,1,5,
";

#[test]
fn stats_reproduces_the_fixture_numbers_exactly() {
    let out = tempfile::tempdir().expect("tempdir");
    let output = run(&[
        "stats",
        "--train-corpus",
        &path_str(&data("fixture_train.csv")),
        "--test-corpus",
        &path_str(&data("fixture_test.csv")),
        "--out",
        &path_str(out.path()),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));

    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("stats.json")).expect("read"))
            .expect("valid json");

    // (label, count, min, max, avg, >200, >300, >400)
    let expected = [
        ("Bias or Abuse", 4, 5, 250, 100.0, 25.0, 0.0, 0.0),
        ("Jobs and career", 4, 13, 310, 125.0, 25.0, 25.0, 0.0),
        ("Medication", 4, 3, 410, 125.0, 25.0, 25.0, 25.0),
        ("Relationship", 4, 2, 220, 100.0, 25.0, 0.0, 0.0),
        ("Alienation", 4, 1, 200, 100.0, 0.0, 0.0, 0.0),
    ];
    let rows = stats["lengths"]["per_category"].as_array().expect("rows");
    assert_eq!(rows.len(), expected.len());
    for (row, (_, count, min, max, avg, p200, p300, p400)) in rows.iter().zip(&expected) {
        let s = &row["stats"];
        assert_eq!(s["count"], *count);
        assert_eq!(s["min_len"], *min);
        assert_eq!(s["max_len"], *max);
        assert_eq!(s["avg_len"].as_f64().unwrap(), *avg);
        assert_eq!(s["pct_over_200"].as_f64().unwrap(), *p200);
        assert_eq!(s["pct_over_300"].as_f64().unwrap(), *p300);
        assert_eq!(s["pct_over_400"].as_f64().unwrap(), *p400);
    }
    let overall = &stats["lengths"]["overall"];
    assert_eq!(overall["count"], 20);
    assert_eq!(overall["min_len"], 1);
    assert_eq!(overall["max_len"], 410);
    assert_eq!(overall["avg_len"].as_f64().unwrap(), 110.0);
    assert_eq!(overall["pct_over_200"].as_f64().unwrap(), 20.0);
    assert_eq!(overall["pct_over_300"].as_f64().unwrap(), 10.0);
    assert_eq!(overall["pct_over_400"].as_f64().unwrap(), 5.0);

    // Split counts: 15 candidates + 2 unlabeled in train, 5 candidates in test.
    let counts = stats["counts"]["rows"].as_array().expect("count rows");
    let total = counts.last().expect("total row");
    assert_eq!(total["train"], 17);
    assert_eq!(total["test"], 5);
    assert_eq!(total["total"], 22);
    for row in counts.iter().take(5) {
        assert_eq!(row["train"], 3);
        assert_eq!(row["test"], 1);
    }
    let counts_text = fs::read_to_string(out.path().join("counts.txt")).expect("read counts");
    assert!(
        counts_text.contains("No reason"),
        "counts table lists unlabeled posts:\n{counts_text}"
    );
}

#[test]
fn usage_errors_exit_1_and_write_nothing() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = dir.path().join("never");
    let output = run(&["stats", "--out", &path_str(&out)]);
    assert_eq!(code_of(&output), 1);
    assert!(
        stderr_of(&output).starts_with("error[usage]: "),
        "stderr: {}",
        stderr_of(&output)
    );
    assert!(
        !out.exists(),
        "usage failures must not create the output directory"
    );

    let bogus = run(&["no-such-command"]);
    assert_eq!(code_of(&bogus), 1);
    assert!(stderr_of(&bogus).starts_with("error[usage]: "));

    let missing_file = run(&[
        "stats",
        "--corpus",
        "/no/such/corpus.csv",
        "--out",
        &path_str(&out),
    ]);
    assert_eq!(code_of(&missing_file), 1);
    assert!(stderr_of(&missing_file).contains("not found"));
}

#[test]
fn malformed_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "id,text,cd,category,explanation\np1,hello,2,1,\n").expect("write");
    let output = run(&[
        "stats",
        "--corpus",
        &path_str(&bad),
        "--out",
        &path_str(&dir.path().join("o")),
    ]);
    assert_eq!(code_of(&output), 2);
    let stderr = stderr_of(&output);
    assert!(stderr.starts_with("error[data]: "), "stderr: {stderr}");
    assert!(
        stderr.contains("cause-detected"),
        "names the bad field: {stderr}"
    );
}

#[test]
fn preprocess_mode_none_copies_the_input_byte_for_byte() {
    let out = tempfile::tempdir().expect("tempdir");
    let input = data("fixture_train.csv");
    let output = run(&[
        "preprocess",
        "--corpus",
        &path_str(&input),
        "--mode",
        "none",
        "--out",
        &path_str(out.path()),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));
    let original = fs::read(&input).expect("read input");
    let copied = fs::read(out.path().join("preprocessed.csv")).expect("read copy");
    assert_eq!(original, copied, "mode none must copy bytes exactly");

    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out.path().join("preprocess_report.json")).expect("read report"),
    )
    .expect("valid json");
    assert_eq!(report["empty_outputs"], 0);
    assert_eq!(report["total_posts"], 17);
    for post in report["posts"].as_array().expect("posts") {
        assert_eq!(post["original_words"], post["transformed_words"]);
    }
}

#[test]
fn preprocess_rda_on_connective_free_text_empties_everything() {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = dir.path().join("plain.csv");
    fs::write(&input, CONNECTIVE_FREE).expect("write corpus");
    let out = dir.path().join("run");
    let output = run(&[
        "preprocess",
        "--corpus",
        &path_str(&input),
        "--mode",
        "rda",
        "--lexicon",
        &path_str(&data("lexicon.txt")),
        "--out",
        &path_str(&out),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out.join("preprocess_report.json")).expect("read report"),
    )
    .expect("valid json");
    assert_eq!(report["total_posts"], 5);
    assert_eq!(report["empty_outputs"], 5);
    assert_eq!(report["empty_pct"].as_f64().unwrap(), 100.0);

    // The transformed corpus is still a loadable corpus.
    let reread = run(&[
        "stats",
        "--corpus",
        &path_str(&out.join("preprocessed.csv")),
        "--out",
        &path_str(&dir.path().join("stats")),
    ]);
    assert_eq!(code_of(&reread), 0, "stderr: {}", stderr_of(&reread));
}

#[test]
fn preprocess_rda_without_lexicon_is_a_usage_error() {
    let out = tempfile::tempdir().expect("tempdir");
    let output = run(&[
        "preprocess",
        "--corpus",
        &path_str(&data("fixture_train.csv")),
        "--mode",
        "rda",
        "--out",
        &path_str(out.path()),
    ]);
    assert_eq!(code_of(&output), 1);
    assert!(
        stderr_of(&output).contains("lexicon"),
        "stderr: {}",
        stderr_of(&output)
    );
}

fn write_train_config(dir: &Path) -> PathBuf {
    let config = dir.join("config.json");
    let body = serde_json::json!({
        "train_corpus": path_str(&data("fixture_train.csv")),
        "test_corpus": path_str(&data("fixture_test.csv")),
        "lexicon": path_str(&data("lexicon.txt")),
        "hyperparams": {
            "layers": 1, "hidden": 16, "learning_rate": 1e-3,
            "batch_size": 4, "epochs": 1, "allow_free_values": true
        },
        "attention": {"window": 8, "max_len": 64},
        "seed": 7
    });
    fs::write(&config, serde_json::to_string_pretty(&body).expect("json")).expect("write config");
    config
}

#[test]
fn train_same_seed_produces_byte_identical_checkpoints() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_train_config(dir.path());
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let output = run(&[
            "train",
            "--config",
            &path_str(&config),
            "--out",
            &path_str(&out),
        ]);
        assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));
    }
    for file in ["checkpoint/weights.bin", "checkpoint/manifest.json"] {
        let a = fs::read(dir.path().join("a").join(file));
        let b = fs::read(dir.path().join("b").join(file));
        match (a, b) {
            (Ok(a), Ok(b)) => assert_eq!(a, b, "{file} differs between identical runs"),
            other => panic!("missing output {file}: {other:?}"),
        }
    }
    // The result JSON carries wall-clock timings, so compare the loss curve.
    let losses = |name: &str| -> serde_json::Value {
        let text =
            fs::read_to_string(dir.path().join(name).join("train_result.json")).expect("read");
        serde_json::from_str::<serde_json::Value>(&text).expect("json")["epoch_losses"].clone()
    };
    assert_eq!(
        losses("a"),
        losses("b"),
        "loss curves differ between identical runs"
    );
}

#[test]
fn train_result_lists_losses_and_timings() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_train_config(dir.path());
    let out = dir.path().join("run");
    let output = run(&[
        "train",
        "--config",
        &path_str(&config),
        "--out",
        &path_str(&out),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));

    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("train_result.json")).expect("read"))
            .expect("valid json");
    assert_eq!(result["epoch_losses"].as_array().expect("losses").len(), 1);
    assert!(result["validation_accuracy"].as_f64().is_some());
    assert!(result["train_seconds"].as_f64().expect("timing") >= 0.0);
    assert_eq!(result["mode"], "none");

    let text = fs::read_to_string(out.join("train_result.txt")).expect("read text");
    assert!(
        text.contains("epoch  train loss"),
        "loss table present:\n{text}"
    );
    assert!(
        text.contains("time taken (s): train"),
        "timing line present:\n{text}"
    );
}

#[test]
fn diverging_training_exits_3() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_train_config(dir.path());
    let output = run(&[
        "train",
        "--config",
        &path_str(&config),
        "--lr",
        "1e308",
        "--warmup",
        "0.0",
        "--allow-free-values",
        "--out",
        &path_str(&dir.path().join("run")),
    ]);
    assert_eq!(code_of(&output), 3, "stderr: {}", stderr_of(&output));
    assert!(stderr_of(&output).starts_with("error[divergence]: "));
}

/// Train once and return (config path, checkpoint dir).
fn trained_checkpoint(dir: &Path) -> (PathBuf, PathBuf) {
    let config = write_train_config(dir);
    let out = dir.join("trained");
    let output = run(&[
        "train",
        "--config",
        &path_str(&config),
        "--out",
        &path_str(&out),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));
    (config, out.join("checkpoint"))
}

#[test]
fn eval_writes_report_confusion_and_per_class_breakdown() {
    let dir = tempfile::tempdir().expect("tempdir");
    let (config, checkpoint) = trained_checkpoint(dir.path());
    let out = dir.path().join("eval");
    let output = run(&[
        "eval",
        "--config",
        &path_str(&config),
        "--checkpoint",
        &path_str(&checkpoint),
        "--out",
        &path_str(&out),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));

    let text = fs::read_to_string(out.join("eval.txt")).expect("read eval.txt");
    for column in ["Model", "Precision", "Recall", "F-measure", "Accuracy"] {
        assert!(text.contains(column), "missing column {column}:\n{text}");
    }
    assert!(text.contains("Longformer"));

    let confusion = fs::read_to_string(out.join("confusion.csv")).expect("read confusion");
    assert_eq!(confusion.lines().count(), 6, "header plus five gold rows");
    assert!(confusion.starts_with("gold\\pred,"));

    let per_class = fs::read_to_string(out.join("per_class.txt")).expect("read per-class");
    assert_eq!(per_class.lines().count(), 6, "header plus five classes");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("eval.json")).expect("read"))
            .expect("json");
    assert!(report["accuracy"].as_f64().is_some());
    assert!(report["mean_loss"].as_f64().is_some());
    assert_eq!(report["per_class"].as_array().expect("classes").len(), 5);
    assert!(report["comparison"].is_null());
}

#[test]
fn eval_rejects_a_checkpoint_trained_under_a_different_mode() {
    let dir = tempfile::tempdir().expect("tempdir");
    let (config, checkpoint) = trained_checkpoint(dir.path());
    let output = run(&[
        "eval",
        "--config",
        &path_str(&config),
        "--checkpoint",
        &path_str(&checkpoint),
        "--mode",
        "rda",
        "--out",
        &path_str(&dir.path().join("eval")),
    ]);
    assert_eq!(code_of(&output), 2);
    let stderr = stderr_of(&output);
    assert!(
        stderr.contains("incompatible checkpoint"),
        "stderr: {stderr}"
    );
}

#[test]
fn eval_compare_appends_a_mann_whitney_block() {
    let dir = tempfile::tempdir().expect("tempdir");
    let (config, checkpoint) = trained_checkpoint(dir.path());
    let out2 = dir.path().join("trained2");
    let second = run(&[
        "train",
        "--config",
        &path_str(&config),
        "--seed",
        "11",
        "--out",
        &path_str(&out2),
    ]);
    assert_eq!(code_of(&second), 0, "stderr: {}", stderr_of(&second));

    let out = dir.path().join("eval");
    let output = run(&[
        "eval",
        "--config",
        &path_str(&config),
        "--checkpoint",
        &path_str(&checkpoint),
        "--compare",
        &path_str(&out2.join("checkpoint")),
        "--folds",
        "3",
        "--test-corpus",
        &path_str(&data("fixture_train.csv")),
        "--out",
        &path_str(&out),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));

    let text = fs::read_to_string(out.join("eval.txt")).expect("read eval.txt");
    assert!(
        text.contains("Mann-Whitney U"),
        "comparison block present:\n{text}"
    );
    assert!(text.contains("verdict:"));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("eval.json")).expect("read"))
            .expect("json");
    let cmp = &report["comparison"];
    assert_eq!(cmp["folds"], 3);
    assert_eq!(cmp["fold_f1_baseline"].as_array().expect("folds").len(), 3);
    assert!(cmp["u"].as_f64().is_some());
    let p = cmp["p"].as_f64().expect("p-value");
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(cmp["alpha"].as_f64().unwrap(), 0.05);
    assert!(cmp["significant"].is_boolean());
}

#[test]
fn ablate_emits_the_six_rows_in_order() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_train_config(dir.path());
    let out = dir.path().join("ablate");
    let output = run(&[
        "ablate",
        "--config",
        &path_str(&config),
        "--out",
        &path_str(&out),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ablation.json")).expect("read"))
            .expect("json");
    let labels: Vec<&str> = report["rows"]
        .as_array()
        .expect("rows")
        .iter()
        .map(|r| r["model"].as_str().expect("label"))
        .collect();
    assert_eq!(
        labels,
        [
            "Transformer",
            "RDA + Transformer",
            "B-RDA + Transformer",
            "Longformer",
            "RDA + Longformer",
            "B-RDA + Longformer"
        ]
    );
    for row in report["rows"].as_array().expect("rows") {
        for metric in ["accuracy", "macro_f1", "weighted_f1", "loss"] {
            assert!(row[metric].as_f64().expect("metric").is_finite());
        }
    }
}

#[test]
fn plot_handles_eval_ablation_empty_and_malformed_reports() {
    let dir = tempfile::tempdir().expect("tempdir");
    let (config, checkpoint) = trained_checkpoint(dir.path());
    let eval_out = dir.path().join("eval");
    let output = run(&[
        "eval",
        "--config",
        &path_str(&config),
        "--checkpoint",
        &path_str(&checkpoint),
        "--out",
        &path_str(&eval_out),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));

    // Eval shape: 5 classes x 3 metrics = 15 data rows plus the header.
    let plot_out = dir.path().join("plots");
    let output = run(&[
        "plot",
        "--out",
        &path_str(&plot_out),
        &path_str(&eval_out.join("eval.json")),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));
    let csv = fs::read_to_string(plot_out.join("eval_per_class.csv")).expect("read csv");
    assert_eq!(csv.lines().count(), 16, "header + 15 rows:\n{csv}");
    assert_eq!(csv.lines().next().unwrap(), "class,metric,value");
    let svg = fs::read_to_string(plot_out.join("eval_per_class.svg")).expect("read svg");
    assert!(svg.starts_with("<svg "));
    assert!(svg.trim_end().ends_with("</svg>"));

    // Multi-model shape: one CSV row per model.
    let models = dir.path().join("models.json");
    fs::write(
        &models,
        serde_json::json!({"models": [
            {"model": "Longformer", "precision": 0.61, "recall": 0.58, "f1": 0.59, "accuracy": 0.62},
            {"model": "Transformer", "precision": 0.55, "recall": 0.52, "f1": 0.53, "accuracy": 0.56}
        ]})
        .to_string(),
    )
    .expect("write models report");
    let output = run(&["plot", "--out", &path_str(&plot_out), &path_str(&models)]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));
    let csv = fs::read_to_string(plot_out.join("models_models.csv")).expect("read csv");
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(
        csv.lines().next().unwrap(),
        "model,precision,recall,f1,accuracy"
    );
    assert!(plot_out.join("models_accuracy.csv").is_file());

    // Empty report: header-only CSV, success, warning on stderr.
    let empty = dir.path().join("empty.json");
    fs::write(&empty, r#"{"rows": []}"#).expect("write empty report");
    let output = run(&["plot", "--out", &path_str(&plot_out), &path_str(&empty)]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));
    assert!(
        stderr_of(&output).contains("warning"),
        "stderr: {}",
        stderr_of(&output)
    );
    let csv = fs::read_to_string(plot_out.join("empty_models.csv")).expect("read csv");
    assert_eq!(csv.lines().count(), 1, "header only:\n{csv}");

    // Malformed report: data error.
    let malformed = dir.path().join("malformed.json");
    fs::write(&malformed, r#"{"something": "else"}"#).expect("write malformed report");
    let output = run(&["plot", "--out", &path_str(&plot_out), &path_str(&malformed)]);
    assert_eq!(code_of(&output), 2);
    assert!(
        stderr_of(&output).contains("malformed report"),
        "stderr: {}",
        stderr_of(&output)
    );
}

#[test]
fn every_run_snapshots_its_resolved_configuration() {
    let out = tempfile::tempdir().expect("tempdir");
    let output = run(&[
        "stats",
        "--corpus",
        &path_str(&data("fixture_train.csv")),
        "--seed",
        "99",
        "--out",
        &path_str(out.path()),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));
    let snapshot: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out.path().join("config.resolved.json")).expect("read snapshot"),
    )
    .expect("valid json");
    assert_eq!(snapshot["command"], "stats");
    assert_eq!(snapshot["seed"], 99);
    assert_eq!(
        snapshot["hyperparams"]["seed"], 99,
        "master seed reaches the hyperparameters"
    );
    assert_eq!(snapshot["mode"], "none");
    assert!(snapshot["attention"]["window"].as_u64().is_some());
}

#[test]
fn runs_write_only_below_the_output_directory() {
    let workdir = tempfile::tempdir().expect("tempdir");
    let config = write_train_config(workdir.path());
    let before: Vec<String> = fs::read_dir(workdir.path())
        .expect("list")
        .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
        .collect();
    let output = run_in(
        workdir.path(),
        &[
            "train",
            "--config",
            &path_str(&config),
            "--out",
            "nested/run",
        ],
    );
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));
    let mut after: Vec<String> = fs::read_dir(workdir.path())
        .expect("list")
        .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
        .collect();
    after.retain(|name| !before.contains(name));
    assert_eq!(
        after,
        vec!["nested".to_string()],
        "only the --out tree may appear"
    );
    assert!(workdir
        .path()
        .join("nested/run/checkpoint/weights.bin")
        .is_file());
}

#[test]
fn flags_override_the_config_file_out_dir() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = dir.path().join("config.json");
    let file_out = dir.path().join("from-file");
    let flag_out = dir.path().join("from-flag");
    fs::write(
        &config,
        serde_json::json!({
            "corpus": path_str(&data("fixture_train.csv")),
            "out": path_str(&file_out)
        })
        .to_string(),
    )
    .expect("write config");
    let output = run(&[
        "stats",
        "--config",
        &path_str(&config),
        "--out",
        &path_str(&flag_out),
    ]);
    assert_eq!(code_of(&output), 0, "stderr: {}", stderr_of(&output));
    assert!(flag_out.join("stats.txt").is_file(), "flag out dir used");
    assert!(
        !file_out.exists(),
        "config-file out dir ignored when the flag wins"
    );
}
