//! End-to-end tests driving the compiled binary.

use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_closp"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &std::path::Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// One generated corpus, one trained checkpoint, one index, shared by the
/// read-only tests below.
struct Fixture {
    _dir: TempDir,
    corpus: PathBuf,
    checkpoint: PathBuf,
    index: PathBuf,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus");
        let gen_cfg = dir.path().join("gen.cfg");
        std::fs::write(&gen_cfg, "sar_count=16\nmsi_count=16\nimage_side=8\n").unwrap();
        assert_ok(&run(&[
            "gen-corpus",
            "--config",
            gen_cfg.to_str().unwrap(),
            "--seed",
            "3",
            "--out",
            corpus.to_str().unwrap(),
        ]));

        let train_cfg = dir.path().join("train.cfg");
        std::fs::write(
            &train_cfg,
            "embed_dim=8\nimage_side=8\nepochs=2\nbatch_size=4\nmax_lr=0.003\ntrain_fraction=0.5\nseed=1\n",
        )
        .unwrap();
        let checkpoint = dir.path().join("model.ckpt");
        assert_ok(&run(&[
            "train",
            "--config",
            train_cfg.to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
            "--out",
            checkpoint.to_str().unwrap(),
        ]));

        let index = dir.path().join("scenes.idx");
        assert_ok(&run(&[
            "index",
            "--checkpoint",
            checkpoint.to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
            "--out",
            index.to_str().unwrap(),
        ]));

        Fixture {
            _dir: dir,
            corpus,
            checkpoint,
            index,
        }
    })
}

#[test]
fn no_arguments_is_a_usage_error_with_exit_2() {
    let out = run(&[]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_config_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "epochs=1\nbogus_knob=3\n").unwrap();
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--corpus",
        "nowhere",
        "--out",
        dir.path().join("m.ckpt").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("line 2") && err.contains("bogus_knob"), "{err}");
}

#[test]
fn generation_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.cfg");
    std::fs::write(&cfg, "sar_count=6\nmsi_count=6\nimage_side=8\n").unwrap();
    for name in ["a", "b"] {
        assert_ok(&run(&[
            "gen-corpus",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "11",
            "--out",
            dir.path().join(name).to_str().unwrap(),
        ]));
    }
    for file in ["metadata.jsonl", "images_sar.bin", "images_msi.bin"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn every_command_leaves_a_manifest() {
    let fx = fixture();
    for path in [
        fx.corpus.join("manifest.json"),
        fx.checkpoint.with_file_name("model.ckpt.manifest.json"),
        fx.index.with_file_name("scenes.idx.manifest.json"),
    ] {
        let manifest = read_json(&path);
        assert!(!manifest["command"].as_str().unwrap().is_empty());
        assert!(!manifest["tool_version"].as_str().unwrap().is_empty());
        assert!(manifest["duration_seconds"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn query_accepts_canonical_and_comma_forms() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");

    let canonical = run(&[
        "query",
        "--checkpoint",
        fx.checkpoint.to_str().unwrap(),
        "--index",
        fx.index.to_str().unwrap(),
        "--text",
        "Flooded vegetation. Shrub and scrub",
        "--k",
        "5",
        "--out",
        out_a.to_str().unwrap(),
    ]);
    assert_ok(&canonical);

    let commas = run(&[
        "query",
        "--checkpoint",
        fx.checkpoint.to_str().unwrap(),
        "--index",
        fx.index.to_str().unwrap(),
        "--text",
        "shrub and scrub, flooded vegetation",
        "--k",
        "5",
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert_ok(&commas);

    let a = read_json(&out_a);
    let b = read_json(&out_b);
    // both spellings normalize to the same canonical query and ranking
    assert_eq!(a["query"], "Shrub and scrub. Flooded vegetation");
    assert_eq!(a, b);
    assert_eq!(a["hits"].as_array().unwrap().len(), 5);

    let first = &a["hits"][0];
    assert!(first["id"].is_u64());
    assert!(first["score"].is_f64());
    assert!(first["relevance"].is_u64());
}

#[test]
fn eval_writes_flat_metrics_for_each_scope() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    for scope in ["all", "sar", "msi"] {
        let out_path = dir.path().join(format!("{scope}.json"));
        let out = run(&[
            "eval",
            "--checkpoint",
            fx.checkpoint.to_str().unwrap(),
            "--index",
            fx.index.to_str().unwrap(),
            "--scope",
            scope,
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert_ok(&out);
        let report = read_json(&out_path);
        assert_eq!(report["scope"], scope);
        assert!(report["mean_ndcg@10"].as_f64().unwrap() >= 0.0);
        assert!(report["mean_p@100"].is_f64());
        assert!(report["query_count"].as_u64().unwrap() >= 1);
    }
}

#[test]
fn classify_reports_every_class() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("classify.json");
    let out = run(&[
        "classify",
        "--checkpoint",
        fx.checkpoint.to_str().unwrap(),
        "--corpus",
        fx.corpus.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let report = read_json(&out_path);
    assert!(report["macro_f1"].is_f64());
    let f1_rows = report
        .as_object()
        .unwrap()
        .keys()
        .filter(|k| k.starts_with("class_f1:"))
        .count();
    assert_eq!(f1_rows, 12);
}

#[test]
fn geo_probe_writes_one_row_per_pair() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("probe.csv");
    let out = run(&[
        "geo-probe",
        "--checkpoint",
        fx.checkpoint.to_str().unwrap(),
        "--corpus",
        fx.corpus.to_str().unwrap(),
        "--k",
        "3",
        "--seed",
        "5",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("pearson"));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "pair_id,km,cosine_distance");
    assert_eq!(lines.len(), 4);
}

#[test]
fn checkpoint_and_index_files_are_not_interchangeable() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "eval",
        "--checkpoint",
        fx.index.to_str().unwrap(),
        "--index",
        fx.checkpoint.to_str().unwrap(),
        "--scope",
        "all",
        "--out",
        dir.path().join("r.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("expected a checkpoint"), "{}", stderr(&out));
}

#[test]
fn missing_corpus_directory_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train",
        "--corpus",
        dir.path().join("absent").to_str().unwrap(),
        "--out",
        dir.path().join("m.ckpt").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn location_loss_needs_a_positive_weight() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("geo.cfg");
    std::fs::write(
        &cfg,
        "embed_dim=8\nimage_side=8\nepochs=1\nbatch_size=4\nuse_location=true\n",
    )
    .unwrap();
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--corpus",
        fx.corpus.to_str().unwrap(),
        "--out",
        dir.path().join("m.ckpt").to_str().unwrap(),
        "--alpha",
        "0.0",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("alpha"), "{}", stderr(&out));
}

#[test]
fn mismatched_image_side_is_rejected_before_training() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("wide.cfg");
    std::fs::write(&cfg, "embed_dim=8\nimage_side=16\nepochs=1\nbatch_size=4\n").unwrap();
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--corpus",
        fx.corpus.to_str().unwrap(),
        "--out",
        dir.path().join("m.ckpt").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("8x8") && err.contains("16x16"), "{err}");
}
