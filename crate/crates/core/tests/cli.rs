use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use seqtag::corpus::{builtin_bis_tagset, parse_column_str, write_column_file, ParseMode};
use seqtag::embeddings::serialize_static_vectors;
use seqtag::eval::{evaluate, render_json};
use seqtag::synthetic::{unambiguous_corpus, SyntheticSpec};
use seqtag::training::load_model;

fn seqtag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqtag"))
        .args(args)
        .env_remove("SEQTAG_SEED")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn repo_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(name)
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// Small synthetic corpus plus its vectors, written to a temp dir.
    fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec { train: 80, dev: 15, test: 15, embedding_dim: 48, ..SyntheticSpec::default() };
        let data = unambiguous_corpus(&spec);
        std::fs::write(dir.path().join("train.col"), write_column_file(&data.train)).unwrap();
        std::fs::write(dir.path().join("dev.col"), write_column_file(&data.dev)).unwrap();
        std::fs::write(dir.path().join("test.col"), write_column_file(&data.test)).unwrap();
        std::fs::write(dir.path().join("vec.txt"), serialize_static_vectors(&data.embeddings)).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, content: &str) -> String {
        std::fs::write(self.dir.path().join(name), content).unwrap();
        self.path(name)
    }

    fn train(&self, out: &str) -> Output {
        seqtag(&[
            "train",
            "--train",
            &self.path("train.col"),
            "--dev",
            &self.path("dev.col"),
            "--embeddings",
            &format!("words={}", self.path("vec.txt")),
            "--out",
            &self.path(out),
            "--hidden-size",
            "8",
            "--hidden-layers",
            "1",
            "--max-epochs",
            "4",
            "--seed",
            "3",
        ])
    }
}

#[test]
fn paper_config_is_echoed_before_work_starts() {
    let f = Fixture::new();
    let cfg = repo_file("paper.cfg");
    let out = seqtag(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--train",
        &f.path("missing.col"),
        "--dev",
        &f.path("dev.col"),
        "--out",
        &f.path("m.ckpt"),
    ]);
    let err = text(&out.stderr);
    for line in [
        "config: hidden_size = 512",
        "config: hidden_layers = 2",
        "config: word_dropout = 0.05",
        "config: learning_rate = 0.01",
        "config: max_epochs = 100",
        "config: sequence_length = 128",
        "config: mini_batch_size = 16",
    ] {
        assert!(err.contains(line), "missing {line:?} in\n{err}");
    }
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
}

#[test]
fn flags_override_config_file() {
    let f = Fixture::new();
    let cfg = f.write("c.cfg", "hidden_size = 64\nseed = 9\n");
    let out = seqtag(&[
        "train", "--config", &cfg, "--hidden-size", "16", "--train", &f.path("nope.col"), "--dev", "x", "--out", "y",
    ]);
    let err = text(&out.stderr);
    assert!(err.contains("config: hidden_size = 16"));
    assert!(err.contains("config: seed = 9"));
}

#[test]
fn seed_env_fallback() {
    let f = Fixture::new();
    let run = |env: Option<&str>, flag: Option<&str>, dir: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_seqtag"));
        cmd.args(["split", "--input", &f.path("train.col"), "--out-dir", &f.path(dir)]);
        cmd.env_remove("SEQTAG_SEED");
        if let Some(e) = env {
            cmd.env("SEQTAG_SEED", e);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(f.dir.path().join(dir).join("train.col")).unwrap()
    };
    let from_env = run(Some("42"), None, "a");
    let from_flag = run(None, Some("42"), "b");
    let default = run(None, None, "c");
    assert_eq!(from_env, from_flag);
    assert_ne!(from_env, default);
}

#[test]
fn eval_identical_files_scores_one() {
    let f = Fixture::new();
    let out = seqtag(&["eval", "--gold", &f.path("test.col"), "--pred", &f.path("test.col"), "--json", &f.path("r.json")]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report = text(&out.stdout);
    assert!(report.contains("accuracy    100.00%"));
    assert!(report.contains("micro F1    100.00%"));
    assert!(report.contains("macro F1    100.00%"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(f.path("r.json")).unwrap()).unwrap();
    assert_eq!(json["micro_f1"], 1.0);
}

#[test]
fn train_tag_eval_matches_in_process() {
    let f = Fixture::new();
    let out = f.train("m.ckpt");
    assert!(out.status.success(), "{}", text(&out.stderr));
    let curve = std::fs::read_to_string(f.path("m.ckpt.curve.tsv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 4);

    let out = seqtag(&["tag", "--model", &f.path("m.ckpt"), "--input", &f.path("test.col"), "--output", &f.path("pred.col")]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let out = seqtag(&["eval", "--gold", &f.path("test.col"), "--pred", &f.path("pred.col"), "--json", &f.path("r.json")]);
    assert!(out.status.success(), "{}", text(&out.stderr));

    let ts = Arc::new(builtin_bis_tagset());
    let gold = parse_column_str(&std::fs::read_to_string(f.path("test.col")).unwrap(), "test.col", ts, ParseMode::Strict)
        .unwrap()
        .corpus;
    let model = load_model(Path::new(&f.path("m.ckpt"))).unwrap();
    let predicted = model.tag_corpus(&gold, 1).unwrap();
    let in_process = render_json(&evaluate(&gold, &predicted).unwrap());
    assert_eq!(std::fs::read_to_string(f.path("r.json")).unwrap(), in_process);
}

#[test]
fn identical_invocations_are_byte_identical() {
    let f = Fixture::new();
    assert!(f.train("a.ckpt").status.success());
    assert!(f.train("b.ckpt").status.success());
    assert_eq!(std::fs::read(f.path("a.ckpt")).unwrap(), std::fs::read(f.path("b.ckpt")).unwrap());
    assert_eq!(
        std::fs::read(f.path("a.ckpt.curve.tsv")).unwrap(),
        std::fs::read(f.path("b.ckpt.curve.tsv")).unwrap()
    );
    let tag = |threads: &str| {
        let out = seqtag(&["tag", "--model", &f.path("a.ckpt"), "--input", &f.path("test.col"), "--threads", threads]);
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(tag("1"), tag("4"));
}

#[test]
fn raw_tagging_and_bootstrap_round() {
    let f = Fixture::new();
    assert!(f.train("m.ckpt").status.success());
    let raw = f.write("raw.txt", "w001 w002 w003\n\nw004\nw005 zzz\n");
    let out = seqtag(&["tag", "--model", &f.path("m.ckpt"), "--input", &raw, "--format", "raw"]);
    assert!(out.status.success());
    let tagged = text(&out.stdout);
    assert_eq!(tagged.split("\n\n").filter(|s| !s.trim().is_empty()).count(), 3);
    assert!(text(&out.stderr).contains("raw.txt:2: empty line skipped"));

    let out = seqtag(&[
        "bootstrap", "annotate", "--model", &f.path("m.ckpt"), "--in", &raw, "--out", &f.path("review.col"), "--timestamp", "1700000000",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let review = std::fs::read_to_string(f.path("review.col")).unwrap();
    assert!(review.contains("# source = raw.txt\n"));
    assert!(review.contains("# timestamp = 1700000000\n"));
    assert!(review.contains("# id = raw.txt:4\n"));
    let parsed = parse_column_str(&review, "review.col", Arc::new(builtin_bis_tagset()), ParseMode::Strict).unwrap();
    assert_eq!(parsed.corpus.token_count(), 6);
    assert!(parsed.corpus.is_fully_tagged());

    let out = seqtag(&[
        "bootstrap", "merge", "--base", &f.path("train.col"), "--corrected", &f.path("review.col"), "--out", &f.path("merged.col"),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let merged = std::fs::read_to_string(f.path("merged.col")).unwrap();
    let base = std::fs::read_to_string(f.path("train.col")).unwrap();
    assert!(merged.starts_with(&base));

    // merging the same review twice repeats its ids
    let out = seqtag(&[
        "bootstrap", "merge", "--base", &f.path("train.col"), "--corrected", &f.path("review.col"), "--corrected",
        &f.path("review.col"), "--out", &f.path("dup.col"),
    ]);
    assert_eq!(out.status.code(), Some(9));

    let out = seqtag(&[
        "bootstrap", "cycle", "--model", &f.path("m.ckpt"), "--base", &f.path("train.col"), "--dev", &f.path("dev.col"), "--eval",
        &f.path("test.col"), "--raw", &raw, "--corrected", &f.path("review.col"), "--out", &f.path("new.ckpt"), "--report",
        &f.path("cycle.json"), "--max-epochs", "2", "--timestamp", "0",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("held-out hash unchanged"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(f.path("cycle.json")).unwrap()).unwrap();
    assert_eq!(report["heldout_hash_before"], report["heldout_hash_after"]);
}

#[test]
fn stats_convert_split_inspect() {
    let f = Fixture::new();
    let messy = f.write("messy.col", "\u{feff}# header\ne\u{301}   N_NN\nb\tRB\r\n\n\n\nc RD_PUNC\n");
    let out = seqtag(&["convert", "--input", &messy, "--output", &f.path("clean.col")]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(std::fs::read_to_string(f.path("clean.col")).unwrap(), "\u{e9}\tN_NN\nb\tRB\n\nc\tRD_PUNC\n\n");

    let out = seqtag(&["stats", "--input", &f.path("clean.col")]);
    assert_eq!(text(&out.stdout), "sentences\t2\ntokens\t3\nuntagged\t0\ntag\tN_NN\t1\ntag\tRB\t1\ntag\tRD_PUNC\t1\n");

    let out = seqtag(&["split", "--input", &f.path("train.col"), "--ratios", "0.5,0.25,0.25", "--out-dir", &f.path("parts")]);
    assert!(out.status.success());
    let count = |p: &str| std::fs::read_to_string(f.dir.path().join("parts").join(p)).unwrap().matches("\n\n").count();
    assert_eq!((count("train.col"), count("dev.col"), count("test.col")), (40, 20, 20));

    let out = seqtag(&["inspect-embeddings", "--embeddings", &f.path("vec.txt"), "--corpus", &f.path("clean.col"), "--word", "w000"]);
    let report = text(&out.stdout);
    assert!(report.starts_with("vocabulary\t200\ndim\t48\n"), "{report}");
    assert!(report.contains("covered_tokens\t0"));
    assert!(report.contains("word\tw000\tin\t"));
}

#[test]
fn error_paths_have_distinct_codes_and_use_stderr_only() {
    let f = Fixture::new();
    let bad_tag = f.write("bad.col", "w\tNOT_A_TAG\n");
    let bad_shape = f.write("shape.col", "w\tN_NN\textra\n");
    let junk = f.write("junk.ckpt", "definitely not a checkpoint");
    let cases: Vec<(Vec<String>, i32)> = vec![
        (vec!["eval".into(), "--bogus".into()], 2),
        (vec!["eval".into(), "--gold".into(), f.path("absent.col"), "--pred".into(), f.path("test.col")], 3),
        (vec!["stats".into(), "--input".into(), bad_shape], 4),
        (vec!["stats".into(), "--input".into(), bad_tag.clone()], 5),
        (vec!["eval".into(), "--gold".into(), f.path("test.col"), "--pred".into(), f.path("dev.col")], 8),
        (vec!["tag".into(), "--model".into(), junk, "--input".into(), f.path("test.col")], 7),
    ];
    for (args, code) in cases {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = seqtag(&refs);
        assert_eq!(out.status.code(), Some(code), "{args:?}: {}", text(&out.stderr));
        assert!(out.stdout.is_empty(), "{args:?} wrote to stdout");
        let last = text(&out.stderr).lines().last().unwrap_or_default().to_string();
        if code != 2 {
            assert!(last.starts_with("seqtag: error["), "{last}");
        }
    }
    // lenient mode keeps going
    let out = seqtag(&["stats", "--input", &bad_tag, "--lenient"]);
    assert!(out.status.success());
    assert!(text(&out.stdout).contains("untagged\t1"));
}

#[test]
fn every_subcommand_documents_defaults() {
    for sub in [
        vec!["train"],
        vec!["tag"],
        vec!["eval"],
        vec!["stats"],
        vec!["split"],
        vec!["convert"],
        vec!["inspect-embeddings"],
        vec!["bootstrap", "annotate"],
        vec!["bootstrap", "merge"],
        vec!["bootstrap", "cycle"],
    ] {
        let mut args = sub.clone();
        args.push("--help");
        let out = seqtag(&args);
        assert!(out.status.success(), "{sub:?}");
        let help = text(&out.stdout);
        assert!(help.contains("Usage: seqtag"), "{sub:?}");
        assert!(help.contains("-h, --help"), "{sub:?}");
    }
    let help = text(&seqtag(&["tag", "--help"]).stdout);
    assert!(help.contains("[default: 1]") && help.contains("[default: column]"));
}
