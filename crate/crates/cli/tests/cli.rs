use std::path::Path;
use std::process::{Command, Output};

use dirguide_testkit::{grounded_pool, labeled_benchmark, write_image, write_manifest};
use serde_json::Value;

fn dirguide(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirguide")).args(args).env_remove("ORACLE_API_KEY").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    let o = dirguide(&["--help"]);
    assert_eq!(code(&o), 0);
    for sub in ["generate", "evaluate", "perturb", "stats"] {
        assert!(stdout(&o).contains(sub));
    }
    let o = dirguide(&["generate", "--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("--range"));
}

#[test]
fn unknown_flags_are_config_errors() {
    assert_eq!(code(&dirguide(&["generate", "--bogus"])), 1);
    assert_eq!(code(&dirguide(&["frobnicate"])), 1);
}

#[test]
fn generate_happy_path() {
    let dir = tempfile::tempdir().unwrap();
    let pool = grounded_pool(dir.path(), 4);
    let out = dir.path().join("out");
    let o = dirguide(&[
        "generate", "--manifest", p(&pool), "--oracle", "scripted:visfrac=0.5", "--range", "0.1:0.9", "--step", "0.1",
        "--seed", "7", "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&out.join("report.json"));
    assert_eq!(report["seed"], 7);
    assert_eq!(report["grid_size"], 36);
    assert_eq!(report["answerable"], 4);
    assert_eq!(report["config"]["scoring"]["threshold_e"], 0.5);
    assert_eq!(report["oracle"], "scripted:visfrac=0.5");
    assert_eq!(report["stopword_list"], "en-179-v1");
    assert_eq!(report["transcript"], "transcript.jsonl");
    let corpus = std::fs::read_to_string(out.join("corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count() as u64, report["records"].as_u64().unwrap());
    assert!(out.join("transcript.jsonl").exists());
    assert!(out.join("images").read_dir().unwrap().next().is_some());

    let o = dirguide(&["stats", p(&out.join("corpus.jsonl")), "--json"]);
    assert_eq!(code(&o), 0);
    let stats: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(stats["total"], report["records"]);
    assert_eq!(stats["unlabeled"], 0);
    assert_eq!(stats["counts"], report["class_counts"]);
}

#[test]
fn generate_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = dirguide(&["generate", "--oracle", "scripted:visfrac=0.5"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"));
    let pool = grounded_pool(dir.path(), 2);
    for extra in [["--range", "0.9:0.1"], ["--step", "0.15"], ["--oracle", "nonsense"], ["--threshold", "2"]] {
        let mut args = vec!["generate", "--manifest", p(&pool), "--oracle", "scripted:visfrac=0.5", "--out", "unused"];
        args.extend(extra);
        assert_eq!(code(&dirguide(&args)), 1, "{extra:?}");
    }
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&dirguide(&["generate", "--manifest", p(&missing), "--oracle", "scripted:letter=A"])), 1);
}

#[test]
fn generate_write_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let pool = grounded_pool(dir.path(), 2);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = dirguide(&["generate", "--manifest", p(&pool), "--oracle", "scripted:visfrac=0.5", "--out", p(&blocker)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn generate_unreachable_oracle_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let pool = grounded_pool(dir.path(), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_dirguide"))
        .args([
            "generate", "--manifest", p(&pool), "--out", p(&dir.path().join("out")), "--oracle",
            "http:http://127.0.0.1:9/v1/chat/completions", "--model", "m", "--max-retries", "0",
        ])
        .env("ORACLE_API_KEY", "k")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn generate_missing_api_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let pool = grounded_pool(dir.path(), 2);
    let o = dirguide(&[
        "generate", "--manifest", p(&pool), "--out", p(&dir.path().join("out")), "--oracle",
        "http:http://127.0.0.1:9/v1/chat/completions", "--model", "m",
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("ORACLE_API_KEY"));
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let pool = grounded_pool(dir.path(), 3);
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "manifest = \"pool.json\"\noracle = \"scripted:visfrac=0.5\"\nseed = 5\nrange = \"0.3:0.7\"\nthreshold = 0.8\nout = \"from_file\"\n",
    )
    .unwrap();
    let _ = pool;
    let o = dirguide(&["--config", p(&cfg), "generate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&dir.path().join("from_file/report.json"));
    assert_eq!((r["seed"].as_u64(), r["grid_size"].as_u64()), (Some(5), Some(20)));
    assert_eq!(r["config"]["scoring"]["threshold_e"], 0.8);

    let out = dir.path().join("from_flags");
    let o = dirguide(&["generate", "--config", p(&cfg), "--seed", "9", "--range", "0.1:0.2", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&out.join("report.json"));
    assert_eq!((r["seed"].as_u64(), r["grid_size"].as_u64()), (Some(9), Some(8)));
    assert_eq!(r["config"]["scoring"]["threshold_e"], 0.8);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = \"seven\"\n").unwrap();
    assert_eq!(code(&dirguide(&["--config", p(&bad), "generate"])), 1);
}

#[test]
fn evaluate_perfect_and_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let bench = labeled_benchmark(
        dir.path(),
        &[("left", 3), ("right", 2), ("up", 2), ("down", 1), ("unchanged", 4), ("none", 2)],
    );
    for protocol in ["single-round", "two-round"] {
        let out = dir.path().join(protocol);
        let o = dirguide(&[
            "evaluate", "--benchmark", p(&bench), "--protocol", protocol, "--oracle", "scripted:echo", "--out", p(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let m = json(&out.join("metrics.json"));
        assert_eq!(m["accuracy"], 1.0);
        assert_eq!(m["macro_f1"], 1.0);
        assert_eq!(m["acc_f"], 1.0);
        assert_eq!(m["excluded"], 0);
        assert_eq!(m["config"]["protocol"], protocol);
        assert_eq!(m["config"]["f1_average"], "macro");
        let csv = std::fs::read_to_string(out.join("confusion.csv")).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "Left,3,0,0,0,0,0");
        assert!(out.join("confusion.svg").exists());
        assert_eq!(std::fs::read_to_string(out.join("predictions.jsonl")).unwrap().lines().count(), 14);
    }
    let o = dirguide(&["evaluate", "--benchmark", p(&bench), "--protocol", "bogus", "--oracle", "scripted:echo"]);
    assert_eq!(code(&o), 1);
    let o = dirguide(&[
        "evaluate", "--benchmark", p(&bench), "--template-family", "instructblip", "--oracle", "scripted:echo",
    ]);
    assert_eq!(code(&o), 1, "instructblip has no single-round prompt");
}

#[test]
fn evaluate_all_unparseable_warns() {
    let dir = tempfile::tempdir().unwrap();
    let bench = labeled_benchmark(dir.path(), &[("left", 2), ("none", 1)]);
    let table = dir.path().join("answers.json");
    std::fs::write(&table, r#"{"left_0000": "banana", "left_0001": "banana", "none_0000": "banana"}"#).unwrap();
    let out = dir.path().join("out");
    let o = dirguide(&[
        "evaluate", "--benchmark", p(&bench), "--oracle", &format!("scripted:table={}", p(&table)), "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let m = json(&out.join("metrics.json"));
    assert_eq!(m["excluded"], 3);
    assert_eq!(m["degenerate"], true);
}

#[test]
fn perturb_prints_rect() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("scene.png");
    write_image(&img, 1000, 800);
    let out = dir.path().join("crops");
    let args = |bbox: &str, ratio: &str| {
        dirguide(&[
            "perturb", "--image", p(&img), "--bbox", bbox, "--direction", "left", "--ratio", ratio, "--out", p(&out),
        ])
    };
    let o = args("200,100,400,300", "0.5");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "400,0,600,800");
    let written = out.join("scene_left_5.jpg");
    assert_eq!(image_dims(&written), (600, 800));
    assert_eq!(code(&args("200,100,400,300", "1.5")), 1);
    assert_eq!(code(&args("900,100,400,300", "0.5")), 1);
    assert_eq!(code(&args("1,2,3", "0.5")), 1);
}

fn image_dims(path: &Path) -> (u32, u32) {
    let bytes = std::fs::read(path).unwrap();
    // JPEG SOF0 marker carries height then width.
    let at = bytes.windows(2).position(|w| w == [0xFF, 0xC0]).unwrap();
    let h = u16::from_be_bytes([bytes[at + 5], bytes[at + 6]]) as u32;
    let w = u16::from_be_bytes([bytes[at + 7], bytes[at + 8]]) as u32;
    (w, h)
}

#[test]
fn stats_on_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let bench = labeled_benchmark(dir.path(), &[("left", 2), ("right", 1), ("up", 1), ("unchanged", 4)]);
    let o = dirguide(&["stats", p(&bench), "--json"]);
    assert_eq!(code(&o), 0);
    let s: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(s["directional_share"]["left"], 50.0);
    assert_eq!(s["share"]["unchanged"], 50.0);
    let table = stdout(&dirguide(&["stats", p(&bench)]));
    assert!(table.lines().any(|l| l.starts_with("left") && l.contains("50.0%")));

    let empty = write_manifest(&dir.path().join("empty.json"), ".", vec![]);
    let o = dirguide(&["stats", p(&empty)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().any(|l| l.starts_with("total") && l.trim_end().ends_with('0')));

    assert_eq!(code(&dirguide(&["stats", p(&dir.path().join("missing.json"))])), 1);
    let o = dirguide(&["stats", "--dump-stopwords"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 180);
}

#[test]
fn assemble_writes_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let reframe = write_manifest(
        &dir.path().join("reframe.json"),
        "/data",
        vec![serde_json::json!({"id": "r1", "image": "r1.jpg", "question": "q?", "answers": [], "label": "left"})],
    );
    let none = write_manifest(
        &dir.path().join("none.json"),
        "/data",
        vec![serde_json::json!({"id": "n1", "image": "n1.jpg", "question": "q?", "answers": [], "label": "none"})],
    );
    let pool = grounded_pool(dir.path(), 3);
    let out = dir.path().join("bench/bench.json");
    let o = dirguide(&[
        "assemble", "--reframe", p(&reframe), "--none", p(&none), "--pool", p(&pool), "--n", "2", "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&out)["samples"].as_array().unwrap().len(), 4);
    let o = dirguide(&[
        "assemble", "--reframe", p(&reframe), "--none", p(&none), "--pool", p(&pool), "--n", "9", "--out", p(&out),
    ]);
    assert_eq!(code(&o), 1);
}
