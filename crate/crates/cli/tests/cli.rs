use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CORPUS: &str = r#"{"id":"a","utterances":[{"text":"the train leaves at noon"},{"text":"which train leaves at noon"},{"text":"I like pasta with tomato"},{"text":"tomato pasta is great"}],"boundaries":[1]}
{"id":"b","utterances":[{"text":"do you play chess"},{"text":"chess every weekend"},{"text":"my dog barks"},{"text":"the dog barks at night"},{"text":"night walks with the dog"}],"boundaries":[1]}
{"id":"c","utterances":[{"text":"hello there"},{"text":"hello again"},{"text":"weather is cold"}],"boundaries":[]}
"#;

fn dialseg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dialseg"))
        .args(args)
        .current_dir(dir)
        .env_remove("DIALSEG_SCORER_TOKEN")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = dialseg(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("corpus.jsonl"), CORPUS).unwrap();
    dir
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn segment_writes_one_record_per_dialogue() {
    let dir = setup();
    ok(
        &[
            "segment",
            "--input",
            "corpus.jsonl",
            "--scorer",
            "lexical",
            "--output",
            "seg.jsonl",
        ],
        dir.path(),
    );
    let text = fs::read_to_string(dir.path().join("seg.jsonl")).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 3);
    let ids: Vec<&str> = records.iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["a", "b", "c"]);
    for (r, k) in records.iter().zip([4, 5, 3]) {
        assert_eq!(r["coherence"].as_array().unwrap().len(), k - 1);
        assert_eq!(r["depth"].as_array().unwrap().len(), k - 1);
        assert!(r["tau"].is_number());
        assert!(r["boundaries"].is_array());
    }
    let summary = json(dir.path().join("seg.jsonl.summary.json"));
    assert_eq!(summary["dialogues"], 3);
    let manifest = json(dir.path().join("seg.jsonl.manifest.json"));
    assert_eq!(manifest["scorer"], "lexical");
    assert_eq!(manifest["inputs"]["corpus.jsonl"].as_str().unwrap().len(), 64);
}

#[test]
fn unknown_scorer_is_a_usage_error() {
    let dir = setup();
    let out = dialseg(
        &[
            "segment",
            "--input",
            "corpus.jsonl",
            "--scorer",
            "bm25",
            "--output",
            "seg.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("seg.jsonl").exists());
}

#[test]
fn data_errors_exit_one() {
    let dir = setup();
    let out = dialseg(
        &[
            "segment",
            "--input",
            "nope.jsonl",
            "--scorer",
            "lexical",
            "--output",
            "seg.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    fs::write(dir.path().join("hyp.jsonl"), "{\"id\":\"a\",\"boundaries\":[1]}\n").unwrap();
    let out = dialseg(&["eval", "--ref", "corpus.jsonl", "--hyp", "hyp.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no hypothesis for dialogue `b`"));
}

#[test]
fn failed_external_run_leaves_no_output() {
    let dir = setup();
    let out = dialseg(
        &[
            "segment",
            "--input",
            "corpus.jsonl",
            "--scorer",
            "external:http://127.0.0.1:1",
            "--max-retries",
            "0",
            "--timeout-secs",
            "2",
            "--output",
            "seg.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(leftovers, ["corpus.jsonl"]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = setup();
    ok(
        &[
            "synth",
            "--dialogues",
            "40",
            "--seed",
            "9",
            "--output",
            "syn.jsonl",
            "--embeddings",
            "vec.txt",
        ],
        dir.path(),
    );
    for scorer in ["lexical", "embedding:vec.txt"] {
        ok(
            &[
                "segment",
                "--input",
                "syn.jsonl",
                "--scorer",
                scorer,
                "--output",
                "one/seg.jsonl",
                "--workers",
                "1",
            ],
            dir.path(),
        );
        ok(
            &[
                "segment",
                "--input",
                "syn.jsonl",
                "--scorer",
                scorer,
                "--output",
                "two/seg.jsonl",
                "--workers",
                "4",
            ],
            dir.path(),
        );
        for name in ["seg.jsonl", "seg.jsonl.summary.json", "seg.jsonl.manifest.json"] {
            let a = fs::read(dir.path().join("one").join(name)).unwrap();
            let b = fs::read(dir.path().join("two").join(name)).unwrap();
            assert_eq!(a, b, "{scorer}: {name} differs");
        }
    }
}

#[test]
fn perfect_copy_evaluates_to_zero_error() {
    let dir = setup();
    let stdout = ok(
        &[
            "eval",
            "--ref",
            "corpus.jsonl",
            "--hyp",
            "corpus.jsonl",
            "--output",
            "ev.json",
        ],
        dir.path(),
    );
    assert!(stdout.contains("Pk"));
    let report = json(dir.path().join("ev.json"));
    assert_eq!(report["pk"], 0.0);
    assert_eq!(report["window_diff"], 0.0);
    assert_eq!(report["f1_macro"], 1.0);
    assert!(dir.path().join("ev.json.manifest.json").exists());
}

#[test]
fn stored_report_and_on_the_fly_scoring_agree() {
    let dir = setup();
    ok(
        &[
            "segment",
            "--input",
            "corpus.jsonl",
            "--scorer",
            "lexical",
            "--output",
            "seg.jsonl",
        ],
        dir.path(),
    );
    ok(
        &[
            "eval",
            "--ref",
            "corpus.jsonl",
            "--hyp",
            "seg.jsonl",
            "--output",
            "stored.json",
        ],
        dir.path(),
    );
    ok(
        &[
            "eval",
            "--ref",
            "corpus.jsonl",
            "--scorer",
            "lexical",
            "--output",
            "live.json",
        ],
        dir.path(),
    );
    let (stored, live) = (json(dir.path().join("stored.json")), json(dir.path().join("live.json")));
    for key in ["pk", "window_diff", "f1_macro", "window_size", "confusion"] {
        assert_eq!(stored[key], live[key], "{key}");
    }
    assert!(live["depth_variance"].is_number());
}

#[test]
fn random_mode_is_reproducible_and_reports_window() {
    let dir = setup();
    let args = |out: &'static str| {
        [
            "eval",
            "--ref",
            "corpus.jsonl",
            "--random",
            "--seed",
            "17",
            "--output",
            out,
        ]
    };
    ok(&args("r1.json"), dir.path());
    ok(&args("r2.json"), dir.path());
    assert_eq!(
        fs::read(dir.path().join("r1.json")).unwrap(),
        fs::read(dir.path().join("r2.json")).unwrap()
    );
    let report = json(dir.path().join("r1.json"));
    // 12 utterances over 5 reference segments
    assert_eq!(report["window_size"], 1);
    assert_eq!(json(dir.path().join("r1.json.manifest.json"))["seed"], 17);

    ok(
        &[
            "eval",
            "--ref",
            "corpus.jsonl",
            "--random",
            "--seed",
            "17",
            "--window-size",
            "2",
            "--output",
            "r3.json",
        ],
        dir.path(),
    );
    assert_eq!(json(dir.path().join("r3.json"))["window_size"], 2);
}

#[test]
fn random_mode_without_seed_is_a_usage_error() {
    let dir = setup();
    let out = dialseg(&["eval", "--ref", "corpus.jsonl", "--random"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = dialseg(&["eval", "--ref", "corpus.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

fn toy_raw(dir: &Path) {
    // three copies of A (Q I I D I, one question-inform flow at 0) on topic 1
    // and B (three informs) on topic 2
    let a = "a0 __eou__ a1 __eou__ a2 __eou__ a3 __eou__ a4 __eou__\n";
    let text = format!("{a}{a}{a}b0 __eou__ b1 __eou__ b2 __eou__\n");
    fs::write(dir.join("text.txt"), text).unwrap();
    fs::write(dir.join("acts.txt"), "2 1 1 3 1\n".repeat(3) + "1 1 1\n").unwrap();
    fs::write(dir.join("topics.txt"), "1\n1\n1\n2\n").unwrap();
}

fn gen(dir: &Path, out: &str, extra: &[&str]) -> Value {
    let mut args = vec![
        "gen-pairs",
        "--text",
        "text.txt",
        "--acts",
        "acts.txt",
        "--topics",
        "topics.txt",
        "--seed",
        "5",
        "--out-dir",
        out,
    ];
    args.extend_from_slice(extra);
    ok(&args, dir);
    json(dir.join(out).join("manifest.json"))
}

fn triplets(path: PathBuf) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn gen_pairs_toy_counts_and_manifest() {
    let dir = TempDir::new().unwrap();
    toy_raw(dir.path());
    let m = gen(dir.path(), "full", &[]);
    assert_eq!(m["seed"], 5);
    assert_eq!(m["instances"], 3);
    assert_eq!(m["ranking_pairs"], 6);
    assert_eq!(m["split_sizes"], serde_json::json!([3, 0, 0]));
    assert_eq!(m["inputs"].as_object().unwrap().len(), 3);
    let train = triplets(dir.path().join("full/train.jsonl"));
    assert_eq!(train.len(), 3);
    for t in &train {
        assert_eq!(t["anchor"], "a0");
        assert_eq!(t["pos"], "a1");
        // only index 3 is non-adjacent with an act different from the positive
        assert_eq!(t["neg_same"], "a3");
        assert_eq!(t["meta"]["neg_cross"]["dialogue"], "3");
    }
    assert!(triplets(dir.path().join("full/val.jsonl")).is_empty());

    // without flows every adjacent pair of each A is a positive; B is too short
    let m = gen(dir.path(), "noflows", &["--no-flows"]);
    assert_eq!(m["instances"], 12);
    assert_eq!(m["config"]["use_act_flows"], false);

    let m = gen(dir.path(), "notopics", &["--no-topics", "--split-unit", "dialogue"]);
    assert_eq!(m["instances"], 3);
    assert_eq!(m["config"]["use_topic_constraint"], false);
    assert_eq!(m["config"]["split_unit"], "dialogue");
}

#[test]
fn gen_pairs_is_deterministic_and_requires_seed() {
    let dir = setup();
    ok(
        &["synth", "--dialogues", "30", "--seed", "2", "--output", "syn.jsonl"],
        dir.path(),
    );
    for out in ["x", "y"] {
        ok(
            &[
                "gen-pairs",
                "--input",
                "syn.jsonl",
                "--no-flows",
                "--seed",
                "3",
                "--out-dir",
                out,
            ],
            dir.path(),
        );
    }
    for name in ["train.jsonl", "val.jsonl", "test.jsonl", "manifest.json"] {
        assert_eq!(
            fs::read(dir.path().join("x").join(name)).unwrap(),
            fs::read(dir.path().join("y").join(name)).unwrap()
        );
    }
    let out = dialseg(&["gen-pairs", "--input", "syn.jsonl", "--out-dir", "z"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn convert_then_segment_raw_corpus() {
    let dir = TempDir::new().unwrap();
    toy_raw(dir.path());
    ok(
        &[
            "convert",
            "--text",
            "text.txt",
            "--acts",
            "acts.txt",
            "--topics",
            "topics.txt",
            "--output",
            "toy.jsonl",
        ],
        dir.path(),
    );
    let lines: Vec<Value> = fs::read_to_string(dir.path().join("toy.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0]["utterances"][0]["act"], "question");
    assert_eq!(lines[3]["topic"], "2");
    ok(
        &[
            "segment",
            "--input",
            "toy.jsonl",
            "--scorer",
            "lexical",
            "--output",
            "seg.jsonl",
        ],
        dir.path(),
    );
}

#[test]
fn stats_matches_library_variance() {
    let dir = setup();
    ok(
        &[
            "synth",
            "--dialogues",
            "25",
            "--seed",
            "4",
            "--output",
            "syn.jsonl",
            "--embeddings",
            "vec.txt",
        ],
        dir.path(),
    );
    ok(
        &[
            "segment",
            "--input",
            "syn.jsonl",
            "--scorer",
            "lexical",
            "--output",
            "lexical.jsonl",
        ],
        dir.path(),
    );
    ok(
        &[
            "segment",
            "--input",
            "syn.jsonl",
            "--scorer",
            "embedding:vec.txt",
            "--output",
            "embedding.jsonl",
        ],
        dir.path(),
    );

    let single = ok(&["stats", "lexical.jsonl", "--output", "one.json"], dir.path());
    let rows = json(dir.path().join("one.json"));
    assert_eq!(rows.as_array().unwrap().len(), 1);
    assert_eq!(single.lines().filter(|l| l.starts_with("lexical")).count(), 1);

    let file = fs::File::open(dir.path().join("lexical.jsonl")).unwrap();
    let reports = dialseg::report::read_reports_jsonl(std::io::BufReader::new(file)).unwrap();
    let expected = dialseg::report::report_depth_variance(&reports).unwrap();
    assert_eq!(rows[0]["depth_variance"].as_f64().unwrap(), expected);
    let summary = json(dir.path().join("lexical.jsonl.summary.json"));
    assert_eq!(summary["depth_variance"].as_f64().unwrap(), expected);

    let table = ok(
        &["stats", "lexical.jsonl", "embedding.jsonl", "--output", "two.json"],
        dir.path(),
    );
    let rows = json(dir.path().join("two.json"));
    let labels: Vec<&str> = rows
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["lexical", "embedding"]);
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn stats_rejects_empty_input() {
    let dir = setup();
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let out = dialseg(&["stats", "empty.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = dialseg(&["stats"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
