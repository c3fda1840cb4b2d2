use std::path::Path;
use std::process::{Command, Output};

fn quicci(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quicci"))
        .args(args)
        .current_dir(dir)
        .env_remove("QUICCI_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = quicci(dir, args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn corpus(dir: &Path, count: &str) {
    ok(dir, &["--seed", "5", "synth-corpus", "--out", "corpus", "--count", count]);
}

#[test]
fn generate_build_query_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir, "2");
    ok(dir, &["generate", "corpus/toy_000.obj", "corpus/toy_001.obj", "--out", "d.qdf", "--width", "63", "--height", "64"]);
    let bytes = std::fs::read(dir.join("d.qdf")).unwrap();
    assert_eq!(&bytes[..4], b"QIDS");

    ok(dir, &["index", "build", "d.qdf", "--out", "idx", "--leaf-threshold", "16"]);
    let out = ok(dir, &["--seed", "1", "index", "query", "--index", "idx", "--needles", "d.qdf", "--needle", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rank,distance,object_id,vertex_index"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[..2], ["0", "0"]);
    assert_eq!(text.lines().count(), 33);

    let out = ok(dir, &["index", "query", "--index", "idx", "--needles", "d.qdf", "--k", "32", "--max-distance", "0"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0")));

    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("seed: "));

    let stats = String::from_utf8(ok(dir, &["index", "stats", "--index", "idx"]).stdout).unwrap();
    assert!(stats.contains("image_size: 63x64"));
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir, "1");
    ok(dir, &["generate", "corpus/toy_000.obj", "--out", "d.qdf", "--width", "15", "--height", "16"]);
    ok(dir, &["index", "build", "d.qdf", "--out", "idx", "--codec", "none"]);
    std::fs::write(dir.join("q.conf"), "# query settings\nk = 2\nneedles = d.qdf\nindex = idx\n").unwrap();
    let rows = |args: &[&str]| String::from_utf8(ok(dir, args).stdout).unwrap().lines().count() - 1;
    assert_eq!(rows(&["--config", "q.conf", "index", "query"]), 2);
    assert_eq!(rows(&["--config", "q.conf", "index", "query", "--k", "4"]), 4);
    std::fs::write(dir.join("bad.conf"), "no_such_key = 1\n").unwrap();
    assert!(!quicci(dir, &["--config", "bad.conf", "index", "query"]).status.success());
}

#[test]
fn clutterbox_is_reproducible_and_failures_leave_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir, "4");
    let args = |out: &'static str| {
        vec![
            "--seed", "42", "experiment", "clutterbox", "--dataset", "corpus", "--out", out, "--object-counts", "1,2",
            "--width", "15", "--height", "16", "--clutter-samples", "100", "--runs", "2",
        ]
    };
    ok(dir, &args("a"));
    ok(dir, &args("b"));
    for f in ["ranks.csv", "rank_summary.csv", "heatmap.csv"] {
        assert_eq!(std::fs::read(dir.join("a").join(f)).unwrap(), std::fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }
    let manifest = std::fs::read_to_string(dir.join("a/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 42"));

    let out = quicci(dir, &["experiment", "clutterbox", "--dataset", "missing", "--out", "c"]);
    assert!(!out.status.success());
    assert!(!dir.join("c").exists());
    // more objects than meshes fails after loading
    let out = quicci(dir, &["experiment", "clutterbox", "--dataset", "corpus", "--out", "d", "--object-counts", "1,9"]);
    assert!(!out.status.success());
    assert!(!dir.join("d").exists());
}

#[test]
fn distance_study_emits_every_histogram() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir, "2");
    ok(
        dir,
        &[
            "--seed", "3", "experiment", "distance-study", "--dataset", "corpus", "--out", "ds", "--width", "15",
            "--height", "16", "--max-spheres", "30", "--nominal-pairs", "1",
        ],
    );
    let means = std::fs::read_to_string(dir.join("ds/distance_means.csv")).unwrap();
    let perturbed = means.lines().filter(|l| l.starts_with("perturbed")).count();
    assert_eq!(perturbed, 3 * (30 / 10 + 1));
    assert_eq!(means.lines().filter(|l| l.starts_with("nominal")).count(), 3);
}

#[test]
fn benches_and_runindex_study_write_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir, "2");
    ok(dir, &["--threads", "1", "experiment", "bench-compare", "--out", "bc", "--images", "64", "--seconds", "0.05"]);
    let csv = std::fs::read_to_string(dir.join("bc/comparison_rate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    ok(
        dir,
        &[
            "experiment", "bench-generate", "--dataset", "corpus", "--out", "bg", "--triangles", "0,500", "--descriptors",
            "10", "--width", "15", "--height", "16",
        ],
    );
    assert_eq!(std::fs::read_to_string(dir.join("bg/generation_rate.csv")).unwrap().lines().count(), 3);
    ok(
        dir,
        &[
            "experiment", "runindex-study", "--out", "ri", "--corpus-size", "200", "--needle-bits", "8,1024", "--needles",
            "2", "--k", "5",
        ],
    );
    let csv = std::fs::read_to_string(dir.join("ri/runindex_study.csv")).unwrap();
    assert!(csv.starts_with("needle_set_bits,"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = quicci(dir, &["generate", "absent.obj", "--out", "x.qdf"]);
    assert!(!out.status.success());
    assert!(!dir.join("x.qdf").exists());
    assert!(!dir.join("x.qdf.partial").exists());
    let out = Command::new(env!("CARGO_BIN_EXE_quicci"))
        .args(["synth-corpus", "--out", "c", "--count", "1"])
        .current_dir(dir)
        .env("QUICCI_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
}
