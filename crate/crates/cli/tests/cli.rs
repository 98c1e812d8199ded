use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn etoe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etoe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = etoe(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_reports_design_space() {
    let text = ok(&["validate", p(&fixture("tiny.json"))]);
    assert!(text.contains("design space 64"), "{text}");
}

#[test]
fn paths_lists_the_constrained_path() {
    let text = ok(&["paths", p(&fixture("tiny.json"))]);
    assert!(text.contains("p1:a") && text.contains("p2:c"), "{text}");
}

#[test]
fn estimate_prints_latency_and_validity() {
    let text = ok(&["estimate", p(&fixture("tiny.json")), "--chromosome", "1;10;10;10;10;10"]);
    assert!(text.contains("energy 1500  area 2"), "{text}");
    assert!(text.trim_end().ends_with("valid"), "{text}");
}

#[test]
fn exhaustive_then_score_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex");
    let text = ok(&["exhaustive", p(&fixture("tiny.json")), "--log", "--out", p(&out)]);
    assert!(text.contains("64 configurations, 48 feasible, 2 on the front"), "{text}");
    assert_eq!(fs::read_to_string(out.join("log.csv")).unwrap().lines().count(), 65);
    let front = out.join("front.csv");
    let table = ok(&["score", p(&front), "--reference", p(&front)]);
    assert!(table.lines().nth(1).unwrap().ends_with(",2,0,0"), "{table}");
}

#[test]
fn gen_bench_output_validates() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("b.json");
    ok(&["gen-bench", "--psms", "3", "--seed", "4", "--out", p(&sys)]);
    ok(&["validate", p(&sys)]);
    let ads = dir.path().join("ads.json");
    ok(&["gen-bench", "--preset", "ads", "--bound", "0.1", "--seed", "1", "--out", p(&ads)]);
    assert_eq!(fs::read(&ads).unwrap(), fs::read(fixture("ads.json")).unwrap());
}

#[test]
fn optimize_and_segment_ignore_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let sys = p(&fixture("ads.json")).to_string();
    for algo in ["lcso", "ga", "sa"] {
        let mut fronts = Vec::new();
        for threads in ["1", "4"] {
            let out = dir.path().join(format!("{algo}-{threads}"));
            ok(&[
                "optimize", &sys, "--algo", algo, "--pop", "20", "--gens", "20", "--sa-iters", "300",
                "--seed", "3", "--threads", threads, "--out", p(&out),
            ]);
            fronts.push(fs::read(out.join("front.csv")).unwrap());
        }
        assert_eq!(fronts[0], fronts[1], "{algo}");
    }
    let mut segs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("seg-{threads}"));
        ok(&["segment", &sys, "--n-seg", "44", "--threads", threads, "--out", p(&out)]);
        segs.push(fs::read(out.join("segments.csv")).unwrap());
    }
    assert_eq!(segs[0], segs[1]);
}

#[test]
fn malformed_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(etoe(&["validate", p(&bad)]).status.code(), Some(2));
}

#[test]
fn unreachable_bound_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("tiny.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["constraints"][0]["bound"] = serde_json::json!(1e-9);
    let sys = dir.path().join("tight.json");
    fs::write(&sys, v.to_string()).unwrap();
    let out = dir.path().join("run");
    let r = etoe(&["optimize", p(&sys), "--algo", "ga", "--pop", "4", "--gens", "2", "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}
