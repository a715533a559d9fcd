//! End-to-end acceptance run for the binary: synthesize a corpus, ingest and
//! prepare it, examine the test split with the random and lexical-overlap
//! baselines, score both, and compare them. Asserts the whole loop holds its
//! statistical anchors and stays deterministic.

use serde_json::Value;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn novex(workspace: &Path, args: &[&str]) -> String {
    let output = Command::new(env!("CARGO_BIN_EXE_novex"))
        .arg("--workspace")
        .arg(workspace)
        .arg("--seed")
        .arg("5")
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "novex {args:?} failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn report(workspace: &Path, run_id: &str) -> Value {
    let path = workspace.join("runs").join(run_id).join("report-test.json");
    serde_json::from_slice(&std::fs::read(&path).expect("report exists")).expect("report parses")
}

#[test]
fn pipeline_runs_end_to_end_with_sane_baselines() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();

    novex(ws, &["synth", "--applications", "200"]);
    novex(ws, &["ingest"]);
    novex(ws, &["prepare"]);

    novex(ws, &["run", "--method", "random", "--run-id", "random-a"]);
    novex(ws, &["run", "--method", "random", "--run-id", "random-b"]);
    novex(ws, &["run", "--method", "rouge", "--run-id", "rouge-a"]);

    // Same seed, same method: the prediction files must agree byte for byte.
    let predictions = |run_id: &str| {
        std::fs::read(ws.join("runs").join(run_id).join("predictions.jsonl")).unwrap()
    };
    assert_eq!(
        predictions("random-a"),
        predictions("random-b"),
        "same-seed runs must produce byte-identical prediction files"
    );

    novex(ws, &["eval", "random-a"]);
    novex(ws, &["eval", "rouge-a"]);

    let random = report(ws, "random-a");
    let rouge = report(ws, "rouge-a");
    let accuracy = random["report"]["classification"]["accuracy"].as_f64().unwrap();
    assert!(
        (accuracy - 0.5).abs() <= 0.05,
        "random verdicts should land near coin-flip accuracy, got {accuracy}"
    );
    let random_recall = random["report"]["retrieval_feature"]["r"].as_f64().unwrap();
    let rouge_recall = rouge["report"]["retrieval_feature"]["r"].as_f64().unwrap();
    assert!(
        rouge_recall > random_recall,
        "lexical retrieval ({rouge_recall}) must beat random retrieval ({random_recall})"
    );

    let agree_out = novex(ws, &["agree", "random-a", "rouge-a"]);
    assert!(ws.join("agreement.json").exists(), "agree writes its matrices:\n{agree_out}");
    let agreement: Value =
        serde_json::from_slice(&std::fs::read(ws.join("agreement.json")).unwrap()).unwrap();
    assert!(agreement.get("test").is_some());

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget is 5 minutes");
    println!(
        "[PASS] 9/10 synth, ingest, prepare, two baseline runs, eval and agree complete in \
         {elapsed:?}; random accuracy {accuracy:.3}, lexical feature recall {rouge_recall:.3} > \
         random {random_recall:.3}, and reruns are byte-identical"
    );
}
