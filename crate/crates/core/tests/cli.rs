mod common;

use std::path::Path;
use std::process::Command;

use common::{run_cli, workspace_path};
use tulving::analysis::parse_trace_csv;
use tulving::protocol::{RunManifest, TrialRecord};

fn dict() -> String {
    workspace_path("data/cmudict.dict").display().to_string()
}

fn stimuli() -> String {
    workspace_path("data/stimuli.json").display().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulated_run(out: &Path, extra: &[&str]) -> (i32, String, String) {
    let mut args = vec!["run", "--stimuli", &stimuli_leak(), "--subject", "simulated", "--out", p(out)];
    args.extend_from_slice(extra);
    run_cli(&args)
}

fn stimuli_leak() -> &'static str {
    Box::leak(stimuli().into_boxed_str())
}

#[test]
fn lexicon_commands() {
    let d = dict();
    let (code, out, _) = run_cli(&["lexicon", "--dict", &d, "check", "cat", "hat"]);
    assert_eq!((code, out.trim()), (0, "true"));
    let (code, out, _) = run_cli(&["lexicon", "--dict", &d, "check", "cat", "dog"]);
    assert_eq!((code, out.trim()), (0, "false"));
    let (code, out, _) = run_cli(&["lexicon", "--dict", &d, "rhymes", "cat", "--limit", "5"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 5);
    let (code, _, err) = run_cli(&["lexicon", "--dict", &d, "check", "cat", "qqqzzz"]);
    assert_eq!(code, 1);
    assert!(err.contains("qqqzzz"));
    let (code, _, _) = run_cli(&["lexicon", "--dict", "/nonexistent/cmudict.dict", "check", "cat", "hat"]);
    assert_eq!(code, 2);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run_cli(&["frobnicate"]).0, 2);
    assert_eq!(run_cli(&["run", "--subject", "simulated", "--p", "0.5,0.5"]).0, 2);
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = simulated_run(dir.path(), &["--p", "0.5,0.5,0.5,0.5"]);
    assert_eq!(code, 2, "{err}");
    let (code, _, _) = simulated_run(dir.path(), &[]);
    assert_eq!(code, 2);
    assert_eq!(run_cli(&["--help"]).0, 0);
}

#[test]
fn validate_shipped_set_passes() {
    let (code, out, err) = run_cli(&["validate", "--stimuli", &stimuli(), "--dict", &dict()]);
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.trim_end().ends_with("PASS"));
    assert!(!out.contains("FAIL"));
}

fn edited_stimuli(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(stimuli()).unwrap()).unwrap();
    edit(&mut doc);
    let path = dir.join("stimuli.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    path.display().to_string()
}

#[test]
fn validate_reports_non_rhyming_cue() {
    let dir = tempfile::tempdir().unwrap();
    let path = edited_stimuli(dir.path(), |doc| doc["items"][2]["rhyme"][1] = "banana".into());
    let (code, out, _) = run_cli(&["validate", "--stimuli", &path, "--dict", &dict()]);
    assert_eq!(code, 1);
    let fail = out.lines().find(|l| l.starts_with("FAIL")).unwrap();
    assert!(fail.contains("items[2]") && fail.contains("banana"), "{fail}");
}

#[test]
fn validate_rejects_fifteen_items() {
    let dir = tempfile::tempdir().unwrap();
    let path = edited_stimuli(dir.path(), |doc| {
        doc["items"].as_array_mut().unwrap().pop();
    });
    let (code, _, err) = run_cli(&["validate", "--stimuli", &path, "--dict", &dict()]);
    assert_eq!(code, 1);
    assert!(err.contains("count"), "{err}");
}

#[test]
fn run_writes_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["--p", "0.3,0.2,0.1,0.4", "--reps", "25", "--seed", "7"];
    let (code, out, err) = simulated_run(&a, &args);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("400 trials"));
    assert_eq!(simulated_run(&b, &args).0, 0);

    let trials_a = std::fs::read(a.join("trials.jsonl")).unwrap();
    assert_eq!(trials_a, std::fs::read(b.join("trials.jsonl")).unwrap());
    let trials = TrialRecord::parse_jsonl(std::str::from_utf8(&trials_a).unwrap()).unwrap();
    assert_eq!(trials.len(), 400);

    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!((manifest.seed, manifest.repetitions, manifest.trials), (7, 25, 400));
    assert_eq!(manifest.subject_kind, "simulated");
    assert_eq!(manifest.sessions, 100);
    assert!(a.join("transcripts/rep0000_batch000.json").is_file());
    assert!(a.join(&trials[399].transcript_ref).is_file());

    for dir in [&a, &b] {
        let (code, _, err) = run_cli(&["report", "--run", p(dir)]);
        assert_eq!(code, 0, "{err}");
    }
    for f in ["report.txt", "signature_table.csv", "trace_associative.csv", "trace_rhyming.csv", "trace_pooled.csv"] {
        let ra = std::fs::read(a.join("report").join(f)).unwrap();
        assert_eq!(ra, std::fs::read(b.join("report").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn saved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert_eq!(simulated_run(&a, &["--p", "0.3,0.2,0.1,0.4", "--reps", "3", "--seed", "4", "--reencode"]).0, 0);
    let b = dir.path().join("b");
    let (code, _, err) = run_cli(&["run", "--config", p(&a.join("config.json")), "--out", p(&b)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(std::fs::read(a.join("trials.jsonl")).unwrap(), std::fs::read(b.join("trials.jsonl")).unwrap());
}

#[test]
fn replay_reproduces_recorded_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert_eq!(simulated_run(&a, &["--p", "0.3,0.2,0.1,0.4", "--reps", "2", "--seed", "12"]).0, 0);
    let b = dir.path().join("b");
    let (code, _, err) =
        simulated_run_with_subject(&b, "replay", &["--replay-dir", p(&a), "--reps", "2", "--seed", "12"]);
    assert_eq!(code, 0, "{err}");
    let outcomes = |d: &Path| -> Vec<(String, bool, bool)> {
        TrialRecord::parse_jsonl(&std::fs::read_to_string(d.join("trials.jsonl")).unwrap())
            .unwrap()
            .into_iter()
            .map(|t| (t.item.target, t.first.hit, t.second.hit))
            .collect()
    };
    assert_eq!(outcomes(&a), outcomes(&b));

    // a third repetition has no recording: every batch fails and the run aborts
    let c = dir.path().join("c");
    let (code, _, _) =
        simulated_run_with_subject(&c, "replay", &["--replay-dir", p(&a), "--reps", "3", "--seed", "12"]);
    assert_eq!(code, 1);
    assert!(c.join("manifest.json").is_file());
}

fn simulated_run_with_subject(out: &Path, subject: &str, extra: &[&str]) -> (i32, String, String) {
    let mut args = vec!["run", "--stimuli", stimuli_leak(), "--subject", subject, "--out", p(out)];
    args.extend_from_slice(extra);
    run_cli(&args)
}

#[test]
fn report_on_certain_recall() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(simulated_run(&run, &["--p", "1,0,0,0", "--reps", "2"]).0, 0);
    let (code, out, _) = run_cli(&["report", "--run", p(&run)]);
    assert_eq!(code, 0);
    for sig in ["A/AR", "A/RA", "R/AR", "R/RA"] {
        let row = out.lines().find(|l| l.starts_with(sig)).unwrap();
        let cells: Vec<&str> = row.split_whitespace().skip(2).take(4).collect();
        assert_eq!(cells, ["1.00", "0.00", "0.00", "0.00"], "{row}");
    }
    assert_eq!(out.matches("discrepancy |common - common_alt|").count(), 3);
    assert_eq!(out.matches("discrepancy |xy - yx|").count(), 3);
}

#[test]
fn report_on_oracle_run_recovers_latent_cells() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let (code, _, err) = simulated_run(&run, &["--p", "0.3,0.2,0.1,0.4", "--reps", "100", "--seed", "1"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(run_cli(&["report", "--run", p(&run)]).0, 0);
    for enc in ["associative", "rhyming"] {
        let csv = std::fs::read_to_string(run.join(format!("report/trace_{enc}.csv"))).unwrap();
        let rows = parse_trace_csv(&csv).unwrap();
        let reported = &rows[0].1;
        // 400 trials per order and encoding; bound is 3 standard errors of the common cell
        let bound = 3.0 * (0.5f64 / 400.0).sqrt();
        for (got, want) in reported[..4].iter().zip([0.3, 0.2, 0.1, 0.4]) {
            assert!((got - want).abs() <= bound, "{enc}: {got} vs {want}");
        }
    }
}

#[test]
fn report_without_valid_trials_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("trials.jsonl"), "").unwrap();
    assert_eq!(run_cli(&["report", "--run", p(dir.path())]).0, 1);
    assert_eq!(run_cli(&["report", "--run", p(&dir.path().join("missing"))]).0, 2);
}

#[test]
fn binary_exit_statuses() {
    let exe = env!("CARGO_BIN_EXE_tulving");
    let status = |args: &[&str]| Command::new(exe).args(args).output().unwrap();
    let ok = status(&["lexicon", "--dict", &dict(), "check", "cat", "hat"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout).trim(), "true");
    assert_eq!(status(&["lexicon", "--dict", "/nonexistent", "check", "a", "b"]).status.code(), Some(2));
    assert_eq!(status(&["bogus"]).status.code(), Some(2));
}

#[test]
fn shipped_templates_match_defaults() {
    let text = std::fs::read_to_string(workspace_path("data/templates.json")).unwrap();
    let shipped = tulving::protocol::PromptTemplates::from_json(&text).unwrap();
    assert_eq!(shipped, tulving::protocol::PromptTemplates::default());
}
