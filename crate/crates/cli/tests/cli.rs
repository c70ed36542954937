use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use compressed_inference::io::{read_jsonl, write_model, SequenceRecord};
use compressed_inference::*;
use compressed_inference_cli::{MethodReport, PredictionRecord};

fn cinfer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cinfer")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cinfer(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    cinfer(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_lines(path: &Path, lines: &[&str]) {
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn gen_robot_with_zero_sequences_writes_metadata_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty.jsonl");
    ok(&["gen-robot", "--n", "0", "--out", p(&out)]);
    assert_eq!(fs::read_to_string(&out).unwrap(), "");
    let meta = fs::read_to_string(dir.path().join("empty.jsonl.meta.json")).unwrap();
    assert!(meta.contains("\"world_sha256\""));
    assert!(meta.contains("\"seed\": 0"));
}

#[test]
fn gen_robot_is_deterministic_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for out in [&a, &b] {
        ok(&[
            "gen-robot",
            "--n",
            "400",
            "--accuracy",
            "70",
            "--seed",
            "3",
            "--out",
            p(out),
        ]);
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    assert_eq!(text.iter().filter(|&&c| c == b'\n').count(), 400);
}

#[test]
fn unreadable_world_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let missing = dir.path().join("missing.map");
    let run = cinfer(&["gen-robot", "--world", p(&missing), "--out", p(&out)]);
    assert_eq!(run.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&run.stderr).contains("missing.map"));
}

#[test]
fn fit_reports_space_sizes_and_warns_on_unseen_events() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    let model = dir.path().join("m.json");
    ok(&["gen-robot", "--n", "30", "--accuracy", "100", "--out", p(&data)]);
    let stdout = ok(&["fit", "--data", p(&data), "--out", p(&model)]);
    assert!(stdout.contains("M = 7, V = 4"), "{stdout}");
    let run = cinfer(&["fit", "--data", p(&data), "--smoothing", "0", "--out", p(&model)]);
    assert!(run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("warning"));
    assert!(fs::read_to_string(&model).unwrap().contains("\"-inf\""));
}

#[test]
fn fit_rejects_unlabeled_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    write_lines(&data, &[r#"{"obs":["a","b"]}"#]);
    assert_eq!(
        code(&["fit", "--data", p(&data), "--out", p(&dir.path().join("m.json"))]),
        2
    );
}

fn three_state_model() -> ChainModel {
    ChainModel::from_rows(
        Vocabulary::new(["A", "B", "C"]).unwrap(),
        Vocabulary::new(["x", "y"]).unwrap(),
        vec![0.3, -0.2, 0.0],
        vec![vec![1.0, -0.5, 0.2], vec![-0.7, 0.9, 0.1], vec![0.4, 0.0, 0.6]],
        vec![vec![0.8, -0.8], vec![-0.6, 0.6], vec![0.1, 0.2]],
    )
    .unwrap()
}

#[test]
fn infer_matches_library_decoders_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let (model_path, data, out) = (
        dir.path().join("m.json"),
        dir.path().join("d.jsonl"),
        dir.path().join("p.jsonl"),
    );
    let model = three_state_model();
    write_model(&model_path, &model).unwrap();
    // Label fields are never read, even when they are garbage.
    write_lines(
        &data,
        &[
            r#"{"obs":["x","x","y","y","x","y","y"],"states":"not a list"}"#,
            r#"{"obs":["y","x","x","x","y","x","y"]}"#,
            r#"{"obs":["x","y","x","y","x","y","x"],"states":["Q"]}"#,
        ],
    );
    ok(&[
        "infer",
        "--model",
        p(&model_path),
        "--data",
        p(&data),
        "--method",
        "viterbi,compressed,oracle",
        "--out",
        p(&out),
    ]);
    let preds: Vec<PredictionRecord> = read_jsonl(&out).unwrap();
    assert_eq!(preds.len(), 9);
    let obs: Vec<Vec<usize>> = compressed_inference::io::read_observations(&data, model.alphabet()).unwrap();
    let names = |s: &[usize]| {
        s.iter()
            .map(|&i| model.states().label(i).unwrap().to_owned())
            .collect::<Vec<_>>()
    };
    for (k, x) in obs.iter().enumerate() {
        let joint = baseline_compressed(&model, x, Baseline::Joint).unwrap();
        assert_eq!(preds[3 * k].prediction, names(joint.entries()));
        assert_eq!(preds[3 * k + 1].method, "compressed");
        assert_eq!(preds[3 * k + 1].prediction, preds[3 * k + 2].prediction);
        assert_eq!(preds[3 * k + 1].c_hat, preds[3 * k + 2].c_hat);
    }
}

#[test]
fn single_state_model_predicts_length_one() {
    let dir = tempfile::tempdir().unwrap();
    let (model_path, data, out) = (
        dir.path().join("m.json"),
        dir.path().join("d.jsonl"),
        dir.path().join("p.jsonl"),
    );
    write_model(&model_path, &ChainModel::uniform(1, 2).unwrap()).unwrap();
    write_lines(&data, &[r#"{"obs":["o0","o1","o1"]}"#, r#"{"obs":["o1"]}"#]);
    ok(&["infer", "--model", p(&model_path), "--data", p(&data), "--out", p(&out)]);
    let preds: Vec<PredictionRecord> = read_jsonl(&out).unwrap();
    assert!(preds.iter().all(|r| r.prediction.len() == 1 && r.c_hat == Some(1)));
}

#[test]
fn infer_names_mismatched_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (model_path, data) = (dir.path().join("m.json"), dir.path().join("d.jsonl"));
    write_model(&model_path, &three_state_model()).unwrap();
    write_lines(&data, &[r#"{"obs":["x","purple"]}"#]);
    let run = cinfer(&[
        "infer",
        "--model",
        p(&model_path),
        "--data",
        p(&data),
        "--out",
        p(&dir.path().join("p.jsonl")),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("purple"));
}

#[test]
fn oracle_budget_and_missing_files_have_their_own_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (model_path, data, out) = (
        dir.path().join("m.json"),
        dir.path().join("d.jsonl"),
        dir.path().join("p.jsonl"),
    );
    write_model(&model_path, &three_state_model()).unwrap();
    write_lines(&data, &[r#"{"obs":["x","y","x","y","x"]}"#]);
    let base = [
        "infer",
        "--model",
        p(&model_path),
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--method",
        "oracle",
    ];
    assert_eq!(code(&base), 0);
    assert_eq!(code(&[&base[..], &["--oracle-budget", "100"]].concat()), 4);
    let missing = dir.path().join("nope.json");
    assert_eq!(
        code(&["infer", "--model", p(&missing), "--data", p(&data), "--out", p(&out)]),
        3
    );
    assert_eq!(
        code(&[
            "infer",
            "--model",
            p(&model_path),
            "--data",
            p(&data),
            "--out",
            p(&out),
            "--norm",
            "x"
        ]),
        2
    );
    assert_eq!(code(&["evaluate"]), 2);
}

fn evaluate(dir: &Path, preds: &[&str], data: &[&str]) -> (i32, Vec<MethodReport>, String) {
    let (pp, dp, out) = (dir.join("p.jsonl"), dir.join("d.jsonl"), dir.join("r.jsonl"));
    write_lines(&pp, preds);
    write_lines(&dp, data);
    let run = cinfer(&[
        "evaluate",
        "--predictions",
        p(&pp),
        "--data",
        p(&dp),
        "--out",
        p(&out),
        "--seed",
        "9",
    ]);
    let code = run.status.code().unwrap();
    let reports = if code == 0 {
        read_jsonl(&out).unwrap()
    } else {
        Vec::new()
    };
    (code, reports, String::from_utf8(run.stdout).unwrap())
}

#[test]
fn evaluate_scores_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = [
        r#"{"obs":["a","a","a","a","a"],"states":["s","s","j","w","r"]}"#,
        r#"{"obs":["a","a","a","a"],"states":["s","j","w","r"]}"#,
    ];
    let preds = [
        r#"{"seq":0,"method":"perfect","prediction":["s","j","w","r"]}"#,
        r#"{"seq":0,"method":"short","prediction":["s","j","w","r"]}"#,
        r#"{"seq":1,"method":"perfect","prediction":["s","j","w","r"]}"#,
        r#"{"seq":1,"method":"short","prediction":["s","j","r","r"]}"#,
    ];
    let (code, reports, table) = evaluate(dir.path(), &preds, &data);
    assert_eq!(code, 0);
    assert_eq!(reports.len(), 2);
    assert_eq!((reports[0].exact_score, reports[0].eds), (100.0, 100.0));
    assert_eq!(reports[1].method, "short");
    assert!((reports[1].eds - 87.5).abs() < 1e-12);
    assert_eq!(reports[1].diagnostics.adjacent_duplicates, 1);
    assert_eq!(reports[1].seed, 9);
    for r in &reports {
        let recomputed = 100.0 - 100.0 * r.per_sequence.iter().map(|s| s.normalized()).sum::<f64>() / 2.0;
        assert!((recomputed - r.eds).abs() <= 1e-12);
    }
    assert!(table.lines().nth(2).unwrap().starts_with("short"));
    assert!(table.contains("87.50"));

    let unlabeled = [r#"{"obs":["a"]}"#, r#"{"obs":["a"]}"#];
    assert_eq!(evaluate(dir.path(), &preds, &unlabeled).0, 2);
    assert_eq!(evaluate(dir.path(), &preds[..1], &data).0, 2);
}

#[test]
fn bench_prints_one_row_per_cmax() {
    let dir = tempfile::tempdir().unwrap();
    let (model_path, data) = (dir.path().join("m.json"), dir.path().join("d.jsonl"));
    write_model(&model_path, &three_state_model()).unwrap();
    let line = format!("{{\"obs\":{:?}}}", vec!["x"; 80]);
    write_lines(&data, &[&line]);
    let one = ok(&["bench", "--model", p(&model_path), "--data", p(&data), "--cmax", "4"]);
    assert_eq!(one.lines().count(), 2);
    let four = ok(&["bench", "--model", p(&model_path), "--data", p(&data), "--reps", "1"]);
    assert_eq!(four.lines().count(), 5);
    assert_eq!(
        code(&["bench", "--model", p(&model_path), "--data", p(&data), "--cmax", "81"]),
        2
    );
    let records: Vec<SequenceRecord> = read_jsonl(&data).unwrap();
    assert_eq!(records[0].obs.len(), 80);
}
