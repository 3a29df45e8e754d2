use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn peckfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peckfit"))
        .args(args)
        .env_remove("PECKFIT_THREADS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs a short fit on the shared fixtures and returns the report path.
fn fit(out: &Path, model: &str, seed: &str, extra: &[&str]) -> PathBuf {
    let catalog = fixture("catalog.json");
    let features = fixture("features.bin");
    let trials = fixture("trials.csv");
    let mut args = vec![
        "fit",
        "--model",
        model,
        "--catalog",
        path_str(&catalog),
        "--features",
        path_str(&features),
        "--trials",
        path_str(&trials),
        "--out",
        path_str(out),
        "--seed",
        seed,
        "--max-epochs",
        "3",
    ];
    args.extend_from_slice(extra);
    let result = peckfit(&args);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    out.join("fit_report.json")
}

fn data_args() -> Vec<String> {
    vec![
        "--catalog".into(),
        path_str(&fixture("catalog.json")).into(),
        "--features".into(),
        path_str(&fixture("features.bin")).into(),
        "--trials".into(),
        path_str(&fixture("trials.csv")).into(),
    ]
}

#[test]
fn fit_writes_report_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = fit(&dir.path().join("a"), "exemplar", "4", &[]);
    let b = fit(&dir.path().join("b"), "exemplar", "4", &[]);
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    let report = peckfit::FitReport::load(&a).unwrap();
    assert_eq!(report.features_label, "features");
    assert_eq!(report.folds.k, 6);
    assert_eq!(report.config.learning_rate, 0.003);
    assert_eq!(report.config.batch_size, 256);
}

#[test]
fn threads_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let seq = fit(&dir.path().join("seq"), "prototype", "4", &[]);
    let par = fit(&dir.path().join("par"), "prototype", "4", &["--threads", "3"]);
    assert_eq!(std::fs::read(seq).unwrap(), std::fs::read(par).unwrap());

    let out = Command::new(env!("CARGO_BIN_EXE_peckfit"))
        .args(["noise-ceiling", "--trials", path_str(&fixture("trials.csv")), "--seed", "1"])
        .env("PECKFIT_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--threads"), "{}", stderr(&out));
}

#[test]
fn fit_validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(dir.path());
    let missing = dir.path().join("nope.csv");
    let mut args = vec!["fit", "--seed", "1", "--out", out];
    let data = data_args();
    let mut data: Vec<&str> = data.iter().map(String::as_str).collect();
    data[5] = path_str(&missing);
    args.extend(&data);
    let r = peckfit(&args);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("nope.csv"), "{}", stderr(&r));

    let data = data_args();
    let data: Vec<&str> = data.iter().map(String::as_str).collect();
    let mut args = vec!["fit", "--seed", "1", "--out", out, "--lr", "0"];
    args.extend(&data);
    let r = peckfit(&args);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("learning_rate must be positive"), "{}", stderr(&r));

    let mut args = vec!["fit", "--out", out];
    args.extend(&data);
    let r = peckfit(&args);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("seed required for reproducibility"), "{}", stderr(&r));

    let mut args = vec!["fit", "--seed", "1", "--out", out, "--model", "perceptron"];
    args.extend(&data);
    assert_eq!(code(&peckfit(&args)), 1);
}

#[test]
fn diverging_fit_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_args();
    let data: Vec<&str> = data.iter().map(String::as_str).collect();
    let mut args = vec!["fit", "--seed", "1", "--out", path_str(dir.path()), "--lr", "1e300", "--max-epochs", "2"];
    args.extend(&data);
    let r = peckfit(&args);
    assert_eq!(code(&r), 2, "{}", stderr(&r));
    assert!(stderr(&r).contains("epoch"), "{}", stderr(&r));
}

#[test]
fn noise_ceiling_command() {
    let trials = fixture("ceiling_trials.csv");
    let catalog = fixture("catalog.json");
    let r = peckfit(&["noise-ceiling", "--trials", path_str(&trials), "--catalog", path_str(&catalog), "--seed", "3"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let value: f64 = stdout(&r).trim().parse().unwrap();
    assert!(value >= 0.9, "{value}");

    let once = || peckfit(&["noise-ceiling", "--trials", path_str(&trials), "--seed", "3", "--repeats", "1"]);
    assert_eq!(stdout(&once()), stdout(&once()));

    let r = peckfit(&["noise-ceiling", "--trials", path_str(&trials)]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("seed required for reproducibility"), "{}", stderr(&r));
}

#[test]
fn noise_ceiling_rejects_single_subject_condition() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(
        &path,
        "subject_id,imprint_animation_id,condition_id,familiar_animation_id,novel_animation_id,correct\n\
         s1,A00,c1,A01,B01,1\ns2,A00,c1,A01,B01,0\ns1,A00,c2,A02,B02,1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let r = peckfit(&["noise-ceiling", "--trials", path_str(&path), "--seed", "1", "--out", path_str(&out)]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("c2"), "{}", stderr(&r));
    assert!(!out.exists());
}

#[test]
fn eval_compares_reports() {
    let dir = tempfile::tempdir().unwrap();
    let proto = fit(&dir.path().join("p"), "prototype", "4", &["--label", "synth"]);
    let exem = fit(&dir.path().join("e"), "exemplar", "4", &["--label", "synth"]);
    let out = dir.path().join("cmp");
    let trials = fixture("trials.csv");
    let r = peckfit(&[
        "eval",
        "--report",
        path_str(&proto),
        "--report",
        path_str(&exem),
        "--out",
        path_str(&out),
        "--trials",
        path_str(&trials),
        "--seed",
        "2",
        "--repeats",
        "10",
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let csv = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "features,model,nll,pearson_r,zero_variance_flag,noise_ceiling");
    assert_eq!(lines.len(), 3);
    let nll = |l: &str| l.split(',').nth(2).unwrap().parse::<f64>().unwrap();
    assert!(nll(lines[1]) <= nll(lines[2]));
    assert!(out.join("comparison.txt").is_file());
    assert!(out.join("synth_prototype.svg").is_file());
    assert!(out.join("synth_exemplar.svg").is_file());

    let single = dir.path().join("single");
    let r = peckfit(&["eval", "--report", path_str(&proto), "--out", path_str(&single)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(std::fs::read_to_string(single.join("comparison.csv")).unwrap().lines().count(), 2);
}

#[test]
fn eval_guards() {
    let dir = tempfile::tempdir().unwrap();
    let a = fit(&dir.path().join("a"), "prototype", "4", &[]);
    let b = fit(&dir.path().join("b"), "prototype", "5", &[]);
    let out = dir.path().join("cmp");
    let r = peckfit(&["eval", "--report", path_str(&a), "--report", path_str(&b), "--out", path_str(&out)]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("fold"), "{}", stderr(&r));

    let other = fixture("ceiling_trials.csv");
    let r = peckfit(&[
        "eval",
        "--report",
        path_str(&a),
        "--out",
        path_str(&out),
        "--trials",
        path_str(&other),
        "--seed",
        "1",
    ]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("different trial table"), "{}", stderr(&r));
}

#[test]
fn predict_pooled_and_by_fold() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = fit(&dir.path().join("fit"), "exemplar", "4", &[]);
    let report = peckfit::FitReport::load(&report_path).unwrap();
    let data = data_args();
    let data: Vec<&str> = data.iter().map(String::as_str).collect();

    let pooled = dir.path().join("pooled");
    let mut args = vec!["predict", "--report", path_str(&report_path), "--out", path_str(&pooled), "--pooled"];
    args.extend(&data);
    let r = peckfit(&args);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let summaries = std::fs::read_to_string(pooled.join("condition_summaries.csv")).unwrap();
    for (line, c) in summaries.lines().skip(1).zip(&report.summary.conditions) {
        assert_eq!(line, format!("{},{},{:.3},{:.3}", c.condition_id, c.n_trials, c.observed_accuracy, c.predicted_accuracy));
    }
    let predictions = std::fs::read_to_string(pooled.join("predictions.csv")).unwrap();
    for line in predictions.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[6].parse::<usize>().unwrap(), report.folds.fold_of(cols[2]).unwrap());
    }

    let fold0 = dir.path().join("fold0");
    let mut args = vec!["predict", "--report", path_str(&report_path), "--out", path_str(&fold0), "--fold", "0"];
    args.extend(&data);
    assert_eq!(code(&peckfit(&args)), 0);
    let predictions = std::fs::read_to_string(fold0.join("predictions.csv")).unwrap();
    assert_eq!(predictions.lines().count(), 8401);
    assert!(predictions.lines().skip(1).all(|l| l.split(',').nth(6) == Some("0")));

    let mut args = vec!["predict", "--report", path_str(&report_path), "--out", path_str(&fold0), "--fold", "9"];
    args.extend(&data);
    let r = peckfit(&args);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("fold 9"), "{}", stderr(&r));
}

#[test]
fn report_command() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = fit(&dir.path().join("fit"), "prototype", "4", &[]);
    let plots = dir.path().join("plots");
    let r = peckfit(&["report", "--report", path_str(&report_path), "--out", path_str(&plots)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).contains("cv nll"), "{}", stdout(&r));
    assert!(plots.join("features_prototype.svg").is_file());
}

#[test]
fn help_lists_defaults() {
    let r = peckfit(&["fit", "--help"]);
    assert_eq!(code(&r), 0);
    let text = stdout(&r);
    for expected in ["[default: 0.003]", "[default: 256]", "[default: 6]", "[default: 500]", "PECKFIT_THREADS"] {
        assert!(text.contains(expected), "missing {expected}:\n{text}");
    }
    let r = peckfit(&["noise-ceiling", "--help"]);
    assert!(stdout(&r).contains("[default: 100]"));
    assert_eq!(code(&peckfit(&["--version"])), 0);
    assert_eq!(code(&peckfit(&["fit", "--no-such-flag"])), 1);
    assert_eq!(code(&peckfit(&[])), 1);
}
