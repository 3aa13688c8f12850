use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn smtl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smtl"))
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fit_toy(dir: &Path) -> PathBuf {
    let model = dir.join("toy.model");
    let out = run(smtl()
        .arg("fit")
        .arg("--data")
        .arg(repo_file("data/toy_two_task.csv"))
        .arg("--config")
        .arg(repo_file("data/toy.cfg"))
        .arg("--out")
        .arg(&model));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    model
}

#[test]
fn toy_fit_and_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_toy(dir.path());
    let report = fs::read_to_string(dir.path().join("toy.model.report")).unwrap();
    assert!(report.contains("termination = Converged"));
    assert!(report.contains("[trajectory]"));

    let preds = dir.path().join("pred.csv");
    let out = run(smtl()
        .arg("predict")
        .arg("--model")
        .arg(&model)
        .arg("--data")
        .arg(repo_file("data/toy_two_task.csv"))
        .arg("--out")
        .arg(&preds));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(&preds).unwrap();
    assert!(csv.starts_with("row,task,y,z0,z1\n"));
    assert_eq!(csv.lines().count(), 61);
    let metrics = fs::read_to_string(dir.path().join("pred.csv.metrics")).unwrap();
    let nmse: f64 = metrics
        .lines()
        .find_map(|l| l.strip_prefix("nmse = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(nmse < 0.05, "training nMSE {nmse}");
}

#[test]
fn predict_with_wrong_feature_count_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_toy(dir.path());
    let data = dir.path().join("wide.csv");
    fs::write(&data, "task,y,x1,x2,x3,x4\n0,1.0,1,2,3,4\n").unwrap();
    let out = run(smtl()
        .arg("predict")
        .arg("--model")
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("p.csv")));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("expected 3"), "{}", stderr(&out));
}

#[test]
fn labels_mode_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_toy(dir.path());
    let data = dir.path().join("labels.csv");
    fs::write(&data, "task,y,x1,x2,x3\n0,0,1,0,0\n1,0,0,1,0\n").unwrap();
    let preds = dir.path().join("p.csv");
    let out = run(smtl()
        .arg("predict")
        .arg("--model")
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&preds)
        .arg("--labels"));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let metrics = fs::read_to_string(dir.path().join("p.csv.metrics")).unwrap();
    assert!(metrics.contains("accuracy = "));

    fs::write(&data, "task,y,x1,x2,x3\n5,0,1,0,0\n").unwrap();
    let out = run(smtl()
        .arg("predict")
        .arg("--model")
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&preds)
        .arg("--labels"));
    assert_eq!(code(&out), 2);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&run(&mut smtl())), 1);
    assert_eq!(code(&run(smtl().arg("fit").arg("--data").arg("x.csv"))), 1);
    assert_eq!(code(&run(smtl().arg("--help"))), 0);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "lambda = 0.1\nlamda = 0.2\n").unwrap();
    let out = run(smtl()
        .arg("fit")
        .arg("--data")
        .arg(repo_file("data/toy_two_task.csv"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("m")));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "task,y,x1\n0,1.0,abc\n").unwrap();
    let out = run(smtl()
        .arg("fit")
        .arg("--data")
        .arg(&data)
        .arg("--config")
        .arg(repo_file("data/toy.cfg"))
        .arg("--out")
        .arg(dir.path().join("m")));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let out = run(smtl()
        .arg("predict")
        .arg("--model")
        .arg(dir.path().join("missing.model"))
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("p.csv")));
    assert_eq!(code(&out), 2);

    let model = dir.path().join("truncated.model");
    fs::write(&model, "SMTL-MODEL v1\n[kernel]\ntype = linear\n").unwrap();
    let out = run(smtl()
        .arg("predict")
        .arg("--model")
        .arg(&model)
        .arg("--data")
        .arg(repo_file("data/toy_two_task.csv"))
        .arg("--out")
        .arg(dir.path().join("p.csv")));
    assert_eq!(code(&out), 2);
}

#[test]
fn benchmark_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.cfg");
    fs::write(&cfg, "lambda = 0.1\nseed = 9\nbenchmark.repeats = 2\nsynth.n_per_task = 8\n").unwrap();
    let mut tables = Vec::new();
    for threads in ["1", "3"] {
        let out_csv = dir.path().join(format!("bench{threads}.csv"));
        let out = run(smtl()
            .env("SMTL_THREADS", threads)
            .arg("benchmark")
            .arg("--config")
            .arg(&cfg)
            .arg("--grid")
            .arg("2,4x2,3")
            .arg("--out")
            .arg(&out_csv));
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        tables.push(fs::read_to_string(out_csv).unwrap());
    }
    let objectives = |csv: &str| -> Vec<String> {
        csv.lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                format!("{} {} {}", f[0], f[5], f[10])
            })
            .collect()
    };
    assert_eq!(tables[0].lines().count(), 1 + 2 * 2 * 2 * 3);
    assert_eq!(objectives(&tables[0]), objectives(&tables[1]));

    let out = run(smtl()
        .arg("benchmark")
        .arg("--config")
        .arg(&cfg)
        .arg("--grid")
        .arg("2x")
        .arg("--out")
        .arg(dir.path().join("x.csv")));
    assert_eq!(code(&out), 1);
}

#[test]
fn verify_passes_on_a_clean_build() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("verify.csv");
    let out = run(smtl().arg("verify").arg("--csv").arg(&csv));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}{}", stderr(&out));
    assert!(stdout.lines().count() >= 12);
    let table = fs::read_to_string(csv).unwrap();
    assert!(table.starts_with("name,status,"));

    let out = run(smtl().arg("verify").arg("--filter").arg("nuclear"));
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);

    let out = run(smtl().arg("verify").arg("--filter").arg("no-such-check"));
    assert_eq!(code(&out), 1);
}
