use std::path::Path;
use std::process::Command;

use dropsembles::harness::{
    mean_std, report, run_experiment, run_seed, sweep, Experiment, ExperimentConfig, Method, Phase,
    PhaseStatus, ResultsTable, RunRecord, SweepAxis, REPORT_COLUMNS,
};
use dropsembles::Error;

fn tiny_toy(method: Method) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Experiment::Toy);
    cfg.method = method;
    cfg.seeds = vec![4];
    cfg.hidden_width = 32;
    cfg.data.n_train_a = 200;
    cfg.data.n_test_a = 100;
    cfg.data.n_test_b = 100;
    cfg.task_a.epochs = 40;
    cfg.task_b.epochs = 20;
    cfg.mc_samples = 8;
    cfg.members = 2;
    cfg
}

#[test]
fn interrupted_run_resumes_to_the_same_result() {
    let cfg = tiny_toy(Method::Dropsembles);
    let fresh = tempfile::tempdir().unwrap();
    let full = run_seed(&cfg, fresh.path(), 4, Phase::Evaluate).unwrap();

    let resumed = tempfile::tempdir().unwrap();
    let partial = run_seed(&cfg, resumed.path(), 4, Phase::Fisher).unwrap();
    assert_eq!(
        partial.manifest.status(Phase::Fisher),
        PhaseStatus::Complete
    );
    assert_eq!(partial.manifest.status(Phase::TuneB), PhaseStatus::Pending);
    assert!(partial.metrics.is_none());
    let done = run_seed(&cfg, resumed.path(), 4, Phase::Evaluate).unwrap();
    assert!(done.manifest.is_complete());
    assert!(done.manifest.task_a_cache_hit);

    let read = |dir: &Path| std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert_eq!(read(&full.dir), read(&done.dir));

    // A complete run short-circuits and leaves its files untouched.
    let before = std::fs::metadata(done.dir.join("metrics.csv"))
        .unwrap()
        .modified()
        .unwrap();
    let again = run_seed(&cfg, resumed.path(), 4, Phase::Evaluate).unwrap();
    assert_eq!(again.manifest, done.manifest);
    assert_eq!(
        std::fs::metadata(done.dir.join("metrics.csv"))
            .unwrap()
            .modified()
            .unwrap(),
        before
    );
}

#[test]
fn report_aggregates_mean_and_sample_std() {
    let mut cfg = tiny_toy(Method::McDropout);
    cfg.seeds = vec![1, 2, 3];
    let root = tempfile::tempdir().unwrap();
    let out = run_experiment(&cfg, root.path()).unwrap();
    let accs: Vec<f64> = out
        .seeds
        .iter()
        .map(|s| s.metrics.as_ref().unwrap().task_b.accuracy)
        .collect();

    let n = accs.len() as f64;
    let mean = accs.iter().sum::<f64>() / n;
    let std = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let (m, s) = mean_std(&accs).unwrap();
    assert!((m - mean).abs() < 1e-12 && (s - std).abs() < 1e-12);

    let rep = report(
        std::slice::from_ref(&out.config_dir),
        &root.path().join("report"),
    )
    .unwrap();
    assert!(rep.skipped.is_empty());
    let csv = std::fs::read_to_string(&rep.csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), REPORT_COLUMNS.join(","));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4, "three seeds plus the aggregate:\n{csv}");
    let col = REPORT_COLUMNS.iter().position(|c| *c == "Acc-B").unwrap();
    for (row, acc) in rows.iter().zip(&accs) {
        assert_eq!(row[col], format!("{acc:.4}"));
    }
    assert_eq!(rows[3][5], "mean");
    assert_eq!(rows[3][col], format!("{mean:.4}±{std:.4}"));
    let runs_col = REPORT_COLUMNS
        .iter()
        .position(|c| *c == "task_b_runs")
        .unwrap();
    assert_eq!(rows[0][runs_col], "1.0000");
}

#[test]
fn report_skips_missing_and_incomplete_runs() {
    let root = tempfile::tempdir().unwrap();
    let missing = root.path().join("nothing-here");
    let rep = report(std::slice::from_ref(&missing), &root.path().join("report")).unwrap();
    assert_eq!(rep.skipped, vec![missing]);
    assert_eq!(
        rep.table.to_csv(),
        format!("{}\n", REPORT_COLUMNS.join(","))
    );

    let cfg = tiny_toy(Method::Dropsembles);
    let partial = run_seed(&cfg, root.path(), 4, Phase::TrainA).unwrap();
    assert!(matches!(
        RunRecord::load(&partial.dir),
        Err(Error::Argument(_))
    ));
    let rep = report(&[root.path().to_path_buf()], &root.path().join("report")).unwrap();
    assert_eq!(rep.skipped, vec![partial.dir]);
    assert!(rep.table.runs.is_empty());
}

#[test]
fn member_sweep_ledger_separates_shared_and_independent_pretraining() {
    let root = tempfile::tempdir().unwrap();
    let task_a_runs = |method| {
        let out = sweep(
            &tiny_toy(method),
            SweepAxis::Members,
            &[1.0, 2.0, 4.0],
            root.path(),
        )
        .unwrap();
        let csv = std::fs::read_to_string(&out.csv).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(out.svg.is_file());
        out.cells
            .iter()
            .map(|c| c.runs[0].manifest.ledger.task_a_runs)
            .collect::<Vec<_>>()
    };
    assert_eq!(task_a_runs(Method::Dropsembles), [1, 1, 1]);
    assert_eq!(task_a_runs(Method::DeepEnsemble), [1, 2, 4]);
}

#[test]
fn sweep_rejects_unsorted_values() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_toy(Method::Dropsembles);
    assert!(matches!(
        sweep(&cfg, SweepAxis::Lambda, &[10.0, 1.0], root.path()),
        Err(Error::Argument(_))
    ));
    assert!(matches!(
        sweep(&cfg, SweepAxis::Lambda, &[], root.path()),
        Err(Error::Argument(_))
    ));
    assert!(matches!(
        sweep(&cfg, SweepAxis::Members, &[1.5], root.path()),
        Err(Error::Phase { .. })
    ));
}

#[test]
fn results_table_groups_by_configuration() {
    let root = tempfile::tempdir().unwrap();
    let a = tiny_toy(Method::Dropsembles);
    let mut b = a.clone();
    b.ewc_lambda = 50.0;
    let dirs: Vec<_> = [&a, &b]
        .iter()
        .map(|c| run_experiment(c, root.path()).unwrap().config_dir)
        .collect();
    let (runs, skipped) = dropsembles::harness::collect_runs(&dirs);
    assert!(skipped.is_empty());
    let table = ResultsTable::new(runs);
    assert_eq!(table.aggregates.len(), 2);
    assert_eq!(table.aggregates[0].ewc_lambda, 0.0);
    assert_eq!(table.aggregates[1].ewc_lambda, 50.0);
}

fn cli(root: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dropsembles"))
        .args(args)
        .env("DROPSEMBLES_RUN_ROOT", root)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

const CLI_TINY: [&str; 10] = [
    "--experiment",
    "toy",
    "--seeds",
    "2",
    "--epochs-a",
    "20",
    "--epochs-b",
    "10",
    "--mc-samples",
    "4",
];

#[test]
fn cli_exit_codes() {
    let root = tempfile::tempdir().unwrap();
    let bad = root.path().join("bad.toml");
    std::fs::write(&bad, "experiment = \"toy\"\n[model]\nwidth = 3\n").unwrap();
    let out = cli(root.path(), &["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("line 3"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = cli(
        root.path(),
        &[&["run"][..], &CLI_TINY, &["--require", "Acc-B>=101"]].concat(),
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with(&REPORT_COLUMNS.join(",")));

    let out = cli(
        root.path(),
        &[&["run"][..], &CLI_TINY, &["--require", "Acc-B>=0"]].concat(),
    );
    assert_eq!(out.status.code(), Some(0));

    let blocker = root.path().join("file-not-dir");
    std::fs::write(&blocker, "").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dropsembles"))
        .args(
            [
                &["gen-data"][..],
                &CLI_TINY,
                &["--run-root", blocker.to_str().unwrap()],
            ]
            .concat(),
        )
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn cli_phases_stop_where_asked() {
    let root = tempfile::tempdir().unwrap();
    let out = cli(root.path(), &[&["train-a"][..], &CLI_TINY].concat());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = String::from_utf8(out.stdout).unwrap().trim().to_string();
    let manifest = std::fs::read_to_string(Path::new(&dir).join("manifest.txt")).unwrap();
    assert!(!Path::new(&dir).join("metrics.csv").exists());
    assert!(manifest.contains("train-a"));
    let out = cli(root.path(), &[&["eval"][..], &CLI_TINY].concat());
    assert!(out.status.success());
    assert!(Path::new(&dir).join("metrics.csv").is_file());
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg =
                ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.validate().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
