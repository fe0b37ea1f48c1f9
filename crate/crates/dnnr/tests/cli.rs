use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn dnnr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnnr"))
        .args(args)
        .env_remove("DNNR_DATA_ROOT")
        .output()
        .expect("binary runs")
}

fn data_args(extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = vec![
        "--news".into(),
        fixture("news.tsv").display().to_string(),
        "--behaviors".into(),
        fixture("behaviors.tsv").display().to_string(),
        "--embed-dim".into(),
        "32".into(),
    ];
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run(cmd: &str, args: &[String]) -> Output {
    let mut all = vec![cmd];
    all.extend(args.iter().map(String::as_str));
    let out = dnnr(&all);
    assert!(
        out.status.success(),
        "{cmd} failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

#[test]
fn missing_input_exits_2_and_names_the_path() {
    let out = dnnr(&[
        "ingest",
        "--news",
        "/nonexistent/news.tsv",
        "--behaviors",
        "/nonexistent/behaviors.tsv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/news.tsv"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(dnnr(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        dnnr(&["pool", "--max-samples", "many"]).status.code(),
        Some(1)
    );
    let out = dnnr(&["ingest"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--news"));
    let args = data_args(&[
        "--feature-set",
        "Everything",
        "--pools",
        "/tmp/unused.ndjson",
    ]);
    let mut all = vec!["evaluate"];
    all.extend(args.iter().map(String::as_str));
    assert_eq!(dnnr(&all).status.code(), Some(1));
    assert_eq!(dnnr(&["--help"]).status.code(), Some(0));
}

#[test]
fn ingest_prints_stats_and_honors_user_limit() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.ndjson");
    let out = run(
        "ingest",
        &data_args(&["--user-limit", "100", "--store", &p(&store)]),
    );
    let text = stdout(&out);
    assert!(text.contains("users        100"), "{text}");
    assert!(text.contains("news         1500"), "{text}");
    assert!(text.contains("items read"), "{text}");
    assert!(store.exists());
    let full = stdout(&run("ingest", &data_args(&[])));
    assert!(full.contains("impressions  1000"), "{full}");
}

#[test]
fn random_pools_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ndjson");
    let b = dir.path().join("b.ndjson");
    for path in [&a, &b] {
        let out = run(
            "pool",
            &data_args(&[
                "--sampler",
                "random",
                "--seed",
                "1",
                "--user-limit",
                "60",
                "--pools",
                &p(path),
            ]),
        );
        assert!(stdout(&out).contains("pooling time"));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let header = fs::read_to_string(&a)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert!(header.contains("\"sampler\":\"random\""), "{header}");
}

#[test]
fn pool_train_evaluate_round() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.ndjson");
    let pools = dir.path().join("pools.ndjson");
    let models = dir.path().join("models");
    let reports = dir.path().join("reports");
    let start = std::time::Instant::now();
    run(
        "ingest",
        &data_args(&["--user-limit", "100", "--store", &p(&store)]),
    );
    let stage = |extra: &[&str]| {
        let mut v = vec![
            "--store".to_string(),
            p(&store),
            "--embed-dim".into(),
            "32".into(),
        ];
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    run(
        "pool",
        &stage(&[
            "--sampler",
            "synthetic",
            "--max-samples",
            "60",
            "--pools",
            &p(&pools),
        ]),
    );
    let out = run(
        "train",
        &stage(&[
            "--pools",
            &p(&pools),
            "--models",
            &p(&models),
            "--workers",
            "2",
        ]),
    );
    assert!(stdout(&out).contains("models"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(models.join("manifest.json")).unwrap()).unwrap();
    let trained = manifest["users"].as_array().unwrap();
    let skipped = manifest["skipped"].as_array().unwrap();
    assert_eq!(trained.len() + skipped.len(), 100);
    assert_eq!(
        fs::read_dir(&models)
            .unwrap()
            .filter(|e| e
                .as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "dnnrmod"))
            .count(),
        trained.len()
    );
    let first =
        dnnr::formats::model::load(&models.join(trained[0]["file"].as_str().unwrap())).unwrap();
    assert_eq!(first.loss_trace.len(), 15);
    run(
        "evaluate",
        &stage(&["--models", &p(&models), "--reports", &p(&reports)]),
    );
    let report = dnnr::report::EvalReport::load(&reports.join("synthetic-embtc-m60.json")).unwrap();
    assert_eq!(report.users.len(), 100);
    assert!(report.timing.predict_seconds.is_some());
    let csv = fs::read_to_string(reports.join("synthetic-embtc-m60.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "user_id,sampler,feature_set,max_samples,auc,skip_reason"
    );
    assert!(start.elapsed().as_secs() < 300);

    let out = dnnr(&[
        "evaluate",
        "--store",
        &p(&store),
        "--embed-dim",
        "16",
        "--models",
        &p(&models),
        "--reports",
        &p(&reports),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn empty_pool_file_is_named_in_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let pools = dir.path().join("empty.ndjson");
    fs::write(&pools, "").unwrap();
    let args = data_args(&["--pools", &p(&pools), "--models", &p(&dir.path().join("m"))]);
    let mut all = vec!["train"];
    all.extend(args.iter().map(String::as_str));
    let out = dnnr(&all);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty.ndjson"));
}

#[test]
fn sweep_writes_one_report_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("r");
    let out = run(
        "evaluate",
        &data_args(&[
            "--user-limit",
            "12",
            "--epochs",
            "3",
            "--sweep",
            "max-samples=15,30,60,120",
            "--reports",
            &p(&reports),
        ]),
    );
    assert_eq!(
        stdout(&out)
            .lines()
            .filter(|l| l.starts_with("synthetic"))
            .count(),
        4
    );
    for m in [15, 30, 60, 120] {
        let r = dnnr::report::EvalReport::load(&reports.join(format!("synthetic-embtc-m{m}.json")))
            .unwrap();
        assert_eq!(r.run.max_samples, m);
        assert!(r.timing.pooling_minutes_per_4000_users.is_some());
        assert!(r.timing.predict_minutes_per_4000_users.is_some());
    }
}

#[test]
fn feature_set_tc_is_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("r");
    run(
        "evaluate",
        &data_args(&[
            "--user-limit",
            "8",
            "--epochs",
            "2",
            "--feature-set",
            "tc",
            "--reports",
            &p(&reports),
        ]),
    );
    let r = dnnr::report::EvalReport::load(&reports.join("synthetic-tc-m60.json")).unwrap();
    assert_eq!(r.run.feature_set, "TC");
    assert_eq!(r.run.input_dim, 8 + 48);
}

#[test]
fn benchmark_reports_normalized_timings() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("r");
    let out = run(
        "benchmark",
        &data_args(&[
            "--user-limit",
            "8",
            "--epochs",
            "2",
            "--reports",
            &p(&reports),
        ]),
    );
    assert!(stdout(&out).contains("minutes per 4000 users"));
    let bench: serde_json::Value =
        serde_json::from_slice(&fs::read(reports.join("benchmark.json")).unwrap()).unwrap();
    let run0 = &bench["runs"][0];
    assert_eq!(run0["repetitions"].as_array().unwrap().len(), 3);
    assert!(run0["pooling"][0].as_f64().is_some());
    assert!(run0["repetitions"][0]["predict_minutes_per_4000_users"]
        .as_f64()
        .is_some());
}

#[test]
fn config_file_and_data_root() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    fs::create_dir_all(&root).unwrap();
    fs::copy(fixture("news.tsv"), root.join("news.tsv")).unwrap();
    fs::copy(fixture("behaviors.tsv"), root.join("behaviors.tsv")).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "user_limit = 30\nseed = 5\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dnnr"))
        .args(["ingest", "--config", &p(&cfg), "--user-limit", "20"])
        .env("DNNR_DATA_ROOT", &root)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("users        20"));
    fs::write(&cfg, "user_limits = 30\n").unwrap();
    let out = dnnr(&["ingest", "--config", &p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn embed_hash_writes_a_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("e.dnnremb");
    run("embed-hash", &data_args(&["--out", &p(&out_path)]));
    let store = dnnr::formats::embeddings::load(&out_path).unwrap();
    assert_eq!((store.len(), store.dim()), (1500, 32));
    let pools = dir.path().join("pools.ndjson");
    run(
        "pool",
        &[
            "--news".into(),
            p(&fixture("news.tsv")),
            "--behaviors".into(),
            p(&fixture("behaviors.tsv")),
            "--embeddings".into(),
            p(&out_path),
            "--user-limit".into(),
            "10".into(),
            "--pools".into(),
            p(&pools),
        ],
    );
    assert!(pools.exists());
}
