use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_fedsim");
const WORKER: &str = env!("CARGO_BIN_EXE_fedsim-worker");

fn quickstart() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quickstart.cfg")
}

fn fedsim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_run(out: &Path, extra: &[&str]) -> String {
    let cfg = quickstart();
    let mut args = vec![
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "data.clients=200",
        "--set",
        "participants=10",
        "--set",
        "total_rounds=4",
        "--set",
        "eval_every=2",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    ok(fedsim(&args))
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(String::from)
        .collect()
}

/// Mean of the last column of a report csv.
fn mean_ratio(path: &Path) -> f64 {
    let rows = data_rows(path);
    let sum: f64 = rows
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    sum / rows.len() as f64
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let sa = small_run(&a, &["--emit-timelines", "--emit-client-acc"]);
    let sb = small_run(
        &b,
        &["--emit-timelines", "--emit-client-acc", "--workers", "3"],
    );
    assert_eq!(sa, sb);
    for f in [
        "metrics.csv",
        "timelines.csv",
        "client_acc.csv",
        "config.resolved",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    assert!(sa.contains("final accuracy:"));
}

#[test]
fn one_metrics_row_per_round() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path(), &["--set", "total_rounds=2"]);
    let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("round,virtual_time_s,"));
    assert_eq!(lines.count(), 2);
    assert!(!dir.path().join("timelines.csv").exists());
}

#[test]
fn resolved_config_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    small_run(&a, &[]);
    let resolved = a.join("config.resolved");
    ok(fedsim(&[
        "run",
        "--config",
        resolved.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]));
    assert_eq!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quickstart();
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().to_str().unwrap();
    for set in [
        "participants=0",
        "no_such_key=1",
        "overcommit=1/2",
        "algorithm=sgd",
        "data.alpha=0.5",
    ] {
        let res = fedsim(&["run", "--config", cfg, "--set", set, "--out", out]);
        assert!(!res.status.success(), "{set} accepted");
        let err = String::from_utf8_lossy(&res.stderr);
        assert!(err.starts_with("error:"), "{set}: {err}");
    }
    let missing = fedsim(&["run", "--config", "/nonexistent.cfg", "--out", out]);
    assert!(!missing.status.success());
    assert!(!fedsim(&["report", "--out", out]).status.success());
}

#[test]
fn synth_traces_writes_one_profile_per_client() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(fedsim(&[
        "synth", "traces", "--n", "1000", "--seed", "4", "--out", out,
    ]));
    let profiles = data_rows(&dir.path().join("profiles.csv"));
    assert_eq!(profiles.len(), 1000);
    assert!(!data_rows(&dir.path().join("availability.csv")).is_empty());

    let again = dir.path().join("again");
    ok(fedsim(&[
        "synth",
        "traces",
        "--n",
        "1000",
        "--seed",
        "4",
        "--out",
        again.to_str().unwrap(),
    ]));
    assert_eq!(
        fs::read(dir.path().join("profiles.csv")).unwrap(),
        fs::read(again.join("profiles.csv")).unwrap()
    );
}

#[test]
fn recorded_traces_and_mapping_drive_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(fedsim(&[
        "synth",
        "traces",
        "--n",
        "50",
        "--seed",
        "2",
        "--out",
        d.to_str().unwrap(),
    ]));
    ok(fedsim(&[
        "synth",
        "data",
        "--clients",
        "50",
        "--alpha",
        "0.3",
        "--seed",
        "2",
        "--out",
        d.to_str().unwrap(),
    ]));
    let cfg = d.join("exp.cfg");
    fs::write(
        &cfg,
        format!(
            "algorithm = fedavg\ntotal_rounds = 3\nparticipants = 5\nseed = 2\n\
             data.clients = 50\ndata.partition = mapping\ndata.mapping = {}\n\
             traces.profiles = {}\ntraces.availability = {}\n",
            d.join("mapping.csv").display(),
            d.join("profiles.csv").display(),
            d.join("availability.csv").display(),
        ),
    )
    .unwrap();
    let out = d.join("run");
    ok(fedsim(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(data_rows(&out.join("metrics.csv")).len(), 3);

    let rep = d.join("rep");
    let stdout = ok(fedsim(&[
        "report",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        rep.to_str().unwrap(),
    ]));
    assert!(stdout.contains("mean pairwise JS distance"));
    let rows = data_rows(&rep.join("heterogeneity.csv"));
    assert!(rows.iter().any(|r| r == "num_clients,50"));
}

#[test]
fn straggler_ratio_tracks_device_spread() {
    let dir = tempfile::tempdir().unwrap();
    let homo = dir.path().join("homo");
    small_run(
        &homo,
        &[
            "--emit-timelines",
            "--set",
            "traces_enabled=false",
            "--set",
            "data.samples_sigma_log=0",
        ],
    );
    let het = dir.path().join("het");
    small_run(
        &het,
        &[
            "--emit-timelines",
            "--set",
            "traces.latency_min_ms=100",
            "--set",
            "traces.latency_max_ms=1000",
            "--set",
            "traces.bandwidth_min_kbps=100",
            "--set",
            "traces.bandwidth_max_kbps=1000",
        ],
    );
    let report = |run: &Path| {
        let out = run.join("report");
        ok(fedsim(&[
            "report",
            "--timelines",
            run.join("timelines.csv").to_str().unwrap(),
            "--participants",
            "10",
            "--out",
            out.to_str().unwrap(),
        ]));
        mean_ratio(&out.join("stragglers.csv"))
    };
    let flat = report(&homo);
    let spread = report(&het);
    assert!((flat - 1.0).abs() < 1e-9, "homogeneous ratio {flat}");
    assert!(spread > 1.5, "heterogeneous ratio {spread}");
}

#[test]
fn availability_causes_drops_over_many_rounds() {
    let dir = tempfile::tempdir().unwrap();
    small_run(
        dir.path(),
        &["--set", "total_rounds=50", "--set", "eval_every=50"],
    );
    let dropped: u64 = data_rows(&dir.path().join("metrics.csv"))
        .iter()
        .map(|r| r.split(',').nth(4).unwrap().parse::<u64>().unwrap())
        .sum();
    assert!(dropped > 0);
}

#[test]
fn accuracy_histogram_counts_every_client() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path(), &["--emit-client-acc"]);
    let clients = data_rows(&dir.path().join("client_acc.csv")).len();
    assert!(clients > 0);
    let rep = dir.path().join("rep");
    ok(fedsim(&[
        "report",
        "--client-acc",
        dir.path().join("client_acc.csv").to_str().unwrap(),
        "--out",
        rep.to_str().unwrap(),
    ]));
    let binned: usize = data_rows(&rep.join("accuracy_hist.csv"))
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(binned, clients);
}

#[test]
fn remote_workers_reproduce_local_run() {
    let dir = tempfile::tempdir().unwrap();
    let local = dir.path().join("local");
    small_run(&local, &[]);

    // reserve a free port, then hand it to the coordinator
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let remote = dir.path().join("remote");
    let cfg = quickstart();
    let coordinator = Command::new(BIN)
        .args([
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "data.clients=200",
            "--set",
            "participants=10",
            "--set",
            "total_rounds=4",
            "--set",
            "eval_every=2",
            "--workers",
            "2",
            "--listen",
            &addr,
            "--out",
            remote.to_str().unwrap(),
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let workers: Vec<_> = (0..2)
        .map(|_| {
            Command::new(WORKER)
                .args(["--connect", &addr])
                .stderr(Stdio::null())
                .spawn()
                .unwrap()
        })
        .collect();
    ok(coordinator.wait_with_output().unwrap());
    for mut w in workers {
        assert!(w.wait().unwrap().success());
    }
    assert_eq!(
        fs::read(local.join("metrics.csv")).unwrap(),
        fs::read(remote.join("metrics.csv")).unwrap()
    );
}
