use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_onebit-sync"))
}

fn scenarios() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

const SMALL_SINDR: &str = r#"
experiment = "sindr-sweep"
trials = 3
[system]
antennas = 16
users = 2
data = 4
[sweep]
dtau = [-12, 0, 10]
deps = [0.0, 0.01]
cfo_sweep_dtau = [4]
cfo_sweep_deps = [-0.5, 0.5]
"#;

const SMALL_SYNC: &str = r#"
experiment = "sync-rmse"
trials = 4
[system]
antennas = 8
users = 2
fft_size = 64
cp_len = 12
taps = 3
used = { centered = 40 }
[sweep]
snr_db = [0.0, 20.0]
"#;

#[test]
fn run_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("small.toml");
    fs::write(&sc, SMALL_SINDR).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    let sc = sc.to_str().unwrap();
    run_ok(&["run", "--experiment", "sindr-sweep", "--scenario", sc, "--out", a.to_str().unwrap(), "--seed", "42"]);
    run_ok(&["run", "--scenario", sc, "--out", b.to_str().unwrap(), "--seed", "42", "--threads", "3"]);
    run_ok(&["run", "--scenario", sc, "--out", c.to_str().unwrap(), "--seed", "42", "--sequential"]);
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    assert_eq!(text, fs::read(&c).unwrap());
    let text = String::from_utf8(text).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dtau,deps,analytical_sindr_db,simulated_sindr_db,dac_mode"));
    assert_eq!(text.lines().count(), 1 + 2 * 8);
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
}

#[test]
fn seed_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sync.toml");
    fs::write(&sc, SMALL_SYNC).unwrap();
    let sc = sc.to_str().unwrap();
    let a = run_ok(&["run", "--scenario", sc, "--seed", "1"]).stdout;
    let b = run_ok(&["run", "--scenario", sc, "--seed", "2"]).stdout;
    let again = run_ok(&["run", "--scenario", sc, "--seed", "1", "--threads", "2"]).stdout;
    assert_ne!(a, b);
    assert_eq!(a, again);
    assert!(String::from_utf8(a).unwrap().starts_with("snr_db,dac_mode,sto_rmse_samples,cfo_rmse\n"));
}

#[test]
fn validate_reports_cp_constraint() {
    let bad = scenarios().join("bad.toml");
    let out = bin().args(["validate", "--scenario", bad.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cyclic prefix") && err.contains("G >= L - 1"), "{err}");
}

#[test]
fn shipped_scenarios_validate() {
    for name in ["fig1.toml", "sync-rmse.toml", "ber.toml"] {
        let p = scenarios().join(name);
        let out = run_ok(&["validate", "--scenario", p.to_str().unwrap()]);
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("experiment "));
    }
    let p = scenarios().join("ber.toml");
    let out = run_ok(&["validate", "--scenario", p.to_str().unwrap(), "--paper-scale"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("N = 2048"));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let malformed = dir.path().join("m.toml");
    fs::write(&malformed, "experiment = \"sync-rmse\"\n[system]\nantennas = \"many\"\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--bogus-flag"],
        vec!["run"],
        vec!["validate", "--scenario", malformed.to_str().unwrap()],
        vec!["validate", "--scenario", "/nonexistent/scenario.toml"],
        vec!["validate", "--experiment", "sindr-sweep", "--paper-scale"],
    ];
    for args in cases {
        let out = bin().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn dump_metric_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sync.toml");
    fs::write(&sc, SMALL_SYNC).unwrap();
    let out = run_ok(&["dump-metric", "--scenario", sc.to_str().unwrap(), "--trial", "1", "--user", "1", "--snr-db", "-3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau,gamma"));
    let rows: Vec<(i64, f64)> = lines
        .map(|l| {
            let (t, g) = l.split_once(',').unwrap();
            (t.parse().unwrap(), g.parse().unwrap())
        })
        .collect();
    // search window -(N + G/2) ..= N + G/2
    assert_eq!(rows.len(), 2 * 70 + 1);
    assert!(rows.iter().all(|&(_, g)| (0.0..=1.0).contains(&g)));
}
