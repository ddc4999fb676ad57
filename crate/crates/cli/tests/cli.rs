use std::path::Path;
use std::process::{Command, Output};

fn bellstore(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bellstore"));
    cmd.args(args);
    for p in extra {
        cmd.arg(p);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL: &str = r#"
seed = 5
sequences = ["udd order=1 tau_cpmg=2ms tau_pi=27.2us repeats=1", "udd order=7 tau_cpmg=2ms tau_pi=27.2us repeats=1"]

[noise]
ensemble = 4

[grid]
max = "2 s"
points = 5
"#;

#[test]
fn times_prints_udd_instants() {
    let out = stdout(&bellstore(&["times", "--scheme", "udd", "--order", "2", "--period", "8ms"], &[]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("j,t_s"));
    let rows: Vec<(usize, f64)> = lines
        .map(|l| {
            let (j, t) = l.split_once(',').unwrap();
            (j.parse().unwrap(), t.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 2);
    for ((j, t), want) in rows.iter().zip([0.002, 0.006]) {
        assert!((t - want).abs() < 1e-15, "t_{j} = {t}");
    }
}

#[test]
fn compile_reports_overlap() {
    let ok = stdout(&bellstore(&["compile", "--spec", "cpmg order=1 tau_cpmg=1ms tau_pi=0us repeats=1"], &[]));
    assert_eq!(ok.lines().count(), 4);
    let bad = bellstore(&["compile", "--spec", "udd order=9 tau_cpmg=10us tau_pi=100us repeats=1"], &[]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("overlap"));
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[molecule]\ndelta_nu = \"270.4\"\nj_coupling = \"4.1 Hz\"\n").unwrap();
    let out = bellstore(&["scan", "--config"], &[&cfg]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml") && err.contains("molecule.delta_nu"), "{err}");
}

#[test]
fn scan_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = bellstore(&["scan", "--config"], &[&cfg, Path::new("--out"), dir.path()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("UDD-7:") && err.contains("points above 0.9"), "{err}");
    let traces = std::fs::read_to_string(dir.path().join("traces.csv")).unwrap();
    assert!(traces.starts_with("state,sequence,time_s,correlation,std_error\n"));
    assert_eq!(traces.lines().count(), 1 + 3 * 5);

    let fit = stdout(&bellstore(
        &["fit", "--sequence", "UDD-1", "--input"],
        &[&dir.path().join("traces.csv")],
    ));
    let mut lines = fit.lines();
    assert_eq!(lines.next(), Some("sequence,amplitude,tau_s,residual"));
    assert!(lines.next().unwrap().starts_with("UDD-1,"));
    assert_eq!(lines.next(), None);
}

#[test]
fn plotdata_scan_matches_csv_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let csv = stdout(&bellstore(&["scan", "--config"], &[&cfg]));
    let dat = stdout(&bellstore(&["scan", "--format", "plotdata", "--config"], &[&cfg]));
    let from_csv: Vec<String> = csv
        .lines()
        .skip(1)
        .map(|l| l.splitn(3, ',').nth(2).unwrap().replace(',', " "))
        .collect();
    let from_dat: Vec<String> = dat
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    assert_eq!(from_csv, from_dat);
}

#[test]
fn seed_flag_changes_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let a = stdout(&bellstore(&["scan", "--seed", "1", "--config"], &[&cfg]));
    let b = stdout(&bellstore(&["scan", "--seed", "2", "--config"], &[&cfg]));
    let c = stdout(&bellstore(&["scan", "--seed", "1", "--threads", "3", "--config"], &[&cfg]));
    assert_ne!(a, b);
    assert_eq!(a, c);
}

#[test]
fn filter_and_spinlock_write_files() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&bellstore(&["filter", "--out"], &[dir.path()]));
    let table = std::fs::read_to_string(dir.path().join("filter.csv")).unwrap();
    assert!(table.starts_with("sequence,bath,chi,coherence,error_estimate,rank,status\n"));
    assert_eq!(table.lines().count(), 7);
    stdout(&bellstore(&["spinlock", "--format", "plotdata", "--out"], &[dir.path()]));
    let dat = std::fs::read_to_string(dir.path().join("spinlock.dat")).unwrap();
    assert!(dat.starts_with("# state=singlet sequence=spin-lock status=ok\n"));
}

#[test]
fn simulate_defaults_to_first_sequence() {
    let out = stdout(&bellstore(&["simulate", "--spec", "cpmg order=4 tau_cpmg=1ms tau_pi=10us repeats=2"], &[]));
    assert_eq!(out.lines().count(), 4);
    assert!(out.lines().nth(1).unwrap().starts_with("singlet,CPMG-4,0,"));
}

#[test]
fn zero_threads_is_rejected() {
    let out = bellstore(&["filter", "--threads", "0"], &[]);
    assert!(!out.status.success());
}
