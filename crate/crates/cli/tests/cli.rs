use std::path::Path;
use std::process::{Command, Output};

fn hetwlan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetwlan")).args(args).output().expect("spawn")
}

fn stdout_lines(out: &Output) -> Vec<String> {
    String::from_utf8_lossy(&out.stdout).lines().map(str::to_string).collect()
}

fn error_line(out: &Output) -> (String, String) {
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {err}");
    let fields: Vec<&str> = lines[0].split('\t').collect();
    assert_eq!(fields.len(), 3);
    assert_eq!(fields[0], "error");
    (fields[1].to_string(), fields[2].to_string())
}

fn short_run(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--scenario",
        "hidden-sweep",
        "--rates",
        "1200,2400",
        "--runs",
        "2",
        "--duration",
        "0.02",
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    hetwlan(&args)
}

#[test]
fn run_writes_csv_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let out = short_run(dir.path(), &["--plot", "--trace"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files = stdout_lines(&out);
    assert_eq!(files.len(), 2 + 2 + 6);
    for f in &files {
        let name = Path::new(f).file_name().unwrap().to_string_lossy().into_owned();
        assert!(name.starts_with("hidden-sweep-"), "{name}");
        assert!(Path::new(f).exists());
    }
    let metrics = files.iter().find(|f| f.ends_with("-metrics.csv")).unwrap();
    let text = std::fs::read_to_string(metrics).unwrap();
    assert!(text.starts_with("scenario,arrival_rate_pps,csth_assoc_dbm,run,ac,"));
}

#[test]
fn run_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = stdout_lines(&short_run(a.path(), &["--seed", "9"]));
    let fb = stdout_lines(&short_run(b.path(), &["--seed", "9"]));
    assert_eq!(fa.len(), 2);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
}

#[test]
fn analytic_emits_model_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = hetwlan(&[
        "analytic",
        "--scenario",
        "csth-sweep",
        "--csth",
        "-82,-73",
        "--runs",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let path = &stdout_lines(&out)[0];
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].contains("tau_ac0") && lines[0].contains("f_ncoll_ac3"));
    assert!(lines[1].starts_with("csth-sweep,-82,4800,-82,"));
    assert!(lines[2].ends_with(",true"));
}

#[test]
fn topology_prints_nodes() {
    let out = hetwlan(&["topology", "--seed", "4"]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], "node_id,x_m,y_m,heard_by_ap,hidden_count");
    assert_eq!(lines.len(), 1 + 25);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("hidden_per_sta="));
}

#[test]
fn config_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = hetwlan(&["config", "--set", "phy.ber=0", "--runs", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("phy.ber=0\n") && text.contains("run_count=3\n"));
    let path = dir.path().join("cfg.txt");
    std::fs::write(&path, &text).unwrap();
    let again = hetwlan(&["config", "--config", path.to_str().unwrap()]);
    assert_eq!(String::from_utf8_lossy(&again.stdout), text);
}

#[test]
fn errors_are_single_machine_readable_lines() {
    let out = hetwlan(&["run", "--scenario", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out).0, "usage");

    let out = hetwlan(&["config", "--set", "no.such.key=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out).0, "unknown-key");

    let out = hetwlan(&["run", "--scenario", "hidden-sweep", "--rates", "-5", "--runs", "1", "--duration", "0.01"]);
    assert_eq!(out.status.code(), Some(1));
    let (code, msg) = error_line(&out);
    assert_eq!(code, "invalid-config");
    assert!(msg.contains("sweep point -5"));

    let out = hetwlan(&["config", "--config", "/nonexistent/cfg.txt"]);
    assert_eq!(error_line(&out).0, "io");
}
