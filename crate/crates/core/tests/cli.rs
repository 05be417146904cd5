use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hanr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hanr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_scenario(dir: &Path, body: &str) -> String {
    let p = dir.join("scenario.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_resume_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), "seed = 4\n[schedule]\ntime_window_s = 5400\n");
    let out = tmp.path().join("campaign");
    let out = out.to_str().unwrap();

    let first = hanr(&[
        "run",
        "--scenario",
        &scenario,
        "--out",
        out,
        "--stop-after",
        "3",
    ]);
    assert!(first.status.success());
    assert!(stdout(&first).starts_with("runs=3/6 complete=false"));
    let second = hanr(&["run", "--scenario", &scenario, "--out", out]);
    assert!(
        stdout(&second).starts_with("runs=6/6 complete=true"),
        "{}",
        stdout(&second)
    );

    let removals = hanr(&["report", "--campaign", out, "--kind", "removals", "--csv"]);
    let text = stdout(&removals);
    assert_eq!(
        text.lines().next(),
        Some("bs_id,cell_db_id,x2,danr,avg_distance_km")
    );
    assert_eq!(text.lines().count(), 25);

    let thresholds = hanr(&["report", "--campaign", out, "--kind", "thresholds"]);
    assert!(thresholds.status.success());
    assert!(stdout(&thresholds).lines().count() > 4);

    let replayed = tmp.path().join("replayed");
    let replay = hanr(&[
        "replay",
        "--pm",
        &format!("{out}/pm.csv"),
        "--scenario",
        &scenario,
        "--out",
        replayed.to_str().unwrap(),
    ]);
    assert!(
        replay.status.success(),
        "{}",
        String::from_utf8_lossy(&replay.stderr)
    );
    let cycles = |dir: &str| stdout(&hanr(&["report", "--campaign", dir, "--kind", "cycles"]));
    assert_eq!(cycles(out), cycles(replayed.to_str().unwrap()));
}

#[test]
fn errors_are_one_line_and_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let misspelled = write_scenario(tmp.path(), "sed = 3\n");
    let cases = [
        vec![
            "run",
            "--scenario",
            "/nonexistent/s.toml",
            "--out",
            "/tmp/x",
        ],
        vec!["run", "--scenario", &misspelled, "--out", "/tmp/x"],
        vec!["report", "--campaign", "/nonexistent", "--kind", "cycles"],
    ];
    for args in cases {
        let o = hanr(&args);
        assert!(!o.status.success(), "{args:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert!(err.starts_with("error: "), "{err}");
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
}
