use std::process::Command;

fn polemos(dir: &std::path::Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_polemos"))
        .arg("--dir")
        .arg(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn fresh_project_reports_model_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = polemos(dir.path(), &["status"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("MODEL"));
}

#[test]
fn out_of_order_commands_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["clean", "train", "predict", "report"] {
        let out = polemos(dir.path(), &[cmd]);
        assert_eq!(out.status.code(), Some(2), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn synthetic_project_runs_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(polemos(d, &["synth", "--comments", "3000"]).status.success());
    let fixture = d.join("fixture");
    let gold = d.join("gold.csv");
    let steps: [&[&str]; 6] = [
        &["ingest", "--mock", fixture.to_str().unwrap()],
        &["clean"],
        &["sample"],
        &["annotate-import", "--labels", gold.to_str().unwrap(), "--fill-quota"],
        &["train"],
        &["predict"],
    ];
    for args in steps {
        let out = polemos(d, args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = polemos(d, &["report"]);
    assert!(out.status.success());
    assert!(d.join("report/summary.json").exists());
    let status = polemos(d, &["status", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&status.stdout).unwrap();
    assert_eq!(v["stage"], "DISTRIBUTE");
    assert!(!d.join(".polemos.lock").exists());
}

#[test]
fn force_overrides_a_failed_gate_but_not_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = polemos(d, &["--force", "predict"]);
    assert_eq!(out.status.code(), Some(2), "no model on disk");

    assert!(polemos(d, &["synth", "--collapse"]).status.success());
    let toml = d.join("polemos.toml");
    let cfg = std::fs::read_to_string(&toml).unwrap();
    assert!(cfg.contains("min_accuracy = 0.9"));
    std::fs::write(&toml, cfg.replace("min_accuracy = 0.9", "min_accuracy = 1.0")).unwrap();
    let fixture = d.join("fixture");
    let gold = d.join("gold.csv");
    let steps: [&[&str]; 4] = [
        &["ingest", "--mock", fixture.to_str().unwrap()],
        &["clean"],
        &["sample"],
        &["annotate-import", "--labels", gold.to_str().unwrap(), "--fill-quota"],
    ];
    for args in steps {
        assert!(polemos(d, args).status.success(), "{args:?}");
    }
    assert_eq!(polemos(d, &["train"]).status.code(), Some(3));
    let refused = polemos(d, &["predict"]);
    assert_eq!(refused.status.code(), Some(2));
    let forced = polemos(d, &["--force", "predict"]);
    assert!(forced.status.success(), "{}", String::from_utf8_lossy(&forced.stderr));
    assert!(String::from_utf8_lossy(&forced.stderr).contains("--force"));
    let status = polemos(d, &["status", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&status.stdout).unwrap();
    assert_eq!(v["stage"], "DISTRIBUTE");
}
