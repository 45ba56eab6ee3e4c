use std::path::Path;
use std::process::{Command, Output};

const MINIMAL: &str = r#"{
    "env": {"K": 2, "T": 1000,
            "loss": {"type": "bernoulli", "means": [0.1, 0.5]},
            "delay": {"type": "fixed", "d": 10}},
    "run": {"seeds": [1]}
}"#;

fn desapo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_desapo"))
        .args(args)
        .env_remove("DESAPO_SEED_OFFSET")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

#[test]
fn minimal_run_writes_one_trace_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", MINIMAL);
    let out = dir.path().join("out");
    let res = desapo(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(csv_files(&out), vec!["trace_seed1.csv"]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for key in [
        "seeds",
        "mean_pseudo_regret",
        "std_pseudo_regret",
        "mean_adv_regret",
        "switch_rate",
        "lemma_violations",
    ] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    let table = String::from_utf8(res.stdout).unwrap();
    assert!(table.contains("pseudo_regret") && table.contains("mean"));
}

#[test]
fn missing_horizon_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &MINIMAL.replace(r#""T": 1000,"#, ""));
    let res = desapo(&["run", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("`T`"));
}

#[test]
fn fifty_seed_batch() {
    let dir = tempfile::tempdir().unwrap();
    let seeds: Vec<String> = (1..=50).map(|s| s.to_string()).collect();
    let text = MINIMAL.replace(r#""seeds": [1]"#, &format!(r#""seeds": [{}]"#, seeds.join(",")));
    let cfg = write(dir.path(), "c.json", &text);
    let out = dir.path().join("out");
    let res = desapo(&["run", &cfg, "--out", out.to_str().unwrap(), "--jobs", "4"]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(csv_files(&out).len(), 50);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["switch_rate"].is_number());
    assert_eq!(summary["seeds"].as_array().unwrap().len(), 50);
}

#[test]
fn seed_offset_shifts_trace_names() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", MINIMAL);
    let out = dir.path().join("out");
    let res = Command::new(env!("CARGO_BIN_EXE_desapo"))
        .args(["run", &cfg, "--out", out.to_str().unwrap()])
        .env("DESAPO_SEED_OFFSET", "100")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(csv_files(&out), vec!["trace_seed101.csv"]);
}

#[test]
fn oracle_examples() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("t,delay\n1,3\n2,0\n3,1\n4,5\n".to_string(), "sigma_max=2 D=9"),
        ("t,delay\n1,0\n2,0\n3,0\n".to_string(), "sigma_max=0 D=0"),
        (
            std::iter::once("t,delay".to_string())
                .chain((1..=100).map(|t| format!("{t},7")))
                .collect::<Vec<_>>()
                .join("\n"),
            "sigma_max=7 D=700",
        ),
    ];
    for (i, (csv, expected)) in cases.iter().enumerate() {
        let path = write(dir.path(), &format!("d{i}.csv"), csv);
        let res = desapo(&["oracle", &path]);
        assert_eq!(res.status.code(), Some(0));
        let stdout = String::from_utf8(res.stdout).unwrap();
        assert!(stdout.contains(expected), "{stdout}");
        assert!(stdout.contains("holds"));
    }
}

#[test]
fn malformed_delay_csv_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.csv", "t,delay\n1,x\n");
    assert_eq!(desapo(&["oracle", &path]).status.code(), Some(2));
    let path = write(dir.path(), "gap.csv", "t,delay\n1,0\n3,0\n");
    assert_eq!(desapo(&["oracle", &path]).status.code(), Some(2));
    assert_eq!(
        desapo(&["oracle", "/nonexistent/delays.csv"]).status.code(),
        Some(2)
    );
}

#[test]
fn printed_config_revalidates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", MINIMAL);
    let first = desapo(&["print-config", &cfg]);
    assert_eq!(first.status.code(), Some(0));
    let echoed = write(
        dir.path(),
        "echo.json",
        &String::from_utf8(first.stdout.clone()).unwrap(),
    );
    let second = desapo(&["print-config", &echoed]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
}
