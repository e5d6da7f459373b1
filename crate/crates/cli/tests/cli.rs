use std::path::PathBuf;
use std::process::{Command, Output};

use stirsim_cli::{ExperimentConfig, OUTPUT_ENV};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stirsim-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stirsim(args: &[&str], out: &PathBuf) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stirsim"))
        .args(args)
        .env(OUTPUT_ENV, out)
        .output()
        .expect("binary runs")
}

#[test]
fn config_round_trips_through_json() {
    let mut c = ExperimentConfig::default();
    c.d = 2;
    c.side = 12;
    c.k = 3;
    c.p = vec![0.25, 0.125];
    c.grid = Some(vec![0.25, 0.5, 1.0]);
    c.record_events = true;
    let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn unknown_or_invalid_fields_name_the_field() {
    let err = ExperimentConfig::from_json(r#"{"L": 8, "speed": 3}"#).unwrap_err();
    assert!(err.to_string().contains("speed"), "{err}");
    let c = ExperimentConfig::from_json(r#"{"p": [0.7, 0.6]}"#).unwrap();
    assert_eq!(c.validate().unwrap_err().field, "p");
}

#[test]
fn flags_override_config_file() {
    let dir = scratch("merge");
    let file = dir.join("run.json");
    std::fs::write(&file, r#"{"L": 10, "k": 2, "p": [0.4], "replicas": 7}"#).unwrap();
    let out = stirsim(&["simulate", "--config", file.to_str().unwrap(), "--k", "3", "--print-config"], &dir);
    assert!(out.status.success());
    let merged = ExperimentConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!((merged.side, merged.k, merged.replicas), (10, 3, 7));
    assert_eq!(merged.output_dir, dir);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = scratch("rerun");
    let args = ["simulate", "--L", "16", "--k", "2", "--p", "0.3,0.2", "--N", "20", "--replicas", "3", "--record-events"];
    let mut first = Vec::new();
    for jobs in ["1", "3"] {
        let mut a = args.to_vec();
        a.extend(["--jobs", jobs]);
        assert!(stirsim(&a, &dir).status.success());
        let files: Vec<Vec<u8>> = ["paths.csv", "events_0.csv", "events_2.csv"]
            .iter()
            .map(|f| std::fs::read(dir.join(f)).unwrap())
            .collect();
        assert!(files.iter().all(|f| f.starts_with(b"# schema=v1\n")));
        if first.is_empty() {
            first = files;
        } else {
            assert_eq!(first, files);
        }
    }
}

#[test]
fn exit_codes() {
    let dir = scratch("exit");
    assert_eq!(stirsim(&["simulate", "--no-such-flag"], &dir).status.code(), Some(2));
    assert_eq!(stirsim(&["simulate", "--p", "0.8,0.5"], &dir).status.code(), Some(2));
    assert_eq!(stirsim(&["theory-constants", "--d", "1", "--p", "0.5"], &dir).status.code(), Some(0));
    // A tolerance of zero cannot be met by a finite ensemble.
    let fail = stirsim(
        &["occupation-experiment", "--L", "64", "--p", "0.5", "--N", "16", "--replicas", "40", "--tolerance", "0"],
        &dir,
    );
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stdout).contains("FAIL"));
}

#[test]
fn theory_constants_report_matrix() {
    let dir = scratch("theory");
    let out = stirsim(&["theory-constants", "--d", "1", "--k", "2", "--p", "0.3,0.2"], &dir);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.join("theory.json")).unwrap();
    assert!(text.contains("\"A_sqrt\"") && text.contains("created_unix"));
}
