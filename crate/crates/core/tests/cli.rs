use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use mamd::cli::AllocationReport;
use mamd::market::EquilibriumReport;
use mamd::tensor::AdequacyReport;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn mamd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mamd"))
        .args(args)
        .output()
        .unwrap()
}

fn mamd_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_mamd"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap()
}

#[test]
fn exit_code_matrix() {
    let sim = ["simulate", "--loads-per-pair", "5", "--trials", "2"];
    let cases: Vec<(Vec<String>, i32)> = vec![
        (
            vec!["check".into(), "-i".into(), fixture("reference.json")],
            0,
        ),
        (
            vec!["check".into(), "-i".into(), fixture("inadequate.json")],
            1,
        ),
        (
            vec!["check".into(), "-i".into(), fixture("malformed.json")],
            2,
        ),
        (
            vec!["allocate".into(), "-i".into(), fixture("reference.json")],
            0,
        ),
        (
            vec!["allocate".into(), "-i".into(), fixture("inadequate.json")],
            1,
        ),
        (
            vec!["allocate".into(), "-i".into(), fixture("malformed.json")],
            2,
        ),
        (
            vec!["market".into(), "-i".into(), fixture("market.json")],
            0,
        ),
        // market clearing does not look at the load list
        (
            vec!["market".into(), "-i".into(), fixture("inadequate.json")],
            0,
        ),
        (
            vec!["market".into(), "-i".into(), fixture("malformed.json")],
            2,
        ),
        (sim.iter().map(|s| s.to_string()).collect(), 0),
        (vec!["simulate".into(), "--pairs".into(), "5-1".into()], 2),
        (
            vec!["simulate".into(), "--partition".into(), "0,0,3".into()],
            2,
        ),
        (
            vec![
                "check".into(),
                "-i".into(),
                "/nonexistent/instance.json".into(),
            ],
            2,
        ),
        (vec!["explode".into()], 2),
    ];
    for (args, want) in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = mamd(&args);
        assert_eq!(
            out.status.code(),
            Some(want),
            "{args:?}: {}",
            text(&out.stderr)
        );
        if want == 2 {
            assert!(out.stdout.is_empty(), "{args:?} wrote data on failure");
            assert!(!out.stderr.is_empty());
        } else {
            assert!(out.stderr.is_empty(), "{args:?}: {}", text(&out.stderr));
        }
    }
}

#[test]
fn check_reports_are_documents() {
    let out = mamd(&["check", "-i", &fixture("reference.json")]);
    let report: AdequacyReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.adequate);
    assert_eq!(report.surplus, 3.0);

    let out = mamd(&["check", "-i", &fixture("inadequate.json")]);
    let report: AdequacyReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!report.adequate);
    assert_eq!(report.min_value, -1.0);
}

#[test]
fn allocate_reports_matrix_or_cut() {
    let out = mamd(&["allocate", "-i", &fixture("reference.json")]);
    let report: AllocationReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.adequate);
    assert_eq!(report.max_flow, 14);
    let rows: Vec<usize> = report
        .allocation
        .unwrap()
        .entries
        .iter()
        .map(|r| r.iter().map(|&x| x as usize).sum())
        .collect();
    assert_eq!(rows, vec![2, 3, 5, 2, 2]);

    let out = mamd(&["allocate", "-i", &fixture("inadequate.json")]);
    let report: AllocationReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!report.adequate);
    let cut = report.cut.unwrap();
    assert_eq!((cut.capacity, report.required), (1, 2));
}

#[test]
fn market_report_from_stdin() {
    let doc = std::fs::read_to_string(fixture("market.json")).unwrap();
    let out = mamd_stdin(&["market"], &doc);
    assert_eq!(out.status.code(), Some(0));
    let report: EquilibriumReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.checks.all());
    assert!((report.welfare - 14.0).abs() < 1e-9);

    let out = mamd_stdin(&["market"], "{\"partition\": [0, 2]");
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn canonicalize_flag_switches_tensor_input() {
    let doc = r#"{"partition":[0,3],"supply":[0,1,2],"loads":[{"r":2,"a":0,"d":1}]}"#;
    assert_eq!(mamd_stdin(&["check"], doc).status.code(), Some(0));
    assert_eq!(
        mamd_stdin(&["check", "--canonicalize=false"], doc)
            .status
            .code(),
        Some(2)
    );
    // the flow path never needs canonical supply
    assert_eq!(mamd_stdin(&["allocate"], doc).status.code(), Some(0));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let args = [
        "simulate",
        "--pairs",
        "all",
        "--loads-per-pair",
        "10",
        "--trials",
        "3",
        "--seed",
        "7",
    ];
    let a = mamd(&args);
    let b = mamd(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    assert_eq!(mamd(&seq).stdout, a.stdout);
    let csv = text(&a.stdout);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "trial,num_loads,total_gap,gnr");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("# mean="));
}

#[test]
fn simulate_writes_files_and_summary() {
    let dir = std::env::temp_dir().join(format!("mamd-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("trace.csv");
    let summary = dir.join("summary.json");
    let out = mamd(&[
        "simulate",
        "--pairs",
        "smallest9",
        "--sweep",
        "10:30:10",
        "-o",
        csv.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(out.stdout.is_empty());
    let trace = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(trace.lines().count(), 5);
    assert!(trace.contains("\n0,90,"));
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert!(s.get("mean").is_some());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn degenerate_simulation_omits_gnr() {
    let out = mamd(&["simulate", "--trials", "1", "--loads-per-pair", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = text(&out.stdout);
    assert!(csv.contains("\n0,0,0,\n"), "{csv}");
    assert!(csv.contains("mean=NA"));
}
