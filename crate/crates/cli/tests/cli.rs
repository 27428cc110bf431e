use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mulenet::simkit::synth::busy;
use mulenet::simkit::{Metrics, METRIC_FIELDS};
use mulenet_cli::{parse_rendered, Format};
use proptest::prelude::*;
use tempfile::TempDir;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn mulenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mulenet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn canonical(name: &str) -> String {
    scenarios().join(name).to_string_lossy().into_owned()
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const OUTSIDE: &str = r#"{
    "schema": 1, "duration": 10, "radio_range": 50,
    "islands": [{"id": 1, "disc": {"centre": [0, 0], "radius": 100}}],
    "nodes": [
        {"id": 1, "role": "generator", "island": 1, "position": [10, 0]},
        {"id": 7, "role": "collector", "island": 1, "position": [500, 0]}
    ]
}"#;

const MALFORMED: &str = r#"{
    "schema": 1,
    "duration": 1O0,
    "radio_range": 50, "islands": [], "nodes": []
}"#;

const EMPTY: &str = r#"{
    "schema": 1, "duration": 60, "radio_range": 50,
    "islands": [{"id": 1, "disc": {"centre": [0, 0], "radius": 100}}],
    "nodes": [
        {"id": 1, "role": "generator", "island": 1, "position": [10, 0]},
        {"id": 2, "role": "collector", "island": 1, "position": [0, 0]}
    ]
}"#;

#[test]
fn validate_accepts_canonical_scenarios() {
    for f in ["relay.json", "failover.json", "alerts.json"] {
        let o = mulenet(&["validate", &canonical(f)]);
        assert_eq!(code(&o), 0, "{f}: {}", stderr(&o));
    }
}

#[test]
fn validate_names_the_misplaced_node() {
    let dir = TempDir::new().unwrap();
    let o = mulenet(&["validate", &write(&dir, "s.json", OUTSIDE)]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("nodes[1]") && err.contains('7'), "{err}");
}

#[test]
fn validate_locates_parse_errors() {
    let dir = TempDir::new().unwrap();
    let o = mulenet(&["validate", &write(&dir, "s.json", MALFORMED)]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("duration") && err.contains("line 3"), "{err}");
}

#[test]
fn missing_files_are_io_failures() {
    assert_eq!(code(&mulenet(&["validate", "no/such/file.json"])), 2);
    assert_eq!(code(&mulenet(&["report", "no/such/metrics.json"])), 2);
}

#[test]
fn run_writes_all_outputs() {
    let out = TempDir::new().unwrap();
    let o = mulenet(&["run", &canonical("relay.json"), "--out", &out.path().to_string_lossy()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in mulenet_cli::OUTPUT_FILES {
        assert!(out.path().join(f).is_file(), "{f}");
    }
    let m: Metrics = serde_json::from_str(&fs::read_to_string(out.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m.delivery_ratio, 1.0);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("metrics.json")).unwrap()).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, METRIC_FIELDS);
    let transfers = fs::read_to_string(out.path().join("transfers.csv")).unwrap();
    assert_eq!(transfers.lines().next(), Some("time,from,to,item,action"));
}

#[test]
fn empty_traffic_run() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "s.json", EMPTY);
    let out = dir.path().join("out");
    assert_eq!(code(&mulenet(&["run", &s, "--out", &out.to_string_lossy()])), 0);
    let m: Metrics = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m.generated, 0);
}

#[test]
fn runs_are_byte_identical_and_seeded() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "busy.json", &busy(4).to_json());
    let go = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = mulenet(&["run", &s, "--seed", seed, "--out", &out.to_string_lossy(), "--audit"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        ["metrics.json", "transfers.csv"].map(|f| fs::read(out.join(f)).unwrap())
    };
    let a = go("a", "9");
    let b = go("b", "9");
    let c = go("c", "10");
    assert_eq!(a, b);
    assert_ne!(a[1], c[1]);
}

#[test]
fn unwritable_output_is_an_io_failure() {
    let dir = TempDir::new().unwrap();
    let blocker = write(&dir, "file", "");
    let o = mulenet(&["run", &canonical("relay.json"), "--out", &blocker]);
    assert_eq!(code(&o), 2);
}

#[test]
fn validate_and_run_agree_on_validity() {
    let dir = TempDir::new().unwrap();
    for (name, body) in [("ok", EMPTY), ("outside", OUTSIDE), ("malformed", MALFORMED)] {
        let s = write(&dir, name, body);
        let valid = code(&mulenet(&["validate", &s])) == 0;
        let out = dir.path().join(format!("{name}-out"));
        let ran = code(&mulenet(&["run", &s, "--out", &out.to_string_lossy()]));
        assert_eq!(valid, ran != 1, "{name}");
    }
}

#[test]
fn report_formats() {
    let dir = TempDir::new().unwrap();
    let m = Metrics {
        generated: 100,
        delivered: 97,
        delivery_ratio: 0.97,
        ..Default::default()
    };
    let p = write(&dir, "metrics.json", &serde_json::to_string(&m).unwrap());
    let summary = String::from_utf8(mulenet(&["report", &p]).stdout).unwrap();
    assert!(summary.lines().any(|l| l == "delivery_ratio 0.97"), "{summary}");
    let csv = String::from_utf8(mulenet(&["report", &p, "--format", "csv"]).stdout).unwrap();
    assert_eq!(
        csv.lines().next().unwrap().split(',').collect::<Vec<_>>(),
        METRIC_FIELDS
    );
    let bad = write(&dir, "bad.json", "{\"generated\": \"many\"}");
    let o = mulenet(&["report", &bad]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 1"));
}

fn any_metrics() -> impl Strategy<Value = Metrics> {
    let counts = proptest::collection::vec(0u64..1_000_000, 15);
    let reals = proptest::collection::vec(prop_oneof![0.0..1.0f64, 0.0..1e9f64, Just(0.0)], 4);
    (counts, reals).prop_map(|(c, r)| Metrics {
        generated: c[0],
        delivered: c[1],
        expired: c[2],
        dropped_overflow: c[3],
        dropped_tampered: c[4],
        duplicates_suppressed: c[5],
        sybil_rejections: c[6],
        delivery_ratio: r[0],
        latency_p50: c[7],
        latency_p95: c[8],
        latency_mean: r[1],
        queue_delay_mean: r[2],
        contacts: c[9],
        transfers: c[10],
        energy_spent: r[3],
        delivered_emergency: c[11],
        delivered_high: c[12],
        delivered_normal: c[13],
        delivered_low: c[14],
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// Every rendering parses back to exactly the metrics written.
    #[test]
    fn report_round_trip(m in any_metrics()) {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "metrics.json", &mulenet::simkit::metrics_json(&m));
        for (flag, format) in [("summary", Format::Summary), ("csv", Format::Csv), ("json", Format::Json)] {
            let o = mulenet(&["report", &p, "--format", flag]);
            prop_assert_eq!(code(&o), 0);
            let text = String::from_utf8(o.stdout).unwrap();
            prop_assert_eq!(parse_rendered(&text, format), Some(m.clone()));
        }
    }
}
