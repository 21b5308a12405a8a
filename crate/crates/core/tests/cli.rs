mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tdrguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdrguard")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = tdrguard(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

struct Workspace {
    dir: TempDir,
    topology: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let topology = dir.path().join("powertrain.topo");
        std::fs::write(&topology, common::POWERTRAIN).unwrap();
        Self { dir, topology }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn topo(&self) -> &str {
        self.topology.to_str().unwrap()
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn resistance_prints_bus_figures() {
    let ws = Workspace::new();
    let t = ws.path("two.topo");
    std::fs::write(&t, common::TWO_TRANSCEIVERS).unwrap();
    let out = ok(&["resistance", "--topology", s(&t)]);
    assert_eq!(field(&out, "total_resistance_ohm"), "59.8973");
    assert_eq!(field(&out, "delta_r_ohm"), "0.0512");
}

#[test]
fn missing_topology_is_a_usage_error() {
    let o = tdrguard(&["simulate", "--topology", "/nonexistent/bus.topo", "--out", "/tmp/never.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/bus.topo"), "{}", stderr(&o));
    assert_eq!(tdrguard(&["simulate", "--nope"]).status.code(), Some(2));
}

#[test]
fn single_capture_is_one_column_with_summary() {
    let ws = Workspace::new();
    let out = ws.path("one.csv");
    ok(&["simulate", "--topology", ws.topo(), "--noise", "0", "--seed", "11", "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l == "# seed=11"), "{text}");
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[1..].iter().map(|r| r.split(',').count()).max(), Some(2));
    let summary = std::fs::read_to_string(ws.path("one.csv.summary.txt")).unwrap();
    assert!(summary.contains("topology_sha256: "));
    assert!(summary.contains("seed: 11"));
}

#[test]
fn output_is_byte_identical_per_seed() {
    let ws = Workspace::new();
    let run = |name: &str, seed: &str| {
        let p = ws.path(name);
        ok(&["simulate", "--topology", ws.topo(), "--n", "4", "--noise", "10m", "--seed", seed, "--out", s(&p)]);
        std::fs::read(p).unwrap()
    };
    let a = run("a.csv", "3");
    assert_eq!(a, run("b.csv", "3"));
    assert_ne!(a, run("c.csv", "4"));
}

#[test]
fn calibrate_rejects_short_series() {
    let ws = Workspace::new();
    let series = ws.path("short.csv");
    ok(&["simulate", "--topology", ws.topo(), "--n", "10", "--noise", "0.01", "--out", s(&series)]);
    let o = tdrguard(&["calibrate", "--series", s(&series), "--out", s(&ws.path("m.txt"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("300"), "{}", stderr(&o));
}

#[test]
fn bench_with_no_labels_renders_empty_table() {
    let ws = Workspace::new();
    let csv = ws.path("bench.csv");
    let out = ok(&["bench", "--topology", ws.topo(), "--labels", "", "--csv", s(&csv)]);
    assert_eq!(out.lines().count(), 5);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.contains("# seed=0"));
    assert_eq!(text.lines().last(), Some("method,label,detected,trials,rate,verdict"));
    assert_eq!(tdrguard(&["bench", "--topology", ws.topo(), "--labels", "Nope"]).status.code(), Some(1));
}

#[test]
fn calibrate_detect_and_locate_an_alien() {
    let ws = Workspace::new();
    let (reference, stream, clean) = (ws.path("ref.csv"), ws.path("stream.csv"), ws.path("clean.csv"));
    let model = ws.path("model.txt");
    ok(&["simulate", "--topology", ws.topo(), "--n", "300", "--noise", "0.01", "--seed", "1", "--out", s(&reference)]);
    ok(&["simulate", "--topology", ws.topo(), "--n", "90", "--noise", "0.01", "--seed", "2", "--out", s(&clean)]);
    ok(&[
        "simulate", "--topology", ws.topo(), "--n", "120", "--noise", "0.01", "--seed", "3", "--attach", "9.86",
        "--attach-after", "60", "--out", s(&stream),
    ]);

    let cal = ok(&["calibrate", "--topology", ws.topo(), "--series", s(&reference), "--out", s(&model)]);
    assert_eq!(field(&cal, "baseline_batches"), "10");
    let sigma: f64 = field(&cal, "noise_sigma").parse().unwrap();
    assert!((sigma - 0.01).abs() < 1e-3, "{sigma}");

    let quiet = ok(&["detect", "--topology", ws.topo(), "--model", s(&model), "--series", s(&clean)]);
    assert_eq!(field(&quiet, "batches"), "3");
    assert_eq!(field(&quiet, "alarms"), "0");

    let plot = ws.path("plot.csv");
    let report = ws.path("report.txt");
    let loud = ok(&[
        "detect", "--topology", ws.topo(), "--model", s(&model), "--series", s(&stream), "--plot", s(&plot), "--out",
        s(&report),
    ]);
    assert_eq!(field(&loud, "alarms"), "2");
    assert_eq!(field(&loud, "first_alarm_batch"), "3");
    let d: f64 = field(&loud, "distance_m").parse().unwrap();
    assert!((d - 9.86).abs() < 0.3, "{d}");
    let rows: Vec<String> = std::fs::read_to_string(&plot)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect();
    assert_eq!(rows[0], "batch_index,k_score,threshold,alien");
    let alien: Vec<&str> = rows[1..].iter().map(|r| r.rsplit(',').next().unwrap()).collect();
    assert_eq!(alien.len(), 4);
    assert!(rows[1].starts_with("1,"));
    assert_eq!(&alien[..2], ["0", "0"], "{rows:?}");
    assert!(alien[2..].iter().all(|a| *a != "0"), "{rows:?}");

    let located = ok(&["locate", "--topology", ws.topo(), "--model", s(&model), "--series", s(&stream)]);
    let d: f64 = field(&located, "distance_m").parse().unwrap();
    assert!((d - 9.86).abs() < 0.3, "{d}");
    let nothing = ok(&["locate", "--topology", ws.topo(), "--model", s(&model), "--series", s(&clean)]);
    assert_eq!(nothing, "no change localized\n");

    let fixed = ws.path("fixed.txt");
    ok(&[
        "calibrate", "--series", s(&reference), "--threshold", "fixed:0", "--seed", "5", "--out", s(&fixed),
    ]);
    let text = std::fs::read_to_string(&fixed).unwrap();
    assert!(text.contains("threshold=0"), "{}", &text[..400.min(text.len())]);
    assert!(text.contains("seed=5"));
}
