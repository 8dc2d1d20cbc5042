use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::thread;

use rovi_core::datagen::Manifest;
use rovi_core::io::{load_png, save_png};
use rovi_core::{RasterImage, SymbolSet};
use serde_json::Value;

fn rovi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rovi")).args(args).output().unwrap()
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/assets/golden").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr_error(out: &Output) -> Value {
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not an error document ({e}): {text}"))
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn run_golden_move_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = rovi(&[
        "run",
        "--scene",
        s(&golden("move.scene.json")),
        "--sketch",
        s(&golden("move.sketch.json")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["success"], true);
    assert!(report["alignment"].as_f64().unwrap() >= 0.9);
    let plan = read_json(&out.join("plan.json"));
    assert_eq!(plan["steps"].as_array().unwrap().len(), 1);
    let trace = std::fs::read_to_string(out.join("trace.ndjson")).unwrap();
    let ticks: Vec<Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(ticks.len() as u64, report["ticks"].as_u64().unwrap());
    assert!(ticks.windows(2).all(|w| w[0]["tick"].as_u64() < w[1]["tick"].as_u64()));
    let svg = std::fs::read_to_string(out.join("trajectory.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("class=\"executed\"") && svg.contains("class=\"instructed\""));
    assert!(out.join("sketch.png").exists());
}

#[test]
fn parse_blank_image_fails_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let blank = dir.path().join("blank.png");
    save_png(&RasterImage::filled(64, 48, [255, 255, 255]).unwrap(), &blank).unwrap();
    let err = stderr_error(&rovi(&["parse", s(&blank)]));
    assert_eq!(err["stage"], "parse");
    assert_eq!(err["code"], "NoSymbolsFound");
    assert!(err["message"].is_string());
}

#[test]
fn parse_overlay_marks_keypoints() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let scene = golden("move.scene.json");
    assert!(rovi(&["run", "--scene", s(&scene), "--sketch", s(&golden("move.sketch.json")), "--out", s(&run)])
        .status
        .success());
    assert!(rovi(&["render", "--scene", s(&scene), "--out", s(&run)]).status.success());
    let overlay = dir.path().join("overlay.png");
    let o = rovi(&[
        "parse",
        s(&run.join("sketch.png")),
        "--clean",
        s(&run.join("observation.png")),
        "--overlay",
        s(&overlay),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let symbols: SymbolSet = serde_json::from_slice(&o.stdout).unwrap();
    let sketch = load_png(run.join("sketch.png")).unwrap();
    let marked = load_png(&overlay).unwrap();
    for k in symbols.symbols[0].keypoints() {
        let (u, v) = (k.u.round() as u32, k.v.round() as u32);
        assert_ne!(marked.get(u + 3, v), sketch.get(u + 3, v), "cross arm at {k:?}");
    }
    assert!(run.join("depth.pfm").exists());
}

#[test]
fn ordinal_gap_is_a_plan_stage_error() {
    let dir = tempfile::tempdir().unwrap();
    let sketch = dir.path().join("gap.json");
    let arrow = |ordinal: u32, v: f64| {
        serde_json::json!({
            "color_ordinal": ordinal, "width_px": 5.0,
            "points": [[150.0, v], [300.0, v]], "primitive_hint": "arrow"
        })
    };
    std::fs::write(&sketch, serde_json::json!({ "strokes": [arrow(1, 120.0), arrow(3, 360.0)] }).to_string()).unwrap();
    let out = dir.path().join("run");
    let err = stderr_error(&rovi(&[
        "run",
        "--scene",
        s(&golden("move.scene.json")),
        "--sketch",
        s(&sketch),
        "--out",
        s(&out),
    ]));
    assert_eq!(err["stage"], "plan");
    assert_eq!(err["code"], "MissingStepColor");
}

#[test]
fn generate_is_seeded_and_matches_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = rovi(&["generate", "--out", s(d), "--count", "4", "--seed", "7"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ma = std::fs::read(a.join("manifest.json")).unwrap();
    assert_eq!(ma, std::fs::read(b.join("manifest.json")).unwrap());
    let other = dir.path().join("c");
    assert!(rovi(&["generate", "--out", s(&other), "--count", "4", "--seed", "8"]).status.success());
    assert_ne!(ma, std::fs::read(other.join("manifest.json")).unwrap());

    let manifest: Manifest = serde_json::from_slice(&ma).unwrap();
    let r = &manifest.records[0];
    let v = &r.variants[0];
    let o = rovi(&["parse", s(&a.join(&v.annotated)), "--clean", s(&a.join(&r.clean))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let symbols: SymbolSet = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(symbols.symbols.len(), v.truth.len());
    for t in &v.truth {
        for k in &t.keypoints {
            let best = symbols
                .symbols
                .iter()
                .filter(|s| s.color().ordinal == t.ordinal)
                .flat_map(|s| s.keypoints())
                .filter(|p| p.role == k.role)
                .map(|p| (p.u - k.u).hypot(p.v - k.v))
                .fold(f64::INFINITY, f64::min);
            assert!(best <= 10.0, "record {} keypoint {:?} off by {best}", r.id, k.role);
        }
    }
}

#[test]
fn eval_threshold_monotone_and_batch_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(rovi(&["generate", "--out", s(&data), "--count", "3", "--seed", "11"]).status.success());
    let mut maps = Vec::new();
    for t in ["10", "50"] {
        let out = dir.path().join(format!("eval_{t}.json"));
        let o = rovi(&["eval", "--dataset", s(&data), "--threshold-px", t, "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("mAP"));
        let report = read_json(&out);
        assert_eq!(report["overall"]["threshold_px"].as_f64(), Some(t.parse().unwrap()));
        maps.push(report["overall"]["map"].as_f64().unwrap());
    }
    assert!(maps[0] <= maps[1]);

    let out = dir.path().join("batch");
    let o = rovi(&["batch", "--dataset", s(&data), "--out", s(&out), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&out.join("batch.json"));
    assert_eq!(summary["runs"], 3);
    assert_eq!(summary["entries"].as_array().unwrap().len(), 3);
}

#[test]
fn bad_config_is_rejected_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"step_size": -1.0}"#).unwrap();
    let err = stderr_error(&rovi(&["--config", s(&cfg), "render", "--scene", s(&golden("move.scene.json")), "--out", "x"]));
    assert_eq!(err["stage"], "input");
    assert_eq!(err["code"], "InvalidConfig");
    // the flag wins over the file
    let out = dir.path().join("r");
    let o = rovi(&["--config", s(&cfg), "--step-size", "0.01", "render", "--scene", s(&golden("move.scene.json")), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

/// Answers one POST with `body`.
fn mock_planner(body: String) -> (String, thread::JoinHandle<Value>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/plan", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut len = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
        }
        let mut req = vec![0u8; len];
        reader.read_exact(&mut req).unwrap();
        write!(
            stream,
            "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        serde_json::from_slice(&req).unwrap()
    });
    (url, handle)
}

#[test]
fn external_backend_plan_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let scene = golden("move.scene.json");
    let local = dir.path().join("local");
    assert!(rovi(&["run", "--scene", s(&scene), "--sketch", s(&golden("move.sketch.json")), "--out", s(&local)])
        .status
        .success());
    let mut plan = read_json(&local.join("plan.json"));
    plan["task_label"] = Value::String("externally planned".into());
    let (url, handle) = mock_planner(plan.to_string());
    let remote = dir.path().join("remote");
    let o = rovi(&[
        "run",
        "--backend",
        "external",
        "--endpoint",
        &url,
        "--scene",
        s(&scene),
        "--sketch",
        s(&local.join("sketch.png")),
        "--out",
        s(&remote),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let req = handle.join().unwrap();
    assert!(req["image"].is_string() && req["prompt"].is_string());
    let report = read_json(&remote.join("report.json"));
    assert_eq!(report["task_label"], "externally planned");
    assert_eq!(report["success"], true);
}
