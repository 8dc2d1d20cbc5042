use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use rovi_core::datagen::{render_sketch, SketchScript, SymbolDirective, SymbolKind};
use rovi_core::pipeline::{plan_sketch, PipelineConfig, Stage};
use rovi_core::planner::{build_plan, plan_via_external, ExternalError, PlannerBackend};
use rovi_core::{default_palette, DrawingStyle, Plan, RasterImage};

enum Reply {
    Body(String),
    Stall(Duration),
}

/// Serves one request; sends the received JSON body back through the channel.
fn serve_once(reply: Reply) -> (String, mpsc::Receiver<serde_json::Value>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/plan", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
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
        let mut body = vec![0u8; len];
        reader.read_exact(&mut body).unwrap();
        let _ = tx.send(serde_json::from_slice(&body).unwrap());
        let mut stream = stream;
        match reply {
            Reply::Body(b) => {
                let _ = write!(
                    stream,
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{b}",
                    b.len()
                );
            }
            Reply::Stall(d) => thread::sleep(d),
        }
    });
    (url, rx)
}

fn sketch() -> (RasterImage, Plan) {
    let clean = RasterImage::filled(640, 480, [60, 60, 60]).unwrap();
    let script = SketchScript {
        symbols: vec![SymbolDirective {
            kind: SymbolKind::Arrow,
            ordinal: 1,
            control_points: vec![[200.0, 240.0], [420.0, 240.0]],
            radius: 0.0,
            style: DrawingStyle::Geometric,
            stroke_width: 5.0,
            jitter: 0.0,
            seed: 0,
        }],
    };
    let (img, _) = render_sketch(&clean, &script, &default_palette()).unwrap();
    let (symbols, _) = plan_sketch(&img, Some(&clean), None, &PipelineConfig::default()).unwrap();
    (img, build_plan(&symbols, Some("table")).unwrap())
}

#[test]
fn well_formed_reply_is_the_plan() {
    let (img, plan) = sketch();
    let (url, rx) = serve_once(Reply::Body(serde_json::to_string(&plan).unwrap()));
    let got = plan_via_external(&img, &PlannerBackend::external(url, 5.0)).unwrap();
    assert_eq!(got, plan);
    let req = rx.recv().unwrap();
    assert!(req["image"].as_str().unwrap().len() > 100);
    assert!(req["prompt"].as_str().unwrap().contains("green"));
}

#[test]
fn slow_endpoint_times_out() {
    let (img, _) = sketch();
    let (url, _rx) = serve_once(Reply::Stall(Duration::from_secs(3)));
    let err = plan_via_external(&img, &PlannerBackend::external(url, 0.5)).unwrap_err();
    assert!(matches!(err, ExternalError::Timeout(_)), "{err:?}");
}

#[test]
fn malformed_reply_is_a_schema_violation() {
    let (img, plan) = sketch();
    let mut bad = serde_json::to_value(&plan).unwrap();
    bad["narration"] = serde_json::json!([]);
    for body in [r#"{"steps": 3}"#.to_string(), bad.to_string()] {
        let (url, _rx) = serve_once(Reply::Body(body));
        let err = plan_via_external(&img, &PlannerBackend::external(url, 5.0)).unwrap_err();
        assert_eq!(err.code(), "SchemaViolation", "{err:?}");
    }
}

#[test]
fn unreachable_endpoint_is_a_plan_stage_error() {
    let (img, _) = sketch();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = PipelineConfig {
        backend: PlannerBackend::external(format!("http://127.0.0.1:{port}/plan"), 2.0),
        ..Default::default()
    };
    let err = plan_sketch(&img, None, None, &cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Plan);
    assert_eq!(err.code, "Unreachable");
}
