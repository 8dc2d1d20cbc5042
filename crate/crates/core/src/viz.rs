//! Keypoint overlays, trajectory projection and SVG plots.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::policy::PolicyTrace;
use crate::simulator::Camera;
use crate::types::{RasterImage, StepColor, Symbol, SymbolSet};

/// One tick of the executed trajectory in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePixel {
    pub tick: u64,
    pub step: u32,
    pub u: f64,
    pub v: f64,
}

/// Projects every tick position through `camera`; positions behind the camera are dropped.
pub fn trace_pixels(camera: &Camera, trace: &PolicyTrace<f64>) -> Vec<TracePixel> {
    trace
        .records
        .iter()
        .filter_map(|r| {
            let (u, v) = camera.project_world(crate::geom::Vec3::from_array(r.position)).ok()?;
            Some(TracePixel { tick: r.tick, step: r.step, u, v })
        })
        .collect()
}

fn contrast(rgb: [u8; 3]) -> [u8; 3] {
    let luma = 0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64;
    if luma > 128.0 {
        [0, 0, 0]
    } else {
        [255, 255, 255]
    }
}

/// Copy of `img` with a cross at every keypoint, in a color that contrasts with the stroke.
pub fn overlay_keypoints(img: &RasterImage, symbols: &SymbolSet, arm: u32) -> RasterImage {
    let mut out = img.clone();
    let (w, h) = (img.width() as i64, img.height() as i64);
    for s in &symbols.symbols {
        let ink = contrast(s.color().rgb);
        for k in s.keypoints() {
            let (cu, cv) = (k.u.round() as i64, k.v.round() as i64);
            for d in -(arm as i64)..=arm as i64 {
                for (u, v) in [(cu + d, cv), (cu, cv + d)] {
                    if u >= 0 && v >= 0 && u < w && v < h {
                        out.put(u as u32, v as u32, ink);
                    }
                }
            }
        }
    }
    out
}

fn hex(rgb: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
}

fn step_color(palette: &[StepColor], step: u32) -> [u8; 3] {
    palette.iter().find(|c| c.ordinal == step).map_or([40, 40, 40], |c| c.rgb)
}

/// Instructed symbols (dashed) against the executed path (solid), per step color.
pub fn trajectory_svg(width: u32, height: u32, symbols: &SymbolSet, path: &[TracePixel], palette: &[StepColor]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for s in &symbols.symbols {
        let c = hex(s.color().rgb);
        match s {
            Symbol::Arrow(a) => {
                let pts: Vec<String> = a.keypoints.iter().map(|k| format!("{:.2},{:.2}", k.u, k.v)).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline class="instructed" points="{}" fill="none" stroke="{c}" stroke-width="3" stroke-dasharray="8 4"/>"#,
                    pts.join(" ")
                );
            }
            Symbol::Circle(ci) => {
                let _ = writeln!(
                    out,
                    r#"<circle class="instructed" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="{c}" stroke-width="3" stroke-dasharray="8 4"/>"#,
                    ci.center.u, ci.center.v, ci.radius
                );
            }
        }
    }
    let mut start = 0;
    while start < path.len() {
        let step = path[start].step;
        let end = path[start..].iter().position(|p| p.step != step).map_or(path.len(), |n| start + n);
        let pts: Vec<String> = path[start..end].iter().map(|p| format!("{:.2},{:.2}", p.u, p.v)).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="executed" data-step="{step}" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            hex(step_color(palette, step))
        );
        start = end;
    }
    out.push_str("</svg>\n");
    out
}
