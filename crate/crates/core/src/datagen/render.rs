//! Rasterizes scripted arrows and circles over a clean image.

use serde::{Deserialize, Serialize};

use crate::types::{DrawingStyle, Keypoint2, KeypointRole, RasterImage, StepColor};

use super::noise::SmoothNoise;
use super::DatagenError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Arrow,
    Circle,
    /// A raw polyline through the control points, drawn as is.
    Stroke,
}

/// How to draw one symbol. Arrows use `control_points` tail to head; circles use the first
/// control point as center plus `radius`; strokes connect the control points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolDirective {
    pub kind: SymbolKind,
    pub ordinal: u32,
    pub control_points: Vec<[f64; 2]>,
    #[serde(default)]
    pub radius: f64,
    pub style: DrawingStyle,
    pub stroke_width: f64,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SketchScript {
    pub symbols: Vec<SymbolDirective>,
}

/// Ground truth for one drawn symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolTruth {
    pub kind: SymbolKind,
    pub ordinal: u32,
    pub keypoints: Vec<Keypoint2<f64>>,
}

type P = (f64, f64);

fn sub(a: P, b: P) -> P {
    (a.0 - b.0, a.1 - b.1)
}

fn norm(a: P) -> f64 {
    (a.0 * a.0 + a.1 * a.1).sqrt()
}

fn unit(a: P) -> P {
    let n = norm(a);
    if n > 0.0 {
        (a.0 / n, a.1 / n)
    } else {
        (1.0, 0.0)
    }
}

/// Per-pixel coverage accumulator; coverage combines by max.
struct Coverage {
    width: u32,
    height: u32,
    cov: Vec<f64>,
}

impl Coverage {
    fn new(width: u32, height: u32) -> Self {
        Self { width, height, cov: vec![0.0; width as usize * height as usize] }
    }

    fn bump(&mut self, u: i64, v: i64, c: f64) {
        if u < 0 || v < 0 || u >= self.width as i64 || v >= self.height as i64 || c <= 0.0 {
            return;
        }
        let i = v as usize * self.width as usize + u as usize;
        if c > self.cov[i] {
            self.cov[i] = c.min(1.0);
        }
    }

    fn segment(&mut self, a: P, b: P, w: f64) {
        let r = w / 2.0 + 1.0;
        let (u0, u1) = ((a.0.min(b.0) - r).floor() as i64, (a.0.max(b.0) + r).ceil() as i64);
        let (v0, v1) = ((a.1.min(b.1) - r).floor() as i64, (a.1.max(b.1) + r).ceil() as i64);
        let d = sub(b, a);
        let dd = d.0 * d.0 + d.1 * d.1;
        for v in v0..=v1 {
            for u in u0..=u1 {
                let p = (u as f64, v as f64);
                let t = if dd > 0.0 { (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / dd).clamp(0.0, 1.0) } else { 0.0 };
                let dist = norm(sub(p, (a.0 + t * d.0, a.1 + t * d.1)));
                self.bump(u, v, w / 2.0 + 0.5 - dist);
            }
        }
    }

    fn polyline(&mut self, pts: &[P], w: f64) {
        if pts.len() == 1 {
            self.segment(pts[0], pts[0], w);
        }
        for s in pts.windows(2) {
            self.segment(s[0], s[1], w);
        }
    }

    fn triangle(&mut self, tri: [P; 3]) {
        let u0 = tri.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor() as i64 - 1;
        let u1 = tri.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil() as i64 + 1;
        let v0 = tri.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor() as i64 - 1;
        let v1 = tri.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil() as i64 + 1;
        let area = (tri[1].0 - tri[0].0) * (tri[2].1 - tri[0].1) - (tri[1].1 - tri[0].1) * (tri[2].0 - tri[0].0);
        let sign = area.signum();
        for v in v0..=v1 {
            for u in u0..=u1 {
                let p = (u as f64, v as f64);
                // signed distance to the inside of each edge; positive inside
                let mut inside = f64::INFINITY;
                for k in 0..3 {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    let e = sub(b, a);
                    let n = norm(e);
                    let s = sign * (e.0 * (p.1 - a.1) - e.1 * (p.0 - a.0)) / n;
                    inside = inside.min(s);
                }
                self.bump(u, v, inside + 0.5);
            }
        }
    }

    fn annulus(&mut self, c: P, r: f64, w: f64) {
        let reach = r + w / 2.0 + 1.0;
        for v in (c.1 - reach).floor() as i64..=(c.1 + reach).ceil() as i64 {
            for u in (c.0 - reach).floor() as i64..=(c.0 + reach).ceil() as i64 {
                let d = (norm(sub((u as f64, v as f64), c)) - r).abs();
                self.bump(u, v, w / 2.0 + 0.5 - d);
            }
        }
    }

    fn blend_into(&self, img: &mut RasterImage, rgb: [u8; 3]) {
        for v in 0..self.height {
            for u in 0..self.width {
                let c = self.cov[v as usize * self.width as usize + u as usize];
                if c <= 0.0 {
                    continue;
                }
                let bg = img.get(u, v);
                let mut out = [0u8; 3];
                for k in 0..3 {
                    out[k] = (bg[k] as f64 * (1.0 - c) + rgb[k] as f64 * c).round().clamp(0.0, 255.0) as u8;
                }
                img.put(u, v, out);
            }
        }
    }
}

/// Quadratic blend through midpoints of consecutive control points, passing exactly through
/// the first and last control points.
pub fn shaft_curve(ctrl: &[P], spacing: f64) -> Vec<P> {
    let mid = |a: P, b: P| ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
    let mut pieces: Vec<(P, P, P)> = Vec::new();
    if ctrl.len() == 2 {
        pieces.push((ctrl[0], mid(ctrl[0], ctrl[1]), ctrl[1]));
    } else {
        let n = ctrl.len();
        let first = mid(ctrl[0], ctrl[1]);
        pieces.push((ctrl[0], mid(ctrl[0], first), first));
        for i in 1..n - 1 {
            pieces.push((mid(ctrl[i - 1], ctrl[i]), ctrl[i], mid(ctrl[i], ctrl[i + 1])));
        }
        let last = mid(ctrl[n - 2], ctrl[n - 1]);
        pieces.push((last, mid(last, ctrl[n - 1]), ctrl[n - 1]));
    }
    let mut out = vec![ctrl[0]];
    for (a, c, b) in pieces {
        let approx = norm(sub(c, a)) + norm(sub(b, c));
        let steps = ((2.0 * approx / spacing).ceil() as usize).max(1);
        for k in 1..=steps {
            let t = k as f64 / steps as f64;
            let s = 1.0 - t;
            out.push((s * s * a.0 + 2.0 * s * t * c.0 + t * t * b.0, s * s * a.1 + 2.0 * s * t * c.1 + t * t * b.1));
        }
    }
    out.dedup_by(|a, b| norm(sub(*a, *b)) < 1e-12);
    out
}

fn cumulative(pts: &[P]) -> Vec<f64> {
    let mut s = vec![0.0];
    for w in pts.windows(2) {
        s.push(s.last().unwrap() + norm(sub(w[1], w[0])));
    }
    s
}

fn wobble(pts: &[P], amplitude: f64, seed: u64) -> Vec<P> {
    let s = cumulative(pts);
    let len = *s.last().unwrap();
    if amplitude <= 0.0 || len <= 0.0 {
        return pts.to_vec();
    }
    let noise = SmoothNoise::new(seed, len, 25.0);
    let taper = (len / 4.0).clamp(1e-9, 20.0);
    (0..pts.len())
        .map(|k| {
            let prev = pts[k.saturating_sub(1)];
            let next = pts[(k + 1).min(pts.len() - 1)];
            let t = unit(sub(next, prev));
            let n = (-t.1, t.0);
            let fade = (s[k] / taper).min((len - s[k]) / taper).clamp(0.0, 1.0);
            let off = amplitude * noise.at(s[k]) * fade;
            (pts[k].0 + n.0 * off, pts[k].1 + n.1 * off)
        })
        .collect()
}

/// Direction of travel at the end of `pts`, measured over the last `back` units.
fn end_tangent(pts: &[P], back: f64) -> P {
    let end = *pts.last().unwrap();
    for p in pts.iter().rev().skip(1) {
        if norm(sub(end, *p)) >= back {
            return unit(sub(end, *p));
        }
    }
    unit(sub(end, pts[0]))
}

fn truncate_at(pts: &[P], keep: f64) -> Vec<P> {
    let s = cumulative(pts);
    let mut out = Vec::new();
    for k in 0..pts.len() {
        if s[k] <= keep {
            out.push(pts[k]);
        } else {
            let f = (keep - s[k - 1]) / (s[k] - s[k - 1]);
            out.push((pts[k - 1].0 + f * (pts[k].0 - pts[k - 1].0), pts[k - 1].1 + f * (pts[k].1 - pts[k - 1].1)));
            break;
        }
    }
    out
}

fn draw_arrow(cov: &mut Coverage, sym: &SymbolDirective) {
    let ctrl: Vec<P> = sym.control_points.iter().map(|p| (p[0], p[1])).collect();
    let w = sym.stroke_width;
    let mut shaft = shaft_curve(&ctrl, 1.0);
    if sym.style == DrawingStyle::Loose {
        shaft = wobble(&shaft, sym.jitter, sym.seed);
    }
    let tip = *ctrl.last().unwrap();
    let t = end_tangent(&shaft, 2.0 * w);
    let n = (-t.1, t.0);
    match sym.style {
        DrawingStyle::Geometric => {
            let len = *cumulative(&shaft).last().unwrap();
            cov.polyline(&truncate_at(&shaft, (len - 4.0 * w).max(0.0)), w);
            let base = (tip.0 - 5.0 * w * t.0, tip.1 - 5.0 * w * t.1);
            cov.triangle([
                tip,
                (base.0 + 2.0 * w * n.0, base.1 + 2.0 * w * n.1),
                (base.0 - 2.0 * w * n.0, base.1 - 2.0 * w * n.1),
            ]);
        }
        DrawingStyle::Loose => {
            cov.polyline(&shaft, w);
            // barbs at +-30 degrees off the reversed tangent
            let (c, s) = (3f64.sqrt() / 2.0, 0.5);
            let back = (-t.0, -t.1);
            for sgn in [1.0, -1.0] {
                let d = (c * back.0 - sgn * s * back.1, sgn * s * back.0 + c * back.1);
                cov.segment(tip, (tip.0 + 5.0 * w * d.0, tip.1 + 5.0 * w * d.1), w);
            }
        }
    }
}

/// Unit-circle points from the rational parametrization, counterclockwise from +x.
fn circle_points(count_per_quadrant: usize) -> Vec<P> {
    let mut quarter = Vec::new();
    for k in 0..count_per_quadrant {
        let t = k as f64 / count_per_quadrant as f64;
        let d = 1.0 + t * t;
        quarter.push(((1.0 - t * t) / d, 2.0 * t / d));
    }
    let mut out = Vec::with_capacity(4 * quarter.len());
    for q in 0..4 {
        for &(x, y) in &quarter {
            out.push(match q {
                0 => (x, y),
                1 => (-y, x),
                2 => (-x, -y),
                _ => (y, -x),
            });
        }
    }
    out
}

fn draw_circle(cov: &mut Coverage, sym: &SymbolDirective) {
    let c = (sym.control_points[0][0], sym.control_points[0][1]);
    match sym.style {
        DrawingStyle::Geometric => cov.annulus(c, sym.radius, sym.stroke_width),
        DrawingStyle::Loose => {
            let quarter = ((sym.radius * std::f64::consts::FRAC_PI_2).ceil() as usize).max(4);
            let unit_pts = circle_points(quarter);
            let noise = SmoothNoise::periodic(sym.seed, 8);
            let n = unit_pts.len();
            let mut pts: Vec<P> = unit_pts
                .iter()
                .enumerate()
                .map(|(k, &(x, y))| {
                    let r = sym.radius + sym.jitter * noise.at_periodic(k as f64 / n as f64);
                    (c.0 + r * x, c.1 + r * y)
                })
                .collect();
            pts.push(pts[0]);
            cov.polyline(&pts, sym.stroke_width);
        }
    }
}

fn validate(sym: &SymbolDirective, index: usize, width: u32, height: u32) -> Result<(), DatagenError> {
    let bad = |reason: &str| DatagenError::InvalidScript { index, reason: reason.to_string() };
    if !(sym.stroke_width >= 1.0) {
        return Err(bad("stroke width below 1 px"));
    }
    if !(sym.jitter >= 0.0) {
        return Err(bad("negative jitter"));
    }
    let inside = |p: &[f64; 2], margin: f64| {
        p[0] - margin >= 0.0
            && p[1] - margin >= 0.0
            && p[0] + margin <= (width - 1) as f64
            && p[1] + margin <= (height - 1) as f64
    };
    match sym.kind {
        SymbolKind::Stroke => {
            if sym.control_points.len() < 2 {
                return Err(bad("stroke needs at least two points"));
            }
            if !sym.control_points.iter().all(|p| inside(p, 0.0)) {
                return Err(DatagenError::SymbolOutOfBounds { index });
            }
        }
        SymbolKind::Arrow => {
            if sym.control_points.len() < 2 {
                return Err(bad("arrow needs at least two control points"));
            }
            let (a, b) = (sym.control_points[0], *sym.control_points.last().unwrap());
            if (a[0] - b[0]).hypot(a[1] - b[1]) == 0.0 {
                return Err(bad("arrow tail and head coincide"));
            }
            if !sym.control_points.iter().all(|p| inside(p, 0.0)) {
                return Err(DatagenError::SymbolOutOfBounds { index });
            }
        }
        SymbolKind::Circle => {
            if sym.control_points.is_empty() || !(sym.radius > 0.0) {
                return Err(bad("circle needs a center and positive radius"));
            }
            let reach = sym.radius + sym.jitter + sym.stroke_width / 2.0;
            if !inside(&sym.control_points[0], reach) {
                return Err(DatagenError::SymbolOutOfBounds { index });
            }
        }
    }
    Ok(())
}

/// Draws every directive in order over `clean`. Ground truth is the script itself: arrow tail
/// and head control points, circle centers.
pub fn render_sketch(
    clean: &RasterImage,
    script: &SketchScript,
    palette: &[StepColor],
) -> Result<(RasterImage, Vec<SymbolTruth>), DatagenError> {
    let mut img = clean.clone();
    let mut truth = Vec::with_capacity(script.symbols.len());
    for (index, sym) in script.symbols.iter().enumerate() {
        validate(sym, index, img.width(), img.height())?;
        let color = palette
            .iter()
            .find(|c| c.ordinal == sym.ordinal)
            .ok_or(DatagenError::UnknownOrdinal(sym.ordinal))?;
        let mut cov = Coverage::new(img.width(), img.height());
        let keypoints = match sym.kind {
            SymbolKind::Arrow => {
                draw_arrow(&mut cov, sym);
                let (a, b) = (sym.control_points[0], *sym.control_points.last().unwrap());
                vec![Keypoint2::new(a[0], a[1], KeypointRole::Start), Keypoint2::new(b[0], b[1], KeypointRole::End)]
            }
            SymbolKind::Circle => {
                draw_circle(&mut cov, sym);
                let c = sym.control_points[0];
                vec![Keypoint2::new(c[0], c[1], KeypointRole::Center)]
            }
            SymbolKind::Stroke => {
                let pts: Vec<P> = sym.control_points.iter().map(|p| (p[0], p[1])).collect();
                cov.polyline(&pts, sym.stroke_width);
                let (a, b) = (sym.control_points[0], *sym.control_points.last().unwrap());
                vec![Keypoint2::new(a[0], a[1], KeypointRole::Start), Keypoint2::new(b[0], b[1], KeypointRole::End)]
            }
        };
        cov.blend_into(&mut img, color.rgb);
        truth.push(SymbolTruth { kind: sym.kind, ordinal: sym.ordinal, keypoints });
    }
    Ok((img, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_hits_both_endpoints() {
        let c = shaft_curve(&[(10.0, 10.0), (50.0, 80.0), (120.0, 20.0), (200.0, 90.0)], 1.0);
        assert_eq!(c[0], (10.0, 10.0));
        assert_eq!(*c.last().unwrap(), (200.0, 90.0));
        assert!(c.windows(2).all(|w| norm(sub(w[1], w[0])) <= 1.01));
    }

    #[test]
    fn rational_circle_is_on_unit_circle() {
        for (x, y) in circle_points(16) {
            assert!((x * x + y * y - 1.0).abs() < 1e-12);
        }
    }
}
