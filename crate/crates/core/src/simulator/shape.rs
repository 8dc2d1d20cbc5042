//! Analytic shapes in their local frame: ray hits, distance to the solid, lowest point.

use serde::{Deserialize, Serialize};

use crate::geom::{Isometry, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Shape {
    Box { half_extents: [f64; 3] },
    Sphere { radius: f64 },
    /// Axis along local z.
    Cylinder { radius: f64, half_height: f64 },
}

type V = Vec3<f64>;

impl Shape {
    pub fn is_valid(&self) -> bool {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        match *self {
            Shape::Box { half_extents: h } => h.iter().all(|&x| pos(x)),
            Shape::Sphere { radius } => pos(radius),
            Shape::Cylinder { radius, half_height } => pos(radius) && pos(half_height),
        }
    }

    /// Smallest `t > 0` with `o + t d` on the surface; `o`, `d` in the local frame.
    pub fn ray_local(&self, o: V, d: V) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut take = |t: f64| {
            if t > 1e-12 && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        };
        match *self {
            Shape::Box { half_extents: h } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for (oi, di, hi) in [(o.x, d.x, h[0]), (o.y, d.y, h[1]), (o.z, d.z, h[2])] {
                    if di == 0.0 {
                        if oi.abs() > hi {
                            return None;
                        }
                        continue;
                    }
                    let (a, b) = ((-hi - oi) / di, (hi - oi) / di);
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
                if t0 <= t1 {
                    take(t0);
                    if t0 <= 1e-12 {
                        take(t1);
                    }
                }
            }
            Shape::Sphere { radius } => {
                let b = o.dot(d);
                let a = d.dot(d);
                let c = o.dot(o) - radius * radius;
                let disc = b * b - a * c;
                if disc >= 0.0 {
                    let s = disc.sqrt();
                    take((-b - s) / a);
                    take((-b + s) / a);
                }
            }
            Shape::Cylinder { radius, half_height } => {
                let a = d.x * d.x + d.y * d.y;
                if a > 0.0 {
                    let b = o.x * d.x + o.y * d.y;
                    let c = o.x * o.x + o.y * o.y - radius * radius;
                    let disc = b * b - a * c;
                    if disc >= 0.0 {
                        let s = disc.sqrt();
                        for t in [(-b - s) / a, (-b + s) / a] {
                            if (o.z + t * d.z).abs() <= half_height {
                                take(t);
                            }
                        }
                    }
                }
                if d.z != 0.0 {
                    for zc in [-half_height, half_height] {
                        let t = (zc - o.z) / d.z;
                        let (x, y) = (o.x + t * d.x, o.y + t * d.y);
                        if x * x + y * y <= radius * radius {
                            take(t);
                        }
                    }
                }
            }
        }
        best
    }

    /// Euclidean distance from a local point to the solid (0 inside).
    pub fn distance_local(&self, q: V) -> f64 {
        match *self {
            Shape::Box { half_extents: h } => {
                let dx = (q.x.abs() - h[0]).max(0.0);
                let dy = (q.y.abs() - h[1]).max(0.0);
                let dz = (q.z.abs() - h[2]).max(0.0);
                (dx * dx + dy * dy + dz * dz).sqrt()
            }
            Shape::Sphere { radius } => (q.norm() - radius).max(0.0),
            Shape::Cylinder { radius, half_height } => {
                let dr = ((q.x * q.x + q.y * q.y).sqrt() - radius).max(0.0);
                let dz = (q.z.abs() - half_height).max(0.0);
                (dr * dr + dz * dz).sqrt()
            }
        }
    }

    /// World z of the lowest point when placed at `pose`.
    pub fn lowest_z(&self, pose: &Isometry<f64>) -> f64 {
        let c = pose.translation.z;
        match *self {
            Shape::Box { half_extents: h } => {
                let mut low = f64::INFINITY;
                for sx in [-1.0, 1.0] {
                    for sy in [-1.0, 1.0] {
                        for sz in [-1.0, 1.0] {
                            let p = pose.transform_point(Vec3::new(sx * h[0], sy * h[1], sz * h[2]));
                            low = low.min(p.z);
                        }
                    }
                }
                low
            }
            Shape::Sphere { radius } => c - radius,
            Shape::Cylinder { radius, half_height } => {
                let axis = pose.transform_vector(Vec3::new(0.0, 0.0, 1.0));
                let az = axis.z.abs().min(1.0);
                c - half_height * az - radius * (1.0 - az * az).sqrt()
            }
        }
    }
}
