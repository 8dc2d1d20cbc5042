//! Ray-cast color and depth rendering from the scene camera.

use rayon::prelude::*;

use crate::types::{DepthMap, RasterImage};

use super::world::WorldState;

/// A rendered observation; `depth` is camera z in meters with `NaN` where nothing was hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: RasterImage,
    pub depth: DepthMap<f64>,
}

pub fn render(world: &WorldState) -> Frame {
    let cam = &world.camera;
    let (w, h) = (cam.width, cam.height);
    let rows: Vec<(Vec<u8>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut rgb = Vec::with_capacity(3 * w as usize);
            let mut depth = Vec::with_capacity(w as usize);
            for u in 0..w {
                let (o, d) = cam.world_ray(u as f64, v as f64);
                let mut hit: Option<(f64, [u8; 3])> = None;
                let mut take = |t: f64, c: [u8; 3]| {
                    if t > 0.0 && hit.is_none_or(|(b, _)| t < b) {
                        hit = Some((t, c));
                    }
                };
                if let Some(p) = &world.support {
                    if d.z != 0.0 {
                        take((p.height - o.z) / d.z, p.color);
                    }
                }
                for obj in &world.objects {
                    if let Some(t) = obj.ray(o, d) {
                        take(t, obj.color);
                    }
                }
                match hit {
                    Some((t, c)) => {
                        rgb.extend_from_slice(&c);
                        depth.push(t);
                    }
                    None => {
                        rgb.extend_from_slice(&world.background);
                        depth.push(f64::NAN);
                    }
                }
            }
            (rgb, depth)
        })
        .collect();
    let mut pixels = Vec::with_capacity(3 * (w * h) as usize);
    let mut depths = Vec::with_capacity((w * h) as usize);
    for (r, d) in rows {
        pixels.extend(r);
        depths.extend(d);
    }
    Frame {
        image: RasterImage::from_raw(w, h, pixels).expect("camera size validated"),
        depth: DepthMap::from_raw(w, h, depths).expect("ray depths are positive"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::simulator::{Camera, SceneObject, Shape, SupportPlane};
    use crate::types::Pose;

    #[test]
    fn table_depth_and_box_top() {
        let mut w = WorldState::empty(Camera::top_down(1.0));
        w.support = Some(SupportPlane { height: 0.0, color: [120, 120, 120] });
        w.objects.push(SceneObject {
            id: "b".into(),
            shape: Shape::Box { half_extents: [0.05, 0.05, 0.05] },
            pose: Pose::from_position(Vec3::new(0.0, 0.0, 0.05)),
            color: [200, 60, 20],
            graspable: true,
            joint: None,
        });
        let f = render(&w);
        assert!((f.depth.get(320, 240).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(f.image.get(320, 240), [200, 60, 20]);
        assert!((f.depth.get(10, 10).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(f.image.get(10, 10), [120, 120, 120]);
        // top-down camera: +x world is +u, +y world is -v
        let (u, v) = w.camera.project_world(Vec3::new(0.1, 0.1, 0.0)).unwrap();
        assert!((u - 380.0).abs() < 1e-9 && (v - 180.0).abs() < 1e-9);
    }
}
