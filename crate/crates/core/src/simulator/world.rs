//! Scene description, mutable world state, and kinematic grasp/release.

use serde::{Deserialize, Serialize};

use crate::geom::{Isometry, Quat, Vec3};
use crate::lifter::{backproject, project, Intrinsics, LiftError};
use crate::policy::Actuator;
use crate::types::{rgb_distance, DepthMap, Keypoint2, Keypoint3, KeypointRole, Pose, StepColor};

use super::shape::Shape;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub pose: Pose<f64>,
    pub intrinsics: Intrinsics<f64>,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    /// Looking straight down from `height` above the world origin; image u runs along +x,
    /// image v along -y.
    pub fn top_down(height: f64) -> Self {
        Self {
            pose: Pose::new(Vec3::new(0.0, 0.0, height), Quat::new(0.0, 1.0, 0.0, 0.0)),
            intrinsics: Intrinsics { fx: 600.0, fy: 600.0, cx: 320.0, cy: 240.0 },
            width: 640,
            height: 480,
        }
    }

    /// World point under pixel keypoint `kp` at the given depth map.
    pub fn lift(&self, kp: &Keypoint2<f64>, depth: &DepthMap<f64>) -> Result<Vec3<f64>, LiftError> {
        let p = backproject(kp, depth, &self.intrinsics)?;
        Ok(self.pose.isometry().transform_point(p.position()))
    }

    /// Pixel coordinates of a world point.
    pub fn project_world(&self, p: Vec3<f64>) -> Result<(f64, f64), LiftError> {
        let c = self.pose.isometry().inverse_transform_point(p);
        let kp = project(&Keypoint3::from_vec(c, KeypointRole::Waypoint), &self.intrinsics)?;
        Ok((kp.u, kp.v))
    }

    /// Unit-z camera ray through pixel `(u, v)` expressed in the world frame, with its origin.
    pub fn world_ray(&self, u: f64, v: f64) -> (Vec3<f64>, Vec3<f64>) {
        let (x, y) = self.intrinsics.ray(u, v);
        (self.pose.position, self.pose.orientation.rotate(Vec3::new(x, y, 1.0)))
    }
}

/// Prismatic joint along a world axis. `offset` is the current joint coordinate, which the
/// object's pose already reflects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideJoint {
    pub axis: Vec3<f64>,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub offset: f64,
    /// Objects that travel with this one (a drawer body behind its handle).
    #[serde(default)]
    pub links: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub shape: Shape,
    pub pose: Pose<f64>,
    pub color: [u8; 3],
    #[serde(default = "yes")]
    pub graspable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<SlideJoint>,
}

fn yes() -> bool {
    true
}

impl SceneObject {
    pub fn distance_to(&self, p: Vec3<f64>) -> f64 {
        self.shape.distance_local(self.pose.isometry().inverse_transform_point(p))
    }

    pub fn ray(&self, o: Vec3<f64>, d: Vec3<f64>) -> Option<f64> {
        let iso = self.pose.isometry();
        let inv = iso.inverse();
        self.shape.ray_local(inv.transform_point(o), inv.transform_vector(d))
    }

    pub fn lowest_z(&self) -> f64 {
        self.shape.lowest_z(&self.pose.isometry())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportPlane {
    pub height: f64,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hold {
    pub object: String,
    /// Object pose in the gripper frame.
    pub relative: Isometry<f64>,
    /// The grasped material point in the object frame.
    pub grasp_local: Vec3<f64>,
    pub anchor_gripper: Vec3<f64>,
    pub anchor_offset: f64,
    /// Poses of the object and its links when a sliding grasp began.
    #[serde(default)]
    pub anchor_poses: Vec<(String, Pose<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gripper {
    pub pose: Pose<f64>,
    #[serde(default)]
    pub holding: Option<Hold>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    #[serde(default)]
    pub name: String,
    pub camera: Camera,
    #[serde(default)]
    pub support: Option<SupportPlane>,
    #[serde(default = "default_background")]
    pub background: [u8; 3],
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    pub gripper: Gripper,
    #[serde(default)]
    pub tick: u64,
    /// Which object each step is meant to act on, when the scene author says so.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub step: u32,
    pub object: String,
}

fn default_background() -> [u8; 3] {
    [32, 32, 40]
}

pub const DEFAULT_GRASP_RADIUS: f64 = 0.03;

impl WorldState {
    pub fn empty(camera: Camera) -> Self {
        Self {
            name: String::new(),
            camera,
            support: None,
            background: default_background(),
            objects: Vec::new(),
            gripper: Gripper { pose: Pose::from_position(Vec3::new(0.0, 0.0, 0.5)), holding: None },
            tick: 0,
            expect: Vec::new(),
        }
    }

    pub fn from_json(text: &str, palette: &[StepColor], tolerance: f64) -> Result<Self, SimError> {
        let world: WorldState = serde_json::from_str(text).map_err(|e| SimError::InvalidScene(e.to_string()))?;
        world.validate(palette, tolerance)?;
        Ok(world)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    /// Checks shapes, ids, joints, camera, and that no object color could be mistaken for a
    /// step color.
    pub fn validate(&self, palette: &[StepColor], tolerance: f64) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScene(m));
        self.camera.intrinsics.validate().map_err(|e| SimError::InvalidScene(e.to_string()))?;
        if self.camera.width == 0 || self.camera.height == 0 || !self.camera.pose.is_normalized() {
            return bad("camera needs a positive image size and a unit orientation".into());
        }
        let mut colors = vec![("background".to_string(), self.background)];
        if let Some(p) = &self.support {
            colors.push(("support plane".into(), p.color));
        }
        let mut ids = std::collections::BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return bad(format!("duplicate object id {:?}", o.id));
            }
            if !o.shape.is_valid() {
                return bad(format!("object {:?} has non-positive dimensions", o.id));
            }
            if !o.pose.is_normalized() {
                return bad(format!("object {:?} orientation is not a unit quaternion", o.id));
            }
            colors.push((format!("object {:?}", o.id), o.color));
        }
        for o in &self.objects {
            if let Some(j) = &o.joint {
                if j.axis.try_normalize(1e-9).is_none() || !(j.lower <= j.offset && j.offset <= j.upper) {
                    return bad(format!("object {:?} has a degenerate joint", o.id));
                }
                if let Some(l) = j.links.iter().find(|l| !ids.contains(l.as_str())) {
                    return bad(format!("object {:?} links unknown object {l:?}", o.id));
                }
            }
        }
        for (what, rgb) in colors {
            for c in palette {
                let d = rgb_distance(rgb, c.rgb);
                if d <= tolerance {
                    return bad(format!("{what} color {rgb:?} is {d:.1} from step color {}", c.name()));
                }
            }
        }
        if let Some(e) = self.expect.iter().find(|e| !ids.contains(e.object.as_str())) {
            return bad(format!("step {} expects unknown object {:?}", e.step, e.object));
        }
        if let Some(h) = &self.gripper.holding {
            match self.object(&h.object) {
                Some(o) if o.graspable => {}
                _ => return bad(format!("gripper holds unknown or fixed object {:?}", h.object)),
            }
        }
        Ok(())
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn holding(&self) -> Option<&str> {
        self.gripper.holding.as_ref().map(|h| h.object.as_str())
    }

    /// World position of the grasped material point, if holding.
    pub fn grasp_point(&self) -> Option<Vec3<f64>> {
        let h = self.gripper.holding.as_ref()?;
        Some(self.object(&h.object)?.pose.isometry().transform_point(h.grasp_local))
    }

    /// Graspable object nearest to `target` within `radius`; ties within 1e-9 go to the
    /// smaller id.
    pub fn grasp_candidate(&self, target: Vec3<f64>, radius: f64) -> Option<(&SceneObject, f64)> {
        let mut best: Option<(&SceneObject, f64)> = None;
        for o in self.objects.iter().filter(|o| o.graspable) {
            let d = o.distance_to(target);
            best = match best {
                None => Some((o, d)),
                Some((b, bd)) if d < bd - 1e-9 || ((d - bd).abs() <= 1e-9 && o.id < b.id) => Some((o, d)),
                keep => keep,
            };
        }
        best.filter(|(_, d)| *d <= radius)
    }

    /// Attaches the nearest graspable object to the gripper and returns its id. The gripper
    /// itself is not moved; callers approach first. `material` is the object point to track.
    pub fn attempt_grasp(&mut self, target: Vec3<f64>, radius: f64) -> Result<String, SimError> {
        self.attach(target, target, radius)
    }

    pub(crate) fn attach(&mut self, select: Vec3<f64>, material: Vec3<f64>, radius: f64) -> Result<String, SimError> {
        if let Some(h) = &self.gripper.holding {
            return Err(SimError::AlreadyHolding(h.object.clone()));
        }
        let (obj, _) = self.grasp_candidate(select, radius).ok_or(SimError::NothingToGrasp { radius })?;
        let iso = obj.pose.isometry();
        let g = self.gripper.pose.isometry();
        let mut anchor_poses = Vec::new();
        if let Some(j) = &obj.joint {
            anchor_poses.push((obj.id.clone(), obj.pose));
            for l in &j.links {
                anchor_poses.push((l.clone(), self.object(l).expect("validated link").pose));
            }
        }
        let hold = Hold {
            object: obj.id.clone(),
            relative: g.inverse().compose(&iso),
            grasp_local: iso.inverse_transform_point(material),
            anchor_gripper: self.gripper.pose.position,
            anchor_offset: obj.joint.as_ref().map_or(0.0, |j| j.offset),
            anchor_poses,
        };
        let id = hold.object.clone();
        self.gripper.holding = Some(hold);
        Ok(id)
    }

    /// Detaches the held object; free objects drop straight down onto the first support.
    pub fn release(&mut self) -> Result<String, SimError> {
        let hold = self.gripper.holding.take().ok_or(SimError::NotHolding)?;
        let idx = self.object_index(&hold.object).expect("held object exists");
        if self.objects[idx].joint.is_none() {
            self.settle(idx);
        }
        Ok(hold.object)
    }

    /// Highest support surface under `(x, y)` at or below `z_max`, ignoring object `skip`.
    pub fn support_height(&self, x: f64, y: f64, z_max: f64, skip: Option<usize>) -> Option<f64> {
        let mut best = self.support.map(|p| p.height).filter(|h| *h <= z_max);
        let top = self.objects.iter().map(|o| o.pose.position.z).fold(z_max, f64::max) + 10.0;
        let down = Vec3::new(0.0, 0.0, -1.0);
        for (i, o) in self.objects.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            if let Some(t) = o.ray(Vec3::new(x, y, top), down) {
                let z = top - t;
                if z <= z_max + 1e-12 && best.is_none_or(|b| z > b) {
                    best = Some(z);
                }
            }
        }
        best
    }

    fn settle(&mut self, idx: usize) {
        let o = &self.objects[idx];
        let c = o.pose.position;
        if let Some(h) = self.support_height(c.x, c.y, c.z, Some(idx)) {
            let dz = h - o.lowest_z();
            self.objects[idx].pose.position.z += dz;
        }
    }

    fn follow_gripper(&mut self) {
        let Some(hold) = self.gripper.holding.clone() else { return };
        let idx = self.object_index(&hold.object).expect("held object exists");
        match self.objects[idx].joint.clone() {
            None => {
                let pose = Pose::from_isometry(self.gripper.pose.isometry().compose(&hold.relative));
                self.objects[idx].pose = pose;
            }
            Some(j) => {
                let axis = j.axis.try_normalize(1e-9).expect("validated axis");
                let travel = (self.gripper.pose.position - hold.anchor_gripper).dot(axis);
                let s = (hold.anchor_offset + travel).clamp(j.lower, j.upper);
                let delta = axis.scale(s - hold.anchor_offset);
                for (id, base) in &hold.anchor_poses {
                    let k = self.object_index(id).expect("validated link");
                    self.objects[k].pose.position = base.position + delta;
                }
                if let Some(joint) = self.objects[idx].joint.as_mut() {
                    joint.offset = s;
                }
            }
        }
    }
}

impl Actuator<f64> for WorldState {
    fn pose(&self) -> Pose<f64> {
        self.gripper.pose
    }

    fn command(&mut self, pose: Pose<f64>) {
        self.gripper.pose = pose;
        self.tick += 1;
        self.follow_gripper();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::default_palette;

    fn table() -> WorldState {
        let mut w = WorldState::empty(Camera::top_down(1.0));
        w.support = Some(SupportPlane { height: 0.0, color: [150, 150, 150] });
        w
    }

    fn cube(id: &str, x: f64, y: f64, z: f64, h: f64) -> SceneObject {
        SceneObject {
            id: id.into(),
            shape: Shape::Box { half_extents: [h, h, h] },
            pose: Pose::from_position(Vec3::new(x, y, z)),
            color: [200, 60, 20],
            graspable: true,
            joint: None,
        }
    }

    #[test]
    fn grasp_top_face_and_miss_in_air() {
        let mut w = table();
        w.objects.push(cube("box", 0.0, 0.0, 0.05, 0.05));
        assert_eq!(w.attempt_grasp(Vec3::new(0.0, 0.0, 0.1), 0.03).unwrap(), "box");
        assert!(matches!(w.attempt_grasp(Vec3::new(0.0, 0.0, 0.1), 0.03), Err(SimError::AlreadyHolding(_))));
        let mut w = table();
        w.objects.push(cube("box", 0.0, 0.0, 0.05, 0.05));
        assert!(matches!(w.attempt_grasp(Vec3::new(0.5, 0.5, 0.5), 0.03), Err(SimError::NothingToGrasp { .. })));
    }

    #[test]
    fn tie_goes_to_smaller_id() {
        let mut w = table();
        w.objects.push(cube("zeta", 0.1, 0.0, 0.05, 0.05));
        w.objects.push(cube("alpha", -0.1, 0.0, 0.05, 0.05));
        assert_eq!(w.attempt_grasp(Vec3::new(0.0, 0.0, 0.05), 0.06).unwrap(), "alpha");
    }

    #[test]
    fn release_drops_to_plane_or_box() {
        let mut w = table();
        w.objects.push(cube("box", 0.0, 0.0, 0.3, 0.05));
        w.gripper.pose.position = Vec3::new(0.0, 0.0, 0.35);
        w.attempt_grasp(Vec3::new(0.0, 0.0, 0.35), 0.03).unwrap();
        w.release().unwrap();
        assert!((w.objects[0].pose.position.z - 0.05).abs() < 1e-12);
        assert!(matches!(w.release(), Err(SimError::NotHolding)));

        let mut w = table();
        w.objects.push(cube("base", 0.0, 0.0, 0.1, 0.1));
        w.objects.push(SceneObject { shape: Shape::Sphere { radius: 0.04 }, ..cube("ball", 0.02, 0.0, 0.5, 0.0) });
        w.gripper.pose.position = Vec3::new(0.02, 0.0, 0.54);
        w.attempt_grasp(Vec3::new(0.02, 0.0, 0.54), 0.03).unwrap();
        w.release().unwrap();
        assert!((w.objects[1].pose.position.z - 0.24).abs() < 1e-12);
    }

    #[test]
    fn held_object_follows_rigidly() {
        let mut w = table();
        w.objects.push(cube("box", 0.0, 0.0, 0.05, 0.05));
        w.gripper.pose.position = Vec3::new(0.0, 0.0, 0.11);
        w.attempt_grasp(Vec3::new(0.0, 0.0, 0.1), 0.03).unwrap();
        let q = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 0.7);
        w.command(Pose::new(Vec3::new(0.3, -0.2, 0.2), q));
        let rel = w.gripper.pose.isometry().inverse().compose(&w.objects[0].pose.isometry());
        let want = w.gripper.holding.as_ref().unwrap().relative;
        assert!((rel.translation - want.translation).norm() < 1e-9);
        assert_eq!(w.tick, 1);
    }

    #[test]
    fn palette_colored_object_rejected() {
        let mut w = table();
        w.objects.push(SceneObject { color: [10, 250, 100], ..cube("box", 0.0, 0.0, 0.05, 0.05) });
        assert!(matches!(w.validate(&default_palette(), 100.0), Err(SimError::InvalidScene(_))));
    }
}
