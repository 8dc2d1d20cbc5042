//! Keypoint-conditioned control: drive the end-effector through lifted keypoints, advancing
//! when the per-keypoint cost drops to epsilon.

mod plan;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Quat, Vec3};
use crate::scalar::Scalar;
use crate::types::{ActionType, Keypoint3, Pose};

pub use plan::{execute_plan, Event, EventKind, ExecConfig, ExecError, Execution, StepGoal, StepRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig<T = f64> {
    /// Translation tolerance, meters.
    pub eps_trans: T,
    /// Rotation tolerance, radians.
    pub eps_rot: T,
    /// End-effector travel per tick, meters.
    pub step_size: T,
    pub max_ticks_per_keypoint: usize,
}

impl<T: Scalar> Default for PolicyConfig<T> {
    fn default() -> Self {
        Self { eps_trans: T::lit(0.01), eps_rot: T::lit(0.02), step_size: T::lit(0.01), max_ticks_per_keypoint: 2000 }
    }
}

impl<T: Scalar> PolicyConfig<T> {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.eps_trans > T::zero() && self.eps_rot > T::zero() && self.step_size > T::zero() && self.max_ticks_per_keypoint > 0 {
            Ok(())
        } else {
            Err(PolicyError::InvalidConfig)
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("policy configuration values must be positive")]
    InvalidConfig,
    #[error("no keypoints to follow")]
    NoKeypoints,
    #[error("rotation needs a center")]
    MissingCenter,
    #[error("keypoint lies {radius:e} m from the rotation center")]
    DegenerateRadius { radius: f64 },
    #[error("keypoint {keypoint} not reached within {ticks} ticks")]
    TickBudgetExhausted { keypoint: usize, ticks: usize },
}

impl PolicyError {
    pub fn code(&self) -> &'static str {
        match self {
            PolicyError::InvalidConfig => "InvalidConfig",
            PolicyError::NoKeypoints => "NoKeypoints",
            PolicyError::MissingCenter => "MissingCenter",
            PolicyError::DegenerateRadius { .. } => "DegenerateRadius",
            PolicyError::TickBudgetExhausted { .. } => "TickBudgetExhausted",
        }
    }
}

pub fn translation_cost<T: Scalar>(e: &Pose<T>, target: &Keypoint3<T>) -> T {
    e.position.distance(target.position())
}

const MIN_RADIUS: f64 = 1e-6;

/// Angle between `p_i - c` and `p_next - c`.
pub fn rotation_target_angle<T: Scalar>(p_i: &Keypoint3<T>, p_next: &Keypoint3<T>, c: &Keypoint3<T>) -> Result<T, PolicyError> {
    vector_angle(p_i.position() - c.position(), p_next.position() - c.position())
}

pub fn vector_angle<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Result<T, PolicyError> {
    let (na, nb) = (a.norm(), b.norm());
    let r = na.min(nb);
    if !(r >= T::lit(MIN_RADIUS)) {
        return Err(PolicyError::DegenerateRadius { radius: r.to_f64_lossy() });
    }
    let cos = (a.dot(b) / (na * nb)).max(-T::one()).min(T::one());
    Ok(cos.acos())
}

/// `alpha * delta_trans + (1 - alpha) * |theta_t - theta_i|`.
pub fn step_cost<T: Scalar>(action: ActionType, delta_trans: T, theta_t: T, theta_i: T) -> T {
    let alpha: T = action.alpha();
    alpha * delta_trans + (T::one() - alpha) * (theta_t - theta_i).abs()
}

/// Axis that turns `a` onto `b` the short way; antiparallel or parallel pairs get a fixed
/// perpendicular with lexicographically positive components.
pub fn rotation_axis<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    let scale = a.norm() * b.norm();
    if let Some(n) = a.cross(b).try_normalize(scale * T::lit(1e-12)) {
        return n;
    }
    let basis = [Vec3::new(T::one(), T::zero(), T::zero()), Vec3::new(T::zero(), T::one(), T::zero()), Vec3::new(T::zero(), T::zero(), T::one())];
    let pick = basis
        .iter()
        .copied()
        .min_by(|x, y| x.dot(a).abs().partial_cmp(&y.dot(a).abs()).expect("finite"))
        .expect("three candidates");
    let n = a.cross(pick).try_normalize(T::lit(1e-300).max(T::min_positive_value())).unwrap_or(pick);
    if n.lexicographically_positive() {
        n
    } else {
        -n
    }
}

/// Anything the policy can command.
pub trait Actuator<T: Scalar> {
    fn pose(&self) -> Pose<T>;
    fn command(&mut self, pose: Pose<T>);
}

/// A bare end-effector with no world around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEffector<T> {
    pub pose: Pose<T>,
}

impl<T: Scalar> Actuator<T> for FreeEffector<T> {
    fn pose(&self) -> Pose<T> {
        self.pose
    }

    fn command(&mut self, pose: Pose<T>) {
        self.pose = pose;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct TickRecord<T = f64> {
    pub tick: u64,
    pub step: u32,
    /// Index of the action within its step.
    pub action: usize,
    /// Active keypoint index within the action's keypoint list.
    pub keypoint: usize,
    pub position: [T; 3],
    pub cost: T,
    pub alpha: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<T>,
    /// The keypoint was reached on this tick.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reached: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub transit: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct PolicyTrace<T = f64> {
    pub records: Vec<TickRecord<T>>,
}

impl<T: Scalar + Serialize> PolicyTrace<T> {
    /// One JSON object per tick, newline separated.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("tick records serialize"));
            out.push('\n');
        }
        out
    }
}

impl<T: Scalar> PolicyTrace<T> {
    pub fn positions(&self) -> Vec<Vec3<T>> {
        self.records.iter().map(|r| Vec3::from_array(r.position)).collect()
    }
}

/// Accumulates tick records with a running tick counter and the current step/action tags.
#[derive(Debug, Clone)]
pub struct Tracer<T = f64> {
    pub trace: PolicyTrace<T>,
    next_tick: u64,
    pub step: u32,
    pub action: usize,
    pub transit: bool,
}

impl<T: Scalar> Default for Tracer<T> {
    fn default() -> Self {
        Self { trace: PolicyTrace { records: Vec::new() }, next_tick: 0, step: 0, action: 0, transit: false }
    }
}

impl<T: Scalar> Tracer<T> {
    pub fn next_tick(&self) -> u64 {
        self.next_tick
    }

    fn record(&mut self, keypoint: usize, position: Vec3<T>, cost: T, action: ActionType, theta: Option<T>, reached: bool) -> u64 {
        let tick = self.next_tick;
        self.next_tick += 1;
        self.trace.records.push(TickRecord {
            tick,
            step: self.step,
            action: self.action,
            keypoint,
            position: position.to_array(),
            cost,
            alpha: action.into(),
            theta,
            reached,
            transit: self.transit,
        });
        tick
    }
}

/// Moves through `targets` in order along straight segments, `step_size` per tick.
pub fn translate_through<T: Scalar, A: Actuator<T>>(
    act: &mut A,
    targets: &[Vec3<T>],
    cfg: &PolicyConfig<T>,
    tr: &mut Tracer<T>,
) -> Result<(), PolicyError> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(PolicyError::NoKeypoints);
    }
    for (i, &target) in targets.iter().enumerate() {
        let mut pose = act.pose();
        let mut cost = pose.position.distance(target);
        if cost <= cfg.eps_trans {
            act.command(pose);
            tr.record(i, pose.position, cost, ActionType::Translation, None, true);
            continue;
        }
        let mut ticks = 0;
        while cost > cfg.eps_trans {
            if ticks == cfg.max_ticks_per_keypoint {
                return Err(PolicyError::TickBudgetExhausted { keypoint: i, ticks });
            }
            pose.position = if cost <= cfg.step_size {
                target
            } else {
                pose.position + (target - pose.position).scale(cfg.step_size / cost)
            };
            act.command(pose);
            ticks += 1;
            cost = pose.position.distance(target);
            tr.record(i, pose.position, cost, ActionType::Translation, None, cost <= cfg.eps_trans);
        }
    }
    Ok(())
}

/// Swings the end-effector about `center` through the angles between consecutive `keypoints`
/// (taken relative to the center). The radius is fixed by the starting pose; orientation turns
/// with the position. Any shortfall left at a transition is made up in the next segment.
pub fn rotate_through<T: Scalar, A: Actuator<T>>(
    act: &mut A,
    center: Vec3<T>,
    keypoints: &[Vec3<T>],
    cfg: &PolicyConfig<T>,
    tr: &mut Tracer<T>,
) -> Result<T, PolicyError> {
    cfg.validate()?;
    if keypoints.len() < 2 {
        return Err(PolicyError::NoKeypoints);
    }
    let start = act.pose();
    let radius = start.position.distance(center);
    if !(radius >= T::lit(MIN_RADIUS)) {
        return Err(PolicyError::DegenerateRadius { radius: radius.to_f64_lossy() });
    }
    let dtheta = cfg.step_size / radius;
    // phi: total angle turned; done: summed targets of finished segments
    let mut phi = T::zero();
    let mut done = T::zero();
    for i in 1..keypoints.len() {
        let (a, b) = (keypoints[i - 1] - center, keypoints[i] - center);
        let theta_i = vector_angle(a, b)?;
        let axis = rotation_axis(a, b);
        let seg_pose = act.pose();
        let mut theta_t = phi - done;
        let keypoint = i - 1;
        let mut cost = (theta_t - theta_i).abs();
        if cost <= cfg.eps_rot {
            act.command(seg_pose);
            tr.record(keypoint, seg_pose.position, cost, ActionType::Rotation, Some(theta_t), true);
        }
        let mut ticks = 0;
        let base = theta_t;
        while cost > cfg.eps_rot {
            if ticks == cfg.max_ticks_per_keypoint {
                return Err(PolicyError::TickBudgetExhausted { keypoint, ticks });
            }
            let remaining = theta_i - theta_t;
            let d = if remaining.abs() <= dtheta { remaining } else { dtheta * remaining.signum() };
            theta_t = theta_t + d;
            phi = phi + d;
            let q = Quat::from_axis_angle(axis, theta_t - base);
            let pose = Pose::new(center + q.rotate(seg_pose.position - center), q.mul(seg_pose.orientation));
            act.command(pose);
            ticks += 1;
            cost = (theta_t - theta_i).abs();
            tr.record(keypoint, pose.position, cost, ActionType::Rotation, Some(theta_t), cost <= cfg.eps_rot);
        }
        done = done + theta_i;
    }
    Ok(phi)
}

/// Runs one step's keypoints with the matching branch. Translation visits every keypoint;
/// rotation starts from the current pose and swings through the keypoint angles about `center`.
pub fn execute_step<T: Scalar, A: Actuator<T>>(
    action: ActionType,
    keypoints: &[Keypoint3<T>],
    center: Option<&Keypoint3<T>>,
    act: &mut A,
    cfg: &PolicyConfig<T>,
) -> Result<PolicyTrace<T>, PolicyError> {
    let mut tr = Tracer::default();
    let pts: Vec<Vec3<T>> = keypoints.iter().map(|k| k.position()).collect();
    match action {
        ActionType::Translation => translate_through(act, &pts, cfg, &mut tr)?,
        ActionType::Rotation => {
            let c = center.ok_or(PolicyError::MissingCenter)?;
            rotate_through(act, c.position(), &pts, cfg, &mut tr)?;
        }
    }
    Ok(tr.trace)
}
