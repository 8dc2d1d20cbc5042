//! Plan execution in the simulated world: lift each step's keypoints, approach, grasp, follow,
//! release.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Quat, Vec3};
use crate::lifter::LiftError;
use crate::simulator::{SimError, WorldState, DEFAULT_GRASP_RADIUS};
use crate::types::{DepthMap, Plan, PlanInvariantError, Pose, Primitive, StepPlan, Symbol};

use super::{rotation_axis, rotate_through, translate_through, vector_angle, Actuator, PolicyConfig, PolicyError, PolicyTrace, Tracer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecConfig {
    pub policy: PolicyConfig<f64>,
    pub grasp_radius: f64,
    /// Height above a step's first keypoint where the gripper arrives before descending.
    pub approach_offset: f64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self { policy: PolicyConfig::default(), grasp_radius: DEFAULT_GRASP_RADIUS, approach_offset: 0.02 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error(transparent)]
    InvalidPlan(#[from] PlanInvariantError),
    #[error("depth map is {depth:?} but the camera renders {camera:?}")]
    DepthMismatch { depth: (u32, u32), camera: (u32, u32) },
    #[error("step {step}: {source}")]
    Lift { step: u32, source: LiftError },
    #[error("step {step}: {source}")]
    Policy { step: u32, source: PolicyError },
}

impl ExecError {
    pub fn code(&self) -> &'static str {
        match self {
            ExecError::InvalidPlan(_) => "InvalidPlan",
            ExecError::DepthMismatch { .. } => "DimensionMismatch",
            ExecError::Lift { source, .. } => source.code(),
            ExecError::Policy { source, .. } => source.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    StepStarted,
    Grasped { object: String },
    GraspFailed { code: String, message: String },
    Released { object: String },
    StepFinished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub step: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// What a step was asked to achieve and what the world ended up doing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepGoal {
    /// Bring the grasped point to `target`; sliding objects are judged along `slide_axis`.
    Place { target: Vec3<f64>, achieved: Option<Vec3<f64>>, slide_axis: Option<Vec3<f64>> },
    /// Turn the held object about a vertical axis through `center`; `target_angle` sums the
    /// per-segment angles, `target` is their composition.
    Rotate { center: Vec3<f64>, target_angle: f64, target: Quat<f64>, achieved: Option<Quat<f64>> },
    /// Grasp whatever is at `target`; `extent` is the circled radius in meters.
    Select { target: Vec3<f64>, achieved: Vec3<f64>, extent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub ordinal: u32,
    pub primitive: Primitive,
    pub object: Option<String>,
    pub goal: StepGoal,
    /// Lifted instruction path in world coordinates.
    pub instruction: Vec<Vec3<f64>>,
    /// End-effector path during the step's main action, starting where it began.
    pub executed: Vec<Vec3<f64>>,
    /// Where the step is meant to leave the end-effector; the next transit starts here.
    pub endpoint: Vec3<f64>,
    pub first_tick: u64,
    pub last_tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Execution {
    pub steps: Vec<StepRecord>,
    pub trace: PolicyTrace<f64>,
    pub events: Vec<Event>,
}

const UP: Vec3<f64> = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

struct Runner<'a> {
    world: &'a mut WorldState,
    cfg: &'a ExecConfig,
    tr: Tracer<f64>,
    events: Vec<Event>,
    /// Index of the step's first non-transit action descriptor.
    base: usize,
}

impl Runner<'_> {
    fn event(&mut self, kind: EventKind) {
        self.events.push(Event { tick: self.tr.next_tick(), step: self.tr.step, kind });
    }

    fn go(&mut self, action: usize, targets: &[Vec3<f64>]) -> Result<(), ExecError> {
        self.tr.action = self.base + action;
        translate_through(&mut *self.world, targets, &self.cfg.policy, &mut self.tr)
            .map_err(|source| ExecError::Policy { step: self.tr.step, source })
    }

    fn attach(&mut self, select: Vec3<f64>) -> Result<String, SimError> {
        let material = self.world.gripper.pose.position;
        let r = self.world.attach(select, material, self.cfg.grasp_radius);
        match &r {
            Ok(id) => self.event(EventKind::Grasped { object: id.clone() }),
            Err(e) => self.event(EventKind::GraspFailed { code: e.code().into(), message: e.to_string() }),
        }
        r
    }

    fn release(&mut self) {
        if let Ok(id) = self.world.release() {
            self.event(EventKind::Released { object: id });
        }
    }

    /// Positions commanded since trace index `from`, prefixed by `start`.
    fn path_since(&self, start: Vec3<f64>, from: usize) -> Vec<Vec3<f64>> {
        let mut p = vec![start];
        p.extend(self.tr.trace.records[from..].iter().map(|r| Vec3::from_array(r.position)));
        p
    }
}

/// Executes every step of `plan`, lifting pixel keypoints through `depth` (rendered from the
/// world's camera before execution). Grasp failures end their step but not the run.
pub fn execute_plan(plan: &Plan, world: &mut WorldState, depth: &DepthMap<f64>, cfg: &ExecConfig) -> Result<Execution, ExecError> {
    plan.validate()?;
    cfg.policy.validate().map_err(|source| ExecError::Policy { step: 0, source })?;
    let cam = world.camera;
    if (depth.width(), depth.height()) != (cam.width, cam.height) {
        return Err(ExecError::DepthMismatch { depth: (depth.width(), depth.height()), camera: (cam.width, cam.height) });
    }
    let mut run = Runner { world, cfg, tr: Tracer::default(), events: Vec::new(), base: 0 };
    let mut steps = Vec::new();
    for (step, actions) in plan.steps.iter().zip(&plan.actions) {
        let ordinal = step.ordinal;
        let lift = |kp| cam.lift(kp, depth).map_err(|source| ExecError::Lift { step: ordinal, source });
        let lifted = step.keypoints2d.iter().map(lift).collect::<Result<Vec<_>, _>>()?;
        run.tr.step = ordinal;
        run.event(EventKind::StepStarted);
        let first_tick = run.tr.next_tick();
        let entry = lifted[0];
        run.tr.transit = true;
        run.base = 0;
        run.go(0, &[entry + UP.scale(cfg.approach_offset)])?;
        run.tr.transit = false;
        run.base = actions.iter().take_while(|a| a.transit).count();
        run.go(0, &[entry])?;
        let mut rec = match step.primitive {
            Primitive::MoveAToB => run_move(&mut run, &lifted)?,
            Primitive::Rotate => {
                let c = lift(step.rotation_center2d.as_ref().expect("validated rotate has a center"))?;
                run_rotate(&mut run, c, &lifted)?
            }
            Primitive::PickOrSelect => run_pick(&mut run, step, entry, &cam.pose),
        };
        run.event(EventKind::StepFinished);
        rec.ordinal = ordinal;
        rec.primitive = step.primitive;
        rec.first_tick = first_tick;
        rec.last_tick = run.tr.next_tick().saturating_sub(1);
        steps.push(rec);
    }
    Ok(Execution { steps, trace: run.tr.trace, events: run.events })
}

fn record(goal: StepGoal, instruction: Vec<Vec3<f64>>) -> StepRecord {
    let instruction_end = *instruction.last().expect("steps have keypoints");
    StepRecord {
        ordinal: 0,
        primitive: Primitive::MoveAToB,
        object: None,
        goal,
        instruction,
        executed: Vec::new(),
        endpoint: instruction_end,
        first_tick: 0,
        last_tick: 0,
        failure: None,
    }
}

fn run_move(run: &mut Runner, lifted: &[Vec3<f64>]) -> Result<StepRecord, ExecError> {
    let target = *lifted.last().expect("validated move has keypoints");
    let mut rec = record(StepGoal::Place { target, achieved: None, slide_axis: None }, lifted.to_vec());
    let id = match run.attach(lifted[0]) {
        Ok(id) => id,
        Err(e) => {
            rec.failure = Some(e.to_string());
            rec.endpoint = run.world.gripper.pose.position;
            return Ok(rec);
        }
    };
    let obj = run.world.object(&id).expect("grasped object exists");
    let g = run.world.gripper.pose.position;
    let slide_axis = obj.joint.as_ref().and_then(|j| j.axis.try_normalize(1e-9));
    // free objects ride with their bottom at the destination's surface height
    let z = match slide_axis {
        Some(_) => g.z,
        None => target.z + (g.z - obj.lowest_z()),
    };
    let carry: Vec<Vec3<f64>> = lifted[1..].iter().map(|p| Vec3::new(p.x, p.y, z)).collect();
    let from = run.tr.trace.records.len();
    rec.endpoint = *carry.last().expect("validated move has two keypoints");
    run.go(1, &carry)?;
    rec.executed = run.path_since(g, from);
    run.tr.action = run.base + 2;
    let achieved = run.world.grasp_point();
    run.release();
    rec.goal = StepGoal::Place { target, achieved, slide_axis };
    rec.object = Some(id);
    Ok(rec)
}

fn run_rotate(run: &mut Runner, c: Vec3<f64>, lifted: &[Vec3<f64>]) -> Result<StepRecord, ExecError> {
    let g = run.world.gripper.pose.position;
    // swing in the gripper's horizontal plane about the circled center
    let center = Vec3::new(c.x, c.y, g.z);
    let kps: Vec<Vec3<f64>> = lifted.iter().map(|p| Vec3::new(p.x, p.y, g.z)).collect();
    let mut target_angle = 0.0;
    let mut endpoint = g;
    let mut net = Quat::identity();
    for w in kps.windows(2) {
        let (a, b) = (w[0] - center, w[1] - center);
        let theta = vector_angle(a, b).map_err(|source| ExecError::Policy { step: run.tr.step, source })?;
        target_angle += theta;
        let q = Quat::from_axis_angle(rotation_axis(a, b), theta);
        endpoint = center + q.rotate(endpoint - center);
        net = q.mul(net);
    }
    let mut rec = record(StepGoal::Rotate { center, target_angle, target: net, achieved: None }, kps.clone());
    let id = match run.attach(c) {
        Ok(id) => id,
        Err(e) => {
            rec.failure = Some(e.to_string());
            rec.endpoint = run.world.gripper.pose.position;
            return Ok(rec);
        }
    };
    rec.endpoint = endpoint;
    let q0 = run.world.object(&id).expect("grasped object exists").pose.orientation;
    let from = run.tr.trace.records.len();
    run.tr.action = run.base + 1;
    rotate_through(&mut *run.world, center, &kps, &run.cfg.policy, &mut run.tr)
        .map_err(|source| ExecError::Policy { step: run.tr.step, source })?;
    rec.executed = run.path_since(g, from);
    let q1 = run.world.object(&id).expect("grasped object exists").pose.orientation;
    run.tr.action = run.base + 2;
    run.release();
    rec.goal = StepGoal::Rotate { center, target_angle, target: net, achieved: Some(q1.mul(q0.conjugate())) };
    rec.object = Some(id);
    Ok(rec)
}

fn run_pick(run: &mut Runner, step: &StepPlan, entry: Vec3<f64>, camera: &Pose<f64>) -> StepRecord {
    let radius_px = step
        .symbols
        .iter()
        .find_map(|s| if let Symbol::Circle(c) = s { Some(c.radius) } else { None })
        .unwrap_or(0.0);
    let depth = camera.isometry().inverse_transform_point(entry).z;
    let extent = radius_px * depth / run.world.camera.intrinsics.fx;
    let achieved = run.world.pose().position;
    let mut rec = record(StepGoal::Select { target: entry, achieved, extent }, vec![entry]);
    rec.executed = vec![achieved];
    rec.endpoint = achieved;
    match run.attach(entry) {
        Ok(id) => rec.object = Some(id),
        Err(e) => rec.failure = Some(e.to_string()),
    }
    rec
}
