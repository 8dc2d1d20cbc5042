//! Step-level success checks and instruction/trajectory alignment.

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::policy::{Execution, StepGoal, StepRecord};
use crate::scalar::Scalar;
use crate::types::Primitive;

use super::world::{Expectation, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskSpec {
    /// Horizontal placement tolerance, meters; measured along the joint axis for sliding objects.
    pub position_tolerance: f64,
    pub angle_tolerance: f64,
    pub expected: Vec<Expectation>,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self { position_tolerance: 0.02, angle_tolerance: 0.05, expected: Vec::new() }
    }
}

impl TaskSpec {
    pub fn for_world(world: &WorldState) -> Self {
        Self { expected: world.expect.clone(), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub ordinal: u32,
    pub primitive: Primitive,
    pub success: bool,
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_error: Option<f64>,
    pub alignment: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub success: bool,
    /// Mean of the per-step alignments.
    pub alignment: f64,
    pub steps: Vec<StepOutcome>,
}

/// `n >= 2` points spaced uniformly by arc length along `pts`.
pub fn resample<T: Scalar>(pts: &[Vec3<T>], n: usize) -> Vec<Vec3<T>> {
    let n = n.max(2);
    match pts.len() {
        0 => return Vec::new(),
        1 => return vec![pts[0]; n],
        _ => {}
    }
    let mut cum = vec![T::zero()];
    for w in pts.windows(2) {
        let last = *cum.last().expect("non-empty");
        cum.push(last + w[0].distance(w[1]));
    }
    let total = *cum.last().expect("non-empty");
    if total <= T::zero() {
        return vec![pts[0]; n];
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let s = total * T::lit(k as f64) / T::lit((n - 1) as f64);
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > T::zero() { ((s - cum[seg]) / len).max(T::zero()).min(T::one()) } else { T::zero() };
        out.push(pts[seg].lerp(pts[seg + 1], t));
    }
    out
}

/// Discrete Fréchet distance by the coupling recurrence.
pub fn discrete_frechet<T: Scalar>(a: &[Vec3<T>], b: &[Vec3<T>]) -> T {
    if a.is_empty() || b.is_empty() {
        return T::infinity();
    }
    let m = b.len();
    let mut prev = vec![T::zero(); m];
    let mut cur = vec![T::zero(); m];
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let d = p.distance(*q);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

const ALIGN_SAMPLES: usize = 101;

/// `1 - F / L` in the horizontal plane, clamped to `[0, 1]`, where `F` is the discrete
/// Fréchet distance between the resampled paths and `L` the instruction length.
pub fn path_alignment<T: Scalar>(executed: &[Vec3<T>], instruction: &[Vec3<T>]) -> T {
    let flat = |p: &[Vec3<T>]| resample(&p.iter().map(|v| Vec3::new(v.x, v.y, T::zero())).collect::<Vec<_>>(), ALIGN_SAMPLES);
    let (e, i) = (flat(executed), flat(instruction));
    if e.is_empty() || i.is_empty() {
        return T::zero();
    }
    let len = i.windows(2).fold(T::zero(), |acc, w| acc + w[0].distance(w[1]));
    let f = discrete_frechet(&e, &i);
    if len < T::lit(1e-9) {
        return if f < T::lit(1e-9) { T::one() } else { T::zero() };
    }
    (T::one() - f / len).max(T::zero()).min(T::one())
}

fn outcome(rec: &StepRecord, task: &TaskSpec) -> StepOutcome {
    let mut out = StepOutcome {
        ordinal: rec.ordinal,
        primitive: rec.primitive,
        success: false,
        object: rec.object.clone(),
        position_error: None,
        angle_error: None,
        alignment: 0.0,
        reason: rec.failure.clone(),
    };
    let mut ok = rec.failure.is_none();
    match &rec.goal {
        StepGoal::Place { target, achieved, slide_axis } => {
            out.alignment = path_alignment(&rec.executed, &rec.instruction);
            if let Some(a) = achieved {
                let d = *a - *target;
                let err = match slide_axis {
                    Some(axis) => d.dot(*axis).abs(),
                    None => d.x.hypot(d.y),
                };
                out.position_error = Some(err);
                ok &= err <= task.position_tolerance;
            } else {
                ok = false;
            }
        }
        StepGoal::Rotate { target, achieved, .. } => {
            out.alignment = path_alignment(&rec.executed, &rec.instruction);
            if let Some(a) = achieved {
                let err = target.conjugate().mul(*a).angle();
                out.angle_error = Some(err);
                ok &= err <= task.angle_tolerance;
            } else {
                ok = false;
            }
        }
        StepGoal::Select { target, achieved, extent } => {
            let d = (achieved.x - target.x).hypot(achieved.y - target.y);
            out.position_error = Some(d);
            out.alignment = if *extent > 0.0 { 1.0 - (d / extent).min(1.0) } else if d == 0.0 { 1.0 } else { 0.0 };
            ok &= rec.object.is_some();
        }
    }
    if let Some(e) = task.expected.iter().find(|e| e.step == rec.ordinal) {
        if rec.object.as_deref() != Some(e.object.as_str()) {
            ok = false;
            out.reason.get_or_insert_with(|| format!("expected {:?}, acted on {:?}", e.object, rec.object));
        }
    }
    if !ok && out.reason.is_none() {
        out.reason = Some("outside tolerance".into());
    }
    out.success = ok;
    out
}

pub fn evaluate(exec: &Execution, task: &TaskSpec) -> Evaluation {
    let steps: Vec<StepOutcome> = exec.steps.iter().map(|r| outcome(r, task)).collect();
    let alignment = if steps.is_empty() { 0.0 } else { steps.iter().map(|s| s.alignment).sum::<f64>() / steps.len() as f64 };
    Evaluation { success: !steps.is_empty() && steps.iter().all(|s| s.success), alignment, steps }
}
