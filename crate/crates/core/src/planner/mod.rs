//! Geometric planner: color-ordered steps, primitive classification, narration, and actions.

mod external;

use thiserror::Error;

use crate::types::{
    ActionDescriptor, ActionName, ActionType, Keypoint2, Plan, Primitive, StepPlan, Symbol, SymbolSet,
};

pub use external::{plan_via_external, BackendKind, ExternalError, PlannerBackend, DEFAULT_PROMPT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("symbol set is empty")]
    EmptySymbolSet,
    #[error("step color {missing} is missing but {present} is present")]
    MissingStepColor { missing: u32, present: u32 },
    #[error("step {ordinal}: unsupported symbol combination ({arrows} arrows, {circles} circles)")]
    UnsupportedSymbolCombination { ordinal: u32, arrows: usize, circles: usize },
}

impl PlanError {
    pub fn code(&self) -> &'static str {
        match self {
            PlanError::EmptySymbolSet => "EmptySymbolSet",
            PlanError::MissingStepColor { .. } => "MissingStepColor",
            PlanError::UnsupportedSymbolCombination { .. } => "UnsupportedSymbolCombination",
        }
    }
}

/// Groups symbols by color ordinal, requiring ordinals 1..=k without gaps.
pub fn decompose_steps(symbols: &SymbolSet) -> Result<Vec<(u32, Vec<Symbol>)>, PlanError> {
    if symbols.is_empty() {
        return Err(PlanError::EmptySymbolSet);
    }
    let ordinals = symbols.distinct_ordinals();
    for (k, &o) in ordinals.iter().enumerate() {
        let expected = k as u32 + 1;
        if o != expected {
            return Err(PlanError::MissingStepColor { missing: expected, present: o });
        }
    }
    Ok(ordinals
        .into_iter()
        .map(|o| (o, symbols.symbols.iter().filter(|s| s.color().ordinal == o).cloned().collect()))
        .collect())
}

/// {arrow} → move, {circle, arrow} → rotate, {circle} → pick.
pub fn classify_primitive(ordinal: u32, group: &[Symbol]) -> Result<StepPlan, PlanError> {
    let arrows: Vec<_> = group.iter().filter_map(|s| if let Symbol::Arrow(a) = s { Some(a) } else { None }).collect();
    let circles: Vec<_> = group.iter().filter_map(|s| if let Symbol::Circle(c) = s { Some(c) } else { None }).collect();
    let unsupported =
        || PlanError::UnsupportedSymbolCombination { ordinal, arrows: arrows.len(), circles: circles.len() };
    // circle first, then arrow, whatever the discovery order
    let mut ordered: Vec<Symbol> = circles.iter().map(|c| Symbol::Circle((*c).clone())).collect();
    ordered.extend(arrows.iter().map(|a| Symbol::Arrow((*a).clone())));
    let step = match (arrows.len(), circles.len()) {
        (1, 0) => StepPlan {
            ordinal,
            primitive: Primitive::MoveAToB,
            symbols: ordered,
            action_type: ActionType::Translation,
            keypoints2d: arrows[0].keypoints.clone(),
            rotation_center2d: None,
        },
        (1, 1) => StepPlan {
            ordinal,
            primitive: Primitive::Rotate,
            symbols: ordered,
            action_type: ActionType::Rotation,
            keypoints2d: arrows[0].keypoints.clone(),
            rotation_center2d: Some(circles[0].center),
        },
        (0, 1) => StepPlan {
            ordinal,
            primitive: Primitive::PickOrSelect,
            symbols: ordered,
            action_type: ActionType::Translation,
            keypoints2d: vec![circles[0].center],
            rotation_center2d: None,
        },
        _ => return Err(unsupported()),
    };
    Ok(step)
}

fn px(k: &Keypoint2<f64>) -> String {
    format!("({:.0}, {:.0})", k.u, k.v)
}

fn narrate(step: &StepPlan) -> String {
    let start = step.keypoints2d.first().expect("step has keypoints");
    let end = step.keypoints2d.last().expect("step has keypoints");
    match step.primitive {
        Primitive::MoveAToB => format!("Step {}: move the object from {} to {}.", step.ordinal, px(start), px(end)),
        Primitive::Rotate => format!(
            "Step {}: rotate the object about {} from {} to {}.",
            step.ordinal,
            px(step.rotation_center2d.as_ref().expect("rotate has a center")),
            px(start),
            px(end)
        ),
        Primitive::PickOrSelect => format!("Step {}: pick up the object at {}.", step.ordinal, px(start)),
    }
}

fn actions_for(step: &StepPlan) -> Vec<ActionDescriptor> {
    let kps = &step.keypoints2d;
    match step.primitive {
        Primitive::MoveAToB => vec![
            ActionDescriptor::new(ActionName::Grasp, vec![kps[0]]),
            ActionDescriptor::new(ActionName::MoveTo, kps[1..].to_vec()),
            ActionDescriptor::new(ActionName::Release, Vec::new()),
        ],
        Primitive::Rotate => {
            let center = step.rotation_center2d.expect("rotate has a center");
            vec![
                ActionDescriptor { center: Some(center), ..ActionDescriptor::new(ActionName::Grasp, vec![kps[0]]) },
                ActionDescriptor { center: Some(center), ..ActionDescriptor::new(ActionName::RotateAbout, kps.clone()) },
                ActionDescriptor::new(ActionName::Release, Vec::new()),
            ]
        }
        Primitive::PickOrSelect => vec![ActionDescriptor::new(ActionName::Grasp, vec![kps[0]])],
    }
}

/// Where the end-effector is left after a step, in pixels.
fn step_exit(step: &StepPlan) -> Keypoint2<f64> {
    *step.keypoints2d.last().expect("step has keypoints")
}

/// Where the first action of a step starts, in pixels.
// rotations are driven from the arrow tail, so every step is entered at its first keypoint
fn step_entry(step: &StepPlan) -> Keypoint2<f64> {
    step.keypoints2d[0]
}

pub fn task_label(steps: &[StepPlan]) -> String {
    let verbs: Vec<&str> = steps.iter().map(|s| s.primitive.verb()).collect();
    let n = steps.len();
    format!("{}, {} step{}", verbs.join(" then "), n, if n == 1 { "" } else { "s" })
}

/// Builds a complete plan. Steps after the first open with a transit `move_to` from the
/// previous step's endpoint to this step's start.
pub fn build_plan(symbols: &SymbolSet, scene_label: Option<&str>) -> Result<Plan, PlanError> {
    let groups = decompose_steps(symbols)?;
    let steps = groups.iter().map(|(o, g)| classify_primitive(*o, g)).collect::<Result<Vec<_>, _>>()?;
    let mut actions = Vec::with_capacity(steps.len());
    for (j, step) in steps.iter().enumerate() {
        let mut list = Vec::new();
        if j > 0 {
            list.push(ActionDescriptor {
                transit: true,
                ..ActionDescriptor::new(ActionName::MoveTo, vec![step_exit(&steps[j - 1]), step_entry(step)])
            });
        }
        list.extend(actions_for(step));
        actions.push(list);
    }
    let label = task_label(&steps);
    Ok(Plan {
        task_label: match scene_label {
            Some(scene) if !scene.is_empty() => format!("{label} ({scene})"),
            _ => label,
        },
        narration: steps.iter().map(narrate).collect(),
        steps,
        actions,
    })
}
