//! The full chain from an annotated observation to an evaluated execution.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::{parse_sketch, ParserConfig};
use crate::planner::{build_plan, plan_via_external, BackendKind, PlannerBackend};
use crate::policy::{execute_plan, Event, ExecConfig, Execution, StepRecord};
use crate::simulator::{evaluate, render, Evaluation, StepOutcome, TaskSpec, WorldState};
use crate::types::{default_palette, Plan, RasterImage, StepColor, SymbolSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Input,
    Parse,
    Plan,
    Execute,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Input => "input",
            Stage::Parse => "parse",
            Stage::Plan => "plan",
            Stage::Execute => "execute",
        })
    }
}

/// Any failure along the chain, tagged with where it happened.
#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[error("{stage}: {code}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub code: String,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, code: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { stage, code: code.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub palette: Vec<StepColor>,
    pub parser: ParserConfig,
    pub exec: ExecConfig,
    pub backend: PlannerBackend,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            palette: default_palette(),
            parser: ParserConfig::default(),
            exec: ExecConfig::default(),
            backend: PlannerBackend::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub symbols: SymbolSet,
    pub plan: Plan,
    pub execution: Execution,
    pub evaluation: Evaluation,
    pub final_world: WorldState,
}

/// Parses the sketch and builds a plan with the configured backend.
pub fn plan_sketch(
    annotated: &RasterImage,
    clean: Option<&RasterImage>,
    label: Option<&str>,
    cfg: &PipelineConfig,
) -> Result<(SymbolSet, Plan), PipelineError> {
    let symbols = parse_sketch(annotated, clean, &cfg.palette, &cfg.parser)
        .map_err(|e| PipelineError::new(Stage::Parse, e.code(), &e))?;
    let plan = match cfg.backend.kind {
        BackendKind::Geometric => {
            build_plan(&symbols, label).map_err(|e| PipelineError::new(Stage::Plan, e.code(), &e))?
        }
        BackendKind::External => {
            plan_via_external(annotated, &cfg.backend).map_err(|e| PipelineError::new(Stage::Plan, e.code(), &e))?
        }
    };
    Ok((symbols, plan))
}

/// Renders `world` for the clean image and depth, then parses, plans, executes on a copy of
/// the world, and evaluates against the scene's expectations.
pub fn run_episode(world: &WorldState, annotated: &RasterImage, cfg: &PipelineConfig) -> Result<Episode, PipelineError> {
    world
        .validate(&cfg.palette, cfg.parser.tolerance)
        .map_err(|e| PipelineError::new(Stage::Input, e.code(), &e))?;
    let frame = render(world);
    let label = (!world.name.is_empty()).then_some(world.name.as_str());
    let (symbols, plan) = plan_sketch(annotated, Some(&frame.image), label, cfg)?;
    let mut final_world = world.clone();
    let execution = execute_plan(&plan, &mut final_world, &frame.depth, &cfg.exec)
        .map_err(|e| PipelineError::new(Stage::Execute, e.code(), &e))?;
    let evaluation = evaluate(&execution, &TaskSpec::for_world(world));
    Ok(Episode { symbols, plan, execution, evaluation, final_world })
}

/// The summary written next to a run: outcome, per-step scores, executed steps and events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub success: bool,
    pub alignment: f64,
    pub task_label: String,
    pub narration: Vec<String>,
    pub outcomes: Vec<StepOutcome>,
    pub steps: Vec<StepRecord>,
    pub events: Vec<Event>,
    pub ticks: usize,
}

impl Episode {
    pub fn report(&self) -> EpisodeReport {
        EpisodeReport {
            success: self.evaluation.success,
            alignment: self.evaluation.alignment,
            task_label: self.plan.task_label.clone(),
            narration: self.plan.narration.clone(),
            outcomes: self.evaluation.steps.clone(),
            steps: self.execution.steps.clone(),
            events: self.execution.events.clone(),
            ticks: self.execution.trace.records.len(),
        }
    }
}
