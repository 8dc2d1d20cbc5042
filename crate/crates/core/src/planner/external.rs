//! Client for an external planning service that answers with Plan JSON.

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::encode_png;
use crate::types::{Plan, RasterImage};

pub const DEFAULT_PROMPT: &str = "The image shows a robot workspace annotated with hand-drawn visual \
instructions. Arrows and circles are colored by step: green is step 1, blue is step 2, pink is step 3. \
Describe the task, list the sub-goals in order, and give the executable actions with their keypoints.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Geometric,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerBackend {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn default_timeout() -> f64 {
    30.0
}

impl Default for PlannerBackend {
    fn default() -> Self {
        Self { kind: BackendKind::Geometric, endpoint: None, timeout_secs: default_timeout() }
    }
}

impl PlannerBackend {
    pub fn external(endpoint: impl Into<String>, timeout_secs: f64) -> Self {
        Self { kind: BackendKind::External, endpoint: Some(endpoint.into()), timeout_secs }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExternalError {
    #[error("backend is not configured for external planning: {0}")]
    NotExternal(String),
    #[error("request timed out after {0} s")]
    Timeout(f64),
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("response violates the plan schema: {0}")]
    SchemaViolation(String),
}

impl ExternalError {
    pub fn code(&self) -> &'static str {
        match self {
            ExternalError::NotExternal(_) => "NotExternal",
            ExternalError::Timeout(_) => "Timeout",
            ExternalError::Unreachable(_) => "Unreachable",
            ExternalError::SchemaViolation(_) => "SchemaViolation",
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    image: String,
    prompt: &'a str,
}

/// POSTs the annotated image and the default prompt; accepts the reply only if it is a
/// well-formed plan.
pub fn plan_via_external(annotated: &RasterImage, backend: &PlannerBackend) -> Result<Plan, ExternalError> {
    if backend.kind != BackendKind::External {
        return Err(ExternalError::NotExternal("kind is not external".into()));
    }
    let endpoint = backend.endpoint.as_deref().ok_or_else(|| ExternalError::NotExternal("no endpoint".into()))?;
    if !(backend.timeout_secs > 0.0) {
        return Err(ExternalError::NotExternal("timeout must be positive".into()));
    }
    let png = encode_png(annotated).map_err(|e| ExternalError::SchemaViolation(e.to_string()))?;
    let body = Request { image: base64::engine::general_purpose::STANDARD.encode(png), prompt: DEFAULT_PROMPT };

    let timeout = Duration::from_secs_f64(backend.timeout_secs);
    let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
    let map_err = |e: ureq::Error| match e {
        ureq::Error::Timeout(_) => ExternalError::Timeout(backend.timeout_secs),
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut || io.kind() == std::io::ErrorKind::WouldBlock => {
            ExternalError::Timeout(backend.timeout_secs)
        }
        ureq::Error::StatusCode(code) => ExternalError::SchemaViolation(format!("HTTP status {code}")),
        ureq::Error::Json(j) => ExternalError::SchemaViolation(j.to_string()),
        other => ExternalError::Unreachable(other.to_string()),
    };
    let response = agent.post(endpoint).send_json(&body).map_err(map_err)?;
    let text = response.into_body().read_to_string().map_err(map_err)?;
    let plan: Plan = serde_json::from_str(&text).map_err(|e| ExternalError::SchemaViolation(e.to_string()))?;
    plan.validate().map_err(|e| ExternalError::SchemaViolation(e.to_string()))?;
    Ok(plan)
}
