//! Uniform error body for the API and the CLI.

use planlens_core::contrastive::ContrastiveError;
use planlens_core::planner::PlannerError;
use planlens_core::session::SessionError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    /// HTTP status; not part of the body.
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.to_string(), message: message.into(), detail: None }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(400, "bad-request", message)
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(404, code, message)
    }

    fn with_detail(mut self, detail: impl Serialize) -> Self {
        self.detail = serde_json::to_value(detail).ok();
        self
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

fn planner(e: &PlannerError) -> ApiError {
    let message = e.to_string();
    match e {
        PlannerError::BadTemplate(_) => ApiError::new(400, "bad-planner-config", message),
        PlannerError::InvalidPlan(v) => ApiError::new(500, "planner-invalid-plan", message).with_detail(v),
        PlannerError::NonZeroExit { code, stderr } => ApiError::new(500, "planner-failure", message)
            .with_detail(serde_json::json!({ "exitCode": code, "stderr": stderr })),
        PlannerError::Timeout { .. } => ApiError::new(500, "planner-timeout", message),
        PlannerError::Io(_) | PlannerError::Parse(_) | PlannerError::NoPlanInOutput => {
            ApiError::new(500, "planner-failure", message)
        }
    }
}

fn contrastive(e: &ContrastiveError) -> ApiError {
    let message = e.to_string();
    match e {
        ContrastiveError::NotApplicable { .. } => ApiError::new(409, "stale-suggestion", message),
        ContrastiveError::BasePlanInvalid(v) => ApiError::new(400, "invalid-base-plan", message).with_detail(v),
        ContrastiveError::StepOutOfRange { .. } => ApiError::new(400, "step-out-of-range", message),
        ContrastiveError::UnknownAction(_) => ApiError::new(400, "unknown-action", message),
        ContrastiveError::BadWindow(_) => ApiError::new(400, "bad-window", message),
        ContrastiveError::NameCollision(_) => ApiError::new(400, "name-collision", message),
        ContrastiveError::Ground(_) => ApiError::new(400, "grounding", message),
        ContrastiveError::Inconsistent(v) => ApiError::new(500, "inconsistent-plan", message).with_detail(v),
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match &e {
            SessionError::Pddl(_) => ApiError::new(400, "pddl", message),
            SessionError::Ground(_) => ApiError::new(400, "grounding", message),
            SessionError::PlanText(_) => ApiError::new(400, "plan-syntax", message),
            SessionError::Planner(p) => planner(p),
            SessionError::NoInitialPlan(_) => ApiError::new(500, "no-initial-plan", message),
            SessionError::InvalidPlan(v) => ApiError::new(400, "invalid-plan", message).with_detail(v),
            SessionError::UnknownPlan(_) => ApiError::new(404, "unknown-plan", message),
            SessionError::EmptyNode(_) => ApiError::new(400, "empty-plan", message),
            SessionError::StepOutOfRange { .. } => ApiError::new(400, "step-out-of-range", message),
            SessionError::UnknownMetric(_) => ApiError::new(404, "unknown-metric", message),
            SessionError::DuplicateMetric(_) => ApiError::new(409, "duplicate-metric", message),
            SessionError::BadMetric(_) => ApiError::new(400, "bad-metric", message),
            SessionError::Contrastive(c) => contrastive(c),
            SessionError::Version { .. } => ApiError::new(400, "workspace-version", message),
            SessionError::Corrupt(_) => ApiError::new(400, "corrupt-workspace", message),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::new(500, "io", e.to_string())
    }
}
