//! Request and response shapes shared by the HTTP handlers and the CLI, so
//! both front ends answer identical inputs identically.

use planlens_core::contrastive::{ActionRef, Strategy};
use planlens_core::decimal::Decimal;
use planlens_core::ground::GroundTask;
use planlens_core::pddl::{parse_domain, parse_problem};
use planlens_core::plan::parse_plan;
use planlens_core::planner::PlannerConfig;
use planlens_core::session::{Comparison, PlanId, PlanNode, Session, SessionError};
use planlens_core::sim::{validate, ValidationReport};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NewSession {
    pub domain: String,
    pub problem: String,
    #[serde(default)]
    pub config: PlannerConfig,
    /// Plan text to start from instead of planning.
    #[serde(default)]
    pub plan: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AskRequest {
    pub plan_id: PlanId,
    pub step: usize,
    /// `(name arg...)`
    pub action: String,
    pub strategy: Strategy,
    #[serde(default)]
    pub window: Option<(Decimal, Decimal)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateRequest {
    pub domain: String,
    pub problem: String,
    pub plan: String,
}

pub fn start(req: &NewSession) -> Result<Session, ApiError> {
    let session = match &req.plan {
        Some(text) => Session::with_plan(&req.domain, &req.problem, req.config.clone(), text)?,
        None => Session::new(&req.domain, &req.problem, req.config.clone())?,
    };
    Ok(session)
}

pub fn root(session: &Session) -> PlanNode {
    session.workspace().nodes[0].clone()
}

pub fn alternatives(session: &Session, plan: PlanId, step: usize) -> Result<Vec<String>, ApiError> {
    Ok(session.alternatives(plan, step)?.iter().map(ActionRef::to_string).collect())
}

pub fn ask(session: &mut Session, req: &AskRequest) -> Result<PlanNode, ApiError> {
    let action = ActionRef::parse(&req.action)
        .filter(|a| !a.name.is_empty())
        .ok_or_else(|| ApiError::new(400, "bad-action", format!("cannot read action `{}`", req.action)))?;
    Ok(session.ask(req.plan_id, req.step, action, req.strategy, req.window)?.clone())
}

pub fn compare(session: &Session, plans: &[PlanId], metrics: &[String]) -> Result<Comparison, ApiError> {
    Ok(session.compare(plans, metrics)?)
}

pub fn check_plan(req: &ValidateRequest) -> Result<ValidationReport, ApiError> {
    let d = parse_domain(&req.domain).map_err(SessionError::from)?;
    let p = parse_problem(&req.problem, &d).map_err(SessionError::from)?;
    let task = GroundTask::new(&d, &p).map_err(SessionError::from)?;
    let plan = parse_plan(&req.plan).map_err(SessionError::from)?;
    Ok(validate(&task, &plan))
}

/// `1,2,3` into IDs; empty text is an empty list.
pub fn id_list(text: &str) -> Result<Vec<PlanId>, ApiError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| ApiError::bad_request(format!("bad plan ID `{s}`"))))
        .collect()
}

pub fn name_list(text: &str) -> Vec<String> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

/// `LB,UB` into a window.
pub fn parse_window(text: &str) -> Result<(Decimal, Decimal), ApiError> {
    let bad = || ApiError::new(400, "bad-window", format!("expected LB,UB, got `{text}`"));
    let (lb, ub) = text.split_once(',').ok_or_else(bad)?;
    let num = |s: &str| s.trim().parse::<Decimal>().ok();
    Ok((num(lb).ok_or_else(bad)?, num(ub).ok_or_else(bad)?))
}
