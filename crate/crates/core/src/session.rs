//! Exploration sessions: a tree of plans grown by contrastive questions,
//! user-defined metrics over those plans, annotations, and persistence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::contrastive::{explain, ActionRef, Behavior, ContrastiveError, ContrastiveQuery, Rejoin, Strategy};
use crate::decimal::Decimal;
use crate::ground::{GroundError, GroundTask};
use crate::pddl::{parse_domain, parse_metric, parse_problem, print_expr, Optimization, PddlError};
use crate::plan::{parse_plan, PlanParseError, TimedPlan};
use crate::planner::{solve, PlanOutcome, PlannerConfig, PlannerError};
use crate::sim::{applicable_actions, state_at, validate, Violation};

pub const WORKSPACE_VERSION: u32 = 1;

pub type PlanId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub metric: String,
    pub weight: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricKind {
    Makespan,
    StepCount,
    /// A PDDL metric such as `minimize (+ (total-time) (fuel))`, evaluated in
    /// the plan's final state.
    Pddl {
        expression: String,
    },
    /// Weighted sum of metrics defined before this one.
    WeightedSum {
        terms: Vec<WeightedTerm>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricDef {
    pub name: String,
    #[serde(flatten)]
    pub kind: MetricKind,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanNode {
    pub id: PlanId,
    pub parent: Option<PlanId>,
    /// Absent when no plan exists for the question that created the node.
    pub plan: Option<TimedPlan>,
    /// Step of the parent's plan that was questioned.
    pub step: Option<usize>,
    pub replaced: Option<ActionRef>,
    pub suggested: Option<ActionRef>,
    pub strategy: Option<Strategy>,
    pub window: Option<(Decimal, Decimal)>,
    pub behavior: Option<Behavior>,
    pub rejoin: Option<Rejoin>,
    pub user_step: Option<usize>,
    /// Why no plan was found.
    pub reason: Option<String>,
    pub metrics: BTreeMap<String, Decimal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub plan: PlanId,
    pub step: Option<usize>,
    pub text: String,
}

/// Everything needed to restore a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workspace {
    pub version: u32,
    pub domain: String,
    pub problem: String,
    pub config: PlannerConfig,
    pub nodes: Vec<PlanNode>,
    pub metrics: Vec<MetricDef>,
    pub annotations: Vec<Annotation>,
    pub current: PlanId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub plans: Vec<PlanId>,
    pub metrics: Vec<String>,
    /// `values[i][j]`: metric `j` of plan `i`; `None` for nodes without a plan.
    pub values: Vec<Vec<Option<Decimal>>>,
    /// Best plan per metric, ties going to the lower ID.
    pub best: BTreeMap<String, Option<PlanId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    PlanText(#[from] PlanParseError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error("no initial plan: {0}")]
    NoInitialPlan(String),
    #[error("plan is invalid: {0}")]
    InvalidPlan(Violation),
    #[error("no plan with ID {0}")]
    UnknownPlan(PlanId),
    #[error("plan {0} has no plan to question")]
    EmptyNode(PlanId),
    #[error("step {step} is out of range for plan {plan}")]
    StepOutOfRange { plan: PlanId, step: usize },
    #[error("no metric named `{0}`")]
    UnknownMetric(String),
    #[error("metric `{0}` already exists")]
    DuplicateMetric(String),
    #[error("bad metric: {0}")]
    BadMetric(String),
    #[error(transparent)]
    Contrastive(#[from] ContrastiveError),
    #[error("workspace version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt workspace: {0}")]
    Corrupt(String),
}

/// A workspace together with its grounded task.
#[derive(Debug, Clone)]
pub struct Session {
    workspace: Workspace,
    task: GroundTask,
}

fn ground(domain: &str, problem: &str) -> Result<GroundTask, SessionError> {
    let d = parse_domain(domain)?;
    let p = parse_problem(problem, &d)?;
    Ok(GroundTask::new(&d, &p)?)
}

fn default_metrics(task: &GroundTask) -> Vec<MetricDef> {
    let mut metrics = vec![
        MetricDef { name: "makespan".into(), kind: MetricKind::Makespan, direction: Direction::Minimize },
        MetricDef { name: "step-count".into(), kind: MetricKind::StepCount, direction: Direction::Minimize },
    ];
    if let Some(m) = &task.problem().metric {
        let (word, direction) = match m.direction {
            Optimization::Minimize => ("minimize", Direction::Minimize),
            Optimization::Maximize => ("maximize", Direction::Maximize),
        };
        let expression = format!("{word} {}", print_expr(&m.expr));
        metrics.push(MetricDef { name: "pddl-metric".into(), kind: MetricKind::Pddl { expression }, direction });
    }
    metrics
}

impl Session {
    /// Parses the task and plans from its initial state to get the root plan.
    pub fn new(domain: &str, problem: &str, config: PlannerConfig) -> Result<Self, SessionError> {
        let task = ground(domain, problem)?;
        let plan = match solve(&task, task.initial_state(), &[], &config)? {
            PlanOutcome::Found(p) => p,
            PlanOutcome::Unsolvable => return Err(SessionError::NoInitialPlan("the task is unsolvable".into())),
            PlanOutcome::ResourceLimited => return Err(SessionError::NoInitialPlan("search limit reached".into())),
        };
        Self::rooted(domain, problem, config, task, plan)
    }

    /// Starts from a user-supplied plan, which must be valid.
    pub fn with_plan(
        domain: &str,
        problem: &str,
        config: PlannerConfig,
        plan_text: &str,
    ) -> Result<Self, SessionError> {
        let task = ground(domain, problem)?;
        let plan = parse_plan(plan_text)?;
        Self::rooted(domain, problem, config, task, plan)
    }

    fn rooted(
        domain: &str,
        problem: &str,
        config: PlannerConfig,
        task: GroundTask,
        plan: TimedPlan,
    ) -> Result<Self, SessionError> {
        if let Some(v) = validate(&task, &plan).violation {
            return Err(SessionError::InvalidPlan(v));
        }
        let metrics = default_metrics(&task);
        let mut session = Session {
            workspace: Workspace {
                version: WORKSPACE_VERSION,
                domain: domain.to_string(),
                problem: problem.to_string(),
                config,
                nodes: Vec::new(),
                metrics,
                annotations: Vec::new(),
                current: 1,
            },
            task,
        };
        let root = PlanNode {
            id: 1,
            parent: None,
            plan: Some(plan),
            step: None,
            replaced: None,
            suggested: None,
            strategy: None,
            window: None,
            behavior: None,
            rejoin: None,
            user_step: None,
            reason: None,
            metrics: BTreeMap::new(),
        };
        session.push(root)?;
        Ok(session)
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn task(&self) -> &GroundTask {
        &self.task
    }

    pub fn node(&self, id: PlanId) -> Result<&PlanNode, SessionError> {
        self.workspace.nodes.iter().find(|n| n.id == id).ok_or(SessionError::UnknownPlan(id))
    }

    pub fn current(&self) -> PlanId {
        self.workspace.current
    }

    pub fn set_current(&mut self, id: PlanId) -> Result<(), SessionError> {
        self.node(id)?;
        self.workspace.current = id;
        Ok(())
    }

    /// Planner used by later questions.
    pub fn set_config(&mut self, config: PlannerConfig) -> Result<(), SessionError> {
        config.check()?;
        self.workspace.config = config;
        Ok(())
    }

    fn plan_of(&self, id: PlanId) -> Result<&TimedPlan, SessionError> {
        self.node(id)?.plan.as_ref().ok_or(SessionError::EmptyNode(id))
    }

    /// Actions applicable where step `step` of plan `id` starts, other than that step's own.
    pub fn alternatives(&self, id: PlanId, step: usize) -> Result<Vec<ActionRef>, SessionError> {
        let plan = self.plan_of(id)?;
        let s = plan.steps().get(step).ok_or(SessionError::StepOutOfRange { plan: id, step })?;
        let state = state_at(&self.task, plan, step).map_err(SessionError::InvalidPlan)?;
        let own = self.task.find_action(&s.name, &s.args);
        Ok(applicable_actions(&self.task, &state, own)
            .into_iter()
            .map(|i| {
                let a = self.task.action(i);
                ActionRef { name: a.name.clone(), args: a.args.clone() }
            })
            .collect())
    }

    /// Asks why step `step` of plan `id` was not `suggested`. The answer becomes
    /// a new child of `id`, and the new current plan, even when no plan exists.
    pub fn ask(
        &mut self,
        id: PlanId,
        step: usize,
        suggested: ActionRef,
        strategy: Strategy,
        window: Option<(Decimal, Decimal)>,
    ) -> Result<&PlanNode, SessionError> {
        let plan = self.plan_of(id)?;
        if step >= plan.len() {
            return Err(SessionError::StepOutOfRange { plan: id, step });
        }
        let query = ContrastiveQuery { step, suggested: suggested.clone(), strategy, window };
        let result = explain(&self.task, plan, &query, &self.workspace.config)?;
        let new_id = self.workspace.nodes.iter().map(|n| n.id).max().unwrap_or(0) + 1;
        let node = PlanNode {
            id: new_id,
            parent: Some(id),
            plan: result.plan,
            step: Some(step),
            replaced: Some(result.replaced),
            suggested: Some(suggested),
            strategy: Some(strategy),
            window,
            behavior: Some(result.behavior),
            rejoin: result.rejoin,
            user_step: result.user_step,
            reason: result.reason,
            metrics: BTreeMap::new(),
        };
        self.push(node)?;
        self.workspace.current = new_id;
        self.node(new_id)
    }

    fn push(&mut self, mut node: PlanNode) -> Result<(), SessionError> {
        node.metrics = match &node.plan {
            Some(p) => self.evaluate(p, &self.workspace.metrics)?,
            None => BTreeMap::new(),
        };
        self.workspace.nodes.push(node);
        Ok(())
    }

    /// All metric values of a plan, in definition order.
    pub fn evaluate(&self, plan: &TimedPlan, metrics: &[MetricDef]) -> Result<BTreeMap<String, Decimal>, SessionError> {
        let report = validate(&self.task, plan);
        if let Some(v) = report.violation {
            return Err(SessionError::InvalidPlan(v));
        }
        let final_state = state_at(&self.task, plan, plan.len()).map_err(SessionError::InvalidPlan)?;
        let mut values = BTreeMap::new();
        for m in metrics {
            let v = match &m.kind {
                MetricKind::Makespan => Some(report.makespan),
                MetricKind::StepCount => Some(Decimal::from_int(plan.len() as i64)),
                MetricKind::Pddl { expression } => {
                    let spec = parse_metric(expression, self.task.domain(), self.task.problem())
                        .map_err(|e| SessionError::BadMetric(e.to_string()))?;
                    self.task.eval_in_state(&spec.expr, &final_state, report.makespan)
                }
                MetricKind::WeightedSum { terms } => terms.iter().try_fold(Decimal::ZERO, |acc, t| {
                    let v = values.get(&t.metric)?;
                    Some(acc + t.weight.checked_mul(*v)?)
                }),
            };
            if let Some(v) = v {
                values.insert(m.name.clone(), v);
            }
        }
        Ok(values)
    }

    /// Registers a metric and evaluates it on every existing plan.
    pub fn add_metric(&mut self, def: MetricDef) -> Result<(), SessionError> {
        if self.workspace.metrics.iter().any(|m| m.name == def.name) {
            return Err(SessionError::DuplicateMetric(def.name));
        }
        if def.name.trim().is_empty() {
            return Err(SessionError::BadMetric("empty metric name".into()));
        }
        match &def.kind {
            MetricKind::Pddl { expression } => {
                parse_metric(expression, self.task.domain(), self.task.problem())
                    .map_err(|e| SessionError::BadMetric(e.to_string()))?;
            }
            MetricKind::WeightedSum { terms } => {
                if terms.is_empty() {
                    return Err(SessionError::BadMetric("weighted sum needs at least one term".into()));
                }
                // only earlier metrics may be referenced, so definitions stay acyclic
                if let Some(t) = terms.iter().find(|t| !self.workspace.metrics.iter().any(|m| m.name == t.metric)) {
                    return Err(SessionError::UnknownMetric(t.metric.clone()));
                }
            }
            MetricKind::Makespan | MetricKind::StepCount => {}
        }
        self.workspace.metrics.push(def);
        let metrics = self.workspace.metrics.clone();
        for i in 0..self.workspace.nodes.len() {
            if let Some(p) = &self.workspace.nodes[i].plan {
                let values = self.evaluate(p, &metrics)?;
                self.workspace.nodes[i].metrics = values;
            }
        }
        Ok(())
    }

    /// Metric table over the given plans (all plans if empty) and metrics
    /// (all metrics if empty).
    pub fn compare(&self, ids: &[PlanId], metrics: &[String]) -> Result<Comparison, SessionError> {
        let plans: Vec<PlanId> =
            if ids.is_empty() { self.workspace.nodes.iter().map(|n| n.id).collect() } else { ids.to_vec() };
        let defs: Vec<&MetricDef> = if metrics.is_empty() {
            self.workspace.metrics.iter().collect()
        } else {
            metrics
                .iter()
                .map(|name| {
                    self.workspace
                        .metrics
                        .iter()
                        .find(|m| &m.name == name)
                        .ok_or_else(|| SessionError::UnknownMetric(name.clone()))
                })
                .collect::<Result<_, _>>()?
        };
        let nodes: Vec<&PlanNode> = plans.iter().map(|id| self.node(*id)).collect::<Result<_, _>>()?;
        let values: Vec<Vec<Option<Decimal>>> =
            nodes.iter().map(|n| defs.iter().map(|m| n.metrics.get(&m.name).copied()).collect()).collect();
        let mut best = BTreeMap::new();
        for (j, m) in defs.iter().enumerate() {
            let mut winner: Option<(PlanId, Decimal)> = None;
            for (i, id) in plans.iter().enumerate() {
                let Some(v) = values[i][j] else { continue };
                let better = match winner {
                    None => true,
                    Some((wid, wv)) => match m.direction {
                        Direction::Minimize => v < wv || (v == wv && *id < wid),
                        Direction::Maximize => v > wv || (v == wv && *id < wid),
                    },
                };
                if better {
                    winner = Some((*id, v));
                }
            }
            best.insert(m.name.clone(), winner.map(|(id, _)| id));
        }
        Ok(Comparison { plans, metrics: defs.iter().map(|m| m.name.clone()).collect(), values, best })
    }

    pub fn annotate(&mut self, plan: PlanId, step: Option<usize>, text: &str) -> Result<(), SessionError> {
        if let Some(s) = step {
            let len = self.node(plan)?.plan.as_ref().map_or(0, TimedPlan::len);
            if s >= len {
                return Err(SessionError::StepOutOfRange { plan, step: s });
            }
        } else {
            self.node(plan)?;
        }
        self.workspace.annotations.push(Annotation { plan, step, text: text.to_string() });
        Ok(())
    }

    pub fn save(&self) -> String {
        serde_json::to_string_pretty(&self.workspace).expect("workspace serializes")
    }

    pub fn load(bytes: &[u8]) -> Result<Self, SessionError> {
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| SessionError::Corrupt(e.to_string()))?;
        let found = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| SessionError::Corrupt("missing version".into()))?;
        if found != u64::from(WORKSPACE_VERSION) {
            return Err(SessionError::Version {
                found: found.min(u64::from(u32::MAX)) as u32,
                expected: WORKSPACE_VERSION,
            });
        }
        let workspace: Workspace = serde_json::from_value(value).map_err(|e| SessionError::Corrupt(e.to_string()))?;
        Self::from_workspace(workspace)
    }

    pub fn from_workspace(workspace: Workspace) -> Result<Self, SessionError> {
        let task = ground(&workspace.domain, &workspace.problem)?;
        let ids: Vec<PlanId> = workspace.nodes.iter().map(|n| n.id).collect();
        let root_ok = workspace.nodes.first().is_some_and(|n| n.parent.is_none());
        let parents_ok = workspace.nodes.iter().skip(1).all(|n| n.parent.is_some_and(|p| p < n.id && ids.contains(&p)));
        let ids_ok = ids.windows(2).all(|w| w[0] < w[1]);
        if !root_ok || !parents_ok || !ids_ok || !ids.contains(&workspace.current) {
            return Err(SessionError::Corrupt("inconsistent plan tree".into()));
        }
        Ok(Session { workspace, task })
    }
}
