//! Answers "why action A rather than B?" by generating a plan that uses B,
//! with one of four strategies, and classifying how that plan behaves.

mod behavior;
mod compile;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decimal::{Decimal, EPSILON};
use crate::ground::{Fact, GroundError, GroundTask, State};
use crate::plan::{PlanStep, TimedPlan};
use crate::planner::{compress, solve, PlanOutcome, PlannerConfig};
use crate::sim::{advance, applicable_actions, simulate, state_at, validate, ValidationReport, Violation};

pub use behavior::{classify_behavior, classify_trajectories, Behavior, Rejoin};
pub use compile::{compile_force_action, compile_time_window, CompiledTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Plan from the initial state with the suggested action forced in.
    FromInitial,
    /// As `FromInitial`, with the action's start restricted to a window.
    TimeWindow,
    /// Keep the plan up to the selected step, apply the action, replan.
    AfterAction,
    /// Plan to the action and from the action separately, then join.
    Segments,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::FromInitial, Strategy::TimeWindow, Strategy::AfterAction, Strategy::Segments];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::FromInitial => "from-initial",
            Strategy::TimeWindow => "time-window",
            Strategy::AfterAction => "after-action",
            Strategy::Segments => "segments",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            format!("unknown strategy `{s}` (expected from-initial, time-window, after-action or segments)")
        })
    }
}

/// A ground action named by operator and arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionRef {
    pub name: String,
    pub args: Vec<String>,
}

impl ActionRef {
    pub fn new(name: &str, args: &[&str]) -> Self {
        ActionRef { name: name.to_string(), args: args.iter().map(|a| a.to_string()).collect() }
    }

    /// Parses `(name a b)` or `name a b`.
    pub fn parse(text: &str) -> Option<Self> {
        let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
        let mut words = inner.split_whitespace().map(str::to_lowercase);
        let name = words.next()?;
        Some(ActionRef { name, args: words.collect() })
    }
}

impl fmt::Display for ActionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastiveQuery {
    /// Index of the questioned step in the base plan.
    pub step: usize,
    pub suggested: ActionRef,
    pub strategy: Strategy,
    /// `(LB, UB)`; required for, and only for, the time-window strategy.
    pub window: Option<(Decimal, Decimal)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastiveResult {
    pub strategy: Strategy,
    pub replaced: ActionRef,
    pub suggested: ActionRef,
    /// The new plan in the original task's vocabulary; absent for (d).
    pub plan: Option<TimedPlan>,
    /// The plan as found on the compiled task, for the from-initial strategies.
    pub compiled_plan: Option<TimedPlan>,
    /// Index of the suggested action within `plan`.
    pub user_step: Option<usize>,
    pub behavior: Behavior,
    pub rejoin: Option<Rejoin>,
    /// Validation against the task the strategy plans on.
    pub validation: Option<ValidationReport>,
    /// Why there is no plan, for (d).
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContrastiveError {
    #[error("base plan is invalid: {0}")]
    BasePlanInvalid(Violation),
    #[error("step {step} is out of range for a plan of {len} steps")]
    StepOutOfRange { step: usize, len: usize },
    #[error("unknown ground action {0}")]
    UnknownAction(String),
    #[error("{action} is not applicable here: {reason}")]
    NotApplicable { action: String, reason: String },
    #[error("bad time window: {0}")]
    BadWindow(String),
    #[error("no free name for `{0}`")]
    NameCollision(String),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("generated plan failed re-checking: {0}")]
    Inconsistent(Violation),
}

/// Runs a query against base plan `plan`.
pub fn explain(
    task: &GroundTask,
    plan: &TimedPlan,
    query: &ContrastiveQuery,
    config: &PlannerConfig,
) -> Result<ContrastiveResult, ContrastiveError> {
    let base = validate(task, plan);
    if let Some(v) = base.violation {
        return Err(ContrastiveError::BasePlanInvalid(v));
    }
    if query.step >= plan.len() {
        return Err(ContrastiveError::StepOutOfRange { step: query.step, len: plan.len() });
    }
    match (query.strategy, query.window) {
        (Strategy::TimeWindow, None) => {
            return Err(ContrastiveError::BadWindow("time-window strategy needs a window".into()))
        }
        (Strategy::TimeWindow, Some(_)) | (_, None) => {}
        (s, Some(_)) => return Err(ContrastiveError::BadWindow(format!("{s} does not take a window"))),
    }
    let replaced_step = &plan.steps()[query.step];
    let replaced = ActionRef { name: replaced_step.name.clone(), args: replaced_step.args.clone() };
    let suggested = task
        .find_action(&query.suggested.name, &query.suggested.args)
        .ok_or_else(|| ContrastiveError::UnknownAction(query.suggested.to_string()))?;
    let replaced_idx = task.find_action(&replaced.name, &replaced.args);
    let before = state_at(task, plan, query.step).map_err(ContrastiveError::BasePlanInvalid)?;
    if !applicable_actions(task, &before, replaced_idx).contains(&suggested) {
        return Err(ContrastiveError::NotApplicable {
            action: query.suggested.to_string(),
            reason: format!("conditions do not hold before step {}, or it is the replaced action", query.step),
        });
    }

    let ctx = Context { task, plan, step: query.step, suggested, before, config };
    let outcome = match query.strategy {
        Strategy::FromInitial | Strategy::TimeWindow => ctx.forced(query.window)?,
        Strategy::AfterAction => ctx.after_action()?,
        Strategy::Segments => ctx.segments()?,
    };
    let (behavior, rejoin) = match (&outcome.plan, outcome.user_step) {
        (Some(p), Some(u)) => {
            classify_behavior(task, plan, Some(p), u, &ctx.before).map_err(ContrastiveError::Inconsistent)?
        }
        _ => (Behavior::NoPlan, None),
    };
    Ok(ContrastiveResult {
        strategy: query.strategy,
        replaced,
        suggested: query.suggested.clone(),
        plan: outcome.plan,
        compiled_plan: outcome.compiled_plan,
        user_step: outcome.user_step,
        behavior,
        rejoin,
        validation: outcome.validation,
        reason: outcome.reason,
    })
}

/// Facts a plan needs but does not produce itself: every condition of a step
/// not added by an earlier step (and not deleted since), plus every goal the
/// plan leaves unsupported. Steps are taken whole, in start order.
pub fn weakest_conditions(task: &GroundTask, later: &TimedPlan) -> Vec<Fact> {
    let mut supported = task.empty_facts();
    let mut needed = BTreeSet::new();
    for step in later.steps() {
        let Some(i) = task.find_action(&step.name, &step.args) else {
            continue;
        };
        let a = task.action(i);
        needed.extend(a.conditions().filter(|f| !supported.contains(*f)));
        for f in &a.del_start {
            supported.remove(*f);
        }
        for f in &a.add_start {
            supported.insert(*f);
        }
        for f in &a.del_end {
            supported.remove(*f);
        }
        for f in &a.add_end {
            supported.insert(*f);
        }
    }
    needed.extend(task.goal().iter().filter(|g| !supported.contains(**g)));
    needed.into_iter().collect()
}

struct Context<'a> {
    task: &'a GroundTask,
    plan: &'a TimedPlan,
    step: usize,
    suggested: usize,
    before: State,
    config: &'a PlannerConfig,
}

#[derive(Default)]
struct Outcome {
    plan: Option<TimedPlan>,
    compiled_plan: Option<TimedPlan>,
    user_step: Option<usize>,
    validation: Option<ValidationReport>,
    reason: Option<String>,
}

impl Outcome {
    fn none(reason: impl Into<String>) -> Self {
        Outcome { reason: Some(reason.into()), ..Outcome::default() }
    }
}

/// The plan, or why there is none.
fn no_plan_reason(what: &str, outcome: Result<PlanOutcome, crate::planner::PlannerError>) -> Result<TimedPlan, String> {
    match outcome {
        Ok(PlanOutcome::Found(p)) => Ok(p),
        Ok(PlanOutcome::Unsolvable) => Err(format!("{what}: no plan exists")),
        Ok(PlanOutcome::ResourceLimited) => Err(format!("{what}: search limit reached")),
        Err(e) => Err(format!("{what}: {e}")),
    }
}

impl Context<'_> {
    fn suggested_step(&self, start: Decimal) -> PlanStep {
        let a = self.task.action(self.suggested);
        PlanStep { start, name: a.name.clone(), args: a.args.clone(), duration: a.duration }
    }

    fn forced(&self, window: Option<(Decimal, Decimal)>) -> Result<Outcome, ContrastiveError> {
        let action = self.task.action(self.suggested);
        let compiled = match window {
            Some((lb, ub)) => compile_time_window(self.task, action, lb, ub)?,
            None => compile_force_action(self.task, action)?,
        };
        let found = solve(&compiled.task, compiled.task.initial_state(), &[], self.config);
        let cplan = match no_plan_reason("forced-action task", found) {
            Ok(p) => p,
            Err(why) => return Ok(Outcome::none(why)),
        };
        let user_step = cplan.steps().iter().position(|s| compiled.is_user_step(&s.name, &s.args));
        let translated = TimedPlan::new(
            cplan
                .steps()
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    if s.name == compiled.user_operator {
                        s.name = compiled.operator.clone();
                    }
                    s
                })
                .collect(),
        );
        Ok(Outcome {
            validation: Some(validate(&compiled.task, &cplan)),
            plan: Some(translated),
            compiled_plan: Some(cplan),
            user_step,
            reason: None,
        })
    }

    /// The base plan's steps before the selected one plus the suggested
    /// action in its place, run to completion. Returns the resulting state,
    /// ready for the next step to start.
    fn completed_with_suggestion(&self) -> Result<(TimedPlan, State), ContrastiveError> {
        let start = self.plan.steps()[self.step].start;
        let head = self.plan.prefix(self.step).concat(&TimedPlan::new(vec![self.suggested_step(start)]));
        let sim = simulate(self.task, self.task.initial_state(), &head, None);
        if let Some(v) = sim.violation {
            return Err(ContrastiveError::NotApplicable {
                action: self.task.action(self.suggested).label(),
                reason: v.to_string(),
            });
        }
        let end = head.makespan();
        let ready = if head.steps().iter().any(|s| s.duration == Decimal::ZERO && s.end() == end) {
            end + EPSILON
        } else {
            end
        };
        let state = advance(self.task, &sim.state.at_time(end), ready);
        Ok((head, state))
    }

    fn after_action(&self) -> Result<Outcome, ContrastiveError> {
        let (head, after) = self.completed_with_suggestion()?;
        let found = solve(self.task, &after, std::slice::from_ref(&self.before), self.config);
        let suffix = match no_plan_reason("after the suggested action", found) {
            Ok(p) => p,
            Err(why) => return Ok(Outcome::none(why)),
        };
        let plan = head.concat(&suffix);
        Ok(self.checked(plan, self.step))
    }

    fn segments(&self) -> Result<Outcome, ContrastiveError> {
        let (_, after) = self.completed_with_suggestion()?;
        let found = solve(self.task, &after, &[], self.config);
        let later = match no_plan_reason("later plan", found) {
            Ok(p) => p,
            Err(why) => return Ok(Outcome::none(why)),
        };
        let with_action = TimedPlan::new(vec![self.suggested_step(after.time)]).concat(&later);
        let goal = weakest_conditions(self.task, &with_action);
        let initial_task = self.task.with_goal(goal);
        let found = solve(&initial_task, self.task.initial_state(), &[], self.config);
        let initial = match no_plan_reason("initial plan", found) {
            Ok(p) => p,
            Err(why) => return Ok(Outcome::none(why)),
        };

        let init_time = self.task.initial_state().time;
        let m = initial.makespan().max(init_time);
        let at =
            if initial.steps().iter().any(|s| s.duration == Decimal::ZERO && s.end() == m) { m + EPSILON } else { m };
        let action = self.suggested_step(at);
        let later_start = action.end() + EPSILON;
        let joined =
            initial.concat(&TimedPlan::new(vec![action.clone()])).concat(&later.shifted(later_start - after.time));
        let rank = joined.steps()[..initial.len()].iter().filter(|s| s.label() == action.label()).count();
        let plan = compress(self.task, self.task.initial_state(), &joined);
        let user_step = plan
            .steps()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label() == action.label())
            .nth(rank)
            .map(|(i, _)| i)
            .unwrap_or(initial.len());
        Ok(self.checked(plan, user_step))
    }

    /// Accepts a joined plan only if it validates against the original task.
    fn checked(&self, plan: TimedPlan, user_step: usize) -> Outcome {
        let report = validate(self.task, &plan);
        match &report.violation {
            None => {
                Outcome { plan: Some(plan), user_step: Some(user_step), validation: Some(report), ..Outcome::default() }
            }
            Some(v) => Outcome {
                validation: Some(report.clone()),
                reason: Some(format!("joined plan is invalid: {v}")),
                ..Outcome::default()
            },
        }
    }
}
