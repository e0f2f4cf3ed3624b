//! Event-queue simulation of timed plans.
//!
//! Events sharing a timestamp are processed in a fixed order: end events
//! (at-end conditions checked, then effects applied), timed initial literals,
//! start events (at-start conditions checked against the state before any
//! start at that time, then effects applied), then over-all conditions of every
//! running action. Simultaneous events of the same class that interfere, and a
//! start that touches a fact changed by a literal at the same instant, are
//! violations. Times are fixed-point thousandths, so distinct timestamps are
//! always at least `EPSILON` apart.

use serde::{Deserialize, Serialize};

use crate::decimal::{Decimal, EPSILON};
use crate::ground::{Fact, GroundAction, GroundTask, GroundTil, NumericUpdate, State};
use crate::pddl::NumericOp;
use crate::plan::TimedPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    UnknownAction,
    DurationMismatch,
    StartCondition,
    OverAllCondition,
    EndCondition,
    Interference,
    UndefinedFluent,
    GoalNotSatisfied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub time: Decimal,
    /// Index of the offending plan step, if one is responsible.
    pub step: Option<usize>,
    pub action: Option<String>,
    pub kind: ViolationKind,
    /// The failed condition, unmet goals, or other specifics.
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} at {}", self.kind, self.time)?;
        if let Some(a) = &self.action {
            write!(f, " in {a}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violation: Option<Violation>,
    pub makespan: Decimal,
    /// Value of the problem's `:metric`, when it has one and the plan is valid.
    pub metric: Option<Decimal>,
}

/// State after all events at `time` were processed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Happening {
    pub time: Decimal,
    pub state: State,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub state: State,
    pub violation: Option<Violation>,
    pub happenings: Vec<Happening>,
}

/// Validates a plan from the task's initial state.
pub fn validate(task: &GroundTask, plan: &TimedPlan) -> ValidationReport {
    validate_from(task, task.initial_state(), plan)
}

/// Validates a plan executed from `from`, whose literals up to `from.time`
/// are taken as already applied.
pub fn validate_from(task: &GroundTask, from: &State, plan: &TimedPlan) -> ValidationReport {
    let sim = simulate(task, from, plan, None);
    let makespan = plan.makespan().max(from.time);
    let violation = sim.violation.or_else(|| {
        let missing: Vec<String> =
            task.goal().iter().filter(|g| !sim.state.facts.contains(**g)).map(|g| task.fact(*g).to_string()).collect();
        (!missing.is_empty()).then(|| Violation {
            time: makespan,
            step: None,
            action: None,
            kind: ViolationKind::GoalNotSatisfied,
            detail: missing.join(" "),
        })
    });
    let valid = violation.is_none();
    ValidationReport {
        valid,
        violation,
        makespan,
        metric: if valid { task.metric_value(&sim.state, makespan) } else { None },
    }
}

/// State in which the step at `point` has its start conditions checked:
/// every event before its start time, plus end events and literals at that
/// time. `point` past the last step yields the final state.
pub fn state_at(task: &GroundTask, plan: &TimedPlan, point: usize) -> Result<State, Violation> {
    let stop = (point < plan.len()).then_some(point);
    let sim = simulate(task, task.initial_state(), plan, stop);
    match sim.violation {
        Some(v) => Err(v),
        None => Ok(sim.state),
    }
}

/// Initial state followed by the state after every happening.
pub fn trajectory(task: &GroundTask, plan: &TimedPlan) -> Result<Vec<Happening>, Violation> {
    let sim = simulate(task, task.initial_state(), plan, None);
    match sim.violation {
        Some(v) => Err(v),
        None => Ok(sim.happenings),
    }
}

/// Ground actions whose at-start and over-all conditions hold in `state`,
/// minus `exclude`, in lexicographic order of name then arguments.
pub fn applicable_actions(task: &GroundTask, state: &State, exclude: Option<usize>) -> Vec<usize> {
    (0..task.actions().len())
        .filter(|i| Some(*i) != exclude)
        .filter(|i| {
            let a = task.action(*i);
            state.facts.contains_all(&a.cond_start) && state.facts.contains_all(&a.cond_overall)
        })
        .collect()
}

/// Moves `state` forward to `to`, applying the literals in between.
pub fn advance(task: &GroundTask, state: &State, to: Decimal) -> State {
    let mut next = state.clone();
    for l in task.timed_literals().iter().filter(|l| l.time > state.time && l.time <= to) {
        if l.positive {
            next.facts.insert(l.fact);
        } else {
            next.facts.remove(l.fact);
        }
    }
    next.time = next.time.max(to);
    next
}

struct Resolved<'t> {
    index: usize,
    action: &'t GroundAction,
    start: Decimal,
    end: Decimal,
}

/// Runs the plan from `from`. With `stop = Some(k)` the run halts right before
/// the start events at step `k`'s start time. Literals after the plan's
/// makespan are not applied.
pub fn simulate(task: &GroundTask, from: &State, plan: &TimedPlan, stop: Option<usize>) -> Simulation {
    let mut state = from.clone();
    let mut happenings = vec![Happening { time: from.time, state: state.clone() }];
    let fail =
        |state: State, happenings: Vec<Happening>, v: Violation| Simulation { state, violation: Some(v), happenings };

    let mut steps = Vec::with_capacity(plan.len());
    for (index, step) in plan.steps().iter().enumerate() {
        let violation = |kind, detail: String| Violation {
            time: step.start,
            step: Some(index),
            action: Some(step.label()),
            kind,
            detail,
        };
        let Some(ai) = task.find_action(&step.name, &step.args) else {
            return fail(state, happenings, violation(ViolationKind::UnknownAction, "no such ground action".into()));
        };
        let action = task.action(ai);
        if action.duration.abs_diff(step.duration) > EPSILON {
            return fail(
                state,
                happenings,
                violation(
                    ViolationKind::DurationMismatch,
                    format!("plan says {}, domain says {}", step.duration, action.duration),
                ),
            );
        }
        if step.start < from.time {
            return fail(
                state,
                happenings,
                violation(ViolationKind::StartCondition, format!("starts before {}", from.time)),
            );
        }
        steps.push(Resolved { index, action, start: step.start, end: step.start + action.duration });
    }

    let stop_time = stop.map(|k| steps[k].start);
    let horizon = stop_time.unwrap_or_else(|| plan.makespan());
    let tils: Vec<&GroundTil> =
        task.timed_literals().iter().filter(|t| t.time > from.time && t.time <= horizon).collect();

    let mut times: Vec<Decimal> =
        steps.iter().flat_map(|s| [s.start, s.end]).chain(tils.iter().map(|t| t.time)).collect();
    times.sort();
    times.dedup();

    for t in times {
        // end events
        let ending: Vec<&Resolved> = steps.iter().filter(|s| s.end == t && s.end > s.start).collect();
        for s in &ending {
            if let Some(f) = missing(&state, &s.action.cond_end) {
                return fail(state, happenings, step_violation(task, s, t, ViolationKind::EndCondition, f));
            }
        }
        if let Some((s, f)) =
            pairwise_interference(&ending, end_effects, |a| a.cond_end.to_vec(), |a| (&a.add_end, &a.del_end))
        {
            return fail(state, happenings, interference(task, s, t, f));
        }
        for s in &ending {
            apply(&mut state, &s.action.del_end, &s.action.add_end);
        }
        for s in &ending {
            if let Err(v) = apply_numeric(task, &mut state, &s.action.num_end) {
                return fail(state, happenings, step_violation_text(s, t, ViolationKind::UndefinedFluent, v));
            }
        }

        // timed initial literals
        let now_tils: Vec<&&GroundTil> = tils.iter().filter(|l| l.time == t).collect();
        for l in &now_tils {
            if l.positive {
                state.facts.insert(l.fact);
            } else {
                state.facts.remove(l.fact);
            }
        }
        state.time = t;

        if stop_time == Some(t) {
            return Simulation { state, violation: None, happenings };
        }

        // start events
        let starting: Vec<&Resolved> = steps.iter().filter(|s| s.start == t).collect();
        for s in &starting {
            if let Some(f) = missing(&state, &s.action.cond_start) {
                return fail(state, happenings, step_violation(task, s, t, ViolationKind::StartCondition, f));
            }
            let touched = start_effects(s.action)
                .chain(s.action.cond_start.iter().copied())
                .chain(s.action.cond_overall.iter().copied());
            for f in touched {
                if now_tils.iter().any(|l| l.fact == f) {
                    return fail(state, happenings, interference(task, s, t, f));
                }
            }
        }
        if let Some((s, f)) = pairwise_interference(
            &starting,
            start_effects,
            |a| a.cond_start.iter().chain(&a.cond_overall).copied().collect(),
            |a| (&a.add_start, &a.del_start),
        ) {
            return fail(state, happenings, interference(task, s, t, f));
        }
        if let Some(s) = numeric_clash(&starting) {
            return fail(
                state,
                happenings,
                step_violation_text(
                    s,
                    t,
                    ViolationKind::Interference,
                    "simultaneous assignment to the same fluent".into(),
                ),
            );
        }
        for s in &starting {
            apply(&mut state, &s.action.del_start, &s.action.add_start);
        }
        for s in &starting {
            if let Err(v) = apply_numeric(task, &mut state, &s.action.num_start) {
                return fail(state, happenings, step_violation_text(s, t, ViolationKind::UndefinedFluent, v));
            }
        }

        // invariants of running actions
        for s in steps.iter().filter(|s| s.start <= t && t < s.end) {
            if let Some(f) = missing(&state, &s.action.cond_overall) {
                return fail(state, happenings, step_violation(task, s, t, ViolationKind::OverAllCondition, f));
            }
        }
        happenings.push(Happening { time: t, state: state.clone() });
    }

    if let Some(t) = stop_time {
        // stop step with no events at its own start time cannot occur: its
        // start is always an event time
        state.time = t;
    }
    Simulation { state, violation: None, happenings }
}

fn missing(state: &State, conds: &[Fact]) -> Option<Fact> {
    conds.iter().copied().find(|f| !state.facts.contains(*f))
}

fn start_effects(a: &GroundAction) -> impl Iterator<Item = Fact> + '_ {
    a.add_start.iter().chain(&a.del_start).copied()
}

fn end_effects(a: &GroundAction) -> impl Iterator<Item = Fact> + '_ {
    a.add_end.iter().chain(&a.del_end).copied()
}

/// First pair (i, j), i != j, where i's effects touch j's conditions or i adds
/// what j deletes.
fn pairwise_interference<'a, 'r, E>(
    group: &[&'r Resolved<'a>],
    effects: impl Fn(&'a GroundAction) -> E,
    conditions: impl Fn(&'a GroundAction) -> Vec<Fact>,
    add_del: impl Fn(&'a GroundAction) -> (&'a Vec<Fact>, &'a Vec<Fact>),
) -> Option<(&'r Resolved<'a>, Fact)>
where
    E: Iterator<Item = Fact>,
{
    for (i, a) in group.iter().enumerate() {
        for (j, b) in group.iter().enumerate() {
            if i == j {
                continue;
            }
            let conds_b = conditions(b.action);
            if let Some(f) = effects(a.action).find(|f| conds_b.contains(f)) {
                return Some((b, f));
            }
            let (add_a, _) = add_del(a.action);
            let (_, del_b) = add_del(b.action);
            if let Some(f) = add_a.iter().find(|f| del_b.contains(f)) {
                return Some((b, *f));
            }
        }
    }
    None
}

fn numeric_clash<'r, 'a>(group: &[&'r Resolved<'a>]) -> Option<&'r Resolved<'a>> {
    for (i, a) in group.iter().enumerate() {
        for b in &group[i + 1..] {
            let clash = a.action.num_start.iter().any(|x| {
                b.action
                    .num_start
                    .iter()
                    .any(|y| x.fluent == y.fluent && (x.op == NumericOp::Assign || y.op == NumericOp::Assign))
            });
            if clash {
                return Some(b);
            }
        }
    }
    None
}

fn apply(state: &mut State, del: &[Fact], add: &[Fact]) {
    for f in del {
        state.facts.remove(*f);
    }
    for f in add {
        state.facts.insert(*f);
    }
}

fn apply_numeric(task: &GroundTask, state: &mut State, updates: &[NumericUpdate]) -> Result<(), String> {
    for u in updates {
        let slot = &mut state.fluents[u.fluent.0 as usize];
        *slot = Some(match (u.op, *slot) {
            (NumericOp::Assign, _) => u.value,
            (NumericOp::Increase, Some(v)) => v + u.value,
            (NumericOp::Decrease, Some(v)) => v - u.value,
            (_, None) => {
                let (f, args) = task.fluent(u.fluent);
                return Err(format!("({f}{}) has no value", args.iter().map(|a| format!(" {a}")).collect::<String>()));
            }
        });
    }
    Ok(())
}

fn step_violation(task: &GroundTask, s: &Resolved, t: Decimal, kind: ViolationKind, f: Fact) -> Violation {
    step_violation_text(s, t, kind, task.fact(f).to_string())
}

fn step_violation_text(s: &Resolved, t: Decimal, kind: ViolationKind, detail: String) -> Violation {
    Violation { time: t, step: Some(s.index), action: Some(s.action.label()), kind, detail }
}

fn interference(task: &GroundTask, s: &Resolved, t: Decimal, f: Fact) -> Violation {
    step_violation_text(s, t, ViolationKind::Interference, format!("simultaneous events both touch {}", task.fact(f)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem};
    use crate::plan::parse_plan;

    fn task(domain: &str, problem: &str) -> GroundTask {
        let d = parse_domain(domain).unwrap();
        let p = parse_problem(problem, &d).unwrap();
        GroundTask::new(&d, &p).unwrap()
    }

    const SWITCH: &str = "(define (domain sw) (:requirements :durative-actions)
        (:predicates (on) (off) (window) (done))
        (:durative-action turn-on :parameters () :duration (= ?duration 2)
          :condition (and (at start (off)) (at start (window)))
          :effect (and (at start (not (off))) (at end (on))))
        (:durative-action finish :parameters () :duration (= ?duration 1)
          :condition (and (over all (on)) (at end (on)))
          :effect (and (at end (done))))
        (:durative-action turn-off :parameters () :duration (= ?duration 1)
          :condition (and (at start (on)))
          :effect (and (at start (not (on))) (at end (off)))))";

    fn switch_task() -> GroundTask {
        task(
            SWITCH,
            "(define (problem p) (:domain sw)
               (:init (off) (at 1 (window)) (at 5 (not (window))))
               (:goal (done)))",
        )
    }

    #[test]
    fn back_to_back_chain_is_valid() {
        let t = switch_task();
        let r = validate(&t, &parse_plan("1.001: (turn-on) [2]\n3.001: (finish) [1]").unwrap());
        assert!(r.valid, "{r:?}");
        assert_eq!(r.makespan, Decimal::from_millis(4001));
    }

    #[test]
    fn start_at_the_literal_instant_interferes() {
        let t = switch_task();
        let r = validate(&t, &parse_plan("1: (turn-on) [2]\n3: (finish) [1]").unwrap());
        assert_eq!(r.violation.unwrap().kind, ViolationKind::Interference);
        let r = validate(&t, &parse_plan("5: (turn-on) [2]\n7: (finish) [1]").unwrap());
        assert_eq!(r.violation.unwrap().kind, ViolationKind::StartCondition);
    }

    #[test]
    fn over_all_violation_detected() {
        let t = switch_task();
        let r = validate(&t, &parse_plan("2: (turn-on) [2]\n4: (finish) [1]\n4.5: (turn-off) [1]").unwrap());
        let v = r.violation.unwrap();
        assert_eq!(v.kind, ViolationKind::OverAllCondition);
        assert_eq!(v.detail, "(on)");
    }

    #[test]
    fn duration_mismatch_and_unknown_action() {
        let t = switch_task();
        let r = validate(&t, &parse_plan("2: (turn-on) [3]").unwrap());
        assert_eq!(r.violation.unwrap().kind, ViolationKind::DurationMismatch);
        let r = validate(&t, &parse_plan("2: (turn-on) [2.001]").unwrap());
        assert_ne!(r.violation.map(|v| v.kind), Some(ViolationKind::DurationMismatch));
        let r = validate(&t, &parse_plan("2: (explode) [1]").unwrap());
        assert_eq!(r.violation.unwrap().kind, ViolationKind::UnknownAction);
    }

    #[test]
    fn goal_failure_lists_missing_goals() {
        let t = switch_task();
        let r = validate(&t, &parse_plan("2: (turn-on) [2]").unwrap());
        let v = r.violation.unwrap();
        assert_eq!(v.kind, ViolationKind::GoalNotSatisfied);
        assert_eq!(v.detail, "(done)");
        assert_eq!(r.makespan, Decimal::from_int(4));
    }

    #[test]
    fn simultaneous_starts_that_interfere_are_rejected() {
        let t = task(
            "(define (domain m) (:predicates (free) (a) (b))
               (:action take-a :parameters () :precondition (free) :effect (and (a) (not (free))))
               (:action take-b :parameters () :precondition (free) :effect (and (b) (not (free)))))",
            "(define (problem p) (:domain m) (:init (free)) (:goal (and (a))))",
        );
        let r = validate(&t, &parse_plan("0: (take-a)\n0: (take-b)").unwrap());
        assert_eq!(r.violation.unwrap().kind, ViolationKind::Interference);
        let r = validate(&t, &parse_plan("0: (take-a)").unwrap());
        assert!(r.valid);
    }

    #[test]
    fn numeric_effects_and_metric() {
        let t = task(
            "(define (domain c) (:predicates (x)) (:functions (cost))
               (:durative-action act :parameters () :duration (= ?duration 3)
                 :condition () :effect (and (at end (x)) (at end (increase (cost) (* 2 ?duration))))))",
            "(define (problem p) (:domain c) (:init (= (cost) 1)) (:goal (x))
               (:metric minimize (+ (cost) (total-time))))",
        );
        let r = validate(&t, &parse_plan("0: (act) [3]").unwrap());
        assert!(r.valid);
        assert_eq!(r.metric, Some(Decimal::from_int(10)));
    }

    #[test]
    fn state_at_zero_is_initial_state() {
        let t = switch_task();
        let plan = parse_plan("1.001: (turn-on) [2]\n3.001: (finish) [1]").unwrap();
        let s = state_at(&t, &plan, 0).unwrap();
        // the literal at 1 has fired by the first step's start
        assert!(s.facts.contains(t.fact_id(&crate::pddl::GroundAtom::new("window", &[])).unwrap()));
        let s1 = state_at(&t, &plan, 1).unwrap();
        assert_eq!(s1.time, Decimal::from_millis(3001));
        assert!(s1.facts.contains(t.fact_id(&crate::pddl::GroundAtom::new("on", &[])).unwrap()));
    }
}
