//! Random room-graph tasks and the query check shared by the property suite
//! and the acceptance run.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::sample::Index;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

use planlens_core::contrastive::{
    explain, weakest_conditions, ActionRef, Behavior, ContrastiveQuery, Strategy as Kind,
};
use planlens_core::decimal::Decimal;
use planlens_core::ground::GroundTask;
use planlens_core::pddl::{parse_domain, parse_problem};
use planlens_core::plan::TimedPlan;
use planlens_core::planner::{search, solve, PlanOutcome, PlannerConfig};
use planlens_core::sim::{applicable_actions, state_at, trajectory, validate};

const INSTANT: &str = "(define (domain rooms) (:requirements :strips :typing)
  (:types room)
  (:predicates (at ?r - room) (door ?a ?b - room))
  (:action move :parameters (?a ?b - room)
    :precondition (and (at ?a) (door ?a ?b))
    :effect (and (at ?b) (not (at ?a)))))";

const DURATIVE: &str = "(define (domain rooms) (:requirements :durative-actions :typing :timed-initial-literals)
  (:types room)
  (:predicates (at ?r - room) (door ?a ?b - room))
  (:functions (dist ?a ?b - room))
  (:durative-action move :parameters (?a ?b - room)
    :duration (= ?duration (dist ?a ?b))
    :condition (and (at start (at ?a)) (over all (door ?a ?b)))
    :effect (and (at start (not (at ?a))) (at end (at ?b)))))";

#[derive(Debug, Clone)]
pub struct Scenario {
    rooms: usize,
    extra_doors: Vec<bool>,
    dists: Vec<i64>,
    late_door: Option<(Index, i64)>,
    durative: bool,
    strategy: usize,
    step: Index,
    alternative: Index,
    window: (i64, i64),
}

pub fn scenario() -> impl Strategy<Value = Scenario> {
    (
        3usize..=4,
        prop::collection::vec(prop::bool::weighted(0.4), 16),
        prop::collection::vec(1i64..5, 16),
        prop::option::of((any::<Index>(), 1i64..8)),
        any::<bool>(),
        0usize..4,
        any::<Index>(),
        any::<Index>(),
        (0i64..6, 1i64..25),
    )
        .prop_map(|(rooms, extra_doors, dists, late_door, durative, strategy, step, alternative, window)| {
            Scenario { rooms, extra_doors, dists, late_door, durative, strategy, step, alternative, window }
        })
}

/// A chain r0 -> r1 -> ... keeps every task solvable; extra doors add choices.
pub fn build(s: &Scenario) -> GroundTask {
    let pairs: Vec<(usize, usize)> =
        (0..s.rooms).flat_map(|a| (0..s.rooms).map(move |b| (a, b))).filter(|(a, b)| a != b).collect();
    let mut doors: Vec<(usize, usize)> =
        pairs.iter().enumerate().filter(|(i, (a, b))| *b == a + 1 || s.extra_doors[*i]).map(|(_, p)| *p).collect();
    let mut init: Vec<String> = vec!["(at r0)".into()];
    let late = s.late_door.as_ref().filter(|_| s.durative).map(|(i, t)| (*i.get(&pairs), *t));
    if let Some((p, _)) = late {
        doors.retain(|d| *d != p);
    }
    for (a, b) in &doors {
        init.push(format!("(door r{a} r{b})"));
    }
    if s.durative {
        for (i, (a, b)) in pairs.iter().enumerate() {
            init.push(format!("(= (dist r{a} r{b}) {})", s.dists[i]));
        }
        if let Some(((a, b), t)) = late {
            init.push(format!("(at {t} (door r{a} r{b}))"));
        }
    }
    let objects: Vec<String> = (0..s.rooms).map(|i| format!("r{i}")).collect();
    let problem = format!(
        "(define (problem p) (:domain rooms) (:objects {} - room) (:init {}) (:goal (at r{})))",
        objects.join(" "),
        init.join(" "),
        s.rooms - 1
    );
    let d = parse_domain(if s.durative { DURATIVE } else { INSTANT }).unwrap();
    GroundTask::new(&d, &parse_problem(&problem, &d).unwrap()).unwrap()
}

/// Runs one query; returns false when the scenario offers no question to ask.
pub fn check(s: &Scenario) -> bool {
    let task = build(s);
    assert!(task.actions().len() <= 12);
    assert_eq!(weakest_conditions(&task, &TimedPlan::default()), task.goal().to_vec());

    let config = PlannerConfig::default();
    let base = match solve(&task, task.initial_state(), &[], &config).unwrap() {
        PlanOutcome::Found(p) => p,
        other => panic!("chain task must be solvable: {other:?}"),
    };
    assert!(validate(&task, &base).valid);
    if base.is_empty() {
        return false;
    }
    let step = s.step.index(base.len());
    let before = state_at(&task, &base, step).unwrap();
    let own = task.find_action(&base.steps()[step].name, &base.steps()[step].args);
    let alts = applicable_actions(&task, &before, own);
    if alts.is_empty() {
        return false;
    }
    let a = task.action(alts[s.alternative.index(alts.len())]);
    let strategy = Kind::ALL[s.strategy];
    let window = (strategy == Kind::TimeWindow)
        .then(|| (Decimal::from_int(s.window.0), Decimal::from_int(s.window.0 + s.window.1)));
    let query = ContrastiveQuery {
        step,
        suggested: ActionRef { name: a.name.clone(), args: a.args.clone() },
        strategy,
        window,
    };
    let r = explain(&task, &base, &query, &config).unwrap();
    assert_eq!(r.behavior == Behavior::NoPlan, r.plan.is_none(), "{s:?}");
    let Some(plan) = &r.plan else { return true };
    assert!(r.validation.as_ref().unwrap().valid, "{s:?}\n{plan}");
    // translated plans and joined plans hold up against the original task
    assert!(validate(&task, plan).valid, "{s:?}\n{plan}");
    let user = &plan.steps()[r.user_step.unwrap()];
    assert_eq!(user.label(), a.label());
    if let Some((lb, ub)) = window {
        assert!(user.start > lb && user.start < ub, "{s:?}\n{plan}");
    }
    if strategy == Kind::AfterAction {
        // the replanned part never passes through the state the question was asked in
        let traj = trajectory(&task, plan).unwrap();
        assert!(
            traj[1..].iter().filter(|h| h.time >= user.end()).all(|h| !h.state.same_situation(&before)),
            "{s:?}\n{plan}"
        );
    }
    true
}

/// Runs `n` askable scenarios from a fixed seed.
pub fn run_queries(n: usize) {
    let mut runner = TestRunner::deterministic();
    let strategy = scenario();
    let mut asked = 0;
    let mut attempts = 0;
    while asked < n {
        attempts += 1;
        assert!(attempts < 20 * n, "too few askable scenarios");
        if check(&strategy.new_tree(&mut runner).unwrap().current()) {
            asked += 1;
        }
    }
}

/// Plans with the state after the first step forbidden; the result must avoid it.
pub fn forbidden_state_avoided(s: &Scenario) -> Result<(), String> {
    let task = build(s);
    let init = task.initial_state().clone();
    let PlanOutcome::Found(first) = search(&task, &init, &[], 10_000) else { return Ok(()) };
    if first.is_empty() {
        return Ok(());
    }
    let forbidden = state_at(&task, &first, 1).unwrap();
    if let PlanOutcome::Found(p) = search(&task, &init, std::slice::from_ref(&forbidden), 10_000) {
        if !validate(&task, &p).valid {
            return Err(format!("invalid plan\n{p}"));
        }
        let traj = trajectory(&task, &p).unwrap();
        if traj[1..].iter().any(|h| h.state.same_situation(&forbidden)) {
            return Err(format!("forbidden state visited\n{p}"));
        }
    }
    Ok(())
}

/// `forbidden_state_avoided` over `n` scenarios from a fixed seed.
pub fn run_forbidden(n: usize) -> Result<(), String> {
    let mut runner = TestRunner::deterministic();
    let strategy = scenario();
    for _ in 0..n {
        forbidden_state_avoided(&strategy.new_tree(&mut runner).unwrap().current())?;
    }
    Ok(())
}
