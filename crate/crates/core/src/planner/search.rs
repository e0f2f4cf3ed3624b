//! Greedy best-first search over a serial execution model: each action runs
//! to completion before the next one starts. Timed literals are honoured by
//! simulating every step, and by wait moves that jump to the next literal.
//! Nodes are ordered by the additive delete-relaxation estimate, then by plan
//! length, then by generation order (lexicographic action order).

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use super::PlanOutcome;
use crate::decimal::{Decimal, EPSILON};
use crate::ground::{Fact, FactSet, GroundAction, GroundTask, State};
use crate::plan::{PlanStep, TimedPlan};
use crate::sim::{advance, simulate};

const UNREACHABLE: u64 = u64::MAX;

struct Node {
    state: State,
    /// Earliest start of the next step.
    next_start: Decimal,
    parent: Option<usize>,
    step: Option<PlanStep>,
    depth: usize,
}

pub fn search(task: &GroundTask, from: &State, forbidden: &[State], node_cap: usize) -> PlanOutcome {
    let relax = Relaxation::new(task);
    let root = Node { state: from.clone(), next_start: from.time, parent: None, step: None, depth: 0 };
    if task.goal_satisfied(&root.state) {
        return PlanOutcome::Found(TimedPlan::default());
    }
    let Some(h0) = relax.estimate(task, &root.state) else {
        return PlanOutcome::Unsolvable;
    };

    let mut nodes = vec![root];
    let mut seen = HashSet::new();
    seen.insert(key(task, &nodes[0].state));
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    open.push(Reverse((h0, 0usize, seq, 0usize)));
    let mut expanded = 0usize;

    while let Some(Reverse((_, _, _, id))) = open.pop() {
        expanded += 1;
        if expanded > node_cap {
            return PlanOutcome::ResourceLimited;
        }
        for (succ, by_action) in successors(task, &nodes[id], id) {
            if forbidden.iter().any(|f| f.same_situation(&succ.state)) {
                continue;
            }
            if !seen.insert(key(task, &succ.state)) {
                continue;
            }
            if by_action && task.goal_satisfied(&succ.state) {
                nodes.push(succ);
                return PlanOutcome::Found(extract(&nodes, nodes.len() - 1));
            }
            let Some(h) = relax.estimate(task, &succ.state) else {
                continue;
            };
            seq += 1;
            open.push(Reverse((h, succ.depth, seq, nodes.len())));
            nodes.push(succ);
        }
    }
    PlanOutcome::Unsolvable
}

/// Situation plus the number of literals still to come.
fn key(task: &GroundTask, state: &State) -> (FactSet, Vec<Option<Decimal>>, usize) {
    let pending = task.timed_literals().partition_point(|t| t.time <= state.time);
    (state.facts.clone(), state.fluents.clone(), pending)
}

fn successors(task: &GroundTask, node: &Node, id: usize) -> Vec<(Node, bool)> {
    let mut out = Vec::new();
    for (i, a) in task.actions().iter().enumerate() {
        if !node.state.facts.contains_all(&a.cond_start) || !node.state.facts.contains_all(&a.cond_overall) {
            continue;
        }
        let mut start = node.next_start;
        if literal_clash(task, a, start) {
            start = start + EPSILON;
        }
        let step = PlanStep { start, name: a.name.clone(), args: a.args.clone(), duration: a.duration };
        let sim = simulate(task, &node.state, &TimedPlan::new(vec![step.clone()]), None);
        if sim.violation.is_some() {
            continue;
        }
        let end = step.end();
        let mut state = sim.state;
        state.time = end;
        let next_start = if task.action(i).is_instantaneous() { end + EPSILON } else { end };
        out.push((Node { state, next_start, parent: Some(id), step: Some(step), depth: node.depth + 1 }, true));
    }
    if let Some(til) = task.timed_literals().iter().find(|t| t.time > node.state.time) {
        let at = til.time;
        let state = advance(task, &node.state, at);
        out.push((
            Node { state, next_start: node.next_start.max(at), parent: Some(id), step: None, depth: node.depth },
            false,
        ));
    }
    out
}

/// Whether a literal at `time` touches what the action needs or changes at its start.
fn literal_clash(task: &GroundTask, a: &GroundAction, time: Decimal) -> bool {
    task.timed_literals().iter().filter(|l| l.time == time).any(|l| {
        a.cond_start.iter().chain(&a.cond_overall).chain(&a.add_start).chain(&a.del_start).any(|f| *f == l.fact)
    })
}

fn extract(nodes: &[Node], mut id: usize) -> TimedPlan {
    let mut steps = Vec::new();
    loop {
        let n = &nodes[id];
        if let Some(s) = &n.step {
            steps.push(s.clone());
        }
        match n.parent {
            Some(p) => id = p,
            None => break,
        }
    }
    steps.reverse();
    TimedPlan::new(steps)
}

/// Precomputed relaxed operators: preconditions and add effects.
struct Relaxation {
    ops: Vec<(Vec<Fact>, Vec<Fact>)>,
}

impl Relaxation {
    fn new(task: &GroundTask) -> Self {
        let ops = task
            .actions()
            .iter()
            .map(|a| {
                let mut pre: Vec<Fact> = a.cond_start.iter().chain(&a.cond_overall).copied().collect();
                pre.extend(a.cond_end.iter().filter(|f| !a.add_start.contains(f)));
                pre.sort();
                pre.dedup();
                let adds = a.add_start.iter().chain(&a.add_end).copied().collect();
                (pre, adds)
            })
            .collect();
        Relaxation { ops }
    }

    /// Additive cost of the goal; `None` when some goal is unreachable even
    /// ignoring deletes. Facts a future literal will add cost one.
    fn estimate(&self, task: &GroundTask, state: &State) -> Option<u64> {
        let mut cost = vec![UNREACHABLE; task.fact_count()];
        for f in state.facts.iter() {
            cost[f.0 as usize] = 0;
        }
        for l in task.timed_literals() {
            if l.positive && l.time > state.time && cost[l.fact.0 as usize] == UNREACHABLE {
                cost[l.fact.0 as usize] = 1;
            }
        }
        let mut changed = true;
        while changed {
            changed = false;
            for (pre, adds) in &self.ops {
                let mut c = 1u64;
                for f in pre {
                    let fc = cost[f.0 as usize];
                    if fc == UNREACHABLE {
                        c = UNREACHABLE;
                        break;
                    }
                    c = c.saturating_add(fc);
                }
                if c == UNREACHABLE {
                    continue;
                }
                for f in adds {
                    if c < cost[f.0 as usize] {
                        cost[f.0 as usize] = c;
                        changed = true;
                    }
                }
            }
        }
        let mut total = 0u64;
        for g in task.goal() {
            let c = cost[g.0 as usize];
            if c == UNREACHABLE {
                return None;
            }
            total = total.saturating_add(c);
        }
        Some(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem};
    use crate::sim::validate;

    fn task(domain: &str, problem: &str) -> GroundTask {
        let d = parse_domain(domain).unwrap();
        GroundTask::new(&d, &parse_problem(problem, &d).unwrap()).unwrap()
    }

    const ROOMS: &str = "(define (domain rooms) (:requirements :strips :typing)
        (:types room)
        (:predicates (at ?r - room) (door ?a ?b - room))
        (:action move :parameters (?a ?b - room)
          :precondition (and (at ?a) (door ?a ?b))
          :effect (and (at ?b) (not (at ?a)))))";

    #[test]
    fn finds_a_path_through_rooms() {
        let t = task(
            ROOMS,
            "(define (problem p) (:domain rooms) (:objects r1 r2 r3 - room)
               (:init (at r1) (door r1 r2) (door r2 r3)) (:goal (at r3)))",
        );
        let PlanOutcome::Found(plan) = search(&t, t.initial_state(), &[], 1000) else { panic!() };
        assert_eq!(plan.len(), 2);
        assert!(validate(&t, &plan).valid);
        // instantaneous steps are separated by one tick
        assert_eq!(plan.steps()[1].start, EPSILON);
    }

    #[test]
    fn dead_end_is_unsolvable_and_forbidden_state_blocks_only_route() {
        let t = task(
            ROOMS,
            "(define (problem p) (:domain rooms) (:objects r1 r2 r3 - room)
               (:init (at r1) (door r1 r2) (door r2 r3) (door r2 r1)) (:goal (at r3)))",
        );
        let mut via = t.initial_state().clone();
        via.facts.remove(t.fact_id(&crate::pddl::GroundAtom::new("at", &["r1"])).unwrap());
        via.facts.insert(t.fact_id(&crate::pddl::GroundAtom::new("at", &["r2"])).unwrap());
        assert_eq!(search(&t, t.initial_state(), &[via], 1000), PlanOutcome::Unsolvable);

        let t = task(
            ROOMS,
            "(define (problem p) (:domain rooms) (:objects r1 r2 r3 - room)
               (:init (at r1) (door r2 r3)) (:goal (at r3)))",
        );
        assert_eq!(search(&t, t.initial_state(), &[], 1000), PlanOutcome::Unsolvable);
    }

    #[test]
    fn waits_for_a_timed_literal_and_starts_after_it() {
        let t = task(
            "(define (domain w) (:requirements :durative-actions :timed-initial-literals)
               (:predicates (open) (done))
               (:durative-action go :parameters () :duration (= ?duration 5)
                 :condition (and (at start (open))) :effect (and (at end (done)))))",
            "(define (problem p) (:domain w) (:init (at 10 (open)) (at 20 (not (open)))) (:goal (done)))",
        );
        let PlanOutcome::Found(plan) = search(&t, t.initial_state(), &[], 1000) else { panic!() };
        assert_eq!(plan.steps()[0].start, Decimal::from_millis(10_001));
        assert!(validate(&t, &plan).valid);
    }

    #[test]
    fn node_cap_is_reported() {
        let t = task(
            ROOMS,
            "(define (problem p) (:domain rooms) (:objects r1 r2 r3 r4 - room)
               (:init (at r1) (door r1 r2) (door r2 r1) (door r2 r3) (door r3 r2) (door r3 r4))
               (:goal (at r4)))",
        );
        assert_eq!(search(&t, t.initial_state(), &[], 1), PlanOutcome::ResourceLimited);
    }
}
