//! Left-shifting of timed plans. Each step moves to the earliest time allowed
//! by the steps it depends on; two steps depend on each other when the effects
//! of one touch the conditions or effects of the other, or when both update
//! the same numeric fluent. Steps touching a fact changed by a timed literal
//! never move. The shifted plan is kept only if it still validates.

use crate::decimal::{Decimal, EPSILON};
use crate::ground::{Fact, GroundAction, GroundTask, State};
use crate::plan::{PlanStep, TimedPlan};
use crate::sim::validate_from;

pub fn compress(task: &GroundTask, from: &State, plan: &TimedPlan) -> TimedPlan {
    let Some(actions) = plan
        .steps()
        .iter()
        .map(|s| task.find_action(&s.name, &s.args).map(|i| task.action(i)))
        .collect::<Option<Vec<&GroundAction>>>()
    else {
        return plan.clone();
    };
    let literal_facts: Vec<Fact> = task.timed_literals().iter().map(|l| l.fact).collect();
    let old = plan.steps();
    let mut new: Vec<PlanStep> = Vec::with_capacity(old.len());
    for (j, step) in old.iter().enumerate() {
        let pinned = actions[j].conditions().chain(actions[j].effects()).any(|f| literal_facts.contains(&f));
        let mut start = if pinned { step.start } else { from.time };
        for i in 0..j {
            if !dependent(actions[i], actions[j]) {
                continue;
            }
            let earliest = if old[i].end() <= step.start {
                let gap =
                    if actions[i].is_instantaneous() && old[i].end() < step.start { EPSILON } else { Decimal::ZERO };
                new[i].end() + gap
            } else {
                new[i].start + (step.start - old[i].start)
            };
            start = start.max(earliest);
        }
        new.push(PlanStep { start: start.min(step.start), ..step.clone() });
    }
    let shifted = TimedPlan::new(new);
    let before = validate_from(task, from, plan);
    let after = validate_from(task, from, &shifted);
    if after.valid && (!before.valid || after.makespan <= before.makespan) {
        shifted
    } else {
        plan.clone()
    }
}

fn dependent(a: &GroundAction, b: &GroundAction) -> bool {
    let touches = |x: &GroundAction, y: &GroundAction| {
        x.effects().any(|f| y.conditions().any(|g| g == f) || y.effects().any(|g| g == f))
    };
    touches(a, b) || touches(b, a) || a.numeric_targets().any(|f| b.numeric_targets().any(|g| g == f))
}
