//! Classifies what a new plan does after the user's action, by comparing its
//! state trajectory with the original plan's.

use serde::{Deserialize, Serialize};

use crate::decimal::Decimal;
use crate::ground::{GroundTask, State};
use crate::plan::TimedPlan;
use crate::sim::{trajectory, Happening, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    /// (a) the state before the user action comes straight back.
    ReturnsImmediately,
    /// (b) a later state coincides with one of the original plan.
    RejoinsOriginal,
    /// (c) the goal is reached along a different route.
    NewRoute,
    /// (d) no plan exists after the user action.
    NoPlan,
}

impl Behavior {
    pub fn letter(self) -> char {
        match self {
            Behavior::ReturnsImmediately => 'a',
            Behavior::RejoinsOriginal => 'b',
            Behavior::NewRoute => 'c',
            Behavior::NoPlan => 'd',
        }
    }
}

impl std::fmt::Display for Behavior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let text = match self {
            Behavior::ReturnsImmediately => "returns-immediately",
            Behavior::RejoinsOriginal => "rejoins-original",
            Behavior::NewRoute => "new-route",
            Behavior::NoPlan => "no-plan",
        };
        write!(f, "({}) {text}", self.letter())
    }
}

/// Where the new plan meets the original one: the first step of each plan
/// still to start in the shared state (plan length if none is left).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejoin {
    pub new_step: usize,
    pub original_step: usize,
}

/// Verdict over two trajectories. `window` is the span after the user action
/// in which a return to `before` counts as undoing it; for (b) the indices of
/// the shared happening in `new` and `original` are returned.
pub fn classify_trajectories(
    original: &[Happening],
    new: &[Happening],
    before: &State,
    window: (Decimal, Decimal),
) -> (Behavior, Option<(usize, usize)>) {
    let (from, to) = window;
    let after = || new.iter().enumerate().filter(|(_, h)| h.time >= from);
    if after().filter(|(_, h)| h.time <= to).any(|(_, h)| h.state.same_situation(before)) {
        return (Behavior::ReturnsImmediately, None);
    }
    for (i, h) in after() {
        if let Some(j) = original.iter().position(|o| o.state.same_situation(&h.state)) {
            return (Behavior::RejoinsOriginal, Some((i, j)));
        }
    }
    (Behavior::NewRoute, None)
}

/// Classifies `new` (valid for `task`) against `original`, where step
/// `user_step` of `new` is the user's action and `before` the state it was
/// suggested in. `None` means no plan.
pub fn classify_behavior(
    task: &GroundTask,
    original: &TimedPlan,
    new: Option<&TimedPlan>,
    user_step: usize,
    before: &State,
) -> Result<(Behavior, Option<Rejoin>), Violation> {
    let Some(new) = new else {
        return Ok((Behavior::NoPlan, None));
    };
    let original_traj = trajectory(task, original)?;
    let new_traj = trajectory(task, new)?;
    let user_end = new.steps()[user_step].end();
    let next_end = new
        .steps()
        .iter()
        .enumerate()
        .filter(|(i, s)| *i != user_step && s.start >= user_end)
        .map(|(_, s)| s.end())
        .next()
        .unwrap_or(user_end);
    let (behavior, at) = classify_trajectories(&original_traj, &new_traj, before, (user_end, next_end));
    let rejoin = at.map(|(i, j)| Rejoin {
        new_step: next_step(new, &new_traj, i, Some(user_step)),
        original_step: next_step(original, &original_traj, j, None),
    });
    Ok((behavior, rejoin))
}

/// First step not yet started in happening `h` of the plan's trajectory.
fn next_step(plan: &TimedPlan, traj: &[Happening], h: usize, skip: Option<usize>) -> usize {
    let time = traj[h].time;
    plan.steps()
        .iter()
        .enumerate()
        .position(|(i, s)| Some(i) != skip && (s.start > time || (h == 0 && s.start == time)))
        .unwrap_or(plan.len())
}
