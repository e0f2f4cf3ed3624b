//! Planning back-ends: a built-in forward search and an adapter for external
//! planner commands. Both return plans that start no earlier than the state
//! they were asked to plan from.

mod external;
mod reschedule;
mod search;

use serde::{Deserialize, Serialize};

use crate::ground::{GroundTask, State};
use crate::plan::{PlanParseError, TimedPlan};
use crate::sim::Violation;

pub use external::{rooted_problem, run_external};
pub use reschedule::compress;
pub use search::search;

pub const DEFAULT_NODE_CAP: usize = 100_000;
pub const DEFAULT_TIMEOUT_SECS: u64 = 60;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Shell command template with `{domain}`, `{problem}` and optionally
    /// `{plan}` placeholders. `None` selects the built-in search.
    pub command: Option<String>,
    pub timeout_secs: u64,
    pub node_cap: usize,
    /// Left-shift returned plans so independent steps run in parallel.
    pub compress: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { command: None, timeout_secs: DEFAULT_TIMEOUT_SECS, node_cap: DEFAULT_NODE_CAP, compress: false }
    }
}

impl PlannerConfig {
    pub fn external(command: impl Into<String>) -> Self {
        PlannerConfig { command: Some(command.into()), ..Self::default() }
    }

    pub fn check(&self) -> Result<(), PlannerError> {
        if let Some(cmd) = &self.command {
            for placeholder in ["{domain}", "{problem}"] {
                if !cmd.contains(placeholder) {
                    return Err(PlannerError::BadTemplate(format!("missing {placeholder}")));
                }
            }
        }
        if self.timeout_secs == 0 {
            return Err(PlannerError::BadTemplate("timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanOutcome {
    Found(TimedPlan),
    /// The search space was exhausted, or the planner reported no solution.
    Unsolvable,
    ResourceLimited,
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&TimedPlan> {
        match self {
            PlanOutcome::Found(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlannerError {
    #[error("bad planner command: {0}")]
    BadTemplate(String),
    #[error("planner i/o failed: {0}")]
    Io(String),
    #[error("planner exited with status {code:?}: {stderr}")]
    NonZeroExit { code: Option<i32>, stderr: String },
    #[error("planner timed out after {secs} s")]
    Timeout { secs: u64 },
    #[error("planner output could not be parsed: {0}")]
    Parse(#[from] PlanParseError),
    #[error("planner output has no plan")]
    NoPlanInOutput,
    #[error("planner returned an invalid plan: {0}")]
    InvalidPlan(Violation),
}

/// Plans from `from` to the task goal. `forbidden` situations are never
/// expanded by the built-in search; external planners cannot honour them.
pub fn solve(
    task: &GroundTask,
    from: &State,
    forbidden: &[State],
    config: &PlannerConfig,
) -> Result<PlanOutcome, PlannerError> {
    config.check()?;
    let outcome = match &config.command {
        Some(cmd) => run_external(task, from, cmd, config.timeout_secs)?,
        None => search(task, from, forbidden, config.node_cap),
    };
    Ok(match outcome {
        PlanOutcome::Found(p) if config.compress => PlanOutcome::Found(compress(task, from, &p)),
        other => other,
    })
}
