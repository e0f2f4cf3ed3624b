//! Runs an external planner through `sh -c`. The task is written as a domain
//! and a problem rooted at the requested state (time shifted to zero), and the
//! returned plan is shifted back and validated before it is accepted.

use std::fs::{self, File};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{PlanOutcome, PlannerError};
use crate::decimal::Decimal;
use crate::ground::{GroundTask, State};
use crate::pddl::{print_domain, print_problem, NumericInit, ProblemModel, TimedLiteral};
use crate::plan::parse_plan;
use crate::sim::validate_from;

const POLL: Duration = Duration::from_millis(10);

/// The task's problem with `state` as its initial state. Literals after
/// `state.time` are kept, shifted so that `state.time` becomes zero.
pub fn rooted_problem(task: &GroundTask, state: &State) -> ProblemModel {
    let mut p = task.problem().clone();
    p.init = task.atoms(state);
    p.numeric_init = state
        .fluents
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            let (function, args) = task.fluent(crate::ground::FluentId(i as u32));
            v.map(|value| NumericInit { function: function.clone(), args: args.clone(), value })
        })
        .collect();
    p.timed_literals = task
        .timed_literals()
        .iter()
        .filter(|l| l.time > state.time)
        .map(|l| TimedLiteral { time: l.time - state.time, atom: task.fact(l.fact).clone(), positive: l.positive })
        .collect();
    p
}

pub fn run_external(
    task: &GroundTask,
    from: &State,
    template: &str,
    timeout_secs: u64,
) -> Result<PlanOutcome, PlannerError> {
    let io = |e: std::io::Error| PlannerError::Io(e.to_string());
    let dir = tempfile::tempdir().map_err(io)?;
    let domain = dir.path().join("domain.pddl");
    let problem = dir.path().join("problem.pddl");
    let plan_file = dir.path().join("plan.txt");
    let stdout_file = dir.path().join("stdout.txt");
    let stderr_file = dir.path().join("stderr.txt");
    fs::write(&domain, print_domain(task.domain())).map_err(io)?;
    fs::write(&problem, print_problem(&rooted_problem(task, from))).map_err(io)?;

    let command = template
        .replace("{domain}", &domain.to_string_lossy())
        .replace("{problem}", &problem.to_string_lossy())
        .replace("{plan}", &plan_file.to_string_lossy());
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .stdout(File::create(&stdout_file).map_err(io)?)
        .stderr(File::create(&stderr_file).map_err(io)?)
        .spawn()
        .map_err(io)?;

    let deadline = Instant::now() + Duration::from_secs(timeout_secs);
    let status = loop {
        if let Some(status) = child.try_wait().map_err(io)? {
            break status;
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            return Err(PlannerError::Timeout { secs: timeout_secs });
        }
        std::thread::sleep(POLL);
    };
    if !status.success() {
        let stderr = fs::read_to_string(&stderr_file).unwrap_or_default();
        let tail: String =
            stderr.lines().rev().take(5).collect::<Vec<_>>().into_iter().rev().collect::<Vec<_>>().join("\n");
        return Err(PlannerError::NonZeroExit { code: status.code(), stderr: tail });
    }

    let from_file = fs::read_to_string(&plan_file).ok().filter(|t| !t.trim().is_empty());
    let plan = match from_file {
        Some(text) => parse_plan(&text)?,
        None => {
            let stdout = fs::read_to_string(&stdout_file).map_err(io)?;
            match plan_lines(&stdout) {
                Some(text) => parse_plan(&text)?,
                None if reports_unsolvable(&stdout) => return Ok(PlanOutcome::Unsolvable),
                None => return Err(PlannerError::NoPlanInOutput),
            }
        }
    };
    let plan = plan.shifted(from.time);
    let report = validate_from(task, from, &plan);
    match report.violation {
        None => Ok(PlanOutcome::Found(plan)),
        Some(v) => Err(PlannerError::InvalidPlan(v)),
    }
}

/// Lines shaped like `<time>: (<action> ...)`, joined; `None` if there are none.
fn plan_lines(stdout: &str) -> Option<String> {
    let lines: Vec<&str> = stdout
        .lines()
        .filter(|l| {
            l.split_once(':')
                .is_some_and(|(t, rest)| t.trim().parse::<Decimal>().is_ok() && rest.trim_start().starts_with('('))
        })
        .collect();
    (!lines.is_empty()).then(|| lines.join("\n"))
}

fn reports_unsolvable(stdout: &str) -> bool {
    let lower = stdout.to_lowercase();
    ["unsolvable", "no solution", "no plan"].iter().any(|k| lower.contains(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem};

    #[test]
    fn rooted_problem_shifts_literals() {
        let d = parse_domain("(define (domain w) (:predicates (p) (q)) (:functions (f)))").unwrap();
        let p = parse_problem(
            "(define (problem x) (:domain w) (:init (p) (= (f) 2) (at 5 (q)) (at 9 (not (p)))) (:goal (q)))",
            &d,
        )
        .unwrap();
        let t = GroundTask::new(&d, &p).unwrap();
        let s = t.initial_state().clone().at_time(Decimal::from_int(6));
        let rooted = rooted_problem(&t, &s);
        assert_eq!(rooted.timed_literals.len(), 1);
        assert_eq!(rooted.timed_literals[0].time, Decimal::from_int(3));
        assert_eq!(rooted.numeric_init[0].value, Decimal::from_int(2));
        assert!(print_problem(&rooted).contains("(at 3.0 (not (p)))"));
    }

    #[test]
    fn plan_lines_skip_chatter() {
        let out = "searching...\n0.000: (a x) [1.000]\ncost 3\n1.5: (b)\n";
        assert_eq!(plan_lines(out).unwrap(), "0.000: (a x) [1.000]\n1.5: (b)");
        assert!(plan_lines("hello world").is_none());
    }
}
