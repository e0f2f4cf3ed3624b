//! Model compilations that force a chosen ground action into every plan, and
//! optionally restrict when it may start.

use super::ContrastiveError;
use crate::decimal::{Decimal, EPSILON};
use crate::ground::{GroundAction, GroundTask};
use crate::pddl::{
    Atom, Condition, DomainModel, Effect, EffectKind, EffectTime, GroundAtom, ProblemModel, Signature, Term,
    TimedLiteral, Timing,
};

const NAME_ATTEMPTS: usize = 100;

/// A transformed task plus the names it introduced.
#[derive(Debug, Clone)]
pub struct CompiledTask {
    pub domain: DomainModel,
    pub problem: ProblemModel,
    pub task: GroundTask,
    /// Operator the forced action instantiates.
    pub operator: String,
    /// Copy of `operator` that also achieves the applied fact.
    pub user_operator: String,
    pub applied_predicate: String,
    pub applied_fact: GroundAtom,
    /// Predicate gating the user operator, for time-window compilations.
    pub window_predicate: Option<String>,
}

impl CompiledTask {
    /// Whether a compiled-plan step is the forced action.
    pub fn is_user_step(&self, name: &str, args: &[String]) -> bool {
        name == self.user_operator && args == self.applied_fact.args.as_slice()
    }
}

fn unique_name(domain: &DomainModel, base: &str) -> Result<String, ContrastiveError> {
    if !domain.uses_name(base) {
        return Ok(base.to_string());
    }
    (1..NAME_ATTEMPTS)
        .map(|i| format!("{base}-{i}"))
        .find(|n| !domain.uses_name(n))
        .ok_or_else(|| ContrastiveError::NameCollision(base.to_string()))
}

/// Adds `applied-<op>` and `user-action-<op>` to the domain and the applied
/// fact of `action` to the goal. The input task is left untouched.
pub fn compile_force_action(task: &GroundTask, action: &GroundAction) -> Result<CompiledTask, ContrastiveError> {
    let mut domain = task.domain().clone();
    let mut problem = task.problem().clone();
    let op = domain.operator(&action.name).ok_or_else(|| ContrastiveError::UnknownAction(action.label()))?.clone();

    let applied_predicate = unique_name(&domain, &format!("applied-{}", op.name))?;
    domain.predicates.push(Signature { name: applied_predicate.clone(), params: op.params.clone() });
    let user_operator = unique_name(&domain, &format!("user-action-{}", op.name))?;

    let mut copy = op.clone();
    copy.name = user_operator.clone();
    copy.effects.push(Effect {
        time: if op.durative { EffectTime::End } else { EffectTime::Start },
        kind: EffectKind::Add(Atom {
            predicate: applied_predicate.clone(),
            args: op.params.iter().map(|p| Term::Var(p.name.clone())).collect(),
        }),
    });
    domain.operators.push(copy);

    let applied_fact = GroundAtom { predicate: applied_predicate.clone(), args: action.args.clone() };
    problem.goal.push(applied_fact.clone());
    let task = GroundTask::new(&domain, &problem)?;
    Ok(CompiledTask {
        domain,
        problem,
        task,
        operator: op.name,
        user_operator,
        applied_predicate,
        applied_fact,
        window_predicate: None,
    })
}

/// Forced-action compilation whose user operator can only start while
/// `applicable-user-action` holds: asserted at `lb`, retracted at `ub`.
pub fn compile_time_window(
    task: &GroundTask,
    action: &GroundAction,
    lb: Decimal,
    ub: Decimal,
) -> Result<CompiledTask, ContrastiveError> {
    if lb.is_negative() || lb >= ub {
        return Err(ContrastiveError::BadWindow(format!("need 0 <= LB < UB, got [{lb}, {ub}]")));
    }
    let mut c = compile_force_action(task, action)?;
    let window = unique_name(&c.domain, "applicable-user-action")?;
    c.domain.predicates.push(Signature { name: window.clone(), params: Vec::new() });
    if !c.domain.requirements.iter().any(|r| r == "timed-initial-literals") {
        c.domain.requirements.push("timed-initial-literals".into());
    }
    let user = c.domain.operators.iter_mut().find(|o| o.name == c.user_operator).expect("user operator was just added");
    user.conditions
        .push(Condition { timing: Timing::AtStart, atom: Atom { predicate: window.clone(), args: Vec::new() } });
    let atom = GroundAtom { predicate: window.clone(), args: Vec::new() };
    // literals at time zero are part of the initial state, which would let the
    // action start at LB itself
    let opens = if lb == Decimal::ZERO { EPSILON } else { lb };
    c.problem.timed_literals.push(TimedLiteral { time: opens, atom: atom.clone(), positive: true });
    c.problem.timed_literals.push(TimedLiteral { time: ub, atom, positive: false });
    c.problem.timed_literals.sort_by_key(|l| l.time);
    c.task = GroundTask::new(&c.domain, &c.problem)?;
    c.window_predicate = Some(window);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem, print_domain, print_problem};

    fn task() -> GroundTask {
        let d = parse_domain(
            "(define (domain c) (:requirements :strips)
               (:predicates (p ?x) (applied-mv ?x) (q))
               (:action mv :parameters (?x) :precondition (p ?x) :effect (q)))",
        )
        .unwrap();
        let p =
            parse_problem("(define (problem x) (:domain c) (:objects o1 o2) (:init (p o1)) (:goal (q)))", &d).unwrap();
        GroundTask::new(&d, &p).unwrap()
    }

    #[test]
    fn colliding_names_get_a_suffix_and_input_is_unchanged() {
        let t = task();
        let before = (t.domain().clone(), t.problem().clone());
        let a = t.action(t.find_action("mv", &["o1".into()]).unwrap()).clone();
        let c = compile_force_action(&t, &a).unwrap();
        assert_eq!(c.applied_predicate, "applied-mv-1");
        assert_eq!(c.user_operator, "user-action-mv");
        assert_eq!(c.problem.goal.len(), 2);
        assert_eq!((t.domain().clone(), t.problem().clone()), before);
        // the compiled model survives printing and parsing
        let d2 = parse_domain(&print_domain(&c.domain)).unwrap();
        assert_eq!(parse_problem(&print_problem(&c.problem), &d2).unwrap(), c.problem);
    }

    #[test]
    fn window_must_be_proper() {
        let t = task();
        let a = t.action(0).clone();
        let ten = Decimal::from_int(10);
        assert!(matches!(compile_time_window(&t, &a, ten, ten), Err(ContrastiveError::BadWindow(_))));
        assert!(matches!(compile_time_window(&t, &a, Decimal::from_int(-1), ten), Err(ContrastiveError::BadWindow(_))));
    }
}
