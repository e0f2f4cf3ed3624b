//! Timed plans and their one-step-per-line text form:
//! `<start>: (<name> <args...>) [<duration>]`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::decimal::Decimal;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanStep {
    pub start: Decimal,
    pub name: String,
    pub args: Vec<String>,
    pub duration: Decimal,
}

impl PlanStep {
    pub fn new(start: Decimal, name: &str, args: &[&str], duration: Decimal) -> Self {
        PlanStep { start, name: name.to_string(), args: args.iter().map(|a| a.to_string()).collect(), duration }
    }

    pub fn end(&self) -> Decimal {
        self.start + self.duration
    }

    /// `(name arg1 arg2)`
    pub fn label(&self) -> String {
        let mut s = format!("({}", self.name);
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s.push(')');
        s
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} [{}]", self.start, self.label(), self.duration)
    }
}

/// Steps ordered by start time; steps with equal start keep their given order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TimedPlan {
    steps: Vec<PlanStep>,
}

impl TimedPlan {
    pub fn new(mut steps: Vec<PlanStep>) -> Self {
        steps.sort_by_key(|s| s.start);
        TimedPlan { steps }
    }

    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    pub fn into_steps(self) -> Vec<PlanStep> {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Latest end time; zero for the empty plan.
    pub fn makespan(&self) -> Decimal {
        self.steps.iter().map(PlanStep::end).max().unwrap_or(Decimal::ZERO)
    }

    /// Plan with the first `n` steps.
    pub fn prefix(&self, n: usize) -> TimedPlan {
        TimedPlan { steps: self.steps[..n.min(self.steps.len())].to_vec() }
    }

    pub fn shifted(&self, offset: Decimal) -> TimedPlan {
        TimedPlan { steps: self.steps.iter().map(|s| PlanStep { start: s.start + offset, ..s.clone() }).collect() }
    }

    /// Appends steps of `other` after this plan's, preserving start-time order.
    pub fn concat(&self, other: &TimedPlan) -> TimedPlan {
        let mut steps = self.steps.clone();
        steps.extend(other.steps.iter().cloned());
        TimedPlan::new(steps)
    }
}

impl fmt::Display for TimedPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("plan line {line}: {message}: `{text}`")]
pub struct PlanParseError {
    pub line: usize,
    pub text: String,
    pub message: String,
}

/// Parses plan text. Blank lines and `;` comments are ignored; a missing
/// `[duration]` means an instantaneous step.
pub fn parse_plan(text: &str) -> Result<TimedPlan, PlanParseError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find(';') {
            Some(c) => &raw[..c],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let err =
            |message: &str| PlanParseError { line: i + 1, text: raw.trim().to_string(), message: message.to_string() };
        let (start, rest) = line.split_once(':').ok_or_else(|| err("expected `<start>:`"))?;
        let start: Decimal = start.trim().parse().map_err(|_| err("invalid start time"))?;
        if start.is_negative() {
            return Err(err("negative start time"));
        }
        let rest = rest.trim();
        let open = rest.strip_prefix('(').ok_or_else(|| err("expected `(`"))?;
        let close = open.find(')').ok_or_else(|| err("missing `)`"))?;
        let mut words = open[..close].split_whitespace().map(str::to_lowercase);
        let name = words.next().ok_or_else(|| err("missing action name"))?;
        let args: Vec<String> = words.collect();
        let tail = open[close + 1..].trim();
        let duration = if tail.is_empty() {
            Decimal::ZERO
        } else {
            let inner = tail
                .strip_prefix('[')
                .and_then(|t| t.strip_suffix(']'))
                .ok_or_else(|| err("expected `[<duration>]`"))?;
            let d: Decimal = inner.trim().parse().map_err(|_| err("invalid duration"))?;
            if d.is_negative() {
                return Err(err("negative duration"));
            }
            d
        };
        steps.push(PlanStep { start, name, args, duration });
    }
    Ok(TimedPlan::new(steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const REFERENCE: &str = include_str!("../fixtures/plan-original.txt");

    #[test]
    fn parses_the_eight_reference_lines() {
        let plan = parse_plan(REFERENCE).unwrap();
        assert_eq!(plan.len(), 8);
        assert_eq!(plan.steps()[0].start, Decimal::ZERO);
        assert_eq!(plan.steps()[7].start, Decimal::from_int(52));
        assert_eq!(plan.steps()[0].label(), "(board-truck d2 t1 a)");
        assert_eq!(plan.makespan(), Decimal::from_int(62));
    }

    #[test]
    fn empty_text_is_empty_plan() {
        assert!(parse_plan("").unwrap().is_empty());
        assert!(parse_plan("\n ; only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn integer_literals_are_normalized() {
        let plan = parse_plan("10: (x) [1]").unwrap();
        assert_eq!(plan.steps()[0].start, Decimal::from_millis(10_000));
        assert_eq!(plan.to_string(), "10.0: (x) [1.0]\n");
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let err = parse_plan("0.0: (a) [1]\nnot a plan line\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.to_string().contains("not a plan line"));
        assert!(parse_plan("0.0: (a) [x]").is_err());
        assert!(parse_plan("0.0: a b").is_err());
    }

    #[test]
    fn missing_duration_means_instantaneous() {
        let plan = parse_plan("1.5: (flip sw1)").unwrap();
        assert_eq!(plan.steps()[0].duration, Decimal::ZERO);
    }

    fn step() -> impl Strategy<Value = PlanStep> {
        (0i64..1_000_000, "[a-z][a-z0-9-]{0,8}", prop::collection::vec("[a-z][a-z0-9]{0,4}", 0..4), 0i64..100_000)
            .prop_map(|(s, name, args, d)| PlanStep {
                start: Decimal::from_millis(s),
                name,
                args,
                duration: Decimal::from_millis(d),
            })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(steps in prop::collection::vec(step(), 0..12)) {
            let plan = TimedPlan::new(steps);
            prop_assert_eq!(parse_plan(&plan.to_string()).unwrap(), plan);
        }
    }
}
