//! PDDL 2.1 subset: typed STRIPS, durative actions with fixed durations,
//! numeric fluents in durations, effects and metrics, and timed initial literals.
//!
//! Everything is lower-cased at read time. Models are plain immutable values;
//! transformations build new models.

mod parser;
mod printer;
mod sexpr;

use std::collections::HashMap;
use std::fmt;

use crate::decimal::Decimal;

pub use parser::{parse_domain, parse_metric, parse_problem};
pub use printer::{print_domain, print_expr, print_problem};

/// Root of every type hierarchy.
pub const OBJECT_TYPE: &str = "object";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PddlError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: unsupported construct `{construct}`")]
    Unsupported { pos: Pos, construct: String },
    #[error("{pos}: {message}")]
    Semantic { pos: Pos, message: String },
}

impl PddlError {
    pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        PddlError::Syntax { pos, message: message.into() }
    }

    pub(crate) fn unsupported(pos: Pos, construct: impl Into<String>) -> Self {
        PddlError::Unsupported { pos, construct: construct.into() }
    }

    pub(crate) fn semantic(pos: Pos, message: impl Into<String>) -> Self {
        PddlError::Semantic { pos, message: message.into() }
    }

    pub fn pos(&self) -> Pos {
        match self {
            PddlError::Syntax { pos, .. } | PddlError::Unsupported { pos, .. } | PddlError::Semantic { pos, .. } => {
                *pos
            }
        }
    }
}

/// `name - type`, used for parameters, objects, constants and type declarations
/// (where `ty` is the parent type).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

impl TypedName {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        TypedName { name: name.into(), ty: ty.into() }
    }
}

/// A predicate or function declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub params: Vec<TypedName>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// Variable name without the leading `?`.
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => f.write_str(c),
        }
    }
}

/// Lifted atom such as `(at ?t ?l)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

/// Lifted numeric fluent reference such as `(time-to-drive ?from ?to)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FluentRef {
    pub function: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Number(Decimal),
    Fluent(FluentRef),
    /// `?duration` inside an effect expression.
    Duration,
    /// `(total-time)` inside a metric.
    TotalTime,
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn fluents(&self, out: &mut Vec<FluentRef>) {
        match self {
            Expr::Fluent(f) => out.push(f.clone()),
            Expr::Neg(e) => e.fluents(out),
            Expr::Binary(_, l, r) => {
                l.fluents(out);
                r.fluents(out);
            }
            Expr::Number(_) | Expr::Duration | Expr::TotalTime => {}
        }
    }

    /// Evaluates with a caller-supplied fluent lookup. `None` if a fluent is
    /// undefined or a division by zero occurs.
    pub fn eval(
        &self,
        fluent: &mut dyn FnMut(&FluentRef) -> Option<Decimal>,
        duration: Option<Decimal>,
        total_time: Option<Decimal>,
    ) -> Option<Decimal> {
        Some(match self {
            Expr::Number(n) => *n,
            Expr::Fluent(f) => fluent(f)?,
            Expr::Duration => duration?,
            Expr::TotalTime => total_time?,
            Expr::Neg(e) => -e.eval(fluent, duration, total_time)?,
            Expr::Binary(op, l, r) => {
                let l = l.eval(fluent, duration, total_time)?;
                let r = r.eval(fluent, duration, total_time)?;
                match op {
                    BinaryOp::Add => l + r,
                    BinaryOp::Sub => l - r,
                    BinaryOp::Mul => l.checked_mul(r)?,
                    BinaryOp::Div => l.checked_div(r)?,
                }
            }
        })
    }
}

/// When a condition must hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Timing {
    AtStart,
    OverAll,
    AtEnd,
}

/// When an effect happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EffectTime {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub timing: Timing,
    pub atom: Atom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumericOp {
    Assign,
    Increase,
    Decrease,
}

impl NumericOp {
    pub fn keyword(self) -> &'static str {
        match self {
            NumericOp::Assign => "assign",
            NumericOp::Increase => "increase",
            NumericOp::Decrease => "decrease",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EffectKind {
    Add(Atom),
    Delete(Atom),
    Numeric { op: NumericOp, target: FluentRef, value: Expr },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Effect {
    pub time: EffectTime,
    pub kind: EffectKind,
}

/// A durative or instantaneous action schema. Instantaneous operators carry
/// `durative == false`, a zero duration, and only at-start conditions/effects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operator {
    pub name: String,
    pub params: Vec<TypedName>,
    pub durative: bool,
    pub duration: Expr,
    pub conditions: Vec<Condition>,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainModel {
    pub name: String,
    /// Requirement flags without the leading colon, in declaration order.
    pub requirements: Vec<String>,
    /// Declared types with their parent, in declaration order.
    pub types: Vec<TypedName>,
    pub constants: Vec<TypedName>,
    pub predicates: Vec<Signature>,
    pub functions: Vec<Signature>,
    pub operators: Vec<Operator>,
}

impl DomainModel {
    pub fn operator(&self, name: &str) -> Option<&Operator> {
        self.operators.iter().find(|o| o.name == name)
    }

    pub fn predicate(&self, name: &str) -> Option<&Signature> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&Signature> {
        self.functions.iter().find(|p| p.name == name)
    }

    pub fn has_type(&self, ty: &str) -> bool {
        ty == OBJECT_TYPE || self.types.iter().any(|t| t.name == ty)
    }

    /// Parent chain lookup; `object` is the root of every chain.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let parents: HashMap<&str, &str> = self.types.iter().map(|t| (t.name.as_str(), t.ty.as_str())).collect();
        let mut current = ty;
        for _ in 0..=self.types.len() {
            if current == ancestor || ancestor == OBJECT_TYPE {
                return true;
            }
            match parents.get(current) {
                Some(p) => current = p,
                None => return false,
            }
        }
        false
    }

    /// True if any name (predicate, function, operator, type) equals `name`.
    pub fn uses_name(&self, name: &str) -> bool {
        self.predicate(name).is_some()
            || self.function(name).is_some()
            || self.operator(name).is_some()
            || self.has_type(name)
    }
}

/// Ground atom in a problem file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        GroundAtom { predicate: predicate.into(), args: args.iter().map(|s| s.to_string()).collect() }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// `(= (f a b) 3.0)` in `:init`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumericInit {
    pub function: String,
    pub args: Vec<String>,
    pub value: Decimal,
}

/// `(at 10 (p))` or `(at 20 (not (p)))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedLiteral {
    pub time: Decimal,
    pub atom: GroundAtom,
    pub positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimization {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricSpec {
    pub direction: Optimization,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemModel {
    pub name: String,
    pub domain: String,
    pub objects: Vec<TypedName>,
    pub init: Vec<GroundAtom>,
    pub numeric_init: Vec<NumericInit>,
    /// Stable-sorted by time.
    pub timed_literals: Vec<TimedLiteral>,
    pub goal: Vec<GroundAtom>,
    pub metric: Option<MetricSpec>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtype_walks_parent_chain() {
        let d = parse_domain(
            "(define (domain t) (:requirements :typing)
               (:types truck driver - locatable locatable location))",
        )
        .unwrap();
        assert!(d.is_subtype("truck", "locatable"));
        assert!(d.is_subtype("truck", "object"));
        assert!(!d.is_subtype("truck", "location"));
        assert!(!d.is_subtype("locatable", "truck"));
    }
}
