use std::collections::{HashMap, HashSet};

use super::sexpr::{read_one, SExpr};
use super::*;

type Result<T> = std::result::Result<T, PddlError>;

/// Requirement flags inside the supported subset.
const SUPPORTED_REQUIREMENTS: &[&str] =
    &["strips", "typing", "durative-actions", "timed-initial-literals", "numeric-fluents", "fluents", "action-costs"];

pub fn parse_domain(text: &str) -> Result<DomainModel> {
    let root = read_one(text)?;
    let items = list_of(&root, "domain definition")?;
    expect_keyword(items.first(), "define", root.pos())?;
    let name = header(items.get(1), "domain", root.pos())?;

    let mut domain = DomainModel {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        functions: Vec::new(),
        operators: Vec::new(),
    };
    let mut actions = Vec::new();
    let mut seen_sections = HashSet::new();

    for section in items.iter().skip(2) {
        let list = list_of(section, "domain section")?;
        let key = section.head().ok_or_else(|| PddlError::syntax(section.pos(), "expected a `:section` keyword"))?;
        let repeatable = key == ":action" || key == ":durative-action";
        if !repeatable && !seen_sections.insert(key.to_string()) {
            return Err(PddlError::syntax(section.pos(), format!("duplicate `{key}` section")));
        }
        match key {
            ":requirements" => domain.requirements = requirements(&list[1..])?,
            ":types" => domain.types = type_declarations(&list[1..])?,
            ":constants" => domain.constants = typed_list(&list[1..], false)?,
            ":predicates" => domain.predicates = list[1..].iter().map(signature).collect::<Result<_>>()?,
            ":functions" => domain.functions = functions(&list[1..])?,
            ":action" | ":durative-action" => actions.push(section),
            ":derived" => return Err(PddlError::unsupported(section.pos(), "derived-predicates")),
            ":constraints" => return Err(PddlError::unsupported(section.pos(), "constraints")),
            other => return Err(PddlError::syntax(section.pos(), format!("unknown domain section `{other}`"))),
        }
    }

    check_declarations(&domain, root.pos())?;
    for action in actions {
        let op = operator(action, &domain)?;
        if domain.operator(&op.name).is_some() {
            return Err(PddlError::semantic(action.pos(), format!("duplicate operator `{}`", op.name)));
        }
        domain.operators.push(op);
    }
    Ok(domain)
}

pub fn parse_problem(text: &str, domain: &DomainModel) -> Result<ProblemModel> {
    let root = read_one(text)?;
    let items = list_of(&root, "problem definition")?;
    expect_keyword(items.first(), "define", root.pos())?;
    let name = header(items.get(1), "problem", root.pos())?;

    let mut problem = ProblemModel {
        name,
        domain: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        numeric_init: Vec::new(),
        timed_literals: Vec::new(),
        goal: Vec::new(),
        metric: None,
    };
    let mut init_section = None;
    let mut goal_section = None;
    let mut metric_section = None;
    let mut seen_sections = HashSet::new();

    for section in items.iter().skip(2) {
        let list = list_of(section, "problem section")?;
        let key = section.head().ok_or_else(|| PddlError::syntax(section.pos(), "expected a `:section` keyword"))?;
        if !seen_sections.insert(key.to_string()) {
            return Err(PddlError::syntax(section.pos(), format!("duplicate `{key}` section")));
        }
        match key {
            ":domain" => {
                let d = symbol_at(list, 1, section.pos(), "domain name")?;
                if d != domain.name {
                    return Err(PddlError::semantic(
                        section.pos(),
                        format!("problem is for domain `{d}`, not `{}`", domain.name),
                    ));
                }
                problem.domain = d.to_string();
            }
            ":requirements" => {
                requirements(&list[1..])?;
            }
            ":objects" => problem.objects = typed_list(&list[1..], false)?,
            ":init" => init_section = Some(section),
            ":goal" => goal_section = Some(section),
            ":metric" => metric_section = Some(section),
            ":constraints" => return Err(PddlError::unsupported(section.pos(), "constraints")),
            other => return Err(PddlError::syntax(section.pos(), format!("unknown problem section `{other}`"))),
        }
    }
    if problem.domain.is_empty() {
        return Err(PddlError::syntax(root.pos(), "missing `(:domain ...)`"));
    }

    let mut object_types: HashMap<String, String> = HashMap::new();
    for c in &domain.constants {
        object_types.insert(c.name.clone(), c.ty.clone());
    }
    for o in &problem.objects {
        if !domain.has_type(&o.ty) {
            return Err(PddlError::semantic(root.pos(), format!("unknown type `{}` for object `{}`", o.ty, o.name)));
        }
        if object_types.insert(o.name.clone(), o.ty.clone()).is_some() {
            return Err(PddlError::semantic(root.pos(), format!("duplicate object `{}`", o.name)));
        }
    }
    let ctx = ProblemContext { domain, object_types: &object_types };

    if let Some(section) = init_section {
        for item in &section.as_list().unwrap_or_default()[1..] {
            ctx.init_item(item, &mut problem)?;
        }
        problem.timed_literals.sort_by_key(|t| t.time);
    }
    let section = goal_section.ok_or_else(|| PddlError::syntax(root.pos(), "missing `(:goal ...)`"))?;
    let list = section.as_list().unwrap_or_default();
    if let Some(goal) = list.get(1) {
        ctx.goal(goal, &mut problem.goal)?;
    }
    if list.len() > 2 {
        return Err(PddlError::syntax(list[2].pos(), "`:goal` takes a single formula"));
    }
    if let Some(section) = metric_section {
        problem.metric = Some(ctx.metric(section)?);
    }
    Ok(problem)
}

fn list_of<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr]> {
    e.as_list().ok_or_else(|| PddlError::syntax(e.pos(), format!("expected {what} in parentheses")))
}

fn expect_keyword(e: Option<&SExpr>, keyword: &str, pos: Pos) -> Result<()> {
    match e {
        Some(SExpr::Symbol(s, _)) if s == keyword => Ok(()),
        Some(other) => Err(PddlError::syntax(other.pos(), format!("expected `{keyword}`"))),
        None => Err(PddlError::syntax(pos, format!("expected `{keyword}`"))),
    }
}

fn symbol_at<'a>(list: &'a [SExpr], idx: usize, pos: Pos, what: &str) -> Result<&'a str> {
    match list.get(idx) {
        Some(SExpr::Symbol(s, _)) => Ok(s),
        Some(other) => Err(PddlError::syntax(other.pos(), format!("expected {what}"))),
        None => Err(PddlError::syntax(pos, format!("missing {what}"))),
    }
}

/// `(domain name)` / `(problem name)`.
fn header(e: Option<&SExpr>, keyword: &str, pos: Pos) -> Result<String> {
    let e = e.ok_or_else(|| PddlError::syntax(pos, format!("missing `({keyword} <name>)`")))?;
    let list = list_of(e, &format!("`({keyword} <name>)`"))?;
    expect_keyword(list.first(), keyword, e.pos())?;
    if list.len() != 2 {
        return Err(PddlError::syntax(e.pos(), format!("expected `({keyword} <name>)`")));
    }
    Ok(symbol_at(list, 1, e.pos(), "name")?.to_string())
}

fn requirements(items: &[SExpr]) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for item in items {
        let flag = item
            .as_symbol()
            .and_then(|s| s.strip_prefix(':'))
            .ok_or_else(|| PddlError::syntax(item.pos(), "expected a `:requirement` flag"))?;
        if !SUPPORTED_REQUIREMENTS.contains(&flag) {
            return Err(PddlError::unsupported(item.pos(), flag));
        }
        if !out.iter().any(|r| r == flag) {
            out.push(flag.to_string());
        }
    }
    Ok(out)
}

/// Parses `a b - t c` style lists. Untyped names default to `object`.
fn typed_list(items: &[SExpr], variables: bool) -> Result<Vec<TypedName>> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        let sym = item.as_symbol().ok_or_else(|| PddlError::syntax(item.pos(), "expected a name"))?;
        if sym == "-" {
            let ty = match items.get(i + 1) {
                Some(SExpr::Symbol(t, _)) => t.clone(),
                Some(e @ SExpr::List(..)) if e.head() == Some("either") => {
                    return Err(PddlError::unsupported(e.pos(), "either"));
                }
                Some(e) => return Err(PddlError::syntax(e.pos(), "expected a type name")),
                None => return Err(PddlError::syntax(item.pos(), "missing type after `-`")),
            };
            if pending.is_empty() {
                return Err(PddlError::syntax(item.pos(), "`-` without preceding names"));
            }
            out.extend(pending.drain(..).map(|n| TypedName::new(n, ty.clone())));
            i += 2;
            continue;
        }
        let name = if variables {
            sym.strip_prefix('?')
                .filter(|s| !s.is_empty())
                .ok_or_else(|| PddlError::syntax(item.pos(), format!("expected a variable, found `{sym}`")))?
        } else {
            if sym.starts_with('?') {
                return Err(PddlError::syntax(item.pos(), format!("unexpected variable `{sym}`")));
            }
            sym
        };
        pending.push(name.to_string());
        i += 1;
    }
    out.extend(pending.into_iter().map(|n| TypedName::new(n, OBJECT_TYPE)));
    Ok(out)
}

/// Type declarations; parents that are never declared themselves are appended
/// as children of `object`.
fn type_declarations(items: &[SExpr]) -> Result<Vec<TypedName>> {
    let declared = typed_list(items, false)?;
    let mut out: Vec<TypedName> = Vec::new();
    for t in declared {
        if t.name == OBJECT_TYPE {
            continue;
        }
        if out.iter().any(|o| o.name == t.name) {
            let pos = items.first().map(SExpr::pos).unwrap_or_default();
            return Err(PddlError::semantic(pos, format!("duplicate type `{}`", t.name)));
        }
        out.push(t);
    }
    let implicit: Vec<String> = out.iter().map(|t| t.ty.clone()).filter(|p| p != OBJECT_TYPE).collect();
    for parent in implicit {
        if !out.iter().any(|t| t.name == parent) {
            out.push(TypedName::new(parent, OBJECT_TYPE));
        }
    }
    Ok(out)
}

fn signature(e: &SExpr) -> Result<Signature> {
    let list = list_of(e, "a declaration")?;
    let name = symbol_at(list, 0, e.pos(), "a name")?;
    if name.starts_with('?') || name.starts_with(':') {
        return Err(PddlError::syntax(e.pos(), format!("invalid name `{name}`")));
    }
    Ok(Signature { name: name.to_string(), params: typed_list(&list[1..], true)? })
}

/// `(:functions (f ?x - t) (g) - number ...)`
fn functions(items: &[SExpr]) -> Result<Vec<Signature>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        if item.as_symbol() == Some("-") {
            match items.get(i + 1).and_then(SExpr::as_symbol) {
                Some("number") => {}
                Some(other) => return Err(PddlError::unsupported(item.pos(), format!("function type {other}"))),
                None => return Err(PddlError::syntax(item.pos(), "missing function type")),
            }
            i += 2;
            continue;
        }
        out.push(signature(item)?);
        i += 1;
    }
    Ok(out)
}

fn check_declarations(domain: &DomainModel, pos: Pos) -> Result<()> {
    let check_type = |ty: &str, owner: &str| -> Result<()> {
        if domain.has_type(ty) {
            Ok(())
        } else {
            Err(PddlError::semantic(pos, format!("unknown type `{ty}` in {owner}")))
        }
    };
    for t in &domain.types {
        check_type(&t.ty, &format!("type `{}`", t.name))?;
    }
    for t in &domain.types {
        if !domain.is_subtype(&t.name, OBJECT_TYPE) || type_cycle(domain, &t.name) {
            return Err(PddlError::semantic(pos, format!("cyclic type hierarchy at `{}`", t.name)));
        }
    }
    for c in &domain.constants {
        check_type(&c.ty, &format!("constant `{}`", c.name))?;
    }
    let mut seen = HashSet::new();
    for c in &domain.constants {
        if !seen.insert(&c.name) {
            return Err(PddlError::semantic(pos, format!("duplicate constant `{}`", c.name)));
        }
    }
    for (kind, sigs) in [("predicate", &domain.predicates), ("function", &domain.functions)] {
        let mut seen = HashSet::new();
        for s in sigs {
            if !seen.insert(&s.name) {
                return Err(PddlError::semantic(pos, format!("duplicate {kind} `{}`", s.name)));
            }
            check_params(&s.params, pos)?;
            for p in &s.params {
                check_type(&p.ty, &format!("{kind} `{}`", s.name))?;
            }
        }
    }
    Ok(())
}

fn type_cycle(domain: &DomainModel, start: &str) -> bool {
    let mut current = start;
    for _ in 0..=domain.types.len() {
        match domain.types.iter().find(|t| t.name == current) {
            Some(t) if t.ty == start => return true,
            Some(t) => current = &t.ty,
            None => return false,
        }
    }
    true
}

fn check_params(params: &[TypedName], pos: Pos) -> Result<()> {
    let mut seen = HashSet::new();
    for p in params {
        if !seen.insert(&p.name) {
            return Err(PddlError::semantic(pos, format!("duplicate parameter `?{}`", p.name)));
        }
    }
    Ok(())
}

struct OperatorContext<'a> {
    domain: &'a DomainModel,
    params: &'a [TypedName],
    durative: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ExprContext {
    Duration,
    Effect,
    Metric,
}

fn operator(e: &SExpr, domain: &DomainModel) -> Result<Operator> {
    let list = e.as_list().unwrap_or_default();
    let durative = e.head() == Some(":durative-action");
    let name = symbol_at(list, 1, e.pos(), "an operator name")?.to_string();

    let mut params = Vec::new();
    let mut duration = None;
    let mut condition = None;
    let mut effect = None;
    let mut i = 2;
    while i < list.len() {
        let key =
            list[i].as_symbol().ok_or_else(|| PddlError::syntax(list[i].pos(), "expected an operator keyword"))?;
        let value =
            list.get(i + 1).ok_or_else(|| PddlError::syntax(list[i].pos(), format!("missing value for `{key}`")))?;
        match (key, durative) {
            (":parameters", _) => {
                params = typed_list(list_of(value, "a parameter list")?, true)?;
            }
            (":duration", true) => duration = Some(value),
            (":condition", true) | (":precondition", false) => condition = Some(value),
            (":effect", _) => effect = Some(value),
            _ => return Err(PddlError::syntax(list[i].pos(), format!("unexpected `{key}` in operator `{name}`"))),
        }
        i += 2;
    }
    check_params(&params, e.pos())?;
    for p in &params {
        if !domain.has_type(&p.ty) {
            return Err(PddlError::semantic(
                e.pos(),
                format!("unknown type `{}` for parameter `?{}` of `{name}`", p.ty, p.name),
            ));
        }
    }

    let ctx = OperatorContext { domain, params: &params, durative };
    let duration = match (durative, duration) {
        (true, Some(d)) => ctx.duration(d)?,
        (true, None) => return Err(PddlError::syntax(e.pos(), format!("`{name}` has no `:duration`"))),
        (false, _) => Expr::Number(Decimal::ZERO),
    };
    let mut conditions = Vec::new();
    if let Some(c) = condition {
        ctx.condition(c, None, &mut conditions)?;
    }
    let mut effects = Vec::new();
    if let Some(eff) = effect {
        ctx.effect(eff, None, &mut effects)?;
    }
    for add in &effects {
        if let EffectKind::Add(a) = &add.kind {
            let clash =
                effects.iter().any(|d| d.time == add.time && matches!(&d.kind, EffectKind::Delete(x) if x == a));
            if clash {
                return Err(PddlError::semantic(
                    e.pos(),
                    format!("`{name}` both adds and deletes `{}` at the same time point", atom_text(a)),
                ));
            }
        }
    }
    Ok(Operator { name, params: params.clone(), durative, duration, conditions, effects })
}

fn atom_text(a: &Atom) -> String {
    let mut s = format!("({}", a.predicate);
    for t in &a.args {
        s.push(' ');
        s.push_str(&t.to_string());
    }
    s.push(')');
    s
}

/// Error for formula heads outside the subset, or `None` if the head is not a
/// recognised connective.
fn unsupported_formula(head: &str, pos: Pos) -> Option<PddlError> {
    let construct = match head {
        "not" => "negative-preconditions",
        "or" | "imply" => "disjunctive-preconditions",
        "forall" => "universal-preconditions",
        "exists" => "existential-preconditions",
        "=" => "equality",
        "<" | ">" | "<=" | ">=" => "numeric-conditions",
        "preference" => "preferences",
        "when" => "conditional-effects",
        _ => return None,
    };
    Some(PddlError::unsupported(pos, construct))
}

impl OperatorContext<'_> {
    fn term(&self, e: &SExpr) -> Result<(Term, String)> {
        let sym = e.as_symbol().ok_or_else(|| PddlError::syntax(e.pos(), "expected a variable or constant"))?;
        if let Some(var) = sym.strip_prefix('?') {
            let p = self
                .params
                .iter()
                .find(|p| p.name == var)
                .ok_or_else(|| PddlError::semantic(e.pos(), format!("undeclared variable `{sym}`")))?;
            Ok((Term::Var(var.to_string()), p.ty.clone()))
        } else {
            let c = self
                .domain
                .constants
                .iter()
                .find(|c| c.name == sym)
                .ok_or_else(|| PddlError::semantic(e.pos(), format!("unknown constant `{sym}`")))?;
            Ok((Term::Const(sym.to_string()), c.ty.clone()))
        }
    }

    fn args(&self, e: &SExpr, decl: &Signature, kind: &str) -> Result<Vec<Term>> {
        let list = e.as_list().unwrap_or_default();
        if list.len() - 1 != decl.params.len() {
            return Err(PddlError::semantic(
                e.pos(),
                format!("{kind} `{}` expects {} arguments, got {}", decl.name, decl.params.len(), list.len() - 1),
            ));
        }
        let mut args = Vec::new();
        for (arg, param) in list[1..].iter().zip(&decl.params) {
            let (term, ty) = self.term(arg)?;
            if !self.domain.is_subtype(&ty, &param.ty) {
                return Err(PddlError::semantic(
                    arg.pos(),
                    format!("`{term}` of type `{ty}` does not fit `{}` of {kind} `{}`", param.ty, decl.name),
                ));
            }
            args.push(term);
        }
        Ok(args)
    }

    fn atom(&self, e: &SExpr) -> Result<Atom> {
        let name = e.head().ok_or_else(|| PddlError::syntax(e.pos(), "expected an atom"))?;
        let decl = self
            .domain
            .predicate(name)
            .ok_or_else(|| PddlError::semantic(e.pos(), format!("unknown predicate `{name}`")))?;
        Ok(Atom { predicate: name.to_string(), args: self.args(e, decl, "predicate")? })
    }

    fn fluent(&self, e: &SExpr) -> Result<FluentRef> {
        let name = e.head().ok_or_else(|| PddlError::syntax(e.pos(), "expected a function term"))?;
        let decl = self
            .domain
            .function(name)
            .ok_or_else(|| PddlError::semantic(e.pos(), format!("unknown function `{name}`")))?;
        Ok(FluentRef { function: name.to_string(), args: self.args(e, decl, "function")? })
    }

    fn duration(&self, e: &SExpr) -> Result<Expr> {
        let list = list_of(e, "a duration constraint")?;
        match e.head() {
            Some("=") => {}
            Some("<=" | ">=" | "<" | ">" | "and") => {
                return Err(PddlError::unsupported(e.pos(), "duration-inequalities"))
            }
            _ => return Err(PddlError::syntax(e.pos(), "expected `(= ?duration <expr>)`")),
        }
        if list.len() != 3 || list[1].as_symbol() != Some("?duration") {
            return Err(PddlError::syntax(e.pos(), "expected `(= ?duration <expr>)`"));
        }
        self.expr(&list[2], ExprContext::Duration)
    }

    fn expr(&self, e: &SExpr, ctx: ExprContext) -> Result<Expr> {
        parse_expr(e, ctx, &mut |f| self.fluent(f))
    }

    fn condition(&self, e: &SExpr, timing: Option<Timing>, out: &mut Vec<Condition>) -> Result<()> {
        let list = list_of(e, "a condition")?;
        if list.is_empty() {
            return Ok(());
        }
        let head = e.head().unwrap_or("");
        if head == "and" {
            for c in &list[1..] {
                self.condition(c, timing, out)?;
            }
            return Ok(());
        }
        if self.durative && timing.is_none() {
            let t = match (head, list.get(1).and_then(SExpr::as_symbol)) {
                ("at", Some("start")) => Timing::AtStart,
                ("at", Some("end")) => Timing::AtEnd,
                ("over", Some("all")) => Timing::OverAll,
                _ => {
                    if let Some(err) = unsupported_formula(head, e.pos()) {
                        return Err(err);
                    }
                    return Err(PddlError::syntax(
                        e.pos(),
                        "durative conditions need `at start`, `at end` or `over all`",
                    ));
                }
            };
            if list.len() != 3 {
                return Err(PddlError::syntax(e.pos(), "timed condition takes one formula"));
            }
            return self.condition(&list[2], Some(t), out);
        }
        if let Some(err) = unsupported_formula(head, e.pos()) {
            return Err(err);
        }
        let atom = self.atom(e)?;
        out.push(Condition { timing: timing.unwrap_or(Timing::AtStart), atom });
        Ok(())
    }

    fn effect(&self, e: &SExpr, time: Option<EffectTime>, out: &mut Vec<Effect>) -> Result<()> {
        let list = list_of(e, "an effect")?;
        if list.is_empty() {
            return Ok(());
        }
        let head = e.head().unwrap_or("");
        match head {
            "and" => {
                for c in &list[1..] {
                    self.effect(c, time, out)?;
                }
                return Ok(());
            }
            "when" => return Err(PddlError::unsupported(e.pos(), "conditional-effects")),
            "forall" => return Err(PddlError::unsupported(e.pos(), "universal-effects")),
            "scale-up" | "scale-down" => return Err(PddlError::unsupported(e.pos(), head.to_string())),
            _ => {}
        }
        if self.durative && time.is_none() {
            let t = match (head, list.get(1).and_then(SExpr::as_symbol)) {
                ("at", Some("start")) => EffectTime::Start,
                ("at", Some("end")) => EffectTime::End,
                ("increase" | "decrease", _) if contains_symbol(e, "#t") => {
                    return Err(PddlError::unsupported(e.pos(), "continuous-effects"))
                }
                _ => return Err(PddlError::syntax(e.pos(), "durative effects need `at start` or `at end`")),
            };
            if list.len() != 3 {
                return Err(PddlError::syntax(e.pos(), "timed effect takes one formula"));
            }
            return self.effect(&list[2], Some(t), out);
        }
        let time = time.unwrap_or(EffectTime::Start);
        let kind = match head {
            "not" => {
                if list.len() != 2 {
                    return Err(PddlError::syntax(e.pos(), "`not` takes one atom"));
                }
                EffectKind::Delete(self.atom(&list[1])?)
            }
            "increase" | "decrease" | "assign" => {
                if contains_symbol(e, "#t") {
                    return Err(PddlError::unsupported(e.pos(), "continuous-effects"));
                }
                if list.len() != 3 {
                    return Err(PddlError::syntax(e.pos(), format!("`{head}` takes two arguments")));
                }
                let op = match head {
                    "increase" => NumericOp::Increase,
                    "decrease" => NumericOp::Decrease,
                    _ => NumericOp::Assign,
                };
                EffectKind::Numeric {
                    op,
                    target: self.fluent(&list[1])?,
                    value: self.expr(&list[2], ExprContext::Effect)?,
                }
            }
            _ => EffectKind::Add(self.atom(e)?),
        };
        out.push(Effect { time, kind });
        Ok(())
    }
}

fn contains_symbol(e: &SExpr, sym: &str) -> bool {
    match e {
        SExpr::Symbol(s, _) => s == sym,
        SExpr::List(items, _) => items.iter().any(|i| contains_symbol(i, sym)),
    }
}

fn parse_expr(e: &SExpr, ctx: ExprContext, fluent: &mut dyn FnMut(&SExpr) -> Result<FluentRef>) -> Result<Expr> {
    match e {
        SExpr::Symbol(s, pos) => {
            if let Ok(n) = s.parse::<Decimal>() {
                return Ok(Expr::Number(n));
            }
            match (s.as_str(), ctx) {
                ("?duration", ExprContext::Effect) => Ok(Expr::Duration),
                ("total-time", ExprContext::Metric) => Ok(Expr::TotalTime),
                ("#t", _) => Err(PddlError::unsupported(*pos, "continuous-effects")),
                _ => Err(PddlError::syntax(*pos, format!("unexpected `{s}` in numeric expression"))),
            }
        }
        SExpr::List(items, pos) => {
            let head = e.head().unwrap_or("");
            let op = match head {
                "+" => Some(BinaryOp::Add),
                "-" => Some(BinaryOp::Sub),
                "*" => Some(BinaryOp::Mul),
                "/" => Some(BinaryOp::Div),
                _ => None,
            };
            if let Some(op) = op {
                let operands = items[1..].iter().map(|i| parse_expr(i, ctx, fluent)).collect::<Result<Vec<_>>>()?;
                return match (op, operands.len()) {
                    (BinaryOp::Sub, 1) => Ok(Expr::Neg(Box::new(operands.into_iter().next().unwrap()))),
                    (_, n) if n >= 2 => {
                        let mut it = operands.into_iter();
                        let first = it.next().unwrap();
                        Ok(it.fold(first, |acc, x| Expr::Binary(op, Box::new(acc), Box::new(x))))
                    }
                    _ => Err(PddlError::syntax(*pos, format!("`{head}` needs two operands"))),
                };
            }
            if head == "total-time" && ctx == ExprContext::Metric && items.len() == 1 {
                return Ok(Expr::TotalTime);
            }
            Ok(Expr::Fluent(fluent(e)?))
        }
    }
}

/// Parses a metric such as `minimize (+ (total-time) (fuel t1))` against a
/// problem's objects.
pub fn parse_metric(text: &str, domain: &DomainModel, problem: &ProblemModel) -> Result<MetricSpec> {
    let object_types: HashMap<String, String> =
        domain.constants.iter().chain(&problem.objects).map(|o| (o.name.clone(), o.ty.clone())).collect();
    let ctx = ProblemContext { domain, object_types: &object_types };
    let section = read_one(&format!("(:metric {text})"))?;
    ctx.metric(&section)
}

struct ProblemContext<'a> {
    domain: &'a DomainModel,
    object_types: &'a HashMap<String, String>,
}

impl ProblemContext<'_> {
    fn ground_args(&self, e: &SExpr, decl: &Signature, kind: &str) -> Result<Vec<String>> {
        let list = e.as_list().unwrap_or_default();
        if list.len() - 1 != decl.params.len() {
            return Err(PddlError::semantic(
                e.pos(),
                format!("{kind} `{}` expects {} arguments, got {}", decl.name, decl.params.len(), list.len() - 1),
            ));
        }
        let mut args = Vec::new();
        for (arg, param) in list[1..].iter().zip(&decl.params) {
            let name = arg
                .as_symbol()
                .filter(|s| !s.starts_with('?'))
                .ok_or_else(|| PddlError::syntax(arg.pos(), "expected an object name"))?;
            let ty = self
                .object_types
                .get(name)
                .ok_or_else(|| PddlError::semantic(arg.pos(), format!("unknown object `{name}`")))?;
            if !self.domain.is_subtype(ty, &param.ty) {
                return Err(PddlError::semantic(
                    arg.pos(),
                    format!("object `{name}` of type `{ty}` does not fit `{}` of {kind} `{}`", param.ty, decl.name),
                ));
            }
            args.push(name.to_string());
        }
        Ok(args)
    }

    fn ground_atom(&self, e: &SExpr) -> Result<GroundAtom> {
        let name = e.head().ok_or_else(|| PddlError::syntax(e.pos(), "expected a ground atom"))?;
        if let Some(err) = unsupported_formula(name, e.pos()) {
            return Err(err);
        }
        let decl = self
            .domain
            .predicate(name)
            .ok_or_else(|| PddlError::semantic(e.pos(), format!("unknown predicate `{name}`")))?;
        Ok(GroundAtom { predicate: name.to_string(), args: self.ground_args(e, decl, "predicate")? })
    }

    fn ground_fluent(&self, e: &SExpr) -> Result<FluentRef> {
        let name = e.head().ok_or_else(|| PddlError::syntax(e.pos(), "expected a function term"))?;
        let decl = self
            .domain
            .function(name)
            .ok_or_else(|| PddlError::semantic(e.pos(), format!("unknown function `{name}`")))?;
        let args = self.ground_args(e, decl, "function")?;
        Ok(FluentRef { function: name.to_string(), args: args.into_iter().map(Term::Const).collect() })
    }

    fn init_item(&self, e: &SExpr, problem: &mut ProblemModel) -> Result<()> {
        let list = list_of(e, "an initial fact")?;
        match e.head() {
            Some("=") => {
                if list.len() != 3 {
                    return Err(PddlError::syntax(e.pos(), "expected `(= (f ...) <number>)`"));
                }
                let f = self.ground_fluent(&list[1])?;
                let value = list[2]
                    .as_symbol()
                    .and_then(|s| s.parse::<Decimal>().ok())
                    .ok_or_else(|| PddlError::syntax(list[2].pos(), "expected a number"))?;
                problem.numeric_init.push(NumericInit {
                    function: f.function,
                    args: f.args.into_iter().map(|t| t.to_string()).collect(),
                    value,
                });
            }
            Some("at")
                if list.len() == 3
                    && list[2].as_list().is_some()
                    && list[1].as_symbol().is_some_and(|s| s.parse::<Decimal>().is_ok()) =>
            {
                let time: Decimal = list[1].as_symbol().unwrap().parse().unwrap();
                if time.is_negative() {
                    return Err(PddlError::semantic(list[1].pos(), "timed literal before time 0"));
                }
                let (atom, positive) = if list[2].head() == Some("not") {
                    let inner = list[2].as_list().unwrap();
                    if inner.len() != 2 {
                        return Err(PddlError::syntax(list[2].pos(), "`not` takes one atom"));
                    }
                    (self.ground_atom(&inner[1])?, false)
                } else {
                    (self.ground_atom(&list[2])?, true)
                };
                problem.timed_literals.push(TimedLiteral { time, atom, positive });
            }
            Some("not") => return Err(PddlError::syntax(e.pos(), "negative literals are implicit in `:init`")),
            _ => {
                let atom = self.ground_atom(e)?;
                if !problem.init.contains(&atom) {
                    problem.init.push(atom);
                }
            }
        }
        Ok(())
    }

    fn goal(&self, e: &SExpr, out: &mut Vec<GroundAtom>) -> Result<()> {
        let list = list_of(e, "a goal")?;
        if list.is_empty() {
            return Ok(());
        }
        if e.head() == Some("and") {
            for g in &list[1..] {
                self.goal(g, out)?;
            }
            return Ok(());
        }
        let atom = self.ground_atom(e)?;
        if !out.contains(&atom) {
            out.push(atom);
        }
        Ok(())
    }

    fn metric(&self, section: &SExpr) -> Result<MetricSpec> {
        let list = section.as_list().unwrap_or_default();
        if list.len() != 3 {
            return Err(PddlError::syntax(section.pos(), "expected `(:metric minimize|maximize <expr>)`"));
        }
        let direction = match list[1].as_symbol() {
            Some("minimize") => Optimization::Minimize,
            Some("maximize") => Optimization::Maximize,
            _ => return Err(PddlError::syntax(list[1].pos(), "expected `minimize` or `maximize`")),
        };
        let expr = parse_expr(&list[2], ExprContext::Metric, &mut |f| self.ground_fluent(f))?;
        Ok(MetricSpec { direction, expr })
    }
}
