//! Deterministic PDDL emitter: one construct per line, two-space indent.

use std::fmt::Write;

use super::*;

fn typed(items: &[TypedName], var: bool) -> String {
    items
        .iter()
        .map(|t| {
            let q = if var { "?" } else { "" };
            format!("{q}{} - {}", t.name, t.ty)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn signature(s: &Signature) -> String {
    if s.params.is_empty() {
        format!("({})", s.name)
    } else {
        format!("({} {})", s.name, typed(&s.params, true))
    }
}

fn terms(args: &[Term]) -> String {
    args.iter().map(|t| format!(" {t}")).collect()
}

fn atom(a: &Atom) -> String {
    format!("({}{})", a.predicate, terms(&a.args))
}

fn fluent(f: &FluentRef) -> String {
    format!("({}{})", f.function, terms(&f.args))
}

/// An expression in PDDL prefix syntax.
pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Number(n) => n.to_string(),
        Expr::Fluent(f) => fluent(f),
        Expr::Duration => "?duration".into(),
        Expr::TotalTime => "(total-time)".into(),
        Expr::Neg(inner) => format!("(- {})", print_expr(inner)),
        Expr::Binary(op, l, r) => format!("({} {} {})", op.symbol(), print_expr(l), print_expr(r)),
    }
}

fn effect_body(kind: &EffectKind) -> String {
    match kind {
        EffectKind::Add(a) => atom(a),
        EffectKind::Delete(a) => format!("(not {})", atom(a)),
        EffectKind::Numeric { op, target, value } => {
            format!("({} {} {})", op.keyword(), fluent(target), print_expr(value))
        }
    }
}

fn section(out: &mut String, keyword: &str, lines: impl IntoIterator<Item = String>) {
    let lines: Vec<String> = lines.into_iter().collect();
    if lines.is_empty() {
        return;
    }
    let _ = writeln!(out, "  ({keyword}");
    for l in lines {
        let _ = writeln!(out, "    {l}");
    }
    out.push_str("  )\n");
}

fn operator(out: &mut String, op: &Operator) {
    let kw = if op.durative { ":durative-action" } else { ":action" };
    let _ = writeln!(out, "  ({kw} {}", op.name);
    let _ = writeln!(out, "    :parameters ({})", typed(&op.params, true));
    if op.durative {
        let _ = writeln!(out, "    :duration (= ?duration {})", print_expr(&op.duration));
    }
    let cond_kw = if op.durative { ":condition" } else { ":precondition" };
    let _ = writeln!(out, "    {cond_kw} (and");
    for c in &op.conditions {
        let body = atom(&c.atom);
        let line = match (op.durative, c.timing) {
            (false, _) => body,
            (true, Timing::AtStart) => format!("(at start {body})"),
            (true, Timing::OverAll) => format!("(over all {body})"),
            (true, Timing::AtEnd) => format!("(at end {body})"),
        };
        let _ = writeln!(out, "      {line}");
    }
    out.push_str("    )\n");
    out.push_str("    :effect (and\n");
    for e in &op.effects {
        let body = effect_body(&e.kind);
        let line = match (op.durative, e.time) {
            (false, _) => body,
            (true, EffectTime::Start) => format!("(at start {body})"),
            (true, EffectTime::End) => format!("(at end {body})"),
        };
        let _ = writeln!(out, "      {line}");
    }
    out.push_str("    )\n");
    out.push_str("  )\n");
}

pub fn print_domain(d: &DomainModel) -> String {
    let mut out = format!("(define (domain {})\n", d.name);
    if !d.requirements.is_empty() {
        let reqs: Vec<String> = d.requirements.iter().map(|r| format!(":{r}")).collect();
        let _ = writeln!(out, "  (:requirements {})", reqs.join(" "));
    }
    section(&mut out, ":types", d.types.iter().map(|t| format!("{} - {}", t.name, t.ty)));
    section(&mut out, ":constants", d.constants.iter().map(|t| format!("{} - {}", t.name, t.ty)));
    section(&mut out, ":predicates", d.predicates.iter().map(signature));
    section(&mut out, ":functions", d.functions.iter().map(signature));
    for op in &d.operators {
        operator(&mut out, op);
    }
    out.push_str(")\n");
    out
}

pub fn print_problem(p: &ProblemModel) -> String {
    let mut out = format!("(define (problem {})\n", p.name);
    let _ = writeln!(out, "  (:domain {})", p.domain);
    section(&mut out, ":objects", p.objects.iter().map(|t| format!("{} - {}", t.name, t.ty)));
    let mut init: Vec<String> = p.init.iter().map(ToString::to_string).collect();
    init.extend(p.numeric_init.iter().map(|n| {
        let args: String = n.args.iter().map(|a| format!(" {a}")).collect();
        format!("(= ({}{args}) {})", n.function, n.value)
    }));
    let mut tils: Vec<&TimedLiteral> = p.timed_literals.iter().collect();
    tils.sort_by_key(|t| t.time);
    init.extend(tils.into_iter().map(|t| {
        if t.positive {
            format!("(at {} {})", t.time, t.atom)
        } else {
            format!("(at {} (not {}))", t.time, t.atom)
        }
    }));
    out.push_str("  (:init\n");
    for l in init {
        let _ = writeln!(out, "    {l}");
    }
    out.push_str("  )\n");
    out.push_str("  (:goal (and\n");
    for g in &p.goal {
        let _ = writeln!(out, "    {g}");
    }
    out.push_str("  ))\n");
    if let Some(m) = &p.metric {
        let dir = match m.direction {
            Optimization::Minimize => "minimize",
            Optimization::Maximize => "maximize",
        };
        let _ = writeln!(out, "  (:metric {dir} {})", print_expr(&m.expr));
    }
    out.push_str(")\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prints_instantaneous_action_and_reparses() {
        let text = "(define (domain s) (:requirements :strips)
            (:predicates (p ?x) (q))
            (:functions (cost))
            (:action a :parameters (?x) :precondition (p ?x)
              :effect (and (q) (not (p ?x)) (increase (cost) 2))))";
        let d = parse_domain(text).unwrap();
        let printed = print_domain(&d);
        assert!(printed.contains("  (:action a\n"));
        assert!(printed.contains("      (increase (cost) 2.0)\n"));
        assert_eq!(parse_domain(&printed).unwrap(), d);
    }

    #[test]
    fn tils_printed_sorted_in_at_form() {
        let d = parse_domain("(define (domain s) (:predicates (w)))").unwrap();
        let p =
            parse_problem("(define (problem x) (:domain s) (:init (at 20 (not (w))) (at 10 (w))) (:goal (and)))", &d)
                .unwrap();
        let printed = print_problem(&p);
        let a = printed.find("(at 10.0 (w))").unwrap();
        let b = printed.find("(at 20.0 (not (w)))").unwrap();
        assert!(a < b);
        assert_eq!(parse_problem(&printed, &d).unwrap(), p);
    }
}
