//! Grounding: type-consistent instantiation of every operator, fact interning,
//! and the ground initial state.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::decimal::Decimal;
use crate::pddl::{
    Atom, DomainModel, EffectKind, EffectTime, Expr, FluentRef, GroundAtom, NumericOp, Operator, ProblemModel, Term,
    Timing,
};

pub const DEFAULT_ACTION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FluentId(pub u32);

/// Dense bit set over the fact universe of one task.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FactSet {
    words: Vec<u64>,
}

impl FactSet {
    pub fn with_capacity(facts: usize) -> Self {
        FactSet { words: vec![0; facts.div_ceil(64)] }
    }

    pub fn contains(&self, f: Fact) -> bool {
        let i = f.0 as usize;
        self.words.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn insert(&mut self, f: Fact) {
        let i = f.0 as usize;
        if self.words.len() <= i / 64 {
            self.words.resize(i / 64 + 1, 0);
        }
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, f: Fact) {
        let i = f.0 as usize;
        if let Some(w) = self.words.get_mut(i / 64) {
            *w &= !(1 << (i % 64));
        }
    }

    pub fn contains_all(&self, facts: &[Fact]) -> bool {
        facts.iter().all(|f| self.contains(*f))
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = Fact> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(wi, w)| (0..64).filter(move |b| w & (1 << b) != 0).map(move |b| Fact((wi * 64 + b) as u32)))
    }
}

/// A world state: true facts, numeric fluent values, and the time it holds at.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State {
    pub facts: FactSet,
    pub fluents: Vec<Option<Decimal>>,
    pub time: Decimal,
}

impl State {
    /// Equality of facts and numeric values, ignoring the timestamp.
    pub fn same_situation(&self, other: &State) -> bool {
        self.facts == other.facts && self.fluents == other.fluents
    }

    pub fn at_time(mut self, time: Decimal) -> State {
        self.time = time;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumericUpdate {
    pub fluent: FluentId,
    pub op: NumericOp,
    pub value: Decimal,
}

/// A fully instantiated operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub durative: bool,
    pub duration: Decimal,
    pub cond_start: Vec<Fact>,
    pub cond_overall: Vec<Fact>,
    pub cond_end: Vec<Fact>,
    pub add_start: Vec<Fact>,
    pub del_start: Vec<Fact>,
    pub add_end: Vec<Fact>,
    pub del_end: Vec<Fact>,
    pub num_start: Vec<NumericUpdate>,
    pub num_end: Vec<NumericUpdate>,
}

impl GroundAction {
    pub fn is_instantaneous(&self) -> bool {
        self.duration == Decimal::ZERO
    }

    pub fn conditions(&self) -> impl Iterator<Item = Fact> + '_ {
        self.cond_start.iter().chain(&self.cond_overall).chain(&self.cond_end).copied()
    }

    pub fn effects(&self) -> impl Iterator<Item = Fact> + '_ {
        self.add_start.iter().chain(&self.del_start).chain(&self.add_end).chain(&self.del_end).copied()
    }

    pub fn numeric_targets(&self) -> impl Iterator<Item = FluentId> + '_ {
        self.num_start.iter().chain(&self.num_end).map(|u| u.fluent)
    }

    /// `(name arg1 arg2 ...)`
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTil {
    pub time: Decimal,
    pub fact: Fact,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundError {
    #[error("grounding exceeds the cap of {cap} actions")]
    CapExceeded { cap: usize },
    #[error("duration of `{operator}` depends on non-static function `{function}`")]
    DynamicDuration { operator: String, function: String },
    #[error("numeric effect of `{operator}` depends on non-static function `{function}`")]
    DynamicEffect { operator: String, function: String },
    #[error("negative duration for `{action}`")]
    NegativeDuration { action: String },
}

/// The grounded planning task. Holds the source models so compiled or
/// re-rooted variants can be printed for external planners.
#[derive(Debug, Clone)]
pub struct GroundTask {
    domain: DomainModel,
    problem: ProblemModel,
    facts: Vec<GroundAtom>,
    fact_index: HashMap<GroundAtom, Fact>,
    fluents: Vec<(String, Vec<String>)>,
    fluent_index: HashMap<(String, Vec<String>), FluentId>,
    actions: Vec<GroundAction>,
    action_index: HashMap<(String, Vec<String>), usize>,
    init: State,
    goal: Vec<Fact>,
    tils: Vec<GroundTil>,
}

impl GroundTask {
    pub fn new(domain: &DomainModel, problem: &ProblemModel) -> Result<Self, GroundError> {
        Self::with_cap(domain, problem, DEFAULT_ACTION_CAP)
    }

    pub fn with_cap(domain: &DomainModel, problem: &ProblemModel, cap: usize) -> Result<Self, GroundError> {
        Grounder::new(domain, problem, cap).run()
    }

    pub fn domain(&self) -> &DomainModel {
        &self.domain
    }

    pub fn problem(&self) -> &ProblemModel {
        &self.problem
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn action(&self, idx: usize) -> &GroundAction {
        &self.actions[idx]
    }

    pub fn find_action(&self, name: &str, args: &[String]) -> Option<usize> {
        self.action_index.get(&(name.to_string(), args.to_vec())).copied()
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    pub fn fact(&self, f: Fact) -> &GroundAtom {
        &self.facts[f.0 as usize]
    }

    pub fn fact_id(&self, atom: &GroundAtom) -> Option<Fact> {
        self.fact_index.get(atom).copied()
    }

    pub fn fluent_count(&self) -> usize {
        self.fluents.len()
    }

    pub fn fluent(&self, id: FluentId) -> &(String, Vec<String>) {
        &self.fluents[id.0 as usize]
    }

    pub fn fluent_id(&self, function: &str, args: &[String]) -> Option<FluentId> {
        self.fluent_index.get(&(function.to_string(), args.to_vec())).copied()
    }

    /// Initial state with any timed literals at time 0 already applied.
    pub fn initial_state(&self) -> &State {
        &self.init
    }

    pub fn goal(&self) -> &[Fact] {
        &self.goal
    }

    /// Timed literals strictly after time 0, sorted by time.
    pub fn timed_literals(&self) -> &[GroundTil] {
        &self.tils
    }

    /// Same task with a different goal.
    pub fn with_goal(&self, goal: Vec<Fact>) -> GroundTask {
        let mut t = self.clone();
        t.problem.goal = goal.iter().map(|f| self.fact(*f).clone()).collect();
        t.goal = goal;
        t
    }

    pub fn goal_satisfied(&self, state: &State) -> bool {
        state.facts.contains_all(&self.goal)
    }

    /// Facts of a state rendered as atoms, in fact-id order.
    pub fn atoms(&self, state: &State) -> Vec<GroundAtom> {
        state.facts.iter().map(|f| self.fact(f).clone()).collect()
    }

    pub fn empty_facts(&self) -> FactSet {
        FactSet::with_capacity(self.facts.len())
    }

    /// Evaluates the problem's `:metric` expression in `state` with the given makespan.
    pub fn metric_value(&self, state: &State, makespan: Decimal) -> Option<Decimal> {
        let metric = self.problem.metric.as_ref()?;
        self.eval_in_state(&metric.expr, state, makespan)
    }

    pub fn eval_in_state(&self, expr: &Expr, state: &State, makespan: Decimal) -> Option<Decimal> {
        expr.eval(
            &mut |f: &FluentRef| {
                let args: Vec<String> = f.args.iter().map(|t| t.to_string()).collect();
                let id = self.fluent_id(&f.function, &args)?;
                state.fluents[id.0 as usize]
            },
            None,
            Some(makespan),
        )
    }
}

struct Grounder<'a> {
    domain: &'a DomainModel,
    problem: &'a ProblemModel,
    cap: usize,
    objects: Vec<(String, String)>,
    static_predicates: HashSet<String>,
    static_functions: HashSet<String>,
    init_facts: HashSet<GroundAtom>,
    static_values: HashMap<(String, Vec<String>), Decimal>,
    facts: Vec<GroundAtom>,
    fact_index: HashMap<GroundAtom, Fact>,
    fluents: Vec<(String, Vec<String>)>,
    fluent_index: HashMap<(String, Vec<String>), FluentId>,
}

impl<'a> Grounder<'a> {
    fn new(domain: &'a DomainModel, problem: &'a ProblemModel, cap: usize) -> Self {
        let mut objects: Vec<(String, String)> =
            domain.constants.iter().map(|c| (c.name.clone(), c.ty.clone())).collect();
        objects.extend(problem.objects.iter().map(|o| (o.name.clone(), o.ty.clone())));

        let mut dynamic_predicates = HashSet::new();
        let mut dynamic_functions = HashSet::new();
        for op in &domain.operators {
            for e in &op.effects {
                match &e.kind {
                    EffectKind::Add(a) | EffectKind::Delete(a) => {
                        dynamic_predicates.insert(a.predicate.clone());
                    }
                    EffectKind::Numeric { target, .. } => {
                        dynamic_functions.insert(target.function.clone());
                    }
                }
            }
        }
        for til in &problem.timed_literals {
            dynamic_predicates.insert(til.atom.predicate.clone());
        }
        let static_predicates =
            domain.predicates.iter().map(|p| p.name.clone()).filter(|p| !dynamic_predicates.contains(p)).collect();
        let static_functions =
            domain.functions.iter().map(|p| p.name.clone()).filter(|p| !dynamic_functions.contains(p)).collect();
        let static_values =
            problem.numeric_init.iter().map(|n| ((n.function.clone(), n.args.clone()), n.value)).collect();

        Grounder {
            domain,
            problem,
            cap,
            objects,
            static_predicates,
            static_functions,
            init_facts: problem.init.iter().cloned().collect(),
            static_values,
            facts: Vec::new(),
            fact_index: HashMap::new(),
            fluents: Vec::new(),
            fluent_index: HashMap::new(),
        }
    }

    fn intern(&mut self, atom: GroundAtom) -> Fact {
        if let Some(f) = self.fact_index.get(&atom) {
            return *f;
        }
        let f = Fact(self.facts.len() as u32);
        self.fact_index.insert(atom.clone(), f);
        self.facts.push(atom);
        f
    }

    fn intern_fluent(&mut self, function: &str, args: Vec<String>) -> FluentId {
        let key = (function.to_string(), args);
        if let Some(id) = self.fluent_index.get(&key) {
            return *id;
        }
        let id = FluentId(self.fluents.len() as u32);
        self.fluent_index.insert(key.clone(), id);
        self.fluents.push(key);
        id
    }

    fn run(mut self) -> Result<GroundTask, GroundError> {
        for atom in &self.problem.init {
            self.intern(atom.clone());
        }
        for g in &self.problem.goal {
            self.intern(g.clone());
        }
        for til in &self.problem.timed_literals {
            self.intern(til.atom.clone());
        }
        for n in &self.problem.numeric_init {
            self.intern_fluent(&n.function, n.args.clone());
        }

        let mut actions = Vec::new();
        for op in &self.domain.operators {
            self.check_static_numeric(op)?;
            for binding in self.bindings(op)? {
                if let Some(action) = self.instantiate(op, &binding)? {
                    actions.push(action);
                    if actions.len() > self.cap {
                        return Err(GroundError::CapExceeded { cap: self.cap });
                    }
                }
            }
        }
        actions.sort_by(|a, b| (&a.name, &a.args).cmp(&(&b.name, &b.args)));
        let action_index = actions.iter().enumerate().map(|(i, a)| ((a.name.clone(), a.args.clone()), i)).collect();

        let mut facts = FactSet::with_capacity(self.facts.len());
        for atom in &self.problem.init {
            facts.insert(self.fact_index[atom]);
        }
        let mut fluents = vec![None; self.fluents.len()];
        for n in &self.problem.numeric_init {
            let id = self.fluent_index[&(n.function.clone(), n.args.clone())];
            fluents[id.0 as usize] = Some(n.value);
        }
        let mut tils = Vec::new();
        for til in &self.problem.timed_literals {
            let fact = self.fact_index[&til.atom];
            if til.time == Decimal::ZERO {
                if til.positive {
                    facts.insert(fact);
                } else {
                    facts.remove(fact);
                }
            } else {
                tils.push(GroundTil { time: til.time, fact, positive: til.positive });
            }
        }
        let goal = self.problem.goal.iter().map(|g| self.fact_index[g]).collect();

        Ok(GroundTask {
            domain: self.domain.clone(),
            problem: self.problem.clone(),
            facts: self.facts,
            fact_index: self.fact_index,
            fluents: self.fluents,
            fluent_index: self.fluent_index,
            actions,
            action_index,
            init: State { facts, fluents, time: Decimal::ZERO },
            goal,
            tils,
        })
    }

    fn check_static_numeric(&self, op: &Operator) -> Result<(), GroundError> {
        let mut refs = Vec::new();
        op.duration.fluents(&mut refs);
        if let Some(f) = refs.iter().find(|f| !self.static_functions.contains(&f.function)) {
            return Err(GroundError::DynamicDuration { operator: op.name.clone(), function: f.function.clone() });
        }
        for e in &op.effects {
            if let EffectKind::Numeric { value, .. } = &e.kind {
                let mut refs = Vec::new();
                value.fluents(&mut refs);
                if let Some(f) = refs.iter().find(|f| !self.static_functions.contains(&f.function)) {
                    return Err(GroundError::DynamicEffect { operator: op.name.clone(), function: f.function.clone() });
                }
            }
        }
        Ok(())
    }

    fn candidates(&self, ty: &str) -> Vec<String> {
        self.objects.iter().filter(|(_, t)| self.domain.is_subtype(t, ty)).map(|(n, _)| n.clone()).collect()
    }

    /// Enumerates bindings whose static conditions hold in the initial state,
    /// checking each static atom as soon as its variables are bound.
    fn bindings(&self, op: &Operator) -> Result<Vec<Vec<String>>, GroundError> {
        let candidates: Vec<Vec<String>> = op.params.iter().map(|p| self.candidates(&p.ty)).collect();
        let param_pos: HashMap<&str, usize> = op.params.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
        // static atoms keyed by the last parameter position they need
        let mut checks: Vec<Vec<&Atom>> = vec![Vec::new(); op.params.len() + 1];
        for c in &op.conditions {
            if self.static_predicates.contains(&c.atom.predicate) {
                let last = c
                    .atom
                    .args
                    .iter()
                    .filter_map(|t| match t {
                        Term::Var(v) => param_pos.get(v.as_str()).map(|i| i + 1),
                        Term::Const(_) => None,
                    })
                    .max()
                    .unwrap_or(0);
                checks[last].push(&c.atom);
            }
        }
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(op.params.len());
        let mut visited = 0usize;
        let budget = self.cap.saturating_mul(100).max(1000);
        if !self.static_ok(&checks[0], op, &current) {
            return Ok(out);
        }
        self.extend(op, &candidates, &checks, &mut current, &mut out, &mut visited, budget)?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn extend(
        &self,
        op: &Operator,
        candidates: &[Vec<String>],
        checks: &[Vec<&Atom>],
        current: &mut Vec<String>,
        out: &mut Vec<Vec<String>>,
        visited: &mut usize,
        budget: usize,
    ) -> Result<(), GroundError> {
        let depth = current.len();
        if depth == candidates.len() {
            out.push(current.clone());
            if out.len() > self.cap {
                return Err(GroundError::CapExceeded { cap: self.cap });
            }
            return Ok(());
        }
        for obj in &candidates[depth] {
            *visited += 1;
            if *visited > budget {
                return Err(GroundError::CapExceeded { cap: self.cap });
            }
            current.push(obj.clone());
            if self.static_ok(&checks[depth + 1], op, current) {
                self.extend(op, candidates, checks, current, out, visited, budget)?;
            }
            current.pop();
        }
        Ok(())
    }

    fn static_ok(&self, atoms: &[&Atom], op: &Operator, binding: &[String]) -> bool {
        atoms.iter().all(|a| self.init_facts.contains(&bind_atom(a, op, binding)))
    }

    fn instantiate(&mut self, op: &Operator, binding: &[String]) -> Result<Option<GroundAction>, GroundError> {
        let static_values = &self.static_values;
        let mut lookup =
            |f: &FluentRef| static_values.get(&(f.function.clone(), bind_terms(&f.args, op, binding))).copied();
        let Some(duration) = op.duration.eval(&mut lookup, None, None) else {
            return Ok(None);
        };
        let label = || {
            let mut s = format!("({}", op.name);
            for a in binding {
                s.push(' ');
                s.push_str(a);
            }
            s + ")"
        };
        if duration.is_negative() {
            return Err(GroundError::NegativeDuration { action: label() });
        }
        let mut numeric = Vec::new();
        for e in &op.effects {
            if let EffectKind::Numeric { op: nop, target, value } = &e.kind {
                let Some(v) = value.eval(&mut lookup, Some(duration), None) else {
                    return Ok(None);
                };
                numeric.push((e.time, *nop, target.function.clone(), bind_terms(&target.args, op, binding), v));
            }
        }

        let mut action = GroundAction {
            name: op.name.clone(),
            args: binding.to_vec(),
            durative: op.durative,
            duration,
            cond_start: Vec::new(),
            cond_overall: Vec::new(),
            cond_end: Vec::new(),
            add_start: Vec::new(),
            del_start: Vec::new(),
            add_end: Vec::new(),
            del_end: Vec::new(),
            num_start: Vec::new(),
            num_end: Vec::new(),
        };
        for c in &op.conditions {
            let f = self.intern(bind_atom(&c.atom, op, binding));
            let list = match c.timing {
                Timing::AtStart => &mut action.cond_start,
                Timing::OverAll => &mut action.cond_overall,
                Timing::AtEnd => &mut action.cond_end,
            };
            if !list.contains(&f) {
                list.push(f);
            }
        }
        for e in &op.effects {
            let (atom, add) = match &e.kind {
                EffectKind::Add(a) => (a, true),
                EffectKind::Delete(a) => (a, false),
                EffectKind::Numeric { .. } => continue,
            };
            let f = self.intern(bind_atom(atom, op, binding));
            let list = match (e.time, add) {
                (EffectTime::Start, true) => &mut action.add_start,
                (EffectTime::Start, false) => &mut action.del_start,
                (EffectTime::End, true) => &mut action.add_end,
                (EffectTime::End, false) => &mut action.del_end,
            };
            if !list.contains(&f) {
                list.push(f);
            }
        }
        for (time, nop, function, args, value) in numeric {
            let fluent = self.intern_fluent(&function, args);
            let update = NumericUpdate { fluent, op: nop, value };
            match time {
                EffectTime::Start => action.num_start.push(update),
                EffectTime::End => action.num_end.push(update),
            }
        }
        Ok(Some(action))
    }
}

fn bind_terms(terms: &[Term], op: &Operator, binding: &[String]) -> Vec<String> {
    terms
        .iter()
        .map(|t| match t {
            Term::Const(c) => c.clone(),
            Term::Var(v) => {
                let i = op.params.iter().position(|p| &p.name == v).expect("declared parameter");
                binding[i].clone()
            }
        })
        .collect()
}

fn bind_atom(atom: &Atom, op: &Operator, binding: &[String]) -> GroundAtom {
    GroundAtom { predicate: atom.predicate.clone(), args: bind_terms(&atom.args, op, binding) }
}
