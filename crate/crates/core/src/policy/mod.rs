//! Policy checking over history programs.
//!
//! A history program declares its `fluent`s and `action`s; each carries one
//! argument of sort `time`. A *state* is the set of fluent atoms true at one
//! time point, with the time argument removed. Transitions come from the
//! one-step answer sets of the program (time `{t0, t1}`) with a state fixed
//! at `t0`. Plans are single actions: answer sets selecting several actions
//! at `t0` are skipped and counted, answer sets selecting none are idle.

mod goal;
pub mod grid;
mod search;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

pub use goal::{parse_goal, parse_pattern, Formula, Goal, Pattern};
pub use search::{check_spurious, find_counterexample, FailureKind, Trajectory, Verdict};

use crate::ast::{GroundAtom, Head, Interpretation, PredKey, Program, Rule, Term, Value, TIME_SORT};
use crate::domain::{plan, DomainOptions};
use crate::error::{Error, Result};
use crate::mapping::DomainMapping;
use crate::solve::answer_sets;
use crate::sorts::SortInfo;
use crate::Limits;

pub type State = Interpretation;

const MAX_STATES: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Transition {
    pub from: usize,
    /// `None` for an idle step (no action selected).
    pub action: Option<GroundAtom>,
    pub to: usize,
}

/// Where the time argument sits in each fluent and action predicate.
#[derive(Debug, Clone)]
pub struct TimeLayout {
    /// Keyed by the timed predicate.
    positions: BTreeMap<PredKey, usize>,
    fluents: BTreeSet<PredKey>,
    actions: BTreeSet<PredKey>,
    t0: Value,
    t1: Option<Value>,
}

impl TimeLayout {
    pub fn new(p: &Program) -> Result<Self> {
        if p.fluents.is_empty() {
            return Err(Error::Policy("the program declares no fluents".into()));
        }
        let time = p.time_sort().ok_or_else(|| Error::Policy("the program declares no `time` sort".into()))?;
        let t0 = time.values.first().cloned().ok_or_else(|| Error::Policy("the time sort is empty".into()))?;
        let info = SortInfo::new(p);
        let mut positions = BTreeMap::new();
        for k in p.fluents.iter().chain(&p.actions) {
            let pos = (0..k.arity)
                .find(|&i| info.position_sort(k, i) == Some(TIME_SORT))
                .ok_or_else(|| Error::Policy(format!("{}/{} has no argument of sort time", k.name, k.arity)))?;
            positions.insert(k.clone(), pos);
        }
        Ok(TimeLayout {
            positions,
            fluents: p.fluents.iter().cloned().collect(),
            actions: p.actions.iter().cloned().collect(),
            t1: time.values.get(1).cloned(),
            t0,
        })
    }

    fn strip(&self, a: &GroundAtom, t: &Value) -> Option<GroundAtom> {
        let pos = *self.positions.get(&a.key())?;
        if a.args[pos] != *t {
            return None;
        }
        let mut args = a.args.clone();
        args.remove(pos);
        Some(GroundAtom::new(a.predicate.clone(), args))
    }

    /// Inserts time `t` into a time-stripped atom.
    pub fn timed(&self, a: &GroundAtom, t: &Value) -> GroundAtom {
        let key = PredKey::new(a.predicate.clone(), a.args.len() + 1);
        let pos = self.positions.get(&key).copied().unwrap_or(a.args.len());
        let mut args = a.args.clone();
        args.insert(pos, t.clone());
        GroundAtom::new(a.predicate.clone(), args)
    }

    fn fluents_at(&self, i: &Interpretation, t: &Value) -> State {
        i.iter().filter(|a| self.fluents.contains(&a.key())).filter_map(|a| self.strip(a, t)).collect()
    }

    fn actions_at(&self, i: &Interpretation, t: &Value) -> Vec<GroundAtom> {
        i.iter().filter(|a| self.actions.contains(&a.key())).filter_map(|a| self.strip(a, t)).collect()
    }

    /// Rules that fix the initial state: a fluent or action head with a
    /// constant time argument.
    fn is_initial(&self, r: &Rule) -> bool {
        r.head
            .atoms()
            .iter()
            .any(|a| self.positions.get(&a.key()).is_some_and(|&pos| matches!(a.args.get(pos), Some(Term::Const(_)))))
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TransitionSystem {
    pub states: Vec<State>,
    pub initial: Vec<usize>,
    /// Sorted by source state, then action, then target.
    pub transitions: Vec<Transition>,
    /// One-step answer sets that selected more than one action.
    pub multi_action_skipped: usize,
    #[serde(skip)]
    index: BTreeMap<State, usize>,
    #[serde(skip)]
    out: Vec<(usize, usize)>,
}

impl TransitionSystem {
    fn intern(&mut self, s: State) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        self.states.push(s.clone());
        self.index.insert(s, self.states.len() - 1);
        self.states.len() - 1
    }

    fn finish(&mut self) {
        self.transitions.sort();
        self.transitions.dedup();
        self.initial.sort();
        self.initial.dedup();
        self.out = vec![(0, 0); self.states.len()];
        let mut i = 0;
        for s in 0..self.states.len() {
            let start = i;
            while i < self.transitions.len() && self.transitions[i].from == s {
                i += 1;
            }
            self.out[s] = (start, i);
        }
    }

    pub fn state_index(&self, s: &State) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn successors(&self, s: usize) -> &[Transition] {
        let (a, b) = self.out[s];
        &self.transitions[a..b]
    }

    /// Successors under some action (idle steps excluded).
    pub fn moves(&self, s: usize) -> impl Iterator<Item = &Transition> {
        self.successors(s).iter().filter(|t| t.action.is_some())
    }

    /// A state in which the policy selects no action.
    pub fn is_sink(&self, s: usize) -> bool {
        self.moves(s).next().is_none()
    }

    pub fn sinks(&self) -> Vec<usize> {
        (0..self.states.len()).filter(|&s| self.is_sink(s)).collect()
    }

    pub fn action_count(&self) -> usize {
        self.transitions.iter().filter(|t| t.action.is_some()).count()
    }

    /// `(state, action, state)` triples by value.
    pub fn triples(&self) -> BTreeSet<(State, Option<GroundAtom>, State)> {
        self.transitions
            .iter()
            .map(|t| (self.states[t.from].clone(), t.action.clone(), self.states[t.to].clone()))
            .collect()
    }

    pub(crate) fn from_parts(
        states: impl IntoIterator<Item = State>,
        initial: impl IntoIterator<Item = State>,
        triples: impl IntoIterator<Item = (State, Option<GroundAtom>, State)>,
    ) -> Self {
        let mut ts = TransitionSystem::default();
        let mut all: BTreeSet<State> = states.into_iter().collect();
        let initial: Vec<State> = initial.into_iter().collect();
        let triples: Vec<_> = triples.into_iter().collect();
        all.extend(initial.iter().cloned());
        for (a, _, b) in &triples {
            all.insert(a.clone());
            all.insert(b.clone());
        }
        for s in all {
            ts.intern(s);
        }
        ts.initial = initial.iter().map(|s| ts.index[s]).collect();
        ts.transitions = triples
            .into_iter()
            .map(|(a, act, b)| Transition { from: ts.index[&a], action: act, to: ts.index[&b] })
            .collect();
        ts.finish();
        ts
    }
}

fn with_time(p: &Program, values: Vec<Value>) -> Program {
    let mut q = p.clone();
    if let Some(s) = q.sort_mut(TIME_SORT) {
        s.values = values;
    }
    q
}

/// States and transitions of a history program, explored from its initial
/// states. Policy rules, if any, are part of `p`.
pub fn build_transition_system(p: &Program, limits: &Limits) -> Result<TransitionSystem> {
    let layout = TimeLayout::new(p)?;
    let t1 = layout.t1.clone().ok_or_else(|| Error::Policy("the time sort needs at least two points".into()))?;
    let mut ts = TransitionSystem::default();
    let init = with_time(p, vec![layout.t0.clone()]);
    let mut queue = VecDeque::new();
    for i in answer_sets(&init, limits)? {
        let s = layout.fluents_at(&i, &layout.t0);
        let k = ts.intern(s);
        ts.initial.push(k);
        queue.push_back(k);
    }
    let mut step = with_time(p, vec![layout.t0.clone(), t1.clone()]);
    step.rules.retain(|r| !layout.is_initial(r));
    let mut done = BTreeSet::new();
    while let Some(k) = queue.pop_front() {
        if !done.insert(k) {
            continue;
        }
        if ts.states.len() > MAX_STATES {
            return Err(Error::Resource(format!("more than {MAX_STATES} states")));
        }
        let s = ts.states[k].clone();
        let mut q = step.clone();
        q.add_facts(s.iter().map(|a| layout.timed(a, &layout.t0)));
        for i in answer_sets(&q, limits)? {
            if layout.fluents_at(&i, &layout.t0) != s {
                continue;
            }
            let acts = layout.actions_at(&i, &layout.t0);
            if acts.len() > 1 {
                ts.multi_action_skipped += 1;
                continue;
            }
            let to = ts.intern(layout.fluents_at(&i, &t1));
            ts.transitions.push(Transition { from: k, action: acts.into_iter().next(), to });
            if !done.contains(&to) {
                queue.push_back(to);
            }
        }
    }
    ts.finish();
    log::info!("transition system: {} states, {} transitions", ts.states.len(), ts.transitions.len());
    Ok(ts)
}

/// The transition system of `domain` restricted by the `policy` rules.
pub fn apply_policy(domain: &Program, policy: &Program, limits: &Limits) -> Result<TransitionSystem> {
    let mut p = domain.clone();
    p.extend(policy);
    build_transition_system(&p, limits)
}

/// Maps states and actions of a concrete history program to abstract ones.
pub struct StateAbstraction<'a> {
    program: &'a Program,
    mapping: &'a DomainMapping,
    layout: TimeLayout,
}

impl<'a> StateAbstraction<'a> {
    pub fn new(program: &'a Program, mapping: &'a DomainMapping) -> Result<Self> {
        Ok(StateAbstraction { program, mapping, layout: TimeLayout::new(program)? })
    }

    pub fn atom(&self, a: &GroundAtom) -> Result<Option<GroundAtom>> {
        let t = &self.layout.t0;
        Ok(self.mapping.map_atom(self.program, &self.layout.timed(a, t))?.and_then(|m| self.layout.strip(&m, t)))
    }

    pub fn state(&self, s: &State) -> Result<State> {
        let mut out = State::new();
        for a in s {
            if let Some(m) = self.atom(a)? {
                out.insert(m);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbstractionMode {
    /// Abstract transitions are exactly the images of concrete ones.
    Exact,
    /// Abstract transitions come from solving the abstract program.
    OverApprox,
}

/// The abstract system generated from a concrete one: images of initial
/// states and of every transition.
pub fn generate_abstract_system(ts: &TransitionSystem, h: &StateAbstraction<'_>) -> Result<TransitionSystem> {
    let states: Vec<State> = ts.states.iter().map(|s| h.state(s)).collect::<Result<_>>()?;
    let initial: Vec<State> = ts.initial.iter().map(|&i| states[i].clone()).collect();
    let mut triples = Vec::with_capacity(ts.transitions.len());
    for t in &ts.transitions {
        let action = match &t.action {
            Some(a) => h.atom(a)?,
            None => None,
        };
        triples.push((states[t.from].clone(), action, states[t.to].clone()));
    }
    Ok(TransitionSystem::from_parts(states, initial, triples))
}

/// Abstract system induced by the abstract history program.
pub fn abstract_program_system(
    program: &Program,
    m: &DomainMapping,
    opts: &DomainOptions,
    limits: &Limits,
) -> Result<(TransitionSystem, Program)> {
    let a = plan(program, m, opts)?.program;
    Ok((build_transition_system(&a, limits)?, a))
}

#[derive(Debug, Clone)]
pub struct PolicyCheckOptions {
    pub bound: usize,
    pub mode: AbstractionMode,
    pub pattern: Option<Pattern>,
    pub domain: DomainOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyReport {
    pub mode: AbstractionMode,
    pub concrete_states: usize,
    pub concrete_sinks: usize,
    pub abstract_states: usize,
    pub abstract_transitions: usize,
    /// Abstract states in which the policy selects nothing; they violate AF.
    pub abstract_sinks: Vec<State>,
    pub multi_action_skipped: usize,
    /// Policy rules whose abstraction lets the action be skipped.
    pub choice_policy_rules: Vec<String>,
    pub bound: usize,
    /// Bound beyond which every counterexample must loop.
    pub complete_bound: usize,
    pub counterexample: Option<Trajectory>,
    pub verdict: Option<Verdict>,
}

impl PolicyReport {
    /// A concrete counterexample exists.
    pub fn violated(&self) -> bool {
        matches!(self.verdict, Some(Verdict::Concrete(_)))
    }
}

/// Builds both systems, searches an abstract counterexample and checks it
/// against the concrete system.
pub fn policy_check(
    domain: &Program,
    policy: &Program,
    m: &DomainMapping,
    goal: &Goal,
    opts: &PolicyCheckOptions,
    limits: &Limits,
) -> Result<PolicyReport> {
    let mut program = domain.clone();
    program.extend(policy);
    let concrete = build_transition_system(&program, limits)?;
    let h = StateAbstraction::new(&program, m)?;
    let mut choice_policy_rules = Vec::new();
    let abs = match opts.mode {
        AbstractionMode::Exact => generate_abstract_system(&concrete, &h)?,
        AbstractionMode::OverApprox => {
            let pl = plan(&program, m, &opts.domain)?;
            let policy_rules: BTreeSet<&Rule> = policy.rules.iter().collect();
            for rp in &pl.rules {
                if policy_rules.contains(&rp.source)
                    && rp.emitted.iter().any(|e| matches!(&e.rule.head, Head::Choice { lower: 0, .. }))
                {
                    choice_policy_rules.push(crate::parser::print_rule(&rp.source));
                }
            }
            build_transition_system(&pl.program, limits)?
        }
    };
    let counterexample = find_counterexample(&abs, goal, opts.bound, opts.pattern.as_ref());
    let verdict = match &counterexample {
        Some(t) => Some(check_spurious(t, &concrete, &h)?),
        None => None,
    };
    Ok(PolicyReport {
        mode: opts.mode,
        concrete_states: concrete.states.len(),
        concrete_sinks: concrete.sinks().len(),
        abstract_states: abs.states.len(),
        abstract_transitions: abs.action_count(),
        abstract_sinks: abs.sinks().into_iter().map(|s| abs.states[s].clone()).collect(),
        multi_action_skipped: abs.multi_action_skipped,
        choice_policy_rules,
        bound: opts.bound,
        complete_bound: abs.states.len() + 1,
        counterexample,
        verdict,
    })
}

impl fmt::Display for PolicyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "concrete states: {} ({} without a policy action)", self.concrete_states, self.concrete_sinks)?;
        writeln!(f, "abstract states: {}, transitions: {}", self.abstract_states, self.abstract_transitions)?;
        if self.multi_action_skipped > 0 {
            writeln!(f, "multi-action answer sets skipped: {}", self.multi_action_skipped)?;
        }
        if !self.abstract_sinks.is_empty() {
            writeln!(f, "abstract states without a policy action: {}", self.abstract_sinks.len())?;
        }
        for r in &self.choice_policy_rules {
            writeln!(f, "policy rule lifted as a choice: {r}")?;
        }
        match (&self.counterexample, &self.verdict) {
            (None, _) => {
                write!(f, "no counterexample up to bound {}", self.bound)?;
                if self.bound < self.complete_bound {
                    write!(f, " (complete only from bound {})", self.complete_bound)?;
                }
                Ok(())
            }
            (Some(t), v) => {
                writeln!(f, "counterexample: {t}")?;
                match v {
                    Some(v) => write!(f, "{v}"),
                    None => Ok(()),
                }
            }
        }
    }
}
