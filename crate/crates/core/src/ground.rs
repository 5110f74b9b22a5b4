//! Bottom-up grounder.
//!
//! First computes the atoms that can possibly be derived (ignoring negation),
//! then instantiates every rule against that set. `dom_<sort>` atoms are
//! built in and vanish from ground bodies; `T+k` outside the time sort drops
//! the instance.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::ast::{Atom, GroundAtom, Head, PredKey, Program, RelLit, Rule, Term, Value, DOM_PREFIX};
use crate::error::{Error, Result};
use crate::Limits;

pub type AtomId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroundHead {
    Atom(AtomId),
    Constraint,
    /// Elements are `(atom, condition)`; an element counts when both hold.
    Choice {
        lower: u32,
        upper: Option<u32>,
        elements: Vec<(AtomId, Vec<AtomId>)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundRule {
    pub head: GroundHead,
    pub pos: Vec<AtomId>,
    pub neg: Vec<AtomId>,
}

/// Interned ground atoms.
#[derive(Debug, Clone, Default)]
pub struct AtomTable {
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, AtomId>,
}

impl AtomTable {
    pub fn intern(&mut self, a: GroundAtom) -> AtomId {
        if let Some(&i) = self.index.get(&a) {
            return i;
        }
        let i = self.atoms.len();
        self.index.insert(a.clone(), i);
        self.atoms.push(a);
        i
    }

    pub fn get(&self, a: &GroundAtom) -> Option<AtomId> {
        self.index.get(a).copied()
    }

    pub fn atom(&self, i: AtomId) -> &GroundAtom {
        &self.atoms[i]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundAtom> {
        self.atoms.iter()
    }
}

#[derive(Debug, Clone, Default)]
pub struct GroundProgram {
    pub atoms: AtomTable,
    pub rules: Vec<GroundRule>,
}

impl GroundProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Renders a rule for diagnostics.
    pub fn show_rule(&self, r: &GroundRule) -> String {
        let name = |i: &AtomId| self.atoms.atom(*i).to_string();
        let head = match &r.head {
            GroundHead::Atom(a) => name(a),
            GroundHead::Constraint => String::new(),
            GroundHead::Choice { lower, upper, elements } => {
                let es: Vec<String> = elements
                    .iter()
                    .map(|(e, c)| {
                        if c.is_empty() {
                            name(e)
                        } else {
                            format!("{} : {}", name(e), c.iter().map(name).collect::<Vec<_>>().join(", "))
                        }
                    })
                    .collect();
                let up = upper.map(|u| format!(" {u}")).unwrap_or_default();
                format!("{lower} {{ {} }}{up}", es.join("; "))
            }
        };
        let body: Vec<String> =
            r.pos.iter().map(name).chain(r.neg.iter().map(|a| format!("not {}", name(a)))).collect();
        if body.is_empty() {
            format!("{head}.")
        } else {
            format!("{head} :- {}.", body.join(", "))
        }
    }
}

type Subst = BTreeMap<String, Value>;

struct Grounder<'a> {
    p: &'a Program,
    limits: Limits,
    /// Possibly-true atoms by predicate.
    known: HashMap<PredKey, Vec<GroundAtom>>,
    known_set: HashSet<GroundAtom>,
    work: usize,
}

pub fn ground(p: &Program, limits: &Limits) -> Result<GroundProgram> {
    let mut g = Grounder { p, limits: *limits, known: HashMap::new(), known_set: HashSet::new(), work: 0 };
    g.saturate()?;
    g.instantiate()
}

fn dom_sort(a: &Atom) -> Option<&str> {
    if a.is_dom() {
        Some(&a.predicate[DOM_PREFIX.len()..])
    } else {
        None
    }
}

impl<'a> Grounder<'a> {
    fn eval(&self, t: &Term, s: &Subst) -> Option<Value> {
        match t {
            Term::Const(v) => Some(v.clone()),
            Term::Var(v) => s.get(v).cloned(),
            Term::Offset(v, k) => match s.get(v)? {
                Value::Int(i) => Some(Value::Int(i + k)),
                Value::Sym(_) => None,
            },
        }
    }

    fn offset_in_range(&self, t: &Term, v: &Value) -> bool {
        match (t, self.p.time_sort()) {
            (Term::Offset(..), Some(ts)) => ts.contains(v),
            _ => true,
        }
    }

    /// Ground instance of `a`; `None` if an offset leaves the time sort.
    fn instance(&self, a: &Atom, s: &Subst) -> Result<Option<GroundAtom>> {
        let mut args = Vec::with_capacity(a.args.len());
        for t in &a.args {
            let v = self.eval(t, s).ok_or_else(|| Error::Unsupported(format!("cannot evaluate `{t}` in `{a}`")))?;
            if !self.offset_in_range(t, &v) {
                return Ok(None);
            }
            args.push(v);
        }
        Ok(Some(GroundAtom { predicate: a.predicate.clone(), args }))
    }

    fn tick(&mut self) -> Result<()> {
        self.work += 1;
        if self.work > self.limits.max_ground_rules {
            return Err(Error::Resource(format!("grounding exceeded {} rule instances", self.limits.max_ground_rules)));
        }
        Ok(())
    }

    /// Applies evaluable comparisons and equality bindings. `false` if one fails.
    fn settle(&self, gamma: &mut Vec<&RelLit>, s: &mut Subst) -> bool {
        loop {
            let mut progress = false;
            let mut i = 0;
            while i < gamma.len() {
                let g = gamma[i];
                match (self.eval(&g.lhs, s), self.eval(&g.rhs, s)) {
                    (Some(l), Some(r)) => {
                        if !g.effective_rel().holds(self.p.compare_values(&l, &r)) {
                            return false;
                        }
                        gamma.swap_remove(i);
                        progress = true;
                        continue;
                    }
                    (lv, rv) if g.effective_rel() == crate::ast::Rel::Eq => {
                        let bind = match (lv, rv) {
                            (None, Some(v)) => Some((&g.lhs, v)),
                            (Some(v), None) => Some((&g.rhs, v)),
                            _ => None,
                        };
                        if let Some((t, v)) = bind {
                            if !bind_term(t, &v, s) {
                                return false;
                            }
                            progress = true;
                            continue;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
            if !progress {
                return true;
            }
        }
    }

    /// Enumerates substitutions satisfying `atoms` (against possibly-true
    /// atoms) and `gamma`, extending `s`.
    fn join(
        &self,
        atoms: &[&Atom],
        gamma: &[&RelLit],
        s: &Subst,
        out: &mut dyn FnMut(&Subst) -> Result<()>,
    ) -> Result<()> {
        let mut s = s.clone();
        let mut gamma = gamma.to_vec();
        if !self.settle(&mut gamma, &mut s) {
            return Ok(());
        }
        if atoms.is_empty() {
            if let Some(g) = gamma.first() {
                return Err(Error::Unsupported(format!("comparison `{g}` has unbound variables")));
            }
            return out(&s);
        }
        // most-bound atom first
        let (best, _) = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                (i, a.args.iter().filter(|t| self.eval(t, &s).is_some()).count() as isize - a.args.len() as isize)
            })
            .max_by_key(|&(i, score)| (score, -(i as isize)))
            .expect("nonempty");
        let atom = atoms[best];
        let rest: Vec<&Atom> = atoms.iter().enumerate().filter(|(i, _)| *i != best).map(|(_, a)| *a).collect();
        let dom_values;
        let candidates: Vec<GroundAtom> = match dom_sort(atom) {
            Some(sort) => {
                dom_values = self.p.sort(sort).map(|s| s.values.clone()).unwrap_or_default();
                dom_values.iter().map(|v| GroundAtom::new(atom.predicate.clone(), vec![v.clone()])).collect()
            }
            None => self.known.get(&atom.key()).cloned().unwrap_or_default(),
        };
        for c in &candidates {
            let mut s2 = s.clone();
            if atom.args.iter().zip(&c.args).all(|(t, v)| self.unify(t, v, &mut s2)) {
                self.join(&rest, &gamma, &s2, out)?;
            }
        }
        Ok(())
    }

    fn unify(&self, t: &Term, v: &Value, s: &mut Subst) -> bool {
        match self.eval(t, s) {
            Some(x) => &x == v,
            None => bind_term(t, v, s),
        }
    }

    fn add_known(&mut self, a: GroundAtom) -> bool {
        if self.known_set.insert(a.clone()) {
            self.known.entry(a.key()).or_default().push(a);
            true
        } else {
            false
        }
    }

    fn saturate(&mut self) -> Result<()> {
        loop {
            let mut fresh = Vec::new();
            for rule in &self.p.rules {
                if rule.head.is_constraint() {
                    continue;
                }
                let pos: Vec<&Atom> = rule.pos.iter().collect();
                let gamma: Vec<&RelLit> = rule.gamma.iter().collect();
                let mut found = Vec::new();
                self.join(&pos, &gamma, &Subst::new(), &mut |s| {
                    found.push(s.clone());
                    Ok(())
                })?;
                for s in found {
                    self.tick()?;
                    self.head_atoms(rule, &s, &mut fresh)?;
                }
            }
            let mut changed = false;
            for a in fresh {
                changed |= self.add_known(a);
            }
            if !changed {
                return Ok(());
            }
        }
    }

    fn head_atoms(&self, rule: &Rule, s: &Subst, out: &mut Vec<GroundAtom>) -> Result<()> {
        match &rule.head {
            Head::Atom(a) => {
                if let Some(g) = self.instance(a, s)? {
                    out.push(g);
                }
            }
            Head::Constraint => {}
            Head::Choice { elements, .. } => {
                for e in elements {
                    let cond: Vec<&Atom> = e.condition.iter().collect();
                    let mut subs = Vec::new();
                    self.join(&cond, &[], s, &mut |s2| {
                        subs.push(s2.clone());
                        Ok(())
                    })?;
                    for s2 in subs {
                        if let Some(g) = self.instance(&e.atom, &s2)? {
                            out.push(g);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Ground body literals; `None` if the instance is trivially false.
    fn ground_body(&self, rule: &Rule, s: &Subst, table: &mut AtomTable) -> Result<Option<(Vec<AtomId>, Vec<AtomId>)>> {
        let mut pos = Vec::new();
        for a in &rule.pos {
            if dom_sort(a).is_some() {
                continue;
            }
            match self.instance(a, s)? {
                Some(g) if self.known_set.contains(&g) => pos.push(table.intern(g)),
                _ => return Ok(None),
            }
        }
        let mut neg = Vec::new();
        for a in &rule.neg {
            let Some(g) = self.instance(a, s)? else { return Ok(None) };
            if let Some(sort) = dom_sort(a) {
                if self.p.sort(sort).is_some_and(|srt| srt.contains(&g.args[0])) {
                    return Ok(None);
                }
                continue;
            }
            if self.known_set.contains(&g) {
                neg.push(table.intern(g));
            }
        }
        pos.sort_unstable();
        pos.dedup();
        neg.sort_unstable();
        neg.dedup();
        Ok(Some((pos, neg)))
    }

    fn instantiate(&mut self) -> Result<GroundProgram> {
        let mut gp = GroundProgram::new();
        let mut seen = HashSet::new();
        // Intern in a stable order: possibly-true atoms sorted.
        let mut all: Vec<GroundAtom> = self.known_set.iter().cloned().collect();
        all.sort();
        for a in all {
            gp.atoms.intern(a);
        }
        for rule in &self.p.rules {
            let pos: Vec<&Atom> = rule.pos.iter().collect();
            let gamma: Vec<&RelLit> = rule.gamma.iter().collect();
            let mut subs = Vec::new();
            self.join(&pos, &gamma, &Subst::new(), &mut |s| {
                subs.push(s.clone());
                Ok(())
            })?;
            for s in subs {
                self.tick()?;
                let Some((pos, neg)) = self.ground_body(rule, &s, &mut gp.atoms)? else { continue };
                let head = match &rule.head {
                    Head::Atom(a) => match self.instance(a, &s)? {
                        Some(g) => GroundHead::Atom(gp.atoms.intern(g)),
                        None => continue,
                    },
                    Head::Constraint => GroundHead::Constraint,
                    Head::Choice { lower, upper, elements } => {
                        let mut ground_elems = Vec::new();
                        for e in elements {
                            let cond: Vec<&Atom> = e.condition.iter().collect();
                            let mut subs2 = Vec::new();
                            self.join(&cond, &[], &s, &mut |s2| {
                                subs2.push(s2.clone());
                                Ok(())
                            })?;
                            for s2 in subs2 {
                                let Some(g) = self.instance(&e.atom, &s2)? else { continue };
                                let mut c = Vec::new();
                                let mut ok = true;
                                for ca in &e.condition {
                                    if dom_sort(ca).is_some() {
                                        continue;
                                    }
                                    match self.instance(ca, &s2)? {
                                        Some(cg) => c.push(gp.atoms.intern(cg)),
                                        None => ok = false,
                                    }
                                }
                                if ok {
                                    c.sort_unstable();
                                    c.dedup();
                                    let el = (gp.atoms.intern(g), c);
                                    if !ground_elems.contains(&el) {
                                        ground_elems.push(el);
                                    }
                                }
                            }
                        }
                        GroundHead::Choice { lower: *lower, upper: *upper, elements: ground_elems }
                    }
                };
                let gr = GroundRule { head, pos, neg };
                if seen.insert(gr.clone()) {
                    gp.rules.push(gr);
                }
            }
        }
        Ok(gp)
    }
}

/// Binds the variable of `t` so that `t` evaluates to `v`.
fn bind_term(t: &Term, v: &Value, s: &mut Subst) -> bool {
    match t {
        Term::Var(x) => {
            s.insert(x.clone(), v.clone());
            true
        }
        Term::Offset(x, k) => match v {
            Value::Int(i) => {
                s.insert(x.clone(), Value::Int(i - k));
                true
            }
            Value::Sym(_) => false,
        },
        Term::Const(c) => c == v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program_str;

    fn ground_str(text: &str) -> GroundProgram {
        ground(&parse_program_str(text).unwrap(), &Limits::default()).unwrap()
    }

    fn rules(gp: &GroundProgram) -> Vec<String> {
        let mut v: Vec<String> = gp.rules.iter().map(|r| gp.show_rule(r)).collect();
        v.sort();
        v
    }

    #[test]
    fn grounds_joins_and_comparisons() {
        let gp = ground_str("a(1,2). a(2,1). d(X,Y) :- a(X,Y), X <= Y.");
        assert_eq!(rules(&gp), ["a(1,2).", "a(2,1).", "d(1,2) :- a(1,2)."]);
    }

    #[test]
    fn negative_atoms_never_derivable_are_dropped() {
        let gp = ground_str("b(1). c(X) :- b(X), not a(X).");
        assert_eq!(rules(&gp), ["b(1).", "c(1) :- b(1)."]);
    }

    #[test]
    fn dom_atoms_are_builtin() {
        let gp = ground_str("sort s {1..2}. p(X) :- dom_s(X), not q(X). q(2).");
        assert_eq!(rules(&gp), ["p(1).", "p(2) :- not q(2).", "q(2)."]);
    }

    #[test]
    fn equality_binds_and_offsets_respect_time() {
        let gp = ground_str("sort time {0..1}. a(0). b(T+1) :- a(T). c(X) :- b(Y), X = Y. d(T+1) :- b(T).");
        assert_eq!(rules(&gp), ["a(0).", "b(1) :- a(0).", "c(1) :- b(1)."]);
    }

    #[test]
    fn offsets_in_body_bind() {
        let gp = ground_str("sort time {0..2}. r(1). s(T) :- r(T+1).");
        assert_eq!(rules(&gp), ["r(1).", "s(0) :- r(1)."]);
    }

    #[test]
    fn choice_conditions_bind_local_variables() {
        let gp = ground_str("f(1,2). f(1,3). g(1). 1 { h(Y) : f(X,Y) } 1 :- g(X).");
        assert!(rules(&gp).contains(&"1 { h(2) : f(1,2); h(3) : f(1,3) } 1 :- g(1).".to_string()));
    }

    #[test]
    fn recursion_saturates() {
        let gp = ground_str("e(1,2). e(2,3). p(X,Y) :- e(X,Y). p(X,Z) :- p(X,Y), e(Y,Z).");
        assert!(rules(&gp).contains(&"p(1,3) :- e(2,3), p(1,2).".to_string()));
    }

    #[test]
    fn resource_limit() {
        let p = parse_program_str("sort s {1..50}. p(X,Y,Z) :- dom_s(X), dom_s(Y), dom_s(Z).").unwrap();
        let r = ground(&p, &Limits { max_ground_rules: 1000, ..Limits::default() });
        assert!(matches!(r, Err(Error::Resource(_))));
    }
}
