//! Domain abstraction: constants of mapped sorts are replaced by their
//! classes, and each rule is rewritten so that whatever fired concretely can
//! still fire abstractly.
//!
//! Per rule: variables of abstracted sorts are standardized apart, the
//! comparison literals over them (Γ) are evaluated on every abstract tuple
//! of the relevant variables, and rules are emitted per tuple:
//!
//! * Γ holds for every concrete refinement → a definite rule (`0a`, `1a`, `2a'`);
//! * Γ holds for some refinement only → a `0 { h } 1` guess (`1b`/`1c`);
//! * a negative literal whose abstract atom has several preimages may be
//!   false concretely while true abstractly → extra guesses with that
//!   literal *shifted* (`2b'`/`2c'`).
//!
//! Shifted literals are replaced by `not aux_neg_<p>(..)` guards, defined
//! as `aux_neg_<p>(V..) :- dom(V).., not p(V..)`. All nonempty subsets of
//! ambiguous negatives are shifted by default.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::ast::{
    dom_predicate, Atom, ChoiceElement, Head, PredKey, Program, Rel, RelLit, Rule, Term, Value, AUX_PREFIX, TYPE_PREFIX,
};
use crate::error::{Error, Result};
use crate::mapping::DomainMapping;
use crate::omit::omit_literals;
use crate::sorts::{SortInfo, VarSorts};

/// Maximum number of abstract tuples enumerated for one rule.
const MAX_TUPLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, Default)]
pub struct DomainOptions {
    /// Emit tuple tables (`type_r<i>_<step>` facts) instead of evaluating
    /// them into `X = c` bindings.
    pub symbolic_types: bool,
    /// Shift each ambiguous negative literal on its own instead of every
    /// nonempty subset. Unsound with two or more ambiguous negatives.
    pub per_literal_shift: bool,
    /// Shift `not p(..)` to a positive `p(..)` instead of a guard. Unsound
    /// when `p` depends positively on the rule's head.
    pub positive_shift: bool,
}

/// Construction step that produced an abstract rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Step {
    #[serde(rename = "0a")]
    Lift,
    #[serde(rename = "1a")]
    Definite,
    #[serde(rename = "1b")]
    GuessLifted,
    #[serde(rename = "1c")]
    GuessFlipped,
    #[serde(rename = "2a'")]
    DefiniteNeg,
    #[serde(rename = "2b'")]
    ShiftLifted,
    #[serde(rename = "2c'")]
    ShiftFlipped,
}

impl Step {
    fn ident(self) -> &'static str {
        match self {
            Step::Lift => "0a",
            Step::Definite => "1a",
            Step::GuessLifted => "1b",
            Step::GuessFlipped => "1c",
            Step::DefiniteNeg => "2a",
            Step::ShiftLifted => "2b",
            Step::ShiftFlipped => "2c",
        }
    }

    pub fn is_choice(self) -> bool {
        !matches!(self, Step::Lift | Step::Definite | Step::DefiniteNeg)
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::DefiniteNeg | Step::ShiftLifted | Step::ShiftFlipped => write!(f, "{}'", self.ident()),
            _ => f.write_str(self.ident()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StandardizedRule {
    pub rule: Rule,
    /// Equalities added to re-link split occurrences.
    pub induced: Vec<RelLit>,
    /// New variable name → the variable it was split from.
    origin: BTreeMap<String, String>,
    /// Variables introduced for constants, with the constant's sort.
    constants: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Emitted {
    pub step: Step,
    pub rule: Rule,
}

#[derive(Debug, Clone)]
pub struct RulePlan {
    pub source: Rule,
    pub standardized: Rule,
    /// Positive / negative body atoms sharing variables with Γ.
    pub s_pos: Vec<Atom>,
    pub s_neg: Vec<Atom>,
    pub emitted: Vec<Emitted>,
}

#[derive(Debug, Clone)]
pub struct AbstractionPlan {
    pub rules: Vec<RulePlan>,
    /// Guard definitions, tuple tables and relation type facts.
    pub auxiliary: Vec<Rule>,
    pub program: Program,
}

/// Renames every repeated body variable occurrence apart (`X` → `X1`, `X2`, …)
/// and links the copies with equalities. `dom_` atoms are left alone.
pub fn standardize_apart(r: &Rule) -> StandardizedRule {
    standardize(r, &|_| true, &|_, _, _| None)
}

fn fresh_name(base: &str, i: usize, taken: &BTreeSet<String>) -> String {
    let mut name = format!("{base}{i}");
    let mut n = 0;
    while taken.contains(&name) {
        n += 1;
        name = format!("{base}_{i}_{n}");
    }
    name
}

/// `select` picks variables to split; `constant` returns the sort of a
/// constant argument that must become a variable.
fn standardize(
    r: &Rule,
    select: &dyn Fn(&str) -> bool,
    constant: &dyn Fn(&Atom, usize, &Value) -> Option<String>,
) -> StandardizedRule {
    let mut taken: BTreeSet<String> = r.variables().into_iter().collect();
    let body_atoms = || r.pos.iter().chain(&r.neg).filter(|a| !a.is_dom());
    let mut count: BTreeMap<&str, usize> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for a in body_atoms() {
        for v in a.variables() {
            if select(v) {
                if !count.contains_key(v) {
                    order.push(v);
                }
                *count.entry(v).or_default() += 1;
            }
        }
    }
    let mut names: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for v in &order {
        if count[v] >= 2 {
            let mut list = Vec::new();
            for i in 1..=count[v] {
                let n = fresh_name(v, i, &taken);
                taken.insert(n.clone());
                list.push(n);
            }
            names.insert(v.to_string(), list);
        }
    }
    let mut origin = BTreeMap::new();
    for (v, list) in &names {
        for n in list {
            origin.insert(n.clone(), v.clone());
        }
    }
    let first = |v: &str| names.get(v).map(|l| l[0].clone()).unwrap_or_else(|| v.to_string());
    let rename_first = |t: &Term| match t {
        Term::Var(v) => Term::Var(first(v)),
        Term::Offset(v, k) => Term::Offset(first(v), *k),
        c => c.clone(),
    };
    let rename_atom_first = |a: &Atom| Atom::new(a.predicate.clone(), a.args.iter().map(rename_first).collect());
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut constants = BTreeMap::new();
    let mut const_eqs = Vec::new();
    let mut const_n = 0usize;
    let mut split = |a: &Atom, taken: &mut BTreeSet<String>| -> Atom {
        if a.is_dom() {
            return rename_atom_first(a);
        }
        let args = a
            .args
            .iter()
            .enumerate()
            .map(|(i, t)| match t {
                Term::Var(v) | Term::Offset(v, _) if names.contains_key(v) => {
                    let k = seen.entry(v.clone()).or_default();
                    let n = names[v][*k].clone();
                    *k += 1;
                    match t {
                        Term::Offset(_, d) => Term::Offset(n, *d),
                        _ => Term::Var(n),
                    }
                }
                Term::Const(c) => match constant(a, i, c) {
                    Some(sort) => {
                        const_n += 1;
                        let n = fresh_name("K", const_n, taken);
                        taken.insert(n.clone());
                        constants.insert(n.clone(), sort);
                        const_eqs.push(RelLit::new(Term::Var(n.clone()), Rel::Eq, t.clone()));
                        Term::Var(n)
                    }
                    None => t.clone(),
                },
                other => other.clone(),
            })
            .collect();
        Atom::new(a.predicate.clone(), args)
    };
    let pos: Vec<Atom> = r.pos.iter().map(|a| split(a, &mut taken)).collect();
    let neg: Vec<Atom> = r.neg.iter().map(|a| split(a, &mut taken)).collect();
    let head = match &r.head {
        Head::Atom(a) => Head::Atom(rename_atom_first(a)),
        Head::Constraint => Head::Constraint,
        Head::Choice { lower, upper, elements } => Head::Choice {
            lower: *lower,
            upper: *upper,
            elements: elements
                .iter()
                .map(|e| ChoiceElement {
                    atom: rename_atom_first(&e.atom),
                    condition: e.condition.iter().map(rename_atom_first).collect(),
                })
                .collect(),
        },
    };
    let mut gamma: Vec<RelLit> = r
        .gamma
        .iter()
        .map(|g| RelLit { rel: g.rel, lhs: rename_first(&g.lhs), rhs: rename_first(&g.rhs), negated: g.negated })
        .collect();
    let mut induced = Vec::new();
    for v in &order {
        if let Some(list) = names.get(*v) {
            for n in &list[1..] {
                induced.push(RelLit::new(Term::Var(list[0].clone()), Rel::Eq, Term::Var(n.clone())));
            }
        }
    }
    induced.extend(const_eqs);
    gamma.extend(induced.iter().cloned());
    StandardizedRule { rule: Rule::new(head, pos, neg, gamma), induced, origin, constants }
}

struct Ctx<'a> {
    p: &'a Program,
    m: &'a DomainMapping,
    info: SortInfo,
    opts: DomainOptions,
    /// Program with abstract sort declarations, for evaluating comparisons
    /// the way the grounder will.
    abs: Program,
    guards: BTreeMap<PredKey, Vec<String>>,
    aux: Vec<Rule>,
    rels_used: Vec<(Rel, String)>,
}

/// Variant of a rule for one abstract tuple.
struct Variant {
    step: Step,
    definite: bool,
    shifted: Vec<usize>,
}

impl<'a> Ctx<'a> {
    fn mapped(&self, sort: &str) -> bool {
        self.m.maps_sort(sort)
    }

    /// Maps constants of mapped sorts inside a (non-body) atom.
    fn lift_atom(&self, a: &Atom, vs: &VarSorts) -> Result<Atom> {
        let mut args = Vec::with_capacity(a.args.len());
        for (i, t) in a.args.iter().enumerate() {
            args.push(match t {
                Term::Const(c) => match self.info.term_sort(self.p, a, i, vs) {
                    Some(s) => Term::Const(self.m.map_value(&s, c)?),
                    None => t.clone(),
                },
                _ => t.clone(),
            });
        }
        Ok(Atom::new(a.predicate.clone(), args))
    }

    /// Arguments of `a` whose sort is mapped non-bijectively.
    fn coarse_args<'b>(&self, a: &'b Atom, vs: &VarSorts) -> Vec<&'b Term> {
        (0..a.args.len())
            .filter(|&i| {
                self.info
                    .term_sort(self.p, a, i, vs)
                    .and_then(|s| self.m.sort_mapping(&s))
                    .is_some_and(|sm| !sm.is_bijective())
            })
            .map(|i| &a.args[i])
            .collect()
    }

    /// An upper bound survives only if abstract elements are counted no more
    /// often than concrete ones: coarse arguments must be element-local
    /// variables and coarse conditions must be `dom_` atoms.
    fn bound_is_exact(&self, e: &ChoiceElement, body_vars: &BTreeSet<String>, vs: &VarSorts) -> bool {
        let local = |t: &Term| matches!(t, Term::Var(v) if !body_vars.contains(v));
        self.coarse_args(&e.atom, vs).into_iter().all(local)
            && e.condition.iter().all(|c| {
                let args = self.coarse_args(c, vs);
                args.is_empty() || (c.is_dom() && args.into_iter().all(local))
            })
    }

    fn term_sort(&self, t: &Term, other: &Term, vs: &VarSorts) -> Option<String> {
        match t {
            Term::Var(v) | Term::Offset(v, _) => vs.get(v).cloned(),
            Term::Const(c) => match other {
                Term::Var(v) | Term::Offset(v, _) => vs.get(v).cloned(),
                Term::Const(_) => {
                    let mut it = self.p.sorts_containing(c);
                    match (it.next(), it.next()) {
                        (Some(s), None) => Some(s.name.clone()),
                        _ => None,
                    }
                }
            },
        }
    }

    fn abstract_rule(&mut self, idx: usize, r: &Rule) -> Result<RulePlan> {
        let vs = self.info.rule_sorts(self.p, r)?;
        let abstracted = |v: &str| vs.get(v).is_some_and(|s| self.m.maps_sort(s));
        // X+k has no meaning over classes
        if let Some(t) = rule_terms(r).find(|t| matches!(t, Term::Offset(v, _) if abstracted(v))) {
            return Err(Error::Unsupported(format!(
                "arithmetic `{t}` over an abstracted sort in `{}`",
                crate::parser::print_rule(r)
            )));
        }
        let info = &self.info;
        let (p, m) = (self.p, self.m);
        let st = standardize(r, &abstracted, &|a, i, _c| info.term_sort(p, a, i, &vs).filter(|s| m.maps_sort(s)));
        let mut vs2 = vs.clone();
        for (n, o) in &st.origin {
            vs2.insert(n.clone(), vs[o].clone());
        }
        for (n, s) in &st.constants {
            vs2.insert(n.clone(), s.clone());
        }
        let sr = st.rule.clone();
        let mut plan = RulePlan {
            source: r.clone(),
            standardized: sr.clone(),
            s_pos: Vec::new(),
            s_neg: Vec::new(),
            emitted: Vec::new(),
        };

        // split Γ into literals over abstracted sorts and the rest
        let mut g_abs: Vec<(RelLit, String)> = Vec::new();
        let mut g_keep: Vec<RelLit> = Vec::new();
        for g in &sr.gamma {
            let ls = self.term_sort(&g.lhs, &g.rhs, &vs2);
            let rs = self.term_sort(&g.rhs, &g.lhs, &vs2);
            let la = ls.as_deref().is_some_and(|s| self.mapped(s));
            let ra = rs.as_deref().is_some_and(|s| self.mapped(s));
            if !la && !ra {
                g_keep.push(g.clone());
                continue;
            }
            if ls != rs {
                return Err(Error::MixedSorts {
                    left: ls.unwrap_or_else(|| "?".into()),
                    right: rs.unwrap_or_else(|| "?".into()),
                });
            }
            let sort = ls.expect("mapped");
            if let (Term::Const(a), Term::Const(b)) = (&g.lhs, &g.rhs) {
                if g.effective_rel().holds(self.p.compare_values(a, b)) {
                    continue;
                }
                return Ok(plan);
            }
            g_abs.push((g.clone(), sort));
        }

        let gamma_vars: BTreeSet<&str> = g_abs.iter().flat_map(|(g, _)| g.variables()).collect();
        let shares = |a: &Atom| a.variables().any(|v| gamma_vars.contains(v));
        plan.s_pos = sr.pos.iter().filter(|a| !a.is_dom() && shares(a)).cloned().collect();
        plan.s_neg = sr.neg.iter().filter(|a| !a.is_dom() && shares(a)).cloned().collect();

        let pos_vars: BTreeSet<&str> = sr
            .pos
            .iter()
            .filter(|a| !a.is_dom())
            .flat_map(Atom::variables)
            .filter(|v| abstracted(v) || vs2.get(*v).is_some_and(|s| self.mapped(s)))
            .collect();
        let mut enum_vars: Vec<String> = Vec::new();
        let mut push = |v: &str| {
            if !enum_vars.iter().any(|e| e == v) {
                enum_vars.push(v.to_string());
            }
        };
        for (g, _) in &g_abs {
            g.variables().for_each(&mut push);
        }
        let neg_idx: Vec<usize> = (0..sr.neg.len()).filter(|&i| !sr.neg[i].is_dom()).collect();
        for &i in &neg_idx {
            for v in sr.neg[i].variables() {
                if vs2.get(v).is_some_and(|s| self.mapped(s)) {
                    push(v);
                }
            }
        }

        if enum_vars.is_empty() {
            let rule = self.build(
                &sr,
                &vs,
                &vs2,
                &g_keep,
                &[],
                None,
                &Variant { step: Step::Lift, definite: true, shifted: vec![] },
            )?;
            plan.emitted.push(Emitted { step: Step::Lift, rule });
            return Ok(plan);
        }

        let classes: Vec<Vec<Value>> = enum_vars
            .iter()
            .map(|v| {
                let sm = self.m.sort_mapping(&vs2[v]).expect("mapped");
                sm.classes.iter().map(|c| c.name.clone()).collect()
            })
            .collect();
        let total = classes.iter().try_fold(1usize, |acc, c| acc.checked_mul(c.len()));
        if total.is_none_or(|t| t > MAX_TUPLES) {
            return Err(Error::Resource(format!("rule {} needs more than {MAX_TUPLES} abstract tuples", idx + 1)));
        }
        for (g, sort) in &g_abs {
            if matches!((&g.lhs, &g.rhs), (Term::Var(_), Term::Var(_))) {
                self.rels_used.push((g.rel, sort.clone()));
            }
        }
        let is_constraint = sr.head.is_constraint();
        let mut tables: BTreeMap<(Step, Vec<usize>), Vec<Vec<Value>>> = BTreeMap::new();
        for tuple in product(&classes) {
            let theta: BTreeMap<&str, &Value> = enum_vars.iter().map(String::as_str).zip(tuple.iter()).collect();
            let (possible, definite) = self.refinements(&g_abs, &enum_vars, &theta, &pos_vars, &vs2);
            if !possible {
                continue;
            }
            let mut lifted = true;
            for (g, sort) in &g_abs {
                let (a, b) = (self.abstract_value(&g.lhs, &theta, sort)?, self.abstract_value(&g.rhs, &theta, sort)?);
                lifted &= self.m.lifted_relation_holds(self.p, g.effective_rel(), (sort, &a), (sort, &b))?;
            }
            let ambiguous: Vec<usize> = neg_idx
                .iter()
                .copied()
                .filter(|&i| {
                    sr.neg[i].variables().any(|v| theta.get(v).is_some_and(|c| self.m.preimage(&vs2[v], c).len() > 1))
                })
                .collect();
            let mut variants = Vec::new();
            if definite {
                let step = if g_abs.is_empty() {
                    Step::Lift
                } else if neg_idx.is_empty() {
                    Step::Definite
                } else {
                    Step::DefiniteNeg
                };
                variants.push(Variant { step, definite: true, shifted: vec![] });
            } else if !is_constraint {
                let step = if lifted { Step::GuessLifted } else { Step::GuessFlipped };
                variants.push(Variant { step, definite: false, shifted: vec![] });
            }
            if !is_constraint && !ambiguous.is_empty() {
                let step = if lifted { Step::ShiftLifted } else { Step::ShiftFlipped };
                let subsets: Vec<Vec<usize>> = if self.opts.per_literal_shift {
                    ambiguous.iter().map(|&i| vec![i]).collect()
                } else {
                    (1u64..(1u64 << ambiguous.len()))
                        .map(|mask| {
                            ambiguous.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &i)| i).collect()
                        })
                        .collect()
                };
                for s in subsets {
                    variants.push(Variant { step, definite: false, shifted: s });
                }
            }
            for v in variants {
                if self.opts.symbolic_types {
                    tables.entry((v.step, v.shifted.clone())).or_default().push(tuple.clone());
                } else {
                    let bind = Binding { vars: &enum_vars, tuple: &tuple, g_abs: &g_abs };
                    let rule = self.build(&sr, &vs, &vs2, &g_keep, &[], Some(bind), &v)?;
                    plan.emitted.push(Emitted { step: v.step, rule });
                }
            }
        }
        for ((step, shifted), tuples) in tables {
            let mut name = format!("{TYPE_PREFIX}r{}_{}", idx + 1, step.ident());
            for i in &shifted {
                name.push_str(&format!("_n{}", i + 1));
            }
            let type_atom = Atom::new(name.clone(), enum_vars.iter().map(|v| Term::Var(v.clone())).collect());
            for t in tuples {
                self.aux.push(Rule::fact(Atom::new(name.clone(), t.into_iter().map(Term::Const).collect())));
            }
            let v = Variant { step, definite: !step.is_choice(), shifted };
            let rule = self.build(&sr, &vs, &vs2, &g_keep, &[type_atom], None, &v)?;
            plan.emitted.push(Emitted { step, rule });
        }
        let mut seen = BTreeSet::new();
        plan.emitted.retain(|e| seen.insert(e.rule.clone()));
        Ok(plan)
    }

    /// Abstract value of a Γ term under tuple `theta`.
    fn abstract_value(&self, t: &Term, theta: &BTreeMap<&str, &Value>, sort: &str) -> Result<Value> {
        match t {
            Term::Var(v) | Term::Offset(v, _) => Ok(theta[v.as_str()].clone()),
            Term::Const(c) => self.m.map_value(sort, c),
        }
    }

    /// (∃ refinement satisfying Γ, ∀ positive-variable refinements ∃ the rest).
    fn refinements(
        &self,
        g_abs: &[(RelLit, String)],
        vars: &[String],
        theta: &BTreeMap<&str, &Value>,
        pos_vars: &BTreeSet<&str>,
        vs: &VarSorts,
    ) -> (bool, bool) {
        let (pv, fv): (Vec<&String>, Vec<&String>) = vars.iter().partition(|v| pos_vars.contains(v.as_str()));
        let pre = |v: &String| self.m.preimage(&vs[v], theta[v.as_str()]);
        let p_lists: Vec<Vec<Value>> = pv.iter().map(|v| pre(v)).collect();
        let f_lists: Vec<Vec<Value>> = fv.iter().map(|v| pre(v)).collect();
        let mut possible = false;
        let mut definite = true;
        for pt in product(&p_lists) {
            let mut sat = false;
            for ft in product(&f_lists) {
                let val = |t: &Term| -> Value {
                    match t {
                        Term::Const(c) => c.clone(),
                        Term::Var(v) | Term::Offset(v, _) => {
                            if let Some(i) = pv.iter().position(|x| *x == v) {
                                pt[i].clone()
                            } else {
                                ft[fv.iter().position(|x| *x == v).expect("enumerated")].clone()
                            }
                        }
                    }
                };
                if g_abs.iter().all(|(g, _)| g.effective_rel().holds(self.p.compare_values(&val(&g.lhs), &val(&g.rhs))))
                {
                    sat = true;
                    break;
                }
            }
            possible |= sat;
            definite &= sat;
            if possible && !definite {
                break;
            }
        }
        (possible, definite && possible)
    }

    fn guard(&mut self, a: &Atom, vs: &VarSorts) -> Option<Atom> {
        let sorts: Option<Vec<String>> = (0..a.args.len()).map(|i| self.info.term_sort(self.p, a, i, vs)).collect();
        let sorts = sorts?;
        if sorts.iter().any(|s| self.p.sort(s).is_none()) {
            return None;
        }
        self.guards.entry(a.key()).or_insert(sorts);
        Some(Atom::new(format!("{AUX_PREFIX}neg_{}", a.predicate), a.args.clone()))
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        &mut self,
        sr: &Rule,
        vs: &VarSorts,
        vs2: &VarSorts,
        g_keep: &[RelLit],
        extra_pos: &[Atom],
        bind: Option<Binding<'_>>,
        v: &Variant,
    ) -> Result<Rule> {
        let plain = v.definite && v.shifted.is_empty();
        let head = match &sr.head {
            Head::Atom(a) => {
                let a = self.lift_atom(a, vs)?;
                if plain {
                    Head::Atom(a)
                } else {
                    Head::Choice { lower: 0, upper: Some(1), elements: vec![ChoiceElement::plain(a)] }
                }
            }
            Head::Constraint => Head::Constraint,
            Head::Choice { lower, upper, elements } => {
                let mut els = Vec::new();
                let mut coarse = false;
                let body_vars = sr.body_variables();
                for e in elements {
                    coarse |= !self.bound_is_exact(e, &body_vars, vs);
                    els.push(ChoiceElement {
                        atom: self.lift_atom(&e.atom, vs)?,
                        condition: e.condition.iter().map(|c| self.lift_atom(c, vs)).collect::<Result<_>>()?,
                    });
                }
                Head::Choice {
                    lower: if plain { *lower } else { 0 },
                    upper: if plain && !coarse { *upper } else { None },
                    elements: els,
                }
            }
        };
        let mut pos: Vec<Atom> = Vec::new();
        for a in &sr.pos {
            pos.push(if a.is_dom() { self.lift_atom(a, vs2)? } else { a.clone() });
        }
        pos.extend(extra_pos.iter().cloned());
        let mut neg = Vec::new();
        let mut guards = Vec::new();
        for (i, a) in sr.neg.iter().enumerate() {
            if !v.shifted.contains(&i) {
                neg.push(if a.is_dom() { self.lift_atom(a, vs2)? } else { a.clone() });
            } else if self.opts.positive_shift {
                pos.push(a.clone());
            } else if let Some(g) = self.guard(a, vs2) {
                guards.push(g);
            }
        }
        neg.extend(guards);
        let mut gamma: Vec<RelLit> = g_keep.to_vec();
        if let Some(b) = bind {
            for (var, val) in b.vars.iter().zip(b.tuple) {
                gamma.push(RelLit::new(Term::Var(var.clone()), Rel::Eq, Term::Const(val.clone())));
            }
            let theta: BTreeMap<&str, &Value> = b.vars.iter().map(String::as_str).zip(b.tuple.iter()).collect();
            for (g, sort) in b.g_abs {
                let lift = |t: &Term| -> Result<Term> {
                    Ok(match t {
                        Term::Const(c) => Term::Const(self.m.map_value(sort, c)?),
                        other => other.clone(),
                    })
                };
                let (lhs, rhs) = (lift(&g.lhs)?, lift(&g.rhs)?);
                let (a, bv) = (self.abstract_value(&g.lhs, &theta, sort)?, self.abstract_value(&g.rhs, &theta, sort)?);
                let holds = g.effective_rel().holds(self.abs.compare_values(&a, &bv));
                let rel = if holds { g.effective_rel() } else { g.effective_rel().negate() };
                gamma.push(RelLit::new(lhs, rel, rhs));
            }
        }
        let mut rule = Rule::new(head, pos, neg, gamma);
        while let Some(x) = crate::parser::unsafe_variable(&rule) {
            let s = vs2.get(&x).ok_or_else(|| Error::UnknownVariableSort {
                variable: x.clone(),
                rule: crate::parser::print_rule(sr),
            })?;
            rule.pos.push(Atom::new(dom_predicate(s), vec![Term::Var(x)]));
        }
        Ok(rule)
    }
}

#[derive(Clone, Copy)]
struct Binding<'b> {
    vars: &'b [String],
    tuple: &'b [Value],
    g_abs: &'b [(RelLit, String)],
}

/// Cartesian product in lexicographic order.
fn product(lists: &[Vec<Value>]) -> Vec<Vec<Value>> {
    let mut out = vec![Vec::new()];
    for l in lists {
        let mut next = Vec::with_capacity(out.len() * l.len());
        for prefix in &out {
            for v in l {
                let mut t = prefix.clone();
                t.push(v.clone());
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// Builds the abstract program together with the per-rule construction record.
/// Omitted predicates of the mapping are removed first.
fn rule_terms(r: &Rule) -> impl Iterator<Item = &Term> {
    let mut atoms: Vec<&Atom> = r.pos.iter().chain(&r.neg).collect();
    match &r.head {
        Head::Atom(a) => atoms.push(a),
        Head::Constraint => {}
        Head::Choice { elements, .. } => {
            for e in elements {
                atoms.push(&e.atom);
                atoms.extend(&e.condition);
            }
        }
    }
    atoms.into_iter().flat_map(|a| &a.args).chain(r.gamma.iter().flat_map(|g| [&g.lhs, &g.rhs]))
}

pub fn plan(p: &Program, m: &DomainMapping, opts: &DomainOptions) -> Result<AbstractionPlan> {
    m.validate(p)?;
    let omitted;
    let p = if m.omitted.is_empty() {
        p
    } else {
        omitted = omit_literals(p, &m.omitted)?.program;
        &omitted
    };
    let mut abs = p.clone();
    abs.sorts = p.sorts.iter().map(|s| m.abstract_sort(s)).collect();
    abs.rules.clear();
    let mut ctx = Ctx {
        p,
        m,
        info: SortInfo::new(p),
        opts: *opts,
        abs: abs.clone(),
        guards: BTreeMap::new(),
        aux: Vec::new(),
        rels_used: Vec::new(),
    };
    let mut rules = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, r) in p.rules.iter().enumerate() {
        let rp = if m.sorts.is_empty() {
            RulePlan {
                source: r.clone(),
                standardized: r.clone(),
                s_pos: vec![],
                s_neg: vec![],
                emitted: vec![Emitted { step: Step::Lift, rule: r.clone() }],
            }
        } else {
            ctx.abstract_rule(i, r)?
        };
        for e in &rp.emitted {
            if seen.insert(e.rule.clone()) {
                abs.rules.push(e.rule.clone());
            }
        }
        rules.push(rp);
    }
    let mut auxiliary = Vec::new();
    for (key, sorts) in &ctx.guards {
        let vars: Vec<Term> = (1..=key.arity).map(|i| Term::Var(format!("V{i}"))).collect();
        let pos = sorts.iter().zip(&vars).map(|(s, v)| Atom::new(dom_predicate(s), vec![v.clone()])).collect();
        auxiliary.push(Rule::new(
            Head::Atom(Atom::new(format!("{AUX_PREFIX}neg_{}", key.name), vars.clone())),
            pos,
            vec![Atom::new(key.name.clone(), vars)],
            vec![],
        ));
    }
    auxiliary.append(&mut ctx.aux);
    if opts.symbolic_types {
        auxiliary.extend(m.build_type_facts(p, &ctx.rels_used)?);
    }
    for r in &auxiliary {
        if seen.insert(r.clone()) {
            abs.rules.push(r.clone());
        }
    }
    Ok(AbstractionPlan { rules, auxiliary, program: abs })
}

pub fn abstract_program(p: &Program, m: &DomainMapping, opts: &DomainOptions) -> Result<Program> {
    Ok(plan(p, m, opts)?.program)
}

impl fmt::Display for AbstractionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, rp) in self.rules.iter().enumerate() {
            writeln!(f, "% rule {}: {}", i + 1, crate::parser::print_rule(&rp.source))?;
            for e in &rp.emitted {
                writeln!(f, "%   [{}] {}", e.step, crate::parser::print_rule(&e.rule))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_mapping, parse_program_str, print_program, print_rule};
    use crate::solve::answer_sets;
    use crate::Limits;

    const PAIRS_NEG: &str = "sort s {1..3}.\n\
        a(X1,X2) :- c(X1), b(X2).\n\
        d(X1,X2) :- a(X1,X2), X1 <= X2.\n\
        e(X1) :- dom_s(X1), dom_s(X2), not a(X1,X2), X1 = X2.\n";
    const ONE_VS_REST: &str = "sort s; class d1 = {1}; class dk = {2,3};";

    fn pairs_neg(opts: DomainOptions) -> AbstractionPlan {
        let p = parse_program_str(PAIRS_NEG).unwrap();
        plan(&p, &parse_mapping(ONE_VS_REST, "t").unwrap(), &opts).unwrap()
    }

    #[test]
    fn standardizes_shared_variables() {
        let p = parse_program_str("c :- r(X,Y), p(X,Y).").unwrap();
        let st = standardize_apart(&p.rules[0]);
        assert_eq!(print_rule(&st.rule), "c :- r(X1,Y1), p(X2,Y2), X1 = X2, Y1 = Y2.");
        assert_eq!(st.induced.len(), 2);
    }

    #[test]
    fn standardize_leaves_apart_rules_alone() {
        let p = parse_program_str("d(X1,X2) :- a(X1,X2), X1 <= X2. f(1).").unwrap();
        assert_eq!(standardize_apart(&p.rules[0]).rule, p.rules[0]);
        assert_eq!(standardize_apart(&p.rules[1]).rule, p.rules[1]);
    }

    #[test]
    fn standardize_renames_head_and_avoids_collisions() {
        let p = parse_program_str("h(X) :- p(X), q(X), r(X1).").unwrap();
        let st = standardize_apart(&p.rules[0]);
        assert_eq!(print_rule(&st.rule), "h(X_1_1) :- p(X_1_1), q(X2), r(X1), X_1_1 = X2.");
    }

    #[test]
    fn rule_families_per_step() {
        let pl = pairs_neg(DomainOptions::default());
        let steps: Vec<Vec<String>> =
            pl.rules.iter().map(|r| r.emitted.iter().map(|e| e.step.to_string()).collect()).collect();
        assert_eq!(steps[0], ["0a"]);
        assert_eq!(steps[1], ["1a", "1a", "1b"]);
        assert_eq!(steps[2], ["2a'", "2a'", "2b'"]);
        let text: Vec<String> = pl.rules[1].emitted.iter().map(|e| print_rule(&e.rule)).collect();
        assert_eq!(text[1], "d(X1,X2) :- a(X1,X2), X1 = d1, X2 = dk, X1 <= X2.");
        assert_eq!(text[2], "0 { d(X1,X2) } 1 :- a(X1,X2), X1 = dk, X2 = dk, X1 <= X2.");
        assert_eq!(
            print_rule(&pl.rules[2].emitted[2].rule),
            "0 { e(X1) } 1 :- dom_s(X1), dom_s(X2), not aux_neg_a(X1,X2), X1 = dk, X2 = dk, X1 = X2."
        );
        assert!(print_program(&pl.program).contains("aux_neg_a(V1,V2) :- dom_s(V1), dom_s(V2), not a(V1,V2)."));
    }

    #[test]
    fn merged_answer_set_present() {
        let mut p = pairs_neg(DomainOptions::default()).program;
        p.extend(&parse_program_str("c(dk). b(dk).").unwrap());
        let sets: Vec<String> = answer_sets(&p, &Limits::default()).unwrap().iter().map(ToString::to_string).collect();
        assert!(sets.contains(&"{a(dk,dk), b(dk), c(dk), e(d1), e(dk)}".to_string()), "{sets:?}");
    }

    #[test]
    fn symbolic_and_evaluated_agree() {
        for facts in ["c(dk). b(dk).", "c(d1). b(dk).", "c(d1). b(d1). c(dk)."] {
            let f = parse_program_str(facts).unwrap();
            let mut a = pairs_neg(DomainOptions::default()).program;
            let mut b = pairs_neg(DomainOptions { symbolic_types: true, ..Default::default() }).program;
            a.extend(&f);
            b.extend(&f);
            assert_eq!(answer_sets(&a, &Limits::default()).unwrap(), answer_sets(&b, &Limits::default()).unwrap());
        }
    }

    #[test]
    fn symbolic_mode_emits_type_facts() {
        let text = print_program(&pairs_neg(DomainOptions { symbolic_types: true, ..Default::default() }).program);
        assert!(text.contains("type_leq_III(dk,dk)."));
        assert!(text.contains("type_r2_1b(dk,dk)."));
        assert!(text.contains("0 { d(X1,X2) } 1 :- a(X1,X2), type_r2_1b(X1,X2)."));
    }

    #[test]
    fn two_ambiguous_negatives_need_joint_shift() {
        use crate::check::{check_coverage, CheckOptions};
        let p = parse_program_str("sort s {1..2}. p(1). q(2). h :- dom_s(X), dom_s(Y), not p(X), not q(Y).").unwrap();
        let m = parse_mapping("sort s; class k = {1,2};", "t").unwrap();
        let sound = |opts: DomainOptions| {
            let a = abstract_program(&p, &m, &opts).unwrap();
            check_coverage(&p, &a, &m, &Limits::default(), CheckOptions::default()).unwrap().is_sound()
        };
        assert!(sound(DomainOptions::default()));
        assert!(!sound(DomainOptions { per_literal_shift: true, ..Default::default() }));
    }

    #[test]
    fn arithmetic_over_abstracted_sort_rejected() {
        let p = parse_program_str("sort s {1..4}. sig p(s). p(1). p(X+1) :- p(X), X < 3.").unwrap();
        let m = parse_mapping("sort s; class lo = {1,2}; class hi = {3,4};", "t").unwrap();
        assert!(matches!(plan(&p, &m, &DomainOptions::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn identity_mapping_emits_no_choices() {
        let p = parse_program_str(PAIRS_NEG).unwrap();
        let pl = plan(&p, &DomainMapping::identity(&p), &DomainOptions::default()).unwrap();
        assert!(pl.rules.iter().flat_map(|r| &r.emitted).all(|e| !e.step.is_choice()));
    }

    #[test]
    fn constraints_only_lift_definitely() {
        let p = parse_program_str("sort s {1..3}. :- a(X), b(Y), X < Y.").unwrap();
        let pl = plan(&p, &parse_mapping(ONE_VS_REST, "t").unwrap(), &DomainOptions::default()).unwrap();
        let text: Vec<String> = pl.rules[0].emitted.iter().map(|e| print_rule(&e.rule)).collect();
        assert_eq!(text, [":- a(X), b(Y), X = d1, Y = dk, X < Y."]);
    }

    #[test]
    fn mixed_sorts_rejected() {
        let p = parse_program_str("sort s {1..3}. sort time {0..2}. sig a(s). sig t(time). p :- a(X), t(T), X < T.")
            .unwrap();
        let r = plan(&p, &parse_mapping(ONE_VS_REST, "t").unwrap(), &DomainOptions::default());
        assert!(matches!(r, Err(Error::MixedSorts { .. })));
    }

    #[test]
    fn facts_and_constants_are_lifted() {
        let p = parse_program_str("sort s {1..3}. c(3). p :- c(2).").unwrap();
        let text = print_program(
            &abstract_program(&p, &parse_mapping(ONE_VS_REST, "t").unwrap(), &DomainOptions::default()).unwrap(),
        );
        assert!(text.contains("c(dk)."));
        assert!(text.contains("0 { p } 1 :- c(K1), K1 = dk, K1 = dk."), "{text}");
    }

    #[test]
    fn time_is_untouched() {
        let p = parse_program_str(
            "sort time {0..1}. sort s {1..3}. sig r(s,time). r(X,T+1) :- r(X,T), not q(X,T). q(1,0).",
        )
        .unwrap();
        let pl = plan(&p, &parse_mapping(ONE_VS_REST, "t").unwrap(), &DomainOptions::default()).unwrap();
        let text: Vec<String> = pl.rules[0].emitted.iter().map(|e| print_rule(&e.rule)).collect();
        assert!(
            text.contains(&"r(X1,T+1) :- r(X1,T), not q(X2,T), X1 = d1, X2 = d1, X1 = X2.".to_string()),
            "{text:?}"
        );
    }

    fn covered(text: &str, map: &str) -> (String, bool) {
        let p = parse_program_str(text).unwrap();
        let m = parse_mapping(map, "t").unwrap();
        let a = abstract_program(&p, &m, &DomainOptions::default()).unwrap();
        let r = crate::check::check_coverage(&p, &a, &m, &Limits::default(), Default::default()).unwrap();
        (print_program(&a), r.is_sound())
    }

    const HALVES: &str = "sort s; class k1 = {1,2}; class k2 = {3,4};";

    #[test]
    fn upper_bound_kept_for_local_elements() {
        let (text, sound) = covered("sort s {1..4}. 1 { p(X) : dom_s(X) } 1. q(X) :- p(X).", HALVES);
        assert!(text.contains("1 { p(X) : dom_s(X) } 1."), "{text}");
        assert!(sound);
    }

    #[test]
    fn upper_bound_dropped_for_coarse_globals() {
        let (text, sound) = covered("sort s {1..4}. r(1). r(2). 1 { q(X,Y) : dom_s(Y) } 1 :- r(X).", HALVES);
        assert!(text.contains("1 { q(X,Y) : dom_s(Y) } :- r(X)."), "{text}");
        assert!(sound);
        let (text, sound) = covered("sort s {1..4}. f(1,3). f(2,1). g(1). 1 { h(Y) : f(X,Y) } 1 :- g(X).", HALVES);
        assert!(text.contains("1 { h(Y) : f(X,Y) } :- g(X)."), "{text}");
        assert!(sound);
    }
}
