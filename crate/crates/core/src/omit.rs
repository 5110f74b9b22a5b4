//! Literal omission: every occurrence of the omitted predicates disappears.
//!
//! A rule that loses body literals can no longer be trusted to fire exactly
//! when it did before, so its head becomes a `0 { h } 1` guess. Constraints
//! that lose body literals are dropped, rules whose head is omitted vanish.
//! Variables left without a positive binder are bound by `dom_<sort>` atoms.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::ast::{dom_predicate, Atom, ChoiceElement, Head, PredKey, Program, Rule, Term};
use crate::error::Result;
use crate::sorts::{SortInfo, VarSorts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Disposition {
    /// no omitted predicate involved
    Kept,
    /// body lost literals; head turned into a choice
    HeadChoiced,
    ConstraintDropped,
    /// head predicate omitted
    HeadOmitted,
    /// only choice-element conditions or elements were affected
    ChoiceReduced,
}

#[derive(Debug, Clone)]
pub struct OmissionResult {
    pub program: Program,
    /// One entry per source rule, in order.
    pub report: Vec<Disposition>,
    /// Sorts whose `dom_` predicate was introduced.
    pub dom_added: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OmitOptions {
    /// Keep constraints with their omitted literals removed instead of
    /// dropping them. This is NOT an over-approximation; it exists so the
    /// coverage checker can be shown to catch it.
    pub shrink_constraints: bool,
}

pub fn omit_literals(p: &Program, omitted: &[PredKey]) -> Result<OmissionResult> {
    omit_literals_with(p, omitted, OmitOptions::default())
}

pub fn omit_literals_with(p: &Program, omitted: &[PredKey], opts: OmitOptions) -> Result<OmissionResult> {
    let gone: BTreeSet<&PredKey> = omitted.iter().collect();
    let is_gone = |a: &Atom| gone.contains(&a.key());
    let info = SortInfo::new(p);
    let mut out = Program {
        sorts: p.sorts.clone(),
        signatures: p.signatures.iter().filter(|s| !gone.contains(&s.key())).cloned().collect(),
        fluents: p.fluents.iter().filter(|k| !gone.contains(k)).cloned().collect(),
        actions: p.actions.iter().filter(|k| !gone.contains(k)).cloned().collect(),
        rules: Vec::new(),
    };
    let mut report = Vec::with_capacity(p.rules.len());
    let mut dom_added = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut emit = |r: Rule, out: &mut Program| {
        if seen.insert(r.clone()) {
            out.rules.push(r);
        }
    };
    for r in &p.rules {
        let body_hit = r.pos.iter().chain(&r.neg).any(is_gone);
        let head_hit = match &r.head {
            Head::Atom(a) => is_gone(a),
            Head::Constraint => false,
            Head::Choice { elements, .. } => {
                elements.iter().any(|e| is_gone(&e.atom) || e.condition.iter().any(is_gone))
            }
        };
        if !body_hit && !head_hit {
            report.push(Disposition::Kept);
            emit(r.clone(), &mut out);
            continue;
        }
        if matches!(&r.head, Head::Atom(a) if is_gone(a)) {
            report.push(Disposition::HeadOmitted);
            continue;
        }
        if r.head.is_constraint() && !opts.shrink_constraints {
            report.push(Disposition::ConstraintDropped);
            continue;
        }
        let vs = info.rule_sorts(p, r)?;
        let mut nr = Rule::new(
            r.head.clone(),
            r.pos.iter().filter(|a| !is_gone(a)).cloned().collect(),
            r.neg.iter().filter(|a| !is_gone(a)).cloned().collect(),
            r.gamma.clone(),
        );
        let mut disposition = if body_hit { Disposition::HeadChoiced } else { Disposition::ChoiceReduced };
        nr.head = match &r.head {
            Head::Atom(a) => Head::Choice { lower: 0, upper: Some(1), elements: vec![ChoiceElement::plain(a.clone())] },
            Head::Constraint => Head::Constraint,
            Head::Choice { lower, upper, elements } => {
                let kept: Vec<&ChoiceElement> = elements.iter().filter(|e| !is_gone(&e.atom)).collect();
                if kept.is_empty() {
                    report.push(Disposition::HeadOmitted);
                    continue;
                }
                let lost_elements = kept.len() < elements.len();
                let lost_conditions = kept.iter().any(|e| e.condition.iter().any(is_gone));
                let mut new_elems = Vec::new();
                for e in kept {
                    let condition: Vec<Atom> = e.condition.iter().filter(|a| !is_gone(a)).cloned().collect();
                    let mut ne = ChoiceElement { atom: e.atom.clone(), condition };
                    // re-bind element-local variables the dropped conjuncts bound
                    let mut bound: BTreeSet<String> =
                        nr.pos.iter().flat_map(Atom::variables).map(str::to_string).collect();
                    bound.extend(ne.condition.iter().flat_map(Atom::variables).map(str::to_string));
                    for v in e.atom.variables().map(str::to_string).collect::<Vec<_>>() {
                        if !bound.contains(&v) && !r.body_variables().contains(&v) {
                            let s = &vs[&v];
                            dom_added.insert(s.clone());
                            ne.condition.push(Atom::new(dom_predicate(s), vec![Term::Var(v.clone())]));
                            bound.insert(v);
                        }
                    }
                    new_elems.push(ne);
                }
                let lower = if lost_elements || body_hit { 0 } else { *lower };
                let upper = if lost_conditions || body_hit { None } else { *upper };
                if lost_elements && !body_hit && !lost_conditions {
                    disposition = Disposition::ChoiceReduced;
                }
                Head::Choice { lower, upper, elements: new_elems }
            }
        };
        bind_with_dom(&mut nr, &vs, &mut dom_added);
        report.push(disposition);
        emit(nr, &mut out);
    }
    for s in &dom_added {
        log::debug!("omission introduced dom_{s}");
    }
    Ok(OmissionResult { program: out, report, dom_added })
}

/// Adds `dom_<sort>(V)` for each body/head variable no positive atom binds.
fn bind_with_dom(r: &mut Rule, vs: &VarSorts, added: &mut BTreeSet<String>) {
    let all = r.variables();
    loop {
        let Some(v) = crate::parser::unsafe_variable(r) else { return };
        if !all.contains(&v) {
            return;
        }
        let s = &vs[&v];
        added.insert(s.clone());
        r.pos.push(Atom::new(dom_predicate(s), vec![Term::Var(v)]));
    }
}
