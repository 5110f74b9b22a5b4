//! Sort inference for rule variables.
//!
//! Sources, strongest first: `sig` declarations, `dom_<sort>` atoms, `T+k`
//! (time), argument positions whose constants all lie in one sort, equalities
//! and comparisons with already-sorted terms, and finally the program's only
//! non-time sort.

use std::collections::BTreeMap;

use crate::ast::{Atom, Head, PredKey, Program, Rule, Term, Value, DOM_PREFIX, TIME_SORT};
use crate::error::{Error, Result};

pub type VarSorts = BTreeMap<String, String>;

/// Program-wide knowledge about argument positions.
#[derive(Debug, Clone)]
pub struct SortInfo {
    positions: BTreeMap<(PredKey, usize), String>,
    default_sort: Option<String>,
}

fn rule_atoms(r: &Rule) -> Vec<&Atom> {
    let mut v: Vec<&Atom> = r.head.atoms();
    if let Head::Choice { elements, .. } = &r.head {
        v.extend(elements.iter().flat_map(|e| &e.condition));
    }
    v.extend(&r.pos);
    v.extend(&r.neg);
    v
}

fn unique_sort(p: &Program, v: &Value) -> Option<String> {
    let mut it = p.sorts_containing(v).filter(|s| s.name != TIME_SORT);
    match (it.next(), it.next()) {
        (Some(s), None) => Some(s.name.clone()),
        (None, None) => p.time_sort().filter(|t| t.contains(v)).map(|t| t.name.clone()),
        _ => None,
    }
}

impl SortInfo {
    pub fn new(p: &Program) -> Self {
        let mut positions = BTreeMap::new();
        for s in &p.signatures {
            for (i, srt) in s.sorts.iter().enumerate() {
                positions.insert((s.key(), i), srt.clone());
            }
        }
        // constants seen at each undeclared position
        let mut consts: BTreeMap<(PredKey, usize), Vec<&Value>> = BTreeMap::new();
        for r in &p.rules {
            for a in rule_atoms(r) {
                for (i, t) in a.args.iter().enumerate() {
                    if let Term::Const(v) = t {
                        consts.entry((a.key(), i)).or_default().push(v);
                    }
                }
            }
        }
        for (k, vs) in consts {
            if positions.contains_key(&k) {
                continue;
            }
            let candidates: Vec<&str> =
                p.sorts.iter().filter(|s| vs.iter().all(|v| s.contains(v))).map(|s| s.name.as_str()).collect();
            let pick = match candidates.as_slice() {
                [one] => Some(one.to_string()),
                many => {
                    let non_time: Vec<&&str> = many.iter().filter(|s| **s != TIME_SORT).collect();
                    if non_time.len() == 1 && vs.iter().all(|v| unique_sort(p, v).as_deref() == Some(non_time[0])) {
                        Some(non_time[0].to_string())
                    } else {
                        None
                    }
                }
            };
            if let Some(s) = pick {
                positions.insert(k, s);
            }
        }
        let non_time: Vec<&str> = p.sorts.iter().filter(|s| s.name != TIME_SORT).map(|s| s.name.as_str()).collect();
        let default_sort = if non_time.len() == 1 { Some(non_time[0].to_string()) } else { None };
        let mut info = SortInfo { positions, default_sort: None };
        // propagate sorts through variables until stable
        loop {
            let mut changed = false;
            for r in &p.rules {
                let vs = info.local(p, r);
                for a in rule_atoms(r) {
                    if a.is_dom() {
                        continue;
                    }
                    for (i, t) in a.args.iter().enumerate() {
                        if let Some(s) = t.variable().and_then(|v| vs.get(v)) {
                            let k = (a.key(), i);
                            if let std::collections::btree_map::Entry::Vacant(e) = info.positions.entry(k) {
                                e.insert(s.clone());
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        info.default_sort = default_sort;
        info
    }

    pub fn position_sort(&self, key: &PredKey, pos: usize) -> Option<&str> {
        self.positions.get(&(key.clone(), pos)).map(String::as_str)
    }

    /// Sorts derivable within one rule, without the default fallback.
    fn local(&self, p: &Program, r: &Rule) -> VarSorts {
        let mut vs = VarSorts::new();
        for a in rule_atoms(r) {
            if a.is_dom() {
                if let Some(v) = a.args[0].variable() {
                    vs.entry(v.to_string()).or_insert_with(|| a.predicate[DOM_PREFIX.len()..].to_string());
                }
                continue;
            }
            for (i, t) in a.args.iter().enumerate() {
                match t {
                    Term::Offset(v, _) if p.time_sort().is_some() => {
                        vs.entry(v.clone()).or_insert_with(|| TIME_SORT.to_string());
                    }
                    Term::Var(v) | Term::Offset(v, _) => {
                        if let Some(s) = self.position_sort(&a.key(), i) {
                            vs.entry(v.clone()).or_insert_with(|| s.to_string());
                        }
                    }
                    Term::Const(_) => {}
                }
            }
        }
        loop {
            let mut changed = false;
            for g in &r.gamma {
                let sort_of = |t: &Term, vs: &VarSorts| match t {
                    Term::Const(c) => unique_sort(p, c),
                    Term::Var(v) | Term::Offset(v, _) => vs.get(v).cloned(),
                };
                let (ls, rs) = (sort_of(&g.lhs, &vs), sort_of(&g.rhs, &vs));
                for (t, other) in [(&g.lhs, &rs), (&g.rhs, &ls)] {
                    if let (Some(v), Some(s)) = (t.variable(), other) {
                        if !vs.contains_key(v) {
                            vs.insert(v.to_string(), s.clone());
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        vs
    }

    /// Sort of every variable of `r`.
    pub fn rule_sorts(&self, p: &Program, r: &Rule) -> Result<VarSorts> {
        let mut vs = self.local(p, r);
        for v in r.variables() {
            if let std::collections::btree_map::Entry::Vacant(e) = vs.entry(v) {
                match &self.default_sort {
                    Some(s) => {
                        e.insert(s.clone());
                    }
                    None => {
                        return Err(Error::UnknownVariableSort {
                            variable: e.into_key(),
                            rule: crate::parser::print_rule(r),
                        })
                    }
                }
            }
        }
        Ok(vs)
    }

    /// Sort of argument `pos` of `a` in a rule with variable sorts `vs`.
    pub fn term_sort(&self, p: &Program, a: &Atom, pos: usize, vs: &VarSorts) -> Option<String> {
        if let Some(s) = self.position_sort(&a.key(), pos) {
            return Some(s.to_string());
        }
        match &a.args[pos] {
            Term::Var(v) | Term::Offset(v, _) => vs.get(v).cloned(),
            Term::Const(c) => unique_sort(p, c).or_else(|| self.default_sort.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program_str;

    #[test]
    fn default_single_sort() {
        let p = parse_program_str("sort s {1..3}. a(1,2). d(X1,X2) :- a(X1,X2), X1 <= X2.").unwrap();
        let info = SortInfo::new(&p);
        let vs = info.rule_sorts(&p, &p.rules[1]).unwrap();
        assert_eq!(vs["X1"], "s");
        assert_eq!(vs["X2"], "s");
    }

    #[test]
    fn signatures_and_time() {
        let p = parse_program_str(
            "sort time {0..1}. sort coord {1..4}. sort dist {0..6}. sig rAt(coord,coord,time). sig fd(coord,coord,dist).\n\
             rAt(X,Y,T+1) :- rAt(X,Y,T), fd(X,Y,D), D < 3.",
        )
        .unwrap();
        let info = SortInfo::new(&p);
        let vs = info.rule_sorts(&p, &p.rules[0]).unwrap();
        assert_eq!((vs["X"].as_str(), vs["T"].as_str(), vs["D"].as_str()), ("coord", "time", "dist"));
    }

    #[test]
    fn unknown_sort_is_an_error() {
        let p = parse_program_str("sort a {1..2}. sort b {x,y}. p(X) :- q(X).").unwrap();
        assert!(matches!(SortInfo::new(&p).rule_sorts(&p, &p.rules[0]), Err(Error::UnknownVariableSort { .. })));
    }

    #[test]
    fn constants_fix_positions() {
        let p = parse_program_str("sort a {1..2}. sort b {x,y}. q(x). p(X) :- q(X).").unwrap();
        let info = SortInfo::new(&p);
        assert_eq!(info.rule_sorts(&p, &p.rules[1]).unwrap()["X"], "b");
    }

    #[test]
    fn propagates_across_rules() {
        let p = parse_program_str("sort a {1..2}. sort b {x,y}. r(X) :- dom_b(X). p(X) :- r(X).").unwrap();
        let info = SortInfo::new(&p);
        assert_eq!(info.rule_sorts(&p, &p.rules[1]).unwrap()["X"], "b");
    }
}
