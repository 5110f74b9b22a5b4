//! Abstraction mappings: per-sort partitions into ordered classes plus a set
//! of omitted predicates; relation typing on abstract tuples.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::ast::{Atom, GroundAtom, Interpretation, PredKey, Program, Rel, Rule, Sort, Term, Value, TIME_SORT};
use crate::error::{Error, Result};

/// `rel` over two `(sort, class)` operands.
pub type Conjunct<'a> = (Rel, (&'a str, &'a Value), (&'a str, &'a Value));

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassDef {
    pub name: Value,
    pub members: Vec<Value>,
}

/// Partition of one sort. `classes` is in abstract order (smallest first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SortMapping {
    pub sort: String,
    /// Concrete domain as written in the mapping file, if given.
    pub domain: Option<Vec<Value>>,
    pub classes: Vec<ClassDef>,
}

impl SortMapping {
    pub fn class_of(&self, v: &Value) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.members.contains(v))
    }

    pub fn class_index(&self, name: &Value) -> Option<usize> {
        self.classes.iter().position(|c| &c.name == name)
    }

    /// Every class has one member.
    pub fn is_bijective(&self) -> bool {
        self.classes.iter().all(|c| c.members.len() == 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DomainMapping {
    pub sorts: Vec<SortMapping>,
    pub omitted: Vec<PredKey>,
}

/// Case of a built-in relation on an abstract tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RelCase {
    /// lifted true, every concrete instance true
    I,
    /// lifted false, every concrete instance false
    II,
    /// lifted true, some concrete instance false
    III,
    /// lifted false, some concrete instance true
    IV,
}

impl RelCase {
    pub fn lifted(self) -> bool {
        matches!(self, RelCase::I | RelCase::III)
    }

    /// Concrete truth is the same for every preimage.
    pub fn is_exact(self) -> bool {
        matches!(self, RelCase::I | RelCase::II)
    }
}

impl fmt::Display for RelCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelCase::I => "I",
            RelCase::II => "II",
            RelCase::III => "III",
            RelCase::IV => "IV",
        })
    }
}

/// What to give back when refining: predicates to un-omit, and replacement
/// partitions (finer ones for mapped sorts, or fresh ones for sorts that so far
/// only occurred in omitted predicates).
#[derive(Debug, Clone, Default)]
pub struct Refinement {
    pub restore: Vec<PredKey>,
    pub sorts: Vec<SortMapping>,
}

impl DomainMapping {
    /// Omission-only mapping.
    pub fn omitting<I: IntoIterator<Item = PredKey>>(preds: I) -> Self {
        DomainMapping { sorts: Vec::new(), omitted: preds.into_iter().collect() }
    }

    /// Every non-time sort of `p` mapped onto itself with singleton classes.
    pub fn identity(p: &Program) -> Self {
        let sorts = p
            .sorts
            .iter()
            .filter(|s| s.name != TIME_SORT)
            .map(|s| SortMapping {
                sort: s.name.clone(),
                domain: None,
                classes: s.values.iter().map(|v| ClassDef { name: v.clone(), members: vec![v.clone()] }).collect(),
            })
            .collect();
        DomainMapping { sorts, omitted: Vec::new() }
    }

    pub fn sort_mapping(&self, sort: &str) -> Option<&SortMapping> {
        self.sorts.iter().find(|s| s.sort == sort)
    }

    pub fn maps_sort(&self, sort: &str) -> bool {
        self.sort_mapping(sort).is_some()
    }

    pub fn omits(&self, key: &PredKey) -> bool {
        self.omitted.contains(key)
    }

    /// Checks that the mapping partitions the program's sorts.
    pub fn validate(&self, p: &Program) -> Result<()> {
        for sm in &self.sorts {
            if sm.sort == TIME_SORT {
                return Err(Error::Mapping("the time sort cannot be abstracted".into()));
            }
            let sort = p
                .sort(&sm.sort)
                .ok_or_else(|| Error::Mapping(format!("sort `{}` is not declared by the program", sm.sort)))?;
            if let Some(d) = &sm.domain {
                let a: BTreeSet<&Value> = d.iter().collect();
                let b: BTreeSet<&Value> = sort.values.iter().collect();
                if a != b {
                    return Err(Error::Mapping(format!(
                        "domain of sort `{}` differs from the program's declaration",
                        sm.sort
                    )));
                }
            }
            for c in &sm.classes {
                if let Some(v) = c.members.iter().find(|v| !sort.contains(v)) {
                    return Err(Error::Mapping(format!(
                        "class `{}` contains `{v}`, not in sort `{}`",
                        c.name, sm.sort
                    )));
                }
            }
            if let Some(v) = sort.values.iter().find(|v| sm.class_of(v).is_none()) {
                return Err(Error::UnmappedConstant { constant: v.clone(), sort: sm.sort.clone() });
            }
            for c in &sm.classes {
                let mut pos: Vec<usize> = c.members.iter().filter_map(|v| sort.position(v)).collect();
                pos.sort_unstable();
                if pos.windows(2).any(|w| w[1] != w[0] + 1) {
                    log::warn!(
                        "class `{}` of sort `{}` is not order-convex; abstraction will be coarse",
                        c.name,
                        sm.sort
                    );
                }
            }
        }
        Ok(())
    }

    pub fn map_value(&self, sort: &str, v: &Value) -> Result<Value> {
        match self.sort_mapping(sort) {
            None => Ok(v.clone()),
            Some(sm) => sm
                .class_of(v)
                .map(|c| c.name.clone())
                .ok_or_else(|| Error::UnmappedConstant { constant: v.clone(), sort: sort.to_string() }),
        }
    }

    /// Concrete members of abstract constant `class` of `sort`.
    pub fn preimage(&self, sort: &str, class: &Value) -> Vec<Value> {
        match self.sort_mapping(sort) {
            None => vec![class.clone()],
            Some(sm) => sm.classes.iter().find(|c| &c.name == class).map(|c| c.members.clone()).unwrap_or_default(),
        }
    }

    /// The abstract version of a sort declaration.
    pub fn abstract_sort(&self, s: &Sort) -> Sort {
        match self.sort_mapping(&s.name) {
            None => s.clone(),
            Some(sm) => Sort::new(s.name.clone(), sm.classes.iter().map(|c| c.name.clone()).collect()),
        }
    }

    /// Sort to use for the constant `v` at argument `pos` of `key`.
    fn constant_sort(&self, p: &Program, key: &PredKey, pos: usize, v: &Value) -> Result<Option<String>> {
        if let Some(s) = p.arg_sort(key, pos) {
            return Ok(Some(s.to_string()));
        }
        let candidates: Vec<&Sort> = p.sorts_containing(v).collect();
        let images: BTreeSet<Value> = candidates.iter().map(|s| self.map_value(&s.name, v)).collect::<Result<_>>()?;
        if images.len() > 1 {
            return Err(Error::AmbiguousConstant { constant: v.clone(), predicate: key.clone() });
        }
        Ok(candidates.iter().map(|s| s.name.clone()).find(|n| self.maps_sort(n)))
    }

    /// Maps a ground atom; `None` when its predicate is omitted.
    pub fn map_atom(&self, p: &Program, a: &GroundAtom) -> Result<Option<GroundAtom>> {
        let key = a.key();
        if self.omits(&key) {
            return Ok(None);
        }
        let mut args = Vec::with_capacity(a.args.len());
        for (i, v) in a.args.iter().enumerate() {
            args.push(match self.constant_sort(p, &key, i, v)? {
                Some(s) => self.map_value(&s, v)?,
                None => v.clone(),
            });
        }
        Ok(Some(GroundAtom { predicate: a.predicate.clone(), args }))
    }

    /// Maps constants of a (possibly non-ground) atom in a rule.
    pub fn map_rule_atom(&self, p: &Program, a: &Atom) -> Result<Atom> {
        let key = a.key();
        let mut args = Vec::with_capacity(a.args.len());
        for (i, t) in a.args.iter().enumerate() {
            args.push(match t {
                Term::Const(v) => match self.constant_sort(p, &key, i, v)? {
                    Some(s) => Term::Const(self.map_value(&s, v)?),
                    None => t.clone(),
                },
                _ => t.clone(),
            });
        }
        Ok(Atom { predicate: a.predicate.clone(), args })
    }

    pub fn map_interpretation(&self, p: &Program, i: &Interpretation) -> Result<Interpretation> {
        let mut out = Interpretation::new();
        for a in i {
            if let Some(m) = self.map_atom(p, a)? {
                out.insert(m);
            }
        }
        Ok(out)
    }

    /// Compares two abstract constants of `sort`: class order for mapped
    /// sorts, program order otherwise.
    pub fn compare_abstract(&self, p: &Program, sort: &str, a: &Value, b: &Value) -> Ordering {
        match self.sort_mapping(sort) {
            Some(sm) => match (sm.class_index(a), sm.class_index(b)) {
                (Some(x), Some(y)) => x.cmp(&y),
                _ => p.compare_values(a, b),
            },
            None => p.compare_values(a, b),
        }
    }

    pub fn lifted_relation_holds(
        &self,
        p: &Program,
        rel: Rel,
        (ls, a): (&str, &Value),
        (rs, b): (&str, &Value),
    ) -> Result<bool> {
        if ls != rs && (self.maps_sort(ls) || self.maps_sort(rs)) {
            return Err(Error::MixedSorts { left: ls.to_string(), right: rs.to_string() });
        }
        Ok(rel.holds(self.compare_abstract(p, ls, a, b)))
    }

    pub fn classify_relation(
        &self,
        p: &Program,
        rel: Rel,
        (ls, a): (&str, &Value),
        (rs, b): (&str, &Value),
    ) -> Result<RelCase> {
        let lifted = self.lifted_relation_holds(p, rel, (ls, a), (rs, b))?;
        let (xs, ys) = (self.preimage(ls, a), self.preimage(rs, b));
        let mut some_true = false;
        let mut some_false = false;
        for x in &xs {
            for y in &ys {
                if rel.holds(p.compare_values(x, y)) {
                    some_true = true;
                } else {
                    some_false = true;
                }
            }
        }
        Ok(case_of(lifted, some_true, some_false))
    }

    /// Conjunction of independent binary relations, each on its own pair.
    pub fn classify_composite(&self, p: &Program, conjuncts: &[Conjunct<'_>]) -> Result<RelCase> {
        let mut lifted = true;
        let mut all_true = true;
        let mut some_true = true;
        for &(rel, l, r) in conjuncts {
            let c = self.classify_relation(p, rel, l, r)?;
            lifted &= c.lifted();
            let (xs, ys) = (self.preimage(l.0, l.1), self.preimage(r.0, r.1));
            let holds = |x: &Value, y: &Value| rel.holds(p.compare_values(x, y));
            all_true &= xs.iter().all(|x| ys.iter().all(|y| holds(x, y)));
            some_true &= xs.iter().any(|x| ys.iter().any(|y| holds(x, y)));
        }
        Ok(case_of(lifted, some_true, !all_true))
    }

    /// `type_<rel>_<case>(a,b)` facts for every pair of abstract constants of `sort`.
    pub fn build_type_facts(&self, p: &Program, rels: &[(Rel, String)]) -> Result<Vec<Rule>> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for (rel, sort) in rels {
            if !seen.insert((*rel, sort.clone())) {
                continue;
            }
            let values: Vec<Value> = match (self.sort_mapping(sort), p.sort(sort)) {
                (Some(sm), _) => sm.classes.iter().map(|c| c.name.clone()).collect(),
                (None, Some(s)) => s.values.clone(),
                (None, None) => return Err(Error::Mapping(format!("unknown sort `{sort}`"))),
            };
            for a in &values {
                for b in &values {
                    let case = self.classify_relation(p, *rel, (sort, a), (sort, b))?;
                    out.push(Rule::fact(Atom::new(
                        type_predicate(*rel, case),
                        vec![Term::Const(a.clone()), Term::Const(b.clone())],
                    )));
                }
            }
        }
        Ok(out)
    }
}

pub fn type_predicate(rel: Rel, case: RelCase) -> String {
    format!("{}{}_{case}", crate::ast::TYPE_PREFIX, rel.name())
}

fn case_of(lifted: bool, some_true: bool, some_false: bool) -> RelCase {
    match (lifted, some_false, some_true) {
        (true, false, _) => RelCase::I,
        (true, true, _) => RelCase::III,
        (false, _, false) => RelCase::II,
        (false, _, true) => RelCase::IV,
    }
}

impl fmt::Display for DomainMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::print_mapping(self))
    }
}

/// Sorts used by a predicate's declared signature.
fn sorts_of(p: &Program, key: &PredKey) -> Vec<String> {
    p.signature(key).map(|s| s.sorts.clone()).unwrap_or_default()
}

/// Builds a strictly finer mapping. Rejects refinements that coarsen any
/// sort, restore predicates that are not omitted, or change nothing.
pub fn refine_mapping(m: &DomainMapping, r: &Refinement, p: &Program) -> Result<DomainMapping> {
    let mut out = m.clone();
    let mut strict = false;
    for k in &r.restore {
        let Some(i) = out.omitted.iter().position(|o| o == k) else {
            return Err(Error::Refinement(format!("{k} is not omitted")));
        };
        out.omitted.remove(i);
        strict = true;
    }
    for new in &r.sorts {
        match m.sort_mapping(&new.sort) {
            Some(old) => {
                for c in &new.classes {
                    let parent = c.members.first().and_then(|v| old.class_of(v));
                    let fits = parent.is_some_and(|pc| c.members.iter().all(|v| pc.members.contains(v)));
                    if !fits {
                        return Err(Error::Refinement(format!(
                            "class `{}` of sort `{}` is not contained in an existing class",
                            c.name, new.sort
                        )));
                    }
                }
                if new.classes.len() > old.classes.len() {
                    strict = true;
                }
                let slot = out.sorts.iter_mut().find(|s| s.sort == new.sort).expect("present");
                *slot = new.clone();
            }
            None => {
                // A fresh partition is only acceptable on a sort that the
                // previous abstraction could not observe at all.
                let visible = p.predicates().iter().filter(|k| !m.omits(k)).any(|k| sorts_of(p, k).contains(&new.sort));
                if visible {
                    return Err(Error::Refinement(format!(
                        "sort `{}` is already observable; a new partition would coarsen it",
                        new.sort
                    )));
                }
                out.sorts.push(new.clone());
            }
        }
    }
    if !strict {
        return Err(Error::Refinement("refinement does not make the mapping finer".into()));
    }
    out.validate(p)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_mapping, parse_program_str};

    fn one_vs_rest() -> (Program, DomainMapping) {
        let p = parse_program_str("sort s {1..3}.").unwrap();
        let m = parse_mapping("sort s; class d1 = {1}; class dk = {2,3};", "t").unwrap();
        m.validate(&p).unwrap();
        (p, m)
    }

    fn classify(rel: Rel, a: &str, b: &str) -> RelCase {
        let (p, m) = one_vs_rest();
        m.classify_relation(&p, rel, ("s", &Value::sym(a)), ("s", &Value::sym(b))).unwrap()
    }

    #[test]
    fn leq_cases_one_vs_rest() {
        assert_eq!(classify(Rel::Le, "d1", "d1"), RelCase::I);
        assert_eq!(classify(Rel::Le, "d1", "dk"), RelCase::I);
        assert_eq!(classify(Rel::Le, "dk", "dk"), RelCase::III);
        assert_eq!(classify(Rel::Le, "dk", "d1"), RelCase::II);
    }

    #[test]
    fn ne_on_same_class_is_case_iv() {
        assert_eq!(classify(Rel::Ne, "dk", "dk"), RelCase::IV);
        assert_eq!(classify(Rel::Eq, "dk", "dk"), RelCase::III);
        assert_eq!(classify(Rel::Lt, "dk", "dk"), RelCase::IV);
    }

    #[test]
    fn lifted_relation_uses_class_order() {
        let (p, m) = one_vs_rest();
        let (d1, dk) = (Value::sym("d1"), Value::sym("dk"));
        assert!(m.lifted_relation_holds(&p, Rel::Le, ("s", &d1), ("s", &dk)).unwrap());
        assert!(!m.lifted_relation_holds(&p, Rel::Lt, ("s", &dk), ("s", &dk)).unwrap());
        assert!(!m.lifted_relation_holds(&p, Rel::Ne, ("s", &dk), ("s", &dk)).unwrap());
    }

    #[test]
    fn cases_agree_with_brute_force() {
        let (p, m) = one_vs_rest();
        let classes = [Value::sym("d1"), Value::sym("dk")];
        for rel in Rel::ALL {
            for a in &classes {
                for b in &classes {
                    let c = m.classify_relation(&p, rel, ("s", a), ("s", b)).unwrap();
                    let concrete: Vec<bool> = m
                        .preimage("s", a)
                        .iter()
                        .flat_map(|x| m.preimage("s", b).into_iter().map(move |y| (x.clone(), y)))
                        .map(|(x, y)| rel.holds(p.compare_values(&x, &y)))
                        .collect();
                    match c {
                        RelCase::I => assert!(concrete.iter().all(|t| *t)),
                        RelCase::II => assert!(concrete.iter().all(|t| !*t)),
                        _ => {}
                    }
                }
            }
        }
    }

    #[test]
    fn identity_mapping_only_exact_cases() {
        let p = parse_program_str("sort s {1..3}.").unwrap();
        let m = DomainMapping::identity(&p);
        let facts = m.build_type_facts(&p, &[(Rel::Le, "s".into()), (Rel::Ne, "s".into())]).unwrap();
        assert_eq!(facts.len(), 18);
        assert!(facts.iter().all(|r| {
            let name = &r.head.atoms()[0].predicate;
            name.ends_with("_I") || name.ends_with("_II")
        }));
    }

    #[test]
    fn type_facts_for_leq() {
        let (p, m) = one_vs_rest();
        let facts = m.build_type_facts(&p, &[(Rel::Le, "s".into())]).unwrap();
        let printed: Vec<String> = facts.iter().map(crate::parser::print_rule).collect();
        assert_eq!(
            printed,
            ["type_leq_I(d1,d1).", "type_leq_I(d1,dk).", "type_leq_II(dk,d1).", "type_leq_III(dk,dk)."]
        );
    }

    #[test]
    fn composite_case_i_iff_all_conjuncts_i() {
        let (p, m) = one_vs_rest();
        let (d1, dk) = (Value::sym("d1"), Value::sym("dk"));
        let c =
            m.classify_composite(&p, &[(Rel::Le, ("s", &d1), ("s", &dk)), (Rel::Eq, ("s", &d1), ("s", &d1))]).unwrap();
        assert_eq!(c, RelCase::I);
        let c =
            m.classify_composite(&p, &[(Rel::Le, ("s", &d1), ("s", &dk)), (Rel::Eq, ("s", &dk), ("s", &dk))]).unwrap();
        assert_eq!(c, RelCase::III);
    }

    #[test]
    fn validate_rejects_uncovered_and_foreign() {
        let p = parse_program_str("sort s {1..3}.").unwrap();
        let m = parse_mapping("sort s; class a = {1}; class b = {2};", "t").unwrap();
        assert!(matches!(m.validate(&p), Err(Error::UnmappedConstant { .. })));
        let m = parse_mapping("sort s; class a = {1,2,3,4};", "t").unwrap();
        assert!(matches!(m.validate(&p), Err(Error::Mapping(_))));
        let m = parse_mapping("sort q; class a = {1};", "t").unwrap();
        assert!(m.validate(&p).is_err());
    }

    #[test]
    fn maps_atoms_and_skips_omitted() {
        let (p, m) = one_vs_rest();
        let mut m = m;
        m.omitted.push(PredKey::new("c", 1));
        let a = GroundAtom::new("a", vec![1.into(), 3.into()]);
        assert_eq!(m.map_atom(&p, &a).unwrap(), Some(GroundAtom::new("a", vec![Value::sym("d1"), Value::sym("dk")])));
        assert_eq!(m.map_atom(&p, &GroundAtom::new("c", vec![1.into()])).unwrap(), None);
    }

    #[test]
    fn ambiguous_constant_without_signature() {
        let p = parse_program_str("sort s {1..3}. sort t {1..2}.").unwrap();
        let m = parse_mapping("sort s; class a = {1,2,3};", "t").unwrap();
        let r = m.map_atom(&p, &GroundAtom::new("q", vec![1.into()]));
        assert!(matches!(r, Err(Error::AmbiguousConstant { .. })));
        let p = parse_program_str("sort s {1..3}. sort t {1..2}. sig q(t).").unwrap();
        assert_eq!(m.map_atom(&p, &GroundAtom::new("q", vec![1.into()])).unwrap().unwrap().args[0], Value::Int(1));
    }

    #[test]
    fn refinement_must_be_finer() {
        let p = parse_program_str("sort s {1..3}. sort d {0..3}. sig f(d). sig a(s). a(1). f(0).").unwrap();
        let mut m = parse_mapping("sort s; class d1 = {1}; class dk = {2,3}; omit f/1;", "t").unwrap();
        m.validate(&p).unwrap();
        let split = parse_mapping("sort s; class d1 = {1}; class d2 = {2}; class d3 = {3};", "t").unwrap();
        let r = refine_mapping(&m, &Refinement { restore: vec![], sorts: split.sorts.clone() }, &p).unwrap();
        assert!(r.sort_mapping("s").unwrap().is_bijective());
        let coarse = parse_mapping("sort s; class all = {1,2,3};", "t").unwrap();
        assert!(refine_mapping(&m, &Refinement { restore: vec![], sorts: coarse.sorts }, &p).is_err());
        assert!(refine_mapping(&m, &Refinement::default(), &p).is_err());
        let dist = parse_mapping("sort d; class 0 = {0,1}; class 1 = {2,3};", "t").unwrap();
        let r = refine_mapping(&m, &Refinement { restore: vec![PredKey::new("f", 1)], sorts: dist.sorts }, &p).unwrap();
        assert!(r.omitted.is_empty());
        m.omitted.clear();
        let dist = parse_mapping("sort d; class 0 = {0,1}; class 1 = {2,3};", "t").unwrap();
        assert!(refine_mapping(&m, &Refinement { restore: vec![], sorts: dist.sorts }, &p).is_err());
    }
}
