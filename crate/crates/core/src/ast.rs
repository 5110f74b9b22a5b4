//! Syntax and semantic domain types shared by every other module.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

/// Name of the designated time sort. Constants of this sort are never abstracted.
pub const TIME_SORT: &str = "time";

/// Prefix of the built-in domain predicates `dom_<sort>/1`.
pub const DOM_PREFIX: &str = "dom_";

/// Prefix reserved for atoms introduced by translations (choice guesses, shifting guards).
pub const AUX_PREFIX: &str = "aux_";

/// Prefix of relation-type facts emitted by the domain abstraction.
pub const TYPE_PREFIX: &str = "type_";

/// Whether a predicate name is machinery rather than user vocabulary.
/// Such atoms are projected out of reported answer sets.
pub fn is_auxiliary_predicate(name: &str) -> bool {
    name.starts_with(AUX_PREFIX) || name.starts_with(DOM_PREFIX) || name.starts_with(TYPE_PREFIX)
}

pub fn dom_predicate(sort: &str) -> String {
    format!("{DOM_PREFIX}{sort}")
}

/// A ground constant: either a machine integer or a symbol.
///
/// Integers order before symbols; symbols among themselves order by name.
/// Comparison inside a program uses the declared sort order instead, see
/// [`Program::compare_values`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Sym(String),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Self {
        Value::Sym(s.into())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Sym(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Sym(s.to_string())
    }
}

/// Function-free term. `Offset` is the successor-style arithmetic `T+k`,
/// only permitted on variables of the time sort.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(Value),
    Offset(String, i64),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn int(i: i64) -> Self {
        Term::Const(Value::Int(i))
    }

    pub fn sym(s: impl Into<String>) -> Self {
        Term::Const(Value::Sym(s.into()))
    }

    /// The variable this term mentions, if any.
    pub fn variable(&self) -> Option<&str> {
        match self {
            Term::Var(v) | Term::Offset(v, _) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Const(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c}"),
            Term::Offset(v, k) if *k >= 0 => write!(f, "{v}+{k}"),
            Term::Offset(v, k) => write!(f, "{v}-{}", -k),
        }
    }
}

/// `name/arity`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PredKey {
    pub name: String,
    pub arity: usize,
}

impl PredKey {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        PredKey { name: name.into(), arity }
    }
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { predicate: predicate.into(), args }
    }

    pub fn key(&self) -> PredKey {
        PredKey::new(self.predicate.clone(), self.args.len())
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::variable)
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn is_dom(&self) -> bool {
        self.predicate.starts_with(DOM_PREFIX) && self.args.len() == 1
    }

    /// Converts a ground atom; `None` if any argument is not a constant.
    pub fn to_ground(&self) -> Option<GroundAtom> {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Const(v) => Some(v.clone()),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAtom { predicate: self.predicate.clone(), args })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<Value>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: Vec<Value>) -> Self {
        GroundAtom { predicate: predicate.into(), args }
    }

    pub fn key(&self) -> PredKey {
        PredKey::new(self.predicate.clone(), self.args.len())
    }

    pub fn to_atom(&self) -> Atom {
        Atom { predicate: self.predicate.clone(), args: self.args.iter().cloned().map(Term::Const).collect() }
    }

    pub fn is_auxiliary(&self) -> bool {
        is_auxiliary_predicate(&self.predicate)
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Built-in comparison relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rel {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Rel {
    pub const ALL: [Rel; 6] = [Rel::Eq, Rel::Ne, Rel::Lt, Rel::Le, Rel::Gt, Rel::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Ne => "!=",
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }

    /// Identifier-safe name, used in generated predicate names (`type_leq_I`).
    pub fn name(self) -> &'static str {
        match self {
            Rel::Eq => "eq",
            Rel::Ne => "neq",
            Rel::Lt => "lt",
            Rel::Le => "leq",
            Rel::Gt => "gt",
            Rel::Ge => "geq",
        }
    }

    pub fn negate(self) -> Rel {
        match self {
            Rel::Eq => Rel::Ne,
            Rel::Ne => Rel::Eq,
            Rel::Lt => Rel::Ge,
            Rel::Le => Rel::Gt,
            Rel::Gt => Rel::Le,
            Rel::Ge => Rel::Lt,
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Rel::Eq => ord == Equal,
            Rel::Ne => ord != Equal,
            Rel::Lt => ord == Less,
            Rel::Le => ord != Greater,
            Rel::Gt => ord == Greater,
            Rel::Ge => ord != Less,
        }
    }
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A member of Γ_rel: `lhs rel rhs`, possibly default-negated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelLit {
    pub rel: Rel,
    pub lhs: Term,
    pub rhs: Term,
    pub negated: bool,
}

impl RelLit {
    pub fn new(lhs: Term, rel: Rel, rhs: Term) -> Self {
        RelLit { rel, lhs, rhs, negated: false }
    }

    /// The relation actually tested, with polarity folded in.
    pub fn effective_rel(&self) -> Rel {
        if self.negated {
            self.rel.negate()
        } else {
            self.rel
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.lhs.variable().into_iter().chain(self.rhs.variable())
    }
}

impl fmt::Display for RelLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        write!(f, "{} {} {}", self.lhs, self.rel, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChoiceElement {
    pub atom: Atom,
    pub condition: Vec<Atom>,
}

impl ChoiceElement {
    pub fn plain(atom: Atom) -> Self {
        ChoiceElement { atom, condition: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Head {
    Atom(Atom),
    Constraint,
    /// `lower { elements } upper`; `upper == None` means unbounded.
    Choice {
        lower: u32,
        upper: Option<u32>,
        elements: Vec<ChoiceElement>,
    },
}

impl Head {
    pub fn is_constraint(&self) -> bool {
        matches!(self, Head::Constraint)
    }

    /// Atoms the head can make true.
    pub fn atoms(&self) -> Vec<&Atom> {
        match self {
            Head::Atom(a) => vec![a],
            Head::Constraint => Vec::new(),
            Head::Choice { elements, .. } => elements.iter().map(|e| &e.atom).collect(),
        }
    }
}

/// `head :- pos, not neg, gamma.`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub head: Head,
    pub pos: Vec<Atom>,
    pub neg: Vec<Atom>,
    pub gamma: Vec<RelLit>,
}

impl Rule {
    pub fn fact(atom: Atom) -> Self {
        Rule { head: Head::Atom(atom), pos: Vec::new(), neg: Vec::new(), gamma: Vec::new() }
    }

    pub fn new(head: Head, pos: Vec<Atom>, neg: Vec<Atom>, gamma: Vec<RelLit>) -> Self {
        Rule { head, pos, neg, gamma }
    }

    pub fn is_fact(&self) -> bool {
        matches!(self.head, Head::Atom(_)) && self.pos.is_empty() && self.neg.is_empty() && self.gamma.is_empty()
    }

    pub fn has_empty_body(&self) -> bool {
        self.pos.is_empty() && self.neg.is_empty() && self.gamma.is_empty()
    }

    /// Every variable of the rule, in order of first occurrence (head first).
    pub fn variables(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        let mut push = |v: &str| {
            if !seen.iter().any(|s| s == v) {
                seen.push(v.to_string());
            }
        };
        match &self.head {
            Head::Atom(a) => a.variables().for_each(&mut push),
            Head::Constraint => {}
            Head::Choice { elements, .. } => {
                for e in elements {
                    e.atom.variables().for_each(&mut push);
                    e.condition.iter().flat_map(Atom::variables).for_each(&mut push);
                }
            }
        }
        self.pos.iter().flat_map(Atom::variables).for_each(&mut push);
        self.neg.iter().flat_map(Atom::variables).for_each(&mut push);
        self.gamma.iter().flat_map(RelLit::variables).for_each(&mut push);
        seen
    }

    /// Variables of the body (excluding choice-element local variables).
    pub fn body_variables(&self) -> BTreeSet<String> {
        self.pos
            .iter()
            .chain(&self.neg)
            .flat_map(Atom::variables)
            .chain(self.gamma.iter().flat_map(RelLit::variables))
            .map(str::to_string)
            .collect()
    }

    pub fn is_ground(&self) -> bool {
        self.variables().is_empty()
    }
}

/// A Herbrand sort: an ordered list of constants. The textual order is the
/// order used by comparison relations over symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sort {
    pub name: String,
    pub values: Vec<Value>,
}

impl Sort {
    pub fn new(name: impl Into<String>, values: Vec<Value>) -> Self {
        Sort { name: name.into(), values }
    }

    pub fn range(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        Sort { name: name.into(), values: (lo..=hi).map(Value::Int).collect() }
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.values.contains(v)
    }

    pub fn position(&self, v: &Value) -> Option<usize> {
        self.values.iter().position(|x| x == v)
    }
}

/// `sig p(s1,...,sn).` — argument sorts of a predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    pub predicate: String,
    pub sorts: Vec<String>,
}

impl Signature {
    pub fn key(&self) -> PredKey {
        PredKey::new(self.predicate.clone(), self.sorts.len())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub sorts: Vec<Sort>,
    pub signatures: Vec<Signature>,
    pub fluents: Vec<PredKey>,
    pub actions: Vec<PredKey>,
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sort(&self, name: &str) -> Option<&Sort> {
        self.sorts.iter().find(|s| s.name == name)
    }

    pub fn sort_mut(&mut self, name: &str) -> Option<&mut Sort> {
        self.sorts.iter_mut().find(|s| s.name == name)
    }

    pub fn signature(&self, key: &PredKey) -> Option<&Signature> {
        self.signatures.iter().find(|s| s.predicate == key.name && s.sorts.len() == key.arity)
    }

    /// Sort of argument `pos` of `key`, when declared.
    pub fn arg_sort(&self, key: &PredKey, pos: usize) -> Option<&str> {
        self.signature(key).map(|s| s.sorts[pos].as_str())
    }

    pub fn time_sort(&self) -> Option<&Sort> {
        self.sort(TIME_SORT)
    }

    /// Predicates occurring anywhere in the rules, in first-occurrence order.
    pub fn predicates(&self) -> Vec<PredKey> {
        let mut out = Vec::<PredKey>::new();
        let mut push = |a: &Atom| {
            let k = a.key();
            if !out.contains(&k) {
                out.push(k);
            }
        };
        for r in &self.rules {
            for a in r.head.atoms() {
                push(a);
            }
            if let Head::Choice { elements, .. } = &r.head {
                elements.iter().flat_map(|e| &e.condition).for_each(&mut push);
            }
            r.pos.iter().for_each(&mut push);
            r.neg.iter().for_each(&mut push);
        }
        out
    }

    /// Sorts that contain `v`.
    pub fn sorts_containing<'a>(&'a self, v: &'a Value) -> impl Iterator<Item = &'a Sort> + 'a {
        self.sorts.iter().filter(move |s| s.contains(v))
    }

    /// Total order on constants used by comparison relations: integers numerically,
    /// symbols by their position in the first declared sort containing them,
    /// integers before symbols.
    pub fn compare_values(&self, a: &Value, b: &Value) -> std::cmp::Ordering {
        match (a, b) {
            (Value::Int(x), Value::Int(y)) => x.cmp(y),
            (Value::Sym(_), Value::Sym(_)) => {
                let rank = |v: &Value| self.sorts.iter().enumerate().find_map(|(i, s)| s.position(v).map(|p| (i, p)));
                match (rank(a), rank(b)) {
                    (Some((sa, pa)), Some((sb, pb))) if sa == sb => pa.cmp(&pb),
                    _ => a.cmp(b),
                }
            }
            _ => a.cmp(b),
        }
    }

    /// Appends the rules of `other` and any declarations not already present.
    pub fn extend(&mut self, other: &Program) {
        for s in &other.sorts {
            if self.sort(&s.name).is_none() {
                self.sorts.push(s.clone());
            }
        }
        for s in &other.signatures {
            if self.signature(&s.key()).is_none() {
                self.signatures.push(s.clone());
            }
        }
        for k in &other.fluents {
            if !self.fluents.contains(k) {
                self.fluents.push(k.clone());
            }
        }
        for k in &other.actions {
            if !self.actions.contains(k) {
                self.actions.push(k.clone());
            }
        }
        self.rules.extend(other.rules.iter().cloned());
    }

    pub fn add_facts<I: IntoIterator<Item = GroundAtom>>(&mut self, facts: I) {
        self.rules.extend(facts.into_iter().map(|a| Rule::fact(a.to_atom())));
    }
}

/// A set of ground atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Interpretation {
    pub atoms: BTreeSet<GroundAtom>,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, a: &GroundAtom) -> bool {
        self.atoms.contains(a)
    }

    pub fn insert(&mut self, a: GroundAtom) -> bool {
        self.atoms.insert(a)
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

    pub fn is_subset(&self, other: &Interpretation) -> bool {
        self.atoms.is_subset(&other.atoms)
    }

    /// Drops auxiliary atoms (`aux_*`, `dom_*`, `type_*`).
    pub fn projected(&self) -> Interpretation {
        self.atoms.iter().filter(|a| !a.is_auxiliary()).cloned().collect()
    }
}

impl FromIterator<GroundAtom> for Interpretation {
    fn from_iter<T: IntoIterator<Item = GroundAtom>>(iter: T) -> Self {
        Interpretation { atoms: iter.into_iter().collect() }
    }
}

impl<'a> IntoIterator for &'a Interpretation {
    type Item = &'a GroundAtom;
    type IntoIter = std::collections::btree_set::Iter<'a, GroundAtom>;
    fn into_iter(self) -> Self::IntoIter {
        self.atoms.iter()
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpretation_displays_sorted() {
        let i: Interpretation = [
            GroundAtom::new("d", vec![1.into(), 2.into()]),
            GroundAtom::new("a", vec![1.into(), 2.into()]),
            GroundAtom::new("c", vec![1.into()]),
        ]
        .into_iter()
        .collect();
        assert_eq!(i.to_string(), "{a(1,2), c(1), d(1,2)}");
    }

    #[test]
    fn symbols_compare_by_sort_order() {
        let mut p = Program::new();
        p.sorts.push(Sort::new("s", vec![Value::sym("dk"), Value::sym("d1")]));
        assert_eq!(p.compare_values(&Value::sym("dk"), &Value::sym("d1")), std::cmp::Ordering::Less);
        assert_eq!(p.compare_values(&Value::Int(3), &Value::Int(2)), std::cmp::Ordering::Greater);
    }

    #[test]
    fn rel_negation_is_involutive() {
        for r in Rel::ALL {
            assert_eq!(r.negate().negate(), r);
            for ord in [std::cmp::Ordering::Less, std::cmp::Ordering::Equal, std::cmp::Ordering::Greater] {
                assert_ne!(r.holds(ord), r.negate().holds(ord));
            }
        }
    }

    #[test]
    fn projection_drops_machinery() {
        let i: Interpretation = [
            GroundAtom::new("a", vec![]),
            GroundAtom::new("aux_choice_0_a", vec![]),
            GroundAtom::new("dom_s", vec![1.into()]),
        ]
        .into_iter()
        .collect();
        assert_eq!(i.projected().len(), 1);
    }
}
