//! Seeded random programs and mappings for property tests.
//!
//! Non-ground programs use one sort `s {1..n}` (n ≤ 4), the predicates
//! `p/1 q/1 r/2 t/2`, at most six rules (facts included), at most two
//! variables and one negative literal per rule, and comparisons from
//! `= != < <=`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ast::{Atom, ChoiceElement, Head, PredKey, Program, Rel, RelLit, Rule, Sort, Term, Value};
use crate::mapping::{ClassDef, DomainMapping, SortMapping};

pub type GenRng = ChaCha8Rng;

pub fn rng(seed: u64) -> GenRng {
    ChaCha8Rng::seed_from_u64(seed)
}

const PREDS: [(&str, usize); 4] = [("p", 1), ("q", 1), ("r", 2), ("t", 2)];
const RELS: [Rel; 4] = [Rel::Eq, Rel::Ne, Rel::Lt, Rel::Le];
const VARS: [&str; 2] = ["X", "Y"];

fn pick_term(rng: &mut GenRng, vars: &[&str], n: i64) -> Term {
    if vars.is_empty() || rng.gen_bool(0.15) {
        Term::int(rng.gen_range(1..=n))
    } else {
        Term::var(*vars.choose(rng).expect("nonempty"))
    }
}

fn pick_atom(rng: &mut GenRng, vars: &[&str], n: i64) -> Atom {
    let (name, arity) = *PREDS.choose(rng).expect("nonempty");
    Atom::new(name, (0..arity).map(|_| pick_term(rng, vars, n)).collect())
}

fn random_rule(rng: &mut GenRng, n: i64) -> Rule {
    let vars: Vec<&str> = VARS[..rng.gen_range(0..=2)].to_vec();
    let mut pos: Vec<Atom> = (0..rng.gen_range(1..=2)).map(|_| pick_atom(rng, &vars, n)).collect();
    for v in &vars {
        if !pos.iter().any(|a| a.variables().any(|x| x == *v)) {
            let name = if rng.gen_bool(0.5) { "p" } else { "q" };
            pos.push(Atom::new(name, vec![Term::var(*v)]));
        }
    }
    let mut gamma = Vec::new();
    if !vars.is_empty() && rng.gen_bool(0.5) {
        let lhs = Term::var(vars[0]);
        let rhs =
            if vars.len() == 2 && rng.gen_bool(0.7) { Term::var(vars[1]) } else { Term::int(rng.gen_range(1..=n)) };
        gamma.push(RelLit::new(lhs, *RELS.choose(rng).expect("nonempty"), rhs));
    }
    let neg = if rng.gen_bool(0.4) { vec![pick_atom(rng, &vars, n)] } else { vec![] };
    let roll: f64 = rng.gen();
    let head = if roll < 0.1 {
        Head::Constraint
    } else {
        let h = pick_atom(rng, &vars, n);
        if roll < 0.3 {
            Head::Choice { lower: 0, upper: Some(1), elements: vec![ChoiceElement::plain(h)] }
        } else {
            Head::Atom(h)
        }
    };
    Rule::new(head, pos, neg, gamma)
}

/// A random safe non-ground program.
pub fn random_program(rng: &mut GenRng) -> Program {
    let n = rng.gen_range(2..=4);
    let mut p = Program::new();
    p.sorts.push(Sort::range("s", 1, n));
    let total = rng.gen_range(2..=6);
    let facts = rng.gen_range(1..=total.min(3));
    for _ in 0..facts {
        p.rules.push(Rule::fact(pick_atom(rng, &[], n)));
    }
    for _ in facts..total {
        p.rules.push(random_rule(rng, n));
    }
    p
}

/// A random propositional program over at most `max_atoms` atoms `a0, a1, …`.
pub fn random_ground_program(rng: &mut GenRng, max_atoms: usize) -> Program {
    let k = rng.gen_range(1..=max_atoms);
    let atom = |i: usize| Atom::new(format!("a{i}"), vec![]);
    let mut p = Program::new();
    for _ in 0..rng.gen_range(1..=k + 4) {
        let pos = (0..rng.gen_range(0..=2)).map(|_| atom(rng.gen_range(0..k))).collect();
        let neg = (0..rng.gen_range(0..=2)).map(|_| atom(rng.gen_range(0..k))).collect();
        let roll: f64 = rng.gen();
        let head = if roll < 0.1 {
            Head::Constraint
        } else if roll < 0.25 {
            Head::Choice {
                lower: rng.gen_range(0..=1),
                upper: if rng.gen_bool(0.5) { Some(1) } else { None },
                elements: (0..rng.gen_range(1..=2)).map(|_| ChoiceElement::plain(atom(rng.gen_range(0..k)))).collect(),
            }
        } else {
            Head::Atom(atom(rng.gen_range(0..k)))
        };
        p.rules.push(Rule::new(head, pos, neg, vec![]));
    }
    p
}

/// Random partition of each non-time sort into consecutive intervals.
pub fn random_interval_mapping(rng: &mut GenRng, p: &Program) -> DomainMapping {
    let sorts = p
        .sorts
        .iter()
        .filter(|s| s.name != crate::ast::TIME_SORT)
        .map(|s| {
            let mut classes: Vec<ClassDef> = Vec::new();
            for v in &s.values {
                if classes.is_empty() || rng.gen_bool(0.5) {
                    classes.push(ClassDef { name: Value::sym(format!("k{}", classes.len() + 1)), members: vec![] });
                }
                classes.last_mut().expect("nonempty").members.push(v.clone());
            }
            SortMapping { sort: s.name.clone(), domain: None, classes }
        })
        .collect();
    DomainMapping { sorts, omitted: Vec::new() }
}

/// Each predicate of the program is omitted with probability 0.3.
pub fn random_omission(rng: &mut GenRng, p: &Program) -> Vec<PredKey> {
    p.predicates().into_iter().filter(|_| rng.gen_bool(0.3)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_program_str, print_program};

    #[test]
    fn deterministic_per_seed() {
        let a = print_program(&random_program(&mut rng(7)));
        let b = print_program(&random_program(&mut rng(7)));
        assert_eq!(a, b);
    }

    #[test]
    fn generated_programs_parse_and_round_trip() {
        let mut r = rng(1);
        for _ in 0..300 {
            let p = random_program(&mut r);
            let text = print_program(&p);
            let q = parse_program_str(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
            assert_eq!(p, q, "{text}");
            assert!(p.rules.len() <= 6);
        }
    }

    #[test]
    fn interval_mappings_validate() {
        let mut r = rng(2);
        for _ in 0..50 {
            let p = random_program(&mut r);
            random_interval_mapping(&mut r, &p).validate(&p).unwrap();
        }
    }
}
