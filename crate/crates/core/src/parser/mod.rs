//! Parsers for the ASP fragment (`.lp`) and the mapping language (`.map`),
//! plus the canonical printer.
//!
//! Program grammar (clingo-like):
//!
//! ```text
//! statement := "sort" name "{" (int ".." int | const {"," const}) "}" "."
//!            | "sig" name "(" sort {"," sort} ")" "."
//!            | ("fluent" | "action") name "/" int "."
//!            | head [":-" body] "." | ":-" body "."
//! head      := atom | [int] "{" elem {";" elem} "}" [int]
//! elem      := atom [":" atom {"," atom}]
//! body      := lit {"," lit}
//! lit       := ["not"] atom | ["not"] term relop term
//! ```

mod lexer;
mod mapping;
mod print;

use std::collections::BTreeSet;

pub use mapping::parse_mapping;
pub use print::{print_mapping, print_program, print_rule};

use crate::ast::{
    Atom, ChoiceElement, Head, PredKey, Program, Rel, RelLit, Rule, Signature, Sort, Term, Value, DOM_PREFIX,
};
use crate::error::{Error, Result};
use lexer::{Cursor, Tok};

/// Program text together with where it came from, for diagnostics.
#[derive(Debug, Clone)]
pub struct SourceProgram {
    pub text: String,
    pub origin: String,
}

impl SourceProgram {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceProgram { text: text.into(), origin: origin.into() }
    }

    pub fn memory(text: impl Into<String>) -> Self {
        Self::new(text, "<memory>")
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Ok(Self::new(std::fs::read_to_string(path)?, path.display().to_string()))
    }
}

pub fn parse_program(src: &SourceProgram) -> Result<Program> {
    parse_program_in(src, &Program::new())
}

/// Parses `src` with the declarations of `context` in scope (e.g. a policy
/// or fact file written against a domain). The result carries them too.
pub fn parse_program_in(src: &SourceProgram, context: &Program) -> Result<Program> {
    let mut cur = Cursor::new(&src.text, &src.origin)?;
    let mut program = Program { rules: Vec::new(), ..context.clone() };
    let mut positions = Vec::new();
    while !cur.at_eof() {
        let at = cur.here();
        if let Some(()) = parse_declaration(&mut cur, &mut program)? {
            continue;
        }
        let rule = parse_rule(&mut cur)?;
        positions.push(at);
        program.rules.push(rule);
    }
    validate(&program, &positions, &src.origin)?;
    Ok(program)
}

/// Shorthand for in-memory sources.
pub fn parse_program_str(text: &str) -> Result<Program> {
    parse_program(&SourceProgram::memory(text))
}

fn parse_declaration(cur: &mut Cursor<'_>, p: &mut Program) -> Result<Option<()>> {
    let kw = match cur.peek() {
        Tok::Ident(s) => s.clone(),
        _ => return Ok(None),
    };
    let next_is_name = matches!(cur.peek_at(1), Tok::Ident(_));
    match kw.as_str() {
        "sort" if next_is_name && cur.peek_at(2) == &Tok::LBrace => {
            cur.bump();
            let name = cur.ident()?;
            cur.expect(&Tok::LBrace)?;
            let values = parse_value_set(cur)?;
            cur.expect(&Tok::RBrace)?;
            cur.expect(&Tok::Dot)?;
            if p.sort(&name).is_some() {
                return Err(cur.error(format!("sort `{name}` declared twice")));
            }
            p.sorts.push(Sort::new(name, values));
            Ok(Some(()))
        }
        "sig" if next_is_name && cur.peek_at(2) == &Tok::LParen => {
            cur.bump();
            let predicate = cur.ident()?;
            cur.expect(&Tok::LParen)?;
            let (line, column) = cur.here();
            let mut sorts = vec![cur.ident()?];
            while cur.eat(&Tok::Comma) {
                sorts.push(cur.ident()?);
            }
            cur.expect(&Tok::RParen)?;
            cur.expect(&Tok::Dot)?;
            for s in &sorts {
                if p.sort(s).is_none() {
                    return Err(Error::UndeclaredSort {
                        origin: cur.origin.to_string(),
                        line,
                        column,
                        sort: s.clone(),
                    });
                }
            }
            p.signatures.push(Signature { predicate, sorts });
            Ok(Some(()))
        }
        "fluent" | "action" if next_is_name && cur.peek_at(2) == &Tok::Slash => {
            cur.bump();
            let name = cur.ident()?;
            cur.expect(&Tok::Slash)?;
            let arity = cur.int()?;
            cur.expect(&Tok::Dot)?;
            let key = PredKey::new(name, arity as usize);
            if kw == "fluent" {
                p.fluents.push(key);
            } else {
                p.actions.push(key);
            }
            Ok(Some(()))
        }
        _ => Ok(None),
    }
}

/// `lo..hi` or a comma-separated list of constants.
pub(crate) fn parse_value_set(cur: &mut Cursor<'_>) -> Result<Vec<Value>> {
    let mut values = Vec::new();
    if cur.peek() == &Tok::RBrace {
        return Ok(values);
    }
    loop {
        let v = parse_value(cur)?;
        if cur.eat(&Tok::DotDot) {
            let lo = v.as_int().ok_or_else(|| cur.error("range bounds must be integers"))?;
            let hi = cur.int()?;
            if hi < lo {
                return Err(cur.error(format!("empty range {lo}..{hi}")));
            }
            values.extend((lo..=hi).map(Value::Int));
        } else {
            values.push(v);
        }
        if !cur.eat(&Tok::Comma) {
            break;
        }
    }
    let mut seen = BTreeSet::new();
    for v in &values {
        if !seen.insert(v) {
            return Err(cur.error(format!("constant `{v}` listed twice")));
        }
    }
    Ok(values)
}

pub(crate) fn parse_value(cur: &mut Cursor<'_>) -> Result<Value> {
    match cur.peek().clone() {
        Tok::Ident(s) => {
            cur.bump();
            Ok(Value::Sym(s))
        }
        Tok::Int(_) | Tok::Minus => Ok(Value::Int(cur.int()?)),
        other => Err(cur.error(format!("expected constant, found {}", other.describe()))),
    }
}

fn parse_rule(cur: &mut Cursor<'_>) -> Result<Rule> {
    let head = if cur.peek() == &Tok::If { Head::Constraint } else { parse_head(cur)? };
    let mut rule = Rule::new(head, Vec::new(), Vec::new(), Vec::new());
    if cur.eat(&Tok::If) {
        loop {
            parse_body_literal(cur, &mut rule)?;
            if !cur.eat(&Tok::Comma) {
                break;
            }
        }
    } else if rule.head.is_constraint() {
        return Err(cur.error("constraint without body"));
    }
    cur.expect(&Tok::Dot)?;
    Ok(rule)
}

fn parse_head(cur: &mut Cursor<'_>) -> Result<Head> {
    let lower = match (cur.peek(), cur.peek_at(1)) {
        (Tok::Int(_), Tok::LBrace) => Some(cur.int()?),
        (Tok::LBrace, _) => None,
        _ => return Ok(Head::Atom(parse_atom(cur)?)),
    };
    cur.expect(&Tok::LBrace)?;
    let mut elements = Vec::new();
    if cur.peek() != &Tok::RBrace {
        loop {
            let atom = parse_atom(cur)?;
            let mut condition = Vec::new();
            if cur.eat(&Tok::Colon) {
                loop {
                    condition.push(parse_atom(cur)?);
                    if !cur.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            elements.push(ChoiceElement { atom, condition });
            if !cur.eat(&Tok::Semi) {
                break;
            }
        }
    }
    cur.expect(&Tok::RBrace)?;
    let upper = if let Tok::Int(_) = cur.peek() { Some(cur.int()?) } else { None };
    let lower = lower.unwrap_or(0);
    if !(0..=1).contains(&lower) {
        return Err(cur.error(format!("choice lower bound {lower} not supported (only 0 or 1)")));
    }
    if let Some(u) = upper {
        if u != 1 {
            return Err(cur.error(format!("choice upper bound {u} not supported (only 1)")));
        }
    }
    Ok(Head::Choice { lower: lower as u32, upper: upper.map(|u| u as u32), elements })
}

fn parse_atom(cur: &mut Cursor<'_>) -> Result<Atom> {
    let predicate = cur.ident()?;
    if predicate == "not" {
        return Err(cur.error("`not` is reserved"));
    }
    let mut args = Vec::new();
    if cur.eat(&Tok::LParen) {
        loop {
            args.push(parse_term(cur)?);
            if !cur.eat(&Tok::Comma) {
                break;
            }
        }
        cur.expect(&Tok::RParen)?;
    }
    Ok(Atom { predicate, args })
}

fn parse_term(cur: &mut Cursor<'_>) -> Result<Term> {
    match cur.peek().clone() {
        Tok::Var(v) => {
            cur.bump();
            if matches!(cur.peek(), Tok::Plus | Tok::Minus) && matches!(cur.peek_at(1), Tok::Int(_)) {
                let sign = if cur.bump() == Tok::Plus { 1 } else { -1 };
                let k = cur.int()?;
                Ok(Term::Offset(v, sign * k))
            } else {
                Ok(Term::Var(v))
            }
        }
        Tok::Ident(s) => {
            cur.bump();
            Ok(Term::Const(Value::Sym(s)))
        }
        Tok::Int(_) | Tok::Minus => Ok(Term::Const(Value::Int(cur.int()?))),
        other => Err(cur.error(format!("expected term, found {}", other.describe()))),
    }
}

fn rel_token(t: &Tok) -> Option<Rel> {
    Some(match t {
        Tok::Eq => Rel::Eq,
        Tok::Ne => Rel::Ne,
        Tok::Lt => Rel::Lt,
        Tok::Le => Rel::Le,
        Tok::Gt => Rel::Gt,
        Tok::Ge => Rel::Ge,
        _ => return None,
    })
}

fn parse_body_literal(cur: &mut Cursor<'_>, rule: &mut Rule) -> Result<()> {
    let negated = cur.peek() == &Tok::Ident("not".into());
    if negated {
        cur.bump();
    }
    let is_atom = match (cur.peek(), cur.peek_at(1)) {
        (Tok::Ident(_), next) => rel_token(next).is_none(),
        _ => false,
    };
    if is_atom {
        let a = parse_atom(cur)?;
        if negated {
            rule.neg.push(a);
        } else {
            rule.pos.push(a);
        }
        return Ok(());
    }
    let lhs = parse_term(cur)?;
    let rel = rel_token(cur.peek())
        .ok_or_else(|| cur.error(format!("expected comparison operator, found {}", cur.peek().describe())))?;
    cur.bump();
    let rhs = parse_term(cur)?;
    rule.gamma.push(RelLit { rel, lhs, rhs, negated });
    Ok(())
}

/// Returns the first variable of `rule` that no positive body atom (or
/// equality chain to one) binds, if any. Variables local to a choice element
/// may be bound by that element's condition.
pub fn unsafe_variable(rule: &Rule) -> Option<String> {
    let mut bound: BTreeSet<String> = rule.pos.iter().flat_map(Atom::variables).map(str::to_string).collect();
    loop {
        let mut changed = false;
        for g in &rule.gamma {
            if g.negated || g.rel != Rel::Eq {
                continue;
            }
            for (a, b) in [(&g.lhs, &g.rhs), (&g.rhs, &g.lhs)] {
                let side_known = match b {
                    Term::Const(_) => true,
                    Term::Var(v) | Term::Offset(v, _) => bound.contains(v),
                };
                if let Some(v) = a.variable() {
                    if !bound.contains(v) && side_known {
                        bound.insert(v.to_string());
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    fn check<'a>(mut vars: impl Iterator<Item = &'a str>, bound: &BTreeSet<String>) -> Option<String> {
        vars.find(|v| !bound.contains(*v)).map(str::to_string)
    }
    if let Some(v) = check(rule.neg.iter().flat_map(Atom::variables), &bound) {
        return Some(v);
    }
    if let Some(v) = check(rule.gamma.iter().flat_map(RelLit::variables), &bound) {
        return Some(v);
    }
    match &rule.head {
        Head::Atom(a) => check(a.variables(), &bound),
        Head::Constraint => None,
        Head::Choice { elements, .. } => elements.iter().find_map(|e| {
            let mut local = bound.clone();
            local.extend(e.condition.iter().flat_map(Atom::variables).map(str::to_string));
            check(e.atom.variables(), &local)
        }),
    }
}

fn validate(p: &Program, positions: &[(usize, usize)], origin: &str) -> Result<()> {
    for (rule, &(line, column)) in p.rules.iter().zip(positions) {
        if let Some(variable) = unsafe_variable(rule) {
            return Err(Error::Unsafe { origin: origin.to_string(), line, column, variable });
        }
        check_rule_vocabulary(p, rule).map_err(|e| match e {
            VocabError::Sort(sort) => Error::UndeclaredSort { origin: origin.to_string(), line, column, sort },
            VocabError::Message(message) => Error::Syntax { origin: origin.to_string(), line, column, message },
        })?;
    }
    Ok(())
}

enum VocabError {
    Sort(String),
    Message(String),
}

fn check_rule_vocabulary(p: &Program, rule: &Rule) -> std::result::Result<(), VocabError> {
    let mut atoms: Vec<&Atom> = rule.head.atoms();
    if let Head::Choice { elements, .. } = &rule.head {
        atoms.extend(elements.iter().flat_map(|e| &e.condition));
    }
    atoms.extend(&rule.pos);
    atoms.extend(&rule.neg);
    for a in &atoms {
        if a.predicate.starts_with(DOM_PREFIX) && a.args.len() == 1 {
            let sort = &a.predicate[DOM_PREFIX.len()..];
            if p.sort(sort).is_none() {
                return Err(VocabError::Sort(sort.to_string()));
            }
        }
    }
    if p.sorts.is_empty() {
        return Ok(());
    }
    let terms = atoms.iter().flat_map(|a| a.args.iter()).chain(rule.gamma.iter().flat_map(|g| [&g.lhs, &g.rhs]));
    for t in terms {
        if let Term::Const(v) = t {
            if p.sorts_containing(v).next().is_none() {
                return Err(VocabError::Message(format!("constant `{v}` belongs to no declared sort")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rule_with_relation() {
        let p = parse_program_str("d(X1,X2) :- a(X1,X2), X1 <= X2.").unwrap();
        let r = &p.rules[0];
        assert_eq!(r.head, Head::Atom(Atom::new("d", vec![Term::var("X1"), Term::var("X2")])));
        assert_eq!(r.pos, vec![Atom::new("a", vec![Term::var("X1"), Term::var("X2")])]);
        assert_eq!(r.gamma, vec![RelLit::new(Term::var("X1"), Rel::Le, Term::var("X2"))]);
    }

    #[test]
    fn parses_fact() {
        let p = parse_program_str("p.").unwrap();
        assert!(p.rules[0].is_fact());
        assert_eq!(p.rules[0].head, Head::Atom(Atom::new("p", vec![])));
    }

    #[test]
    fn parses_conditional_choice() {
        let p = parse_program_str("sort s {1..2}. 0 { a(X1,X2) : dom_s(X1) } 1 :- b(X2).").unwrap();
        match &p.rules[0].head {
            Head::Choice { lower: 0, upper: Some(1), elements } => {
                assert_eq!(elements.len(), 1);
                assert_eq!(elements[0].condition, vec![Atom::new("dom_s", vec![Term::var("X1")])]);
            }
            other => panic!("unexpected head {other:?}"),
        }
    }

    #[test]
    fn parses_declarations_and_offsets() {
        let p = parse_program_str(
            "sort time {0..1}. sort coord {1..2}. sig rAt(coord,coord,time). fluent rAt/3. action goTo/3.\n\
             rAt(X,Y,T+1) :- goTo(X,Y,T).",
        )
        .unwrap();
        assert_eq!(p.sorts.len(), 2);
        assert_eq!(p.fluents, vec![PredKey::new("rAt", 3)]);
        assert_eq!(p.actions, vec![PredKey::new("goTo", 3)]);
        assert_eq!(p.rules[0].head.atoms()[0].args[2], Term::Offset("T".into(), 1));
    }

    #[test]
    fn rejects_unsafe_rule_with_position() {
        match parse_program_str("a(1).\nb(X) :- not a(X).") {
            Err(Error::Unsafe { line, variable, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(variable, "X");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn equality_binds_variables() {
        assert!(parse_program_str("sort s {1}. e(X1) :- dom_s(X2), X1 < X2.").is_err());
        assert!(parse_program_str("sort s {1}. e(X1) :- dom_s(X2), X1 = X2.").is_ok());
        assert!(parse_program_str("e(X) :- X = 3.").is_ok());
    }

    #[test]
    fn rejects_undeclared_sort() {
        assert!(matches!(parse_program_str("sig p(s)."), Err(Error::UndeclaredSort { .. })));
        assert!(matches!(parse_program_str("sort s {1}. p(X) :- dom_q(X)."), Err(Error::UndeclaredSort { .. })));
    }

    #[test]
    fn rejects_constant_outside_sorts() {
        assert!(parse_program_str("sort s {1..3}. p(4).").is_err());
        assert!(parse_program_str("sort s {1..3}. p(3).").is_ok());
    }

    #[test]
    fn syntax_error_carries_location() {
        match parse_program_str("a :- b\nc.") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negated_relation_literal() {
        let p = parse_program_str("p(X) :- q(X), not X = 2.").unwrap();
        assert!(p.rules[0].gamma[0].negated);
    }
}
