//! Goal formulas over state atoms, and trajectory patterns.
//!
//! Formula syntax: ground atoms, `!`/`not`, `&`, `|`, parentheses, `true`,
//! `false`. A bare predicate name such as `caught` is a *designated atom*:
//! the goal holds when any atom of that predicate is in the state.

use serde::Serialize;

use crate::ast::{GroundAtom, Value};
use crate::error::{Error, Result};
use crate::policy::State;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Formula {
    True,
    False,
    Atom(GroundAtom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn holds(&self, s: &State) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => s.contains(a),
            Formula::Not(f) => !f.holds(s),
            Formula::And(fs) => fs.iter().all(|f| f.holds(s)),
            Formula::Or(fs) => fs.iter().any(|f| f.holds(s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Goal {
    /// Any atom of the named predicate.
    Designated(String),
    Formula(Formula),
}

impl Goal {
    pub fn holds(&self, s: &State) -> bool {
        match self {
            Goal::Designated(name) => s.iter().any(|a| a.predicate == *name),
            Goal::Formula(f) => f.holds(s),
        }
    }
}

/// Constraints on the first steps of a trajectory: state `i` must contain
/// `states[i]`, action `i` must equal `actions[i]` (when given).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Pattern {
    pub states: Vec<Vec<GroundAtom>>,
    pub actions: Vec<Option<GroundAtom>>,
}

impl Pattern {
    pub fn state_ok(&self, i: usize, s: &State) -> bool {
        self.states.get(i).is_none_or(|atoms| atoms.iter().all(|a| s.contains(a)))
    }

    pub fn action_ok(&self, i: usize, a: &GroundAtom) -> bool {
        match self.actions.get(i) {
            Some(Some(want)) => want == a,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Not,
    And,
    Or,
    Semi,
}

fn lex(text: &str) -> Result<Vec<Tok>> {
    let err = |m: String| Error::Syntax { origin: "<goal>".into(), line: 1, column: 1, message: m };
    let cs: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        match c {
            _ if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Tok::LParen);
                i += 1
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1
            }
            '!' => {
                out.push(Tok::Not);
                i += 1
            }
            '&' => {
                out.push(Tok::And);
                i += 1
            }
            '|' => {
                out.push(Tok::Or);
                i += 1
            }
            ';' => {
                out.push(Tok::Semi);
                i += 1
            }
            '-' if cs.get(i + 1) == Some(&'>') => {
                out.push(Tok::Semi);
                i += 2
            }
            _ if c.is_ascii_digit() || c == '-' => {
                let start = i;
                i += 1;
                while i < cs.len() && cs[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = cs[start..i].iter().collect();
                out.push(Tok::Int(s.parse().map_err(|_| err(format!("bad integer `{s}`")))?));
            }
            _ if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                    i += 1;
                }
                let s: String = cs[start..i].iter().collect();
                out.push(match s.as_str() {
                    "not" => Tok::Not,
                    _ => Tok::Ident(s),
                });
            }
            _ => return Err(err(format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

struct P {
    toks: Vec<Tok>,
    at: usize,
}

impl P {
    fn err(&self, m: &str) -> Error {
        Error::Syntax { origin: "<goal>".into(), line: 1, column: self.at + 1, message: m.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn atom(&mut self) -> Result<GroundAtom> {
        let Some(Tok::Ident(name)) = self.peek().cloned() else { return Err(self.err("expected an atom")) };
        self.at += 1;
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                match self.peek().cloned() {
                    Some(Tok::Int(i)) => args.push(Value::Int(i)),
                    Some(Tok::Ident(s)) => args.push(Value::sym(s)),
                    _ => return Err(self.err("expected a constant")),
                }
                self.at += 1;
                if self.eat(&Tok::RParen) {
                    break;
                }
                if !self.eat(&Tok::Comma) {
                    return Err(self.err("expected `,` or `)`"));
                }
            }
        }
        Ok(GroundAtom::new(name, args))
    }

    fn or(&mut self) -> Result<Formula> {
        let mut v = vec![self.and()?];
        while self.eat(&Tok::Or) {
            v.push(self.and()?);
        }
        Ok(if v.len() == 1 { v.pop().expect("one") } else { Formula::Or(v) })
    }

    fn and(&mut self) -> Result<Formula> {
        let mut v = vec![self.unary()?];
        while self.eat(&Tok::And) {
            v.push(self.unary()?);
        }
        Ok(if v.len() == 1 { v.pop().expect("one") } else { Formula::And(v) })
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.eat(&Tok::Not) {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.eat(&Tok::LParen) {
            let f = self.or()?;
            if !self.eat(&Tok::RParen) {
                return Err(self.err("expected `)`"));
            }
            return Ok(f);
        }
        match self.peek() {
            Some(Tok::Ident(s)) if s == "true" => {
                self.at += 1;
                Ok(Formula::True)
            }
            Some(Tok::Ident(s)) if s == "false" => {
                self.at += 1;
                Ok(Formula::False)
            }
            _ => Ok(Formula::Atom(self.atom()?)),
        }
    }
}

pub fn parse_goal(text: &str) -> Result<Goal> {
    let toks = lex(text)?;
    if let [Tok::Ident(name)] = toks.as_slice() {
        if name != "true" && name != "false" {
            return Ok(Goal::Designated(name.clone()));
        }
    }
    let mut p = P { toks, at: 0 };
    let f = p.or()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Ok(Goal::Formula(f))
}

/// `state ; action ; state ; …` where a state is `atom & atom …` or `_`
/// and an action is an atom or `_`. `->` may replace `;`.
pub fn parse_pattern(text: &str) -> Result<Pattern> {
    let mut p = P { toks: lex(text)?, at: 0 };
    let mut pat = Pattern::default();
    let mut state_turn = true;
    loop {
        let wildcard = matches!(p.peek(), Some(Tok::Ident(s)) if s == "_");
        if wildcard {
            p.at += 1;
        }
        if state_turn {
            let mut atoms = Vec::new();
            if !wildcard {
                atoms.push(p.atom()?);
                while p.eat(&Tok::And) {
                    atoms.push(p.atom()?);
                }
            }
            pat.states.push(atoms);
        } else {
            pat.actions.push(if wildcard { None } else { Some(p.atom()?) });
        }
        state_turn = !state_turn;
        if p.peek().is_none() {
            break;
        }
        if !p.eat(&Tok::Semi) {
            return Err(p.err("expected `;`"));
        }
    }
    Ok(pat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(atoms: &[GroundAtom]) -> State {
        atoms.iter().cloned().collect()
    }

    #[test]
    fn designated_atom() {
        let g = parse_goal("caught").unwrap();
        assert!(g.holds(&st(&[GroundAtom::new("caught", vec![])])));
        assert!(!g.holds(&st(&[GroundAtom::new("seen", vec![])])));
    }

    #[test]
    fn formula_precedence() {
        let g = parse_goal("rAt(1,1) & pAt(1,1) | not seen").unwrap();
        let ra = GroundAtom::new("rAt", vec![1.into(), 1.into()]);
        let pa = GroundAtom::new("pAt", vec![1.into(), 1.into()]);
        let seen = GroundAtom::new("seen", vec![]);
        assert!(g.holds(&st(&[])));
        assert!(!g.holds(&st(&[ra.clone(), seen.clone()])));
        assert!(g.holds(&st(&[ra, pa, seen])));
    }

    #[test]
    fn pattern_alternates() {
        let p = parse_pattern("rAt(1,1) -> goTo(1,1) -> _ -> _ -> rAt(2,1) & pAt(2,2)").unwrap();
        assert_eq!(p.states.len(), 3);
        assert_eq!(p.actions, [Some(GroundAtom::new("goTo", vec![1.into(), 1.into()])), None]);
        assert_eq!(p.states[2].len(), 2);
    }

    #[test]
    fn bad_goal() {
        assert!(parse_goal("a & (b").is_err());
        assert!(parse_goal("a b").is_err());
    }
}
