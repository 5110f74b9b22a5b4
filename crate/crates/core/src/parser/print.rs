//! Canonical printer. `parse(print(p)) == p` for every parsed program.

use std::fmt::Write;

use crate::ast::{Head, Program, Rule, Value};
use crate::mapping::DomainMapping;

fn value_set(values: &[Value]) -> String {
    let ints: Option<Vec<i64>> = values.iter().map(Value::as_int).collect();
    if let Some(ints) = ints {
        if ints.len() >= 2 && ints.windows(2).all(|w| w[1] == w[0] + 1) {
            return format!("{{{}..{}}}", ints[0], ints[ints.len() - 1]);
        }
    }
    let items: Vec<String> = values.iter().map(ToString::to_string).collect();
    format!("{{{}}}", items.join(","))
}

pub fn print_rule(r: &Rule) -> String {
    let mut s = String::new();
    match &r.head {
        Head::Atom(a) => write!(s, "{a}").unwrap(),
        Head::Constraint => {}
        Head::Choice { lower, upper, elements } => {
            let elems: Vec<String> = elements
                .iter()
                .map(|e| {
                    if e.condition.is_empty() {
                        e.atom.to_string()
                    } else {
                        let c: Vec<String> = e.condition.iter().map(ToString::to_string).collect();
                        format!("{} : {}", e.atom, c.join(", "))
                    }
                })
                .collect();
            write!(s, "{lower} {{ {} }}", elems.join("; ")).unwrap();
            if let Some(u) = upper {
                write!(s, " {u}").unwrap();
            }
        }
    }
    let body: Vec<String> = r
        .pos
        .iter()
        .map(ToString::to_string)
        .chain(r.neg.iter().map(|a| format!("not {a}")))
        .chain(r.gamma.iter().map(ToString::to_string))
        .collect();
    if !body.is_empty() {
        if !s.is_empty() {
            s.push(' ');
        }
        s.push_str(":- ");
        s.push_str(&body.join(", "));
    }
    s.push('.');
    s
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for s in &p.sorts {
        writeln!(out, "sort {} {}.", s.name, value_set(&s.values)).unwrap();
    }
    for s in &p.signatures {
        writeln!(out, "sig {}({}).", s.predicate, s.sorts.join(",")).unwrap();
    }
    for k in &p.fluents {
        writeln!(out, "fluent {k}.").unwrap();
    }
    for k in &p.actions {
        writeln!(out, "action {k}.").unwrap();
    }
    for r in &p.rules {
        out.push_str(&print_rule(r));
        out.push('\n');
    }
    out
}

pub fn print_mapping(m: &DomainMapping) -> String {
    let mut out = String::new();
    for sm in &m.sorts {
        match &sm.domain {
            Some(d) => writeln!(out, "sort {} {};", sm.sort, value_set(d)).unwrap(),
            None => writeln!(out, "sort {};", sm.sort).unwrap(),
        }
        for c in &sm.classes {
            writeln!(out, "class {} = {};", c.name, value_set(&c.members)).unwrap();
        }
    }
    for k in &m.omitted {
        writeln!(out, "omit {k};").unwrap();
    }
    out
}
