//! Mapping language:
//!
//! ```text
//! sort s {1..3};          % concrete domain (optional; defaults to the program's)
//! class d1 = {1};         % classes belong to the most recent `sort`
//! class dk = {2,3};
//! order d1 < dk;          % abstract order, default: declaration order
//! omit c/1;
//! ```
//!
//! Statements end with `;` or `.`.

use std::collections::BTreeSet;

use super::lexer::{Cursor, Tok};
use super::{parse_value, parse_value_set};
use crate::ast::{PredKey, Value};
use crate::error::Result;
use crate::mapping::{ClassDef, DomainMapping, SortMapping};

pub fn parse_mapping(text: &str, origin: &str) -> Result<DomainMapping> {
    let mut cur = Cursor::new(text, origin)?;
    let mut m = DomainMapping::default();
    let mut orders: Vec<Option<Vec<Value>>> = Vec::new();
    while !cur.at_eof() {
        let kw = cur.ident()?;
        match kw.as_str() {
            "sort" => {
                let sort = cur.ident()?;
                if m.sorts.iter().any(|s| s.sort == sort) {
                    return Err(cur.error(format!("sort `{sort}` mapped twice")));
                }
                let domain = if cur.eat(&Tok::LBrace) {
                    let v = parse_value_set(&mut cur)?;
                    cur.expect(&Tok::RBrace)?;
                    Some(v)
                } else {
                    None
                };
                m.sorts.push(SortMapping { sort, domain, classes: Vec::new() });
                orders.push(None);
            }
            "class" => {
                let name = parse_value(&mut cur)?;
                cur.expect(&Tok::Eq)?;
                cur.expect(&Tok::LBrace)?;
                let members = parse_value_set(&mut cur)?;
                cur.expect(&Tok::RBrace)?;
                let Some(sm) = m.sorts.last_mut() else {
                    return Err(cur.error("`class` before any `sort`"));
                };
                if members.is_empty() {
                    return Err(cur.error(format!("class `{name}` is empty")));
                }
                if sm.classes.iter().any(|c| c.name == name) {
                    return Err(cur.error(format!("class `{name}` declared twice in sort `{}`", sm.sort)));
                }
                for c in &sm.classes {
                    if let Some(v) = members.iter().find(|v| c.members.contains(v)) {
                        return Err(cur.error(format!("constant `{v}` assigned to both `{}` and `{name}`", c.name)));
                    }
                }
                sm.classes.push(ClassDef { name, members });
            }
            "order" => {
                let mut chain = vec![parse_value(&mut cur)?];
                while cur.eat(&Tok::Lt) {
                    chain.push(parse_value(&mut cur)?);
                }
                let Some(slot) = orders.last_mut() else {
                    return Err(cur.error("`order` before any `sort`"));
                };
                *slot = Some(chain);
            }
            "omit" => loop {
                let name = cur.ident()?;
                cur.expect(&Tok::Slash)?;
                let arity = cur.int()?;
                if arity < 0 {
                    return Err(cur.error("negative arity"));
                }
                let key = PredKey::new(name, arity as usize);
                if !m.omitted.contains(&key) {
                    m.omitted.push(key);
                }
                if !cur.eat(&Tok::Comma) {
                    break;
                }
            },
            other => return Err(cur.error(format!("unknown mapping statement `{other}`"))),
        }
        if !(cur.eat(&Tok::Semi) || cur.eat(&Tok::Dot)) {
            return Err(cur.error(format!("expected `;`, found {}", cur.peek().describe())));
        }
    }
    for (sm, order) in m.sorts.iter_mut().zip(orders) {
        if let Some(chain) = order {
            let names: BTreeSet<&Value> = sm.classes.iter().map(|c| &c.name).collect();
            let listed: BTreeSet<&Value> = chain.iter().collect();
            if listed.len() != chain.len() || listed != names {
                return Err(crate::error::Error::Mapping(format!(
                    "order for sort `{}` must list every class exactly once",
                    sm.sort
                )));
            }
            sm.classes.sort_by_key(|c| chain.iter().position(|n| *n == c.name));
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn parses_example_mapping() {
        let m =
            parse_mapping("sort s {1..3}; class d1 = {1}; class dk = {2,3}; order d1 < dk; omit c/1;", "t").unwrap();
        assert_eq!(m.sorts.len(), 1);
        assert_eq!(m.sorts[0].classes[1].members, vec![Value::Int(2), Value::Int(3)]);
        assert_eq!(m.omitted, vec![PredKey::new("c", 1)]);
    }

    #[test]
    fn order_reorders_classes() {
        let m = parse_mapping("sort s; class b = {2}; class a = {1}; order a < b;", "t").unwrap();
        assert_eq!(m.sorts[0].classes[0].name, Value::sym("a"));
    }

    #[test]
    fn rejects_overlap_and_duplicates() {
        assert!(parse_mapping("sort s; class a = {1,2}; class b = {2};", "t").is_err());
        assert!(parse_mapping("sort s; class a = {1}; class a = {2};", "t").is_err());
        assert!(matches!(parse_mapping("sort s; class a = {1}; class b = {2}; order a;", "t"), Err(Error::Mapping(_))));
    }

    #[test]
    fn integer_class_names() {
        let m = parse_mapping("sort coord {1..4}; class 1 = {1,2}; class 2 = {3,4}.", "t").unwrap();
        assert_eq!(m.sorts[0].classes[1].name, Value::Int(2));
    }
}
