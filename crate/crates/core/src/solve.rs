//! Answer-set enumeration for ground programs.
//!
//! Choice rules are rewritten into normal rules with complementary guess
//! atoms; the result is searched by DPLL over its Clark completion, and each
//! supported model is kept only if it equals the least model of its reduct.
//! [`is_answer_set`] checks the definition directly and serves as an oracle.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{Interpretation, Program};
use crate::error::{Error, Result};
use crate::ground::{ground, AtomId, GroundHead, GroundProgram};
use crate::Limits;

/// Normal rule over internal atom ids; `head == None` is a constraint.
#[derive(Debug, Clone)]
struct NRule {
    head: Option<usize>,
    pos: Vec<usize>,
    neg: Vec<usize>,
}

/// Rewrites choice heads. Atoms `>= gp.atom_count()` are internal.
fn normalize(gp: &GroundProgram) -> (usize, Vec<NRule>) {
    let mut next = gp.atom_count();
    let mut fresh = || {
        next += 1;
        next - 1
    };
    let mut complement: BTreeMap<AtomId, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for r in &gp.rules {
        match &r.head {
            GroundHead::Atom(h) => out.push(NRule { head: Some(*h), pos: r.pos.clone(), neg: r.neg.clone() }),
            GroundHead::Constraint => out.push(NRule { head: None, pos: r.pos.clone(), neg: r.neg.clone() }),
            GroundHead::Choice { lower, upper, elements } => {
                // element atom -> atom standing for "element counted"
                let mut sat: BTreeMap<AtomId, usize> = BTreeMap::new();
                let mut conds: BTreeMap<AtomId, Vec<&Vec<AtomId>>> = BTreeMap::new();
                for (e, cond) in elements {
                    conds.entry(*e).or_default().push(cond);
                    let ebar = *complement.entry(*e).or_insert_with(&mut fresh);
                    let mut pos = r.pos.clone();
                    pos.extend(cond);
                    let mut neg_e = r.neg.clone();
                    neg_e.push(ebar);
                    out.push(NRule { head: Some(*e), pos: pos.clone(), neg: neg_e });
                    let mut neg_bar = r.neg.clone();
                    neg_bar.push(*e);
                    out.push(NRule { head: Some(ebar), pos, neg: neg_bar });
                }
                for (e, cs) in &conds {
                    if cs.iter().any(|c| c.is_empty()) {
                        sat.insert(*e, *e);
                    } else {
                        let s = fresh();
                        for c in cs {
                            let mut pos = vec![*e];
                            pos.extend(c.iter());
                            out.push(NRule { head: Some(s), pos, neg: Vec::new() });
                        }
                        sat.insert(*e, s);
                    }
                }
                let sats: Vec<usize> = sat.values().copied().collect();
                if *lower >= 1 {
                    let mut neg = r.neg.clone();
                    neg.extend(&sats);
                    out.push(NRule { head: None, pos: r.pos.clone(), neg });
                }
                if upper.is_some_and(|u| u <= 1) {
                    for i in 0..sats.len() {
                        let lo = if upper == &Some(0) { i } else { i + 1 };
                        for j in lo..sats.len() {
                            let mut pos = r.pos.clone();
                            pos.push(sats[i]);
                            if j != i {
                                pos.push(sats[j]);
                            }
                            out.push(NRule { head: None, pos, neg: r.neg.clone() });
                        }
                    }
                }
            }
        }
    }
    (next, out)
}

type Lit = u32;

fn lit(v: usize, positive: bool) -> Lit {
    (v as u32) << 1 | (!positive) as u32
}

fn var(l: Lit) -> usize {
    (l >> 1) as usize
}

fn neg(l: Lit) -> Lit {
    l ^ 1
}

struct Dpll {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    /// 0 unassigned, 1 true, -1 false
    value: Vec<i8>,
    trail: Vec<Lit>,
    /// (trail length before the level, decision literal, already flipped)
    levels: Vec<(usize, Lit, bool)>,
    qhead: usize,
    units: Vec<Lit>,
    conflict_at_root: bool,
}

impl Dpll {
    fn new(nvars: usize) -> Self {
        Dpll {
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * nvars],
            value: vec![0; nvars],
            trail: Vec::new(),
            levels: Vec::new(),
            qhead: 0,
            units: Vec::new(),
            conflict_at_root: false,
        }
    }

    fn lit_value(&self, l: Lit) -> i8 {
        let v = self.value[var(l)];
        if l & 1 == 1 {
            -v
        } else {
            v
        }
    }

    fn add_clause(&mut self, mut c: Vec<Lit>) {
        c.sort_unstable();
        c.dedup();
        if c.windows(2).any(|w| w[0] == neg(w[1]) && var(w[0]) == var(w[1])) {
            return;
        }
        match c.len() {
            0 => self.conflict_at_root = true,
            1 => self.units.push(c[0]),
            _ => {
                let i = self.clauses.len();
                self.watches[c[0] as usize].push(i);
                self.watches[c[1] as usize].push(i);
                self.clauses.push(c);
            }
        }
    }

    fn assign(&mut self, l: Lit) -> bool {
        match self.lit_value(l) {
            1 => true,
            -1 => false,
            _ => {
                self.value[var(l)] = if l & 1 == 1 { -1 } else { 1 };
                self.trail.push(l);
                true
            }
        }
    }

    /// Returns `false` on conflict.
    fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let falsified = neg(self.trail[self.qhead]);
            self.qhead += 1;
            let mut ws = std::mem::take(&mut self.watches[falsified as usize]);
            let mut i = 0;
            let mut ok = true;
            while i < ws.len() {
                let ci = ws[i];
                let c = &mut self.clauses[ci];
                if c[0] == falsified {
                    c.swap(0, 1);
                }
                let other = c[0];
                let other_val = {
                    let v = self.value[var(other)];
                    if other & 1 == 1 {
                        -v
                    } else {
                        v
                    }
                };
                if other_val == 1 {
                    i += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..c.len() {
                    let l = c[k];
                    let v = self.value[var(l)];
                    let lv = if l & 1 == 1 { -v } else { v };
                    if lv != -1 {
                        c.swap(1, k);
                        let nw = c[1];
                        self.watches[nw as usize].push(ci);
                        ws.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                if other_val == -1 {
                    ok = false;
                    break;
                }
                self.assign(other);
                i += 1;
            }
            self.watches[falsified as usize] = ws;
            if !ok {
                return false;
            }
        }
        true
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let l = self.trail.pop().unwrap();
            self.value[var(l)] = 0;
        }
        self.qhead = self.qhead.min(len);
    }

    /// Chronological backtracking: flips the deepest unflipped decision.
    fn backtrack(&mut self) -> bool {
        while let Some((start, l, flipped)) = self.levels.pop() {
            self.undo_to(start);
            if !flipped {
                self.levels.push((start, neg(l), true));
                self.assign(neg(l));
                return true;
            }
        }
        false
    }

    fn decide(&mut self, l: Lit) {
        self.levels.push((self.trail.len(), l, false));
        self.assign(l);
    }
}

/// Search state for one ground program.
struct Search<'a> {
    gp: &'a GroundProgram,
    nrules: Vec<NRule>,
    natoms: usize,
    dpll: Dpll,
    limits: Limits,
}

impl<'a> Search<'a> {
    fn new(gp: &'a GroundProgram, limits: &Limits) -> Self {
        let (natoms, nrules) = normalize(gp);
        // body variables
        let mut bodies: BTreeMap<(Vec<usize>, Vec<usize>), usize> = BTreeMap::new();
        let mut rule_body = Vec::with_capacity(nrules.len());
        for r in &nrules {
            let mut pos = r.pos.clone();
            pos.sort_unstable();
            pos.dedup();
            let mut ng = r.neg.clone();
            ng.sort_unstable();
            ng.dedup();
            let n = natoms + bodies.len();
            let id = *bodies.entry((pos, ng)).or_insert(n);
            rule_body.push(id);
        }
        let nvars = natoms + bodies.len();
        let mut d = Dpll::new(nvars);
        for ((pos, ng), b) in &bodies {
            let mut long = vec![lit(*b, true)];
            for &p in pos {
                d.add_clause(vec![lit(*b, false), lit(p, true)]);
                long.push(lit(p, false));
            }
            for &n in ng {
                d.add_clause(vec![lit(*b, false), lit(n, false)]);
                long.push(lit(n, true));
            }
            d.add_clause(long);
        }
        let mut support: Vec<Vec<usize>> = vec![Vec::new(); natoms];
        for (r, &b) in nrules.iter().zip(&rule_body) {
            match r.head {
                Some(h) => {
                    d.add_clause(vec![lit(b, false), lit(h, true)]);
                    support[h].push(b);
                }
                None => d.add_clause(vec![lit(b, false)]),
            }
        }
        for (a, bs) in support.iter().enumerate() {
            let mut c = vec![lit(a, false)];
            c.extend(bs.iter().map(|&b| lit(b, true)));
            d.add_clause(c);
        }
        Search { gp, nrules, natoms, dpll: d, limits: *limits }
    }

    /// Least model of the reduct w.r.t. the current assignment equals it.
    fn stable(&self) -> bool {
        let truth = |a: usize| self.dpll.value[a] == 1;
        let active: Vec<&NRule> =
            self.nrules.iter().filter(|r| r.head.is_some() && r.neg.iter().all(|&n| !truth(n))).collect();
        let mut derived = vec![false; self.natoms];
        let mut missing: Vec<usize> = active.iter().map(|r| r.pos.len()).collect();
        let mut watch: Vec<Vec<usize>> = vec![Vec::new(); self.natoms];
        let mut queue = Vec::new();
        for (i, r) in active.iter().enumerate() {
            for &p in &r.pos {
                watch[p].push(i);
            }
            if r.pos.is_empty() {
                queue.push(r.head.unwrap());
            }
        }
        while let Some(a) = queue.pop() {
            if derived[a] {
                continue;
            }
            derived[a] = true;
            for &i in &watch[a] {
                missing[i] -= 1;
                if missing[i] == 0 {
                    queue.push(active[i].head.unwrap());
                }
            }
        }
        (0..self.natoms).all(|a| derived[a] == truth(a))
    }

    /// Calls `f` with the true original atoms of each answer set until it
    /// returns `false`.
    fn run(&mut self, assumptions: &[(AtomId, bool)], f: &mut dyn FnMut(Vec<AtomId>) -> bool) -> Result<()> {
        if self.dpll.conflict_at_root {
            return Ok(());
        }
        let units = std::mem::take(&mut self.dpll.units);
        for l in units.iter().copied().chain(assumptions.iter().map(|&(a, t)| lit(a, t))) {
            if !self.dpll.assign(l) {
                return Ok(());
            }
        }
        let mut nodes: u64 = 0;
        let mut next_var = 0usize;
        loop {
            if !self.dpll.propagate() {
                if !self.dpll.backtrack() {
                    return Ok(());
                }
                next_var = 0;
                continue;
            }
            while next_var < self.natoms && self.dpll.value[next_var] != 0 {
                next_var += 1;
            }
            nodes += 1;
            if nodes > self.limits.max_nodes {
                return Err(Error::Resource(format!("solver exceeded {} search nodes", self.limits.max_nodes)));
            }
            if next_var == self.natoms {
                // all atoms fixed; propagation has fixed every body variable
                if self.stable() {
                    let model = (0..self.gp.atom_count()).filter(|&a| self.dpll.value[a] == 1).collect();
                    if !f(model) {
                        return Ok(());
                    }
                }
                if !self.dpll.backtrack() {
                    return Ok(());
                }
                next_var = 0;
                continue;
            }
            self.dpll.decide(lit(next_var, false));
        }
    }
}

/// Enumerates answer sets of `gp` (as sets of atom ids) until `f` returns `false`.
pub fn enumerate(gp: &GroundProgram, limits: &Limits, mut f: impl FnMut(Vec<AtomId>) -> bool) -> Result<()> {
    Search::new(gp, limits).run(&[], &mut f)
}

fn to_interpretation(gp: &GroundProgram, ids: &[AtomId]) -> Interpretation {
    ids.iter().map(|&i| gp.atoms.atom(i).clone()).collect()
}

/// All answer sets with auxiliary atoms projected away, sorted and deduplicated.
pub fn ground_answer_sets(gp: &GroundProgram, limits: &Limits) -> Result<Vec<Interpretation>> {
    let mut out = BTreeSet::new();
    enumerate(gp, limits, |m| {
        out.insert(to_interpretation(gp, &m).projected());
        true
    })?;
    Ok(out.into_iter().collect())
}

pub fn answer_sets(p: &Program, limits: &Limits) -> Result<Vec<Interpretation>> {
    ground_answer_sets(&ground(p, limits)?, limits)
}

/// Whether some answer set, with auxiliary atoms projected away, equals `target`.
pub fn has_answer_set_projecting_to(gp: &GroundProgram, target: &Interpretation, limits: &Limits) -> Result<bool> {
    let mut assumptions = Vec::new();
    let mut found_ids = BTreeSet::new();
    for (i, a) in gp.atoms.iter().enumerate() {
        if a.is_auxiliary() {
            continue;
        }
        let t = target.contains(a);
        if t {
            found_ids.insert(i);
        }
        assumptions.push((i, t));
    }
    if found_ids.len() != target.iter().filter(|a| !a.is_auxiliary()).count() {
        return Ok(false);
    }
    let mut found = false;
    Search::new(gp, limits).run(&assumptions, &mut |_| {
        found = true;
        false
    })?;
    Ok(found)
}

/// Direct check of the answer-set definition (choice rules via their
/// reduct), independent of the search above.
pub fn is_answer_set(gp: &GroundProgram, model: &BTreeSet<AtomId>) -> bool {
    let t = |a: &AtomId| model.contains(a);
    let n = gp.atom_count();
    let mut reduct: Vec<(usize, Vec<AtomId>)> = Vec::new();
    for r in &gp.rules {
        let body = r.pos.iter().all(t) && !r.neg.iter().any(t);
        let neg_ok = !r.neg.iter().any(t);
        match &r.head {
            GroundHead::Atom(h) => {
                if body && !t(h) {
                    return false;
                }
                if neg_ok {
                    reduct.push((*h, r.pos.clone()));
                }
            }
            GroundHead::Constraint => {
                if body {
                    return false;
                }
            }
            GroundHead::Choice { lower, upper, elements } => {
                if body {
                    let count = elements
                        .iter()
                        .filter(|(e, c)| t(e) && c.iter().all(t))
                        .map(|(e, _)| *e)
                        .collect::<BTreeSet<_>>()
                        .len() as u32;
                    if count < *lower || upper.is_some_and(|u| count > u) {
                        return false;
                    }
                }
                if neg_ok {
                    for (e, c) in elements {
                        if t(e) {
                            let mut pos = r.pos.clone();
                            pos.extend(c);
                            reduct.push((*e, pos));
                        }
                    }
                }
            }
        }
    }
    let mut derived = vec![false; n];
    loop {
        let mut changed = false;
        for (h, pos) in &reduct {
            if !derived[*h] && pos.iter().all(|p| derived[*p]) {
                derived[*h] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).all(|a| derived[a] == t(&a))
}

/// Exhaustive subset enumeration; only for tiny programs (≤ 24 atoms).
pub fn brute_force_answer_sets(gp: &GroundProgram) -> Vec<Interpretation> {
    let n = gp.atom_count();
    assert!(n <= 24, "brute force limited to 24 atoms");
    let mut out = BTreeSet::new();
    for mask in 0u32..(1u32 << n) {
        let m: BTreeSet<AtomId> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if is_answer_set(gp, &m) {
            let ids: Vec<AtomId> = m.into_iter().collect();
            out.insert(to_interpretation(gp, &ids).projected());
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program_str;

    fn sets(text: &str) -> Vec<String> {
        answer_sets(&parse_program_str(text).unwrap(), &Limits::default())
            .unwrap()
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    fn agrees_with_oracle(text: &str) {
        let gp = ground(&parse_program_str(text).unwrap(), &Limits::default()).unwrap();
        assert_eq!(ground_answer_sets(&gp, &Limits::default()).unwrap(), brute_force_answer_sets(&gp), "{text}");
    }

    #[test]
    fn even_loop_has_two_answer_sets() {
        assert_eq!(sets("a :- not b. b :- not a."), ["{a}", "{b}"]);
    }

    #[test]
    fn odd_loop_has_none() {
        assert!(sets("a :- not a.").is_empty());
    }

    #[test]
    fn positive_loop_is_unfounded() {
        assert_eq!(sets("a :- b. b :- a."), ["{}"]);
        assert_eq!(sets("a :- b. b :- a. c :- not a."), ["{c}"]);
    }

    #[test]
    fn choice_bounds() {
        assert_eq!(sets("{ a; b }."), ["{}", "{a}", "{a, b}", "{b}"]);
        assert_eq!(sets("1 { a; b } 1."), ["{a}", "{b}"]);
        assert_eq!(sets("0 { a; b } 1."), ["{}", "{a}", "{b}"]);
        assert_eq!(sets("1 { a; b }."), ["{a}", "{a, b}", "{b}"]);
    }

    #[test]
    fn choice_with_conditions() {
        assert_eq!(sets("c(1). c(2). 1 { p(X) : c(X) } 1."), ["{c(1), c(2), p(1)}", "{c(1), c(2), p(2)}"]);
    }

    #[test]
    fn constraints_filter() {
        assert_eq!(sets("{ a; b }. :- a, b. :- not a, not b."), ["{a}", "{b}"]);
    }

    #[test]
    fn oracle_agreement_on_small_programs() {
        for t in [
            "a :- not b. b :- not a. c :- a. c :- b. :- c, not a.",
            "{ a }. b :- a. a :- b. c :- not b.",
            "p :- q. q :- p. { q }. r :- not p.",
            "1 { a; b; c } 1. d :- a. d :- c. :- not d.",
            "{ x }. y :- x. z :- y, not w. w :- not z.",
            "1 { a : b; c }. { b }.",
        ] {
            agrees_with_oracle(t);
        }
    }

    #[test]
    fn projection_query() {
        let gp = ground(&parse_program_str("{ a }. b :- a. c :- not a.").unwrap(), &Limits::default()).unwrap();
        let t = |s: &[&str]| s.iter().map(|n| crate::ast::GroundAtom::new(*n, vec![])).collect::<Interpretation>();
        let l = Limits::default();
        assert!(has_answer_set_projecting_to(&gp, &t(&["a", "b"]), &l).unwrap());
        assert!(has_answer_set_projecting_to(&gp, &t(&["c"]), &l).unwrap());
        assert!(!has_answer_set_projecting_to(&gp, &t(&["a"]), &l).unwrap());
        assert!(!has_answer_set_projecting_to(&gp, &t(&["z"]), &l).unwrap());
    }

    #[test]
    fn node_budget() {
        let mut text = String::from("sort s {1..30}. { p(X) : dom_s(X) }.");
        text.push('\n');
        let gp = ground(&parse_program_str(&text).unwrap(), &Limits::default()).unwrap();
        let r = enumerate(&gp, &Limits { max_nodes: 1000, ..Limits::default() }, |_| true);
        assert!(matches!(r, Err(Error::Resource(_))));
    }
}
